"""Entropy and divergence in bits, with 0 log 0 = 0 and 0 log(0/0) = 0."""

from __future__ import annotations

import math

import numpy as np

from .empirical import JointDistribution


def _probs(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64)


def _joint(mu) -> np.ndarray:
    return mu.mass if isinstance(mu, JointDistribution) else np.asarray(mu, dtype=np.float64)


def entropy(p) -> float:
    p = _probs(p)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def kl(p, q) -> float:
    """D(p || q) in bits; +inf when p puts mass outside the support of q."""
    p, q = _probs(p), _probs(q)
    on = p > 0
    if np.any(q[on] <= 0):
        return math.inf
    return float(max(0.0, (p[on] * np.log2(p[on] / q[on])).sum()))


def conditional_entropy(mu) -> float:
    """sum_q Q(q) H(E | Q = q) over states with positive marginal."""
    m = _joint(mu)
    marg = m.sum(axis=1)
    total = 0.0
    for q in np.flatnonzero(marg > 0):
        total += marg[q] * entropy(m[q] / marg[q])
    return float(total)


def conditional_kl(mu, nu) -> float:
    """sum_q Q_mu(q) D(mu(.|q) || nu(.|q))."""
    a, b = _joint(mu), _joint(nu)
    ma, mb = a.sum(axis=1), b.sum(axis=1)
    total = 0.0
    for q in np.flatnonzero(ma > 0):
        if mb[q] <= 0:
            return math.inf
        d = kl(a[q] / ma[q], b[q] / mb[q])
        if math.isinf(d):
            return math.inf
        total += ma[q] * d
    return float(total)


def pinsker_gap(p, q) -> tuple:
    """(||p - q||_1, sqrt(2 ln2 * D(p || q))); the first never exceeds the second."""
    p, q = _probs(p), _probs(q)
    l1 = float(np.abs(p - q).sum())
    return l1, math.sqrt(2.0 * math.log(2.0) * kl(p, q))


def divergence_from_fair(mu) -> float:
    """Conditional KL against the fair conditional 1/2, 1/2 on every state.

    Equals 1 - conditional_entropy(mu); unlike ``conditional_kl`` against a
    stationary joint it is defined on transient states as well.
    """
    m = _joint(mu)
    return conditional_kl(m, np.ones_like(m))
