"""Fair Markov chains induced by automata, and their stationary distributions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FsdimError, ReducibleChainError
from .machine import Machine, communication_classes, ergodic_analysis

COND_WARN = 1e12


@dataclass(frozen=True, eq=False)
class FairChain:
    machine: Machine
    stationary: Optional[np.ndarray] = None

    @property
    def names(self):
        return self.machine.names

    @property
    def edges(self):
        """Labeled edges (q, b, q') in state-major, bit-minor order."""
        d = self.machine.delta
        return [(q, b, int(d[q, b])) for q in range(len(self.machine)) for b in (0, 1)]

    @property
    def matrix(self) -> np.ndarray:
        nq = len(self.machine)
        p = np.zeros((nq, nq))
        rows = np.arange(nq)
        np.add.at(p, (rows, self.machine.delta[:, 0]), 0.5)
        np.add.at(p, (rows, self.machine.delta[:, 1]), 0.5)
        return p

    def __len__(self):
        return len(self.machine)


def induce_chain(m: Machine, with_stationary: bool = False) -> FairChain:
    """The fair chain of m: both out-edges of every state carry mass 1/2."""
    chain = FairChain(m)
    if with_stationary:
        chain = FairChain(m, stationary(chain))
    return chain


def _as_matrix(c) -> np.ndarray:
    if isinstance(c, FairChain):
        return c.matrix
    if isinstance(c, Machine):
        return induce_chain(c).matrix
    p = np.asarray(c, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise FsdimError(f"transition matrix must be square, got shape {p.shape}")
    return p


def _ergodic_set(p: np.ndarray) -> tuple:
    _, closed = communication_classes(p > 0)
    if len(closed) != 1:
        raise ReducibleChainError(f"chain has {len(closed)} ergodic sets, expected exactly one")
    return closed[0]


def _solve(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    a = np.eye(n) - p
    # pi (I - P) = 0 with the last equation replaced by sum(pi) = 1
    a[:, -1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    cond = np.linalg.cond(a)
    if cond > COND_WARN:
        warnings.warn(f"stationary solve is ill-conditioned (cond={cond:.3g})", RuntimeWarning)
    return np.linalg.solve(a.T, b)


def period(p: np.ndarray) -> int:
    """Period of an irreducible transition matrix (gcd of cycle lengths)."""
    n = p.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(p[u] > 0):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = math.gcd(g, int(level[u] + 1 - level[v]))
        frontier = nxt
    return g or 1


def _power(p: np.ndarray, tol: float = 1e-15, max_steps: int = 1 << 22) -> np.ndarray:
    n = p.shape[0]
    d = period(p)
    x = np.full(n, 1.0 / n)
    steps = 256
    done = 0
    while True:
        while done < steps - max(d, steps // 10 // d * d):
            x = x @ p
            done += 1
        # Cesaro average over the tail, window a whole number of periods
        window = max(d, (steps // 10) // d * d)
        acc = np.zeros(n)
        for _ in range(window):
            x = x @ p
            acc += x
            done += 1
        avg = acc / window
        if np.abs(avg @ p - avg).max() < tol or steps >= max_steps:
            return avg / avg.sum()
        steps *= 2


def stationary(c, method: str = "linear_solve") -> np.ndarray:
    """Stationary distribution; transient states get mass exactly 0.

    ``c`` may be a FairChain, a Machine or a row-stochastic matrix.  The
    solve is restricted to the unique ergodic set; more than one ergodic
    set raises ReducibleChainError.
    """
    p = _as_matrix(c)
    home = list(_ergodic_set(p))
    sub = p[np.ix_(home, home)]
    if method == "linear_solve":
        pi_sub = _solve(sub)
    elif method == "power_iteration":
        pi_sub = _power(sub)
    else:
        raise FsdimError(f"unknown stationary method {method!r}")
    pi_sub = np.clip(pi_sub, 0.0, None)
    pi = np.zeros(p.shape[0])
    pi[home] = pi_sub / pi_sub.sum()
    return pi


def stationary_sensitivity(p, p_prime) -> tuple:
    """(max entrywise |P - P'|, L1 distance of the stationary distributions)."""
    a, b = _as_matrix(p), _as_matrix(p_prime)
    if a.shape != b.shape:
        raise FsdimError(f"dimension mismatch: {a.shape} vs {b.shape}")
    dp = float(np.abs(a - b).max()) if a.size else 0.0
    dpi = float(np.abs(stationary(a) - stationary(b)).sum())
    return dp, dpi


def is_irreducible(m: Machine) -> bool:
    return ergodic_analysis(m).irreducible
