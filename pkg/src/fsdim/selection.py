"""Finite-state selection and the dimension inequality for selected subsequences.

A selector outputs x_i whenever the state q_i it occupies before reading
x_i is selecting.  For an irreducible selector with stationary selecting
mass lam in (0, 1) and a sufficiently random X,

    lam * dim(S(X)) + (1 - lam) * Dim(S^c(X))  >=  dim(X) - eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dimension import DEFAULT_FAMILY, family_dimension, parse_family
from .empirical import DEFAULT_CLUSTER_TOL, run_trace, state_gap
from .errors import FsdimError, PreconditionError, ReducibleChainError
from .machine import Machine, ergodic_analysis, run
from .markov import induce_chain, stationary
from .sequence import as_bits

TIGHT_TOL = 0.05
_DEGENERATE = 1e-12


@dataclass(frozen=True, eq=False)
class Selection:
    selected: np.ndarray
    complement: np.ndarray
    positions: np.ndarray
    complement_positions: np.ndarray


def _selecting_mask(s: Machine) -> np.ndarray:
    if s.selecting is None:
        raise FsdimError("machine has no selecting set")
    mask = np.zeros(len(s), dtype=bool)
    mask[list(s.selecting)] = True
    return mask


def apply_selector(s: Machine, x) -> Selection:
    bits = as_bits(x)
    states = run(s, bits)[:-1]
    chosen = _selecting_mask(s)[states]
    pos = np.flatnonzero(chosen)
    cpos = np.flatnonzero(~chosen)
    return Selection(bits[pos], bits[cpos], pos, cpos)


def lambda_of(s: Machine) -> float:
    """Stationary mass of the selecting states."""
    mask = _selecting_mask(s)
    if not ergodic_analysis(s).irreducible:
        raise ReducibleChainError("selector is reducible")
    return float(stationary(induce_chain(s))[mask].sum())


def ap_selector(d: int, j: int) -> Machine:
    """d-cycle selecting positions j, j + d, j + 2d, ..."""
    if d < 1 or not 0 <= j < d:
        raise FsdimError(f"need d >= 1 and 0 <= j < d, got d={d}, j={j}")
    nxt = (np.arange(d) + 1) % d
    return Machine(tuple(f"r{i}" for i in range(d)), np.stack([nxt, nxt], axis=1), 0, {j})


def combine_selector_martingale(s: Machine, g1: Machine, g2: Machine) -> Machine:
    """Bettor that uses g1 while s selects and g2 otherwise.

    States are triples (selector, g1, g2); only the account that bet
    advances on each bit, so the log capital splits exactly into g1 on
    the selected bits plus g2 on the rest.
    """
    if g1.betting is None or g2.betting is None:
        raise FsdimError("both accounts need a betting map")
    sel = _selecting_mask(s)
    ns, n1, n2 = len(s), len(g1), len(g2)
    qs, q1, q2 = np.meshgrid(np.arange(ns), np.arange(n1), np.arange(n2), indexing="ij")
    qs, q1, q2 = qs.ravel(), q1.ravel(), q2.ravel()

    def code(a, b, c):
        return (a * n1 + b) * n2 + c

    on = sel[qs]
    delta = np.empty((qs.size, 2), dtype=np.int64)
    for bit in (0, 1):
        ns_ = s.delta[qs, bit]
        n1_ = np.where(on, g1.delta[q1, bit], q1)
        n2_ = np.where(on, q2, g2.delta[q2, bit])
        delta[:, bit] = code(ns_, n1_, n2_)
    beta = np.where(on, g1.betting[q1], g2.betting[q2])
    names = tuple(f"{s.names[a]}|{g1.names[b]}|{g2.names[c]}" for a, b, c in zip(qs, q1, q2))
    return Machine(names, delta, int(code(s.start, g1.start, g2.start)), None, beta)


@dataclass(frozen=True, eq=False)
class AgafonovReport:
    lam: float
    dim_selected: float
    strong_dim_complement: float
    dim_input: float
    verdict: str
    gap: float
    selected_length: int
    complement_length: int
    state_gap: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return self.lam * self.dim_selected + (1.0 - self.lam) * self.strong_dim_complement

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dim_selected": self.dim_selected,
            "strong_dim_complement": self.strong_dim_complement,
            "lhs": self.lhs,
            "dim_input": self.dim_input,
            "verdict": self.verdict,
            "gap": self.gap,
            "selected_length": self.selected_length,
            "complement_length": self.complement_length,
            "state_gap": self.state_gap,
            "diagnostics": self.diagnostics,
        }


def classify(lhs: float, dim_input: float, tight_tol: float = TIGHT_TOL,
             epsilon: Optional[float] = None) -> tuple:
    """Verdict and signed gap lhs - dim_input.

    tight: |gap| <= tight_tol; strict: gap > tight_tol;
    holds_within: -epsilon <= gap < -tight_tol; otherwise fails_by.
    """
    gap = lhs - dim_input
    if abs(gap) <= tight_tol:
        return "tight", gap
    if gap > 0:
        return "strict", gap
    if epsilon is not None and gap >= -epsilon:
        return "holds_within", gap
    return "fails_by", gap


def _subsequence_dims(bits, family, tol, workers):
    """(dim_est, strong_dim_est, report-or-None) on a subsequence's own length."""
    if bits.size == 0:
        # a finite selection has dimension 0
        return 0.0, 0.0, None
    rep = family_dimension(bits, bits.size, family, tol=tol, workers=workers)
    return rep.dim_est, rep.strong_dim_est, rep


def _check_lambda(lam):
    if lam < _DEGENERATE or lam > 1 - _DEGENERATE:
        raise PreconditionError(
            f"degenerate selector (lambda={lam:g}): some but not all ergodic states must select"
        )


def agafonov_report(s: Machine, x, n: Optional[int] = None, family=DEFAULT_FAMILY,
                    tol: float = DEFAULT_CLUSTER_TOL, tight_tol: float = TIGHT_TOL,
                    epsilon: Optional[float] = None, workers: Optional[int] = None,
                    lift: bool = True) -> AgafonovReport:
    """Estimate both sides of the selection inequality on x[:n].

    With ``lift`` the input's chain family also contains the lifts of every
    member through s (on either side), so a pattern the family detects in a
    subsequence is also visible to the estimate for x.
    """
    lam = lambda_of(s)
    _check_lambda(lam)
    bits = as_bits(x)
    n = bits.size if n is None else n
    if n > bits.size:
        raise PreconditionError(f"prefix length {n} exceeds sequence length {bits.size}")
    bits = bits[:n]
    sel = apply_selector(s, bits)
    input_family = lifted_family(s, family, ("selected", "complement")) if lift else family
    dim_input = family_dimension(bits, n, input_family, tol=tol, workers=workers)
    dim_sel, _, rep_sel = _subsequence_dims(sel.selected, family, tol, workers)
    _, strong_comp, rep_comp = _subsequence_dims(sel.complement, family, tol, workers)
    lhs = lam * dim_sel + (1.0 - lam) * strong_comp
    verdict, gap = classify(lhs, dim_input.dim_est, tight_tol, epsilon)
    chain = induce_chain(s)
    gap_states = state_gap(chain, run_trace(s, bits, [n]))
    diagnostics = {
        "n": n,
        "family": family if isinstance(family, str) else "custom",
        "cluster_tol": tol,
        "tight_tol": tight_tol,
        "epsilon": epsilon,
        "lifted": lift,
        "input_witness": dim_input.witness_chain,
        "selected_witness": rep_sel.witness_chain if rep_sel else None,
        "complement_witness": rep_comp.strong_witness_chain if rep_comp else None,
        "estimate_kind": "dim_upper_bound",
    }
    return AgafonovReport(lam, dim_sel, strong_comp, dim_input.dim_est, verdict, gap,
                          int(sel.selected.size), int(sel.complement.size), gap_states, diagnostics)


@dataclass(frozen=True)
class LowerBound:
    bound: float
    measured: float
    lam: float
    dim_input: float
    state_gap: float

    def to_dict(self) -> dict:
        return {"bound": self.bound, "measured": self.measured, "lambda": self.lam,
                "dim_input": self.dim_input, "state_gap": self.state_gap}


def selection_lower_bound(s: Machine, x, n: Optional[int] = None, family=DEFAULT_FAMILY,
                          tol: float = DEFAULT_CLUSTER_TOL, workers: Optional[int] = None,
                          lift: bool = True) -> LowerBound:
    """bound = (dim(X) - (1 - lam)) / lam against the measured dim of S(X).

    The bound presumes the empirical state distribution converges to the
    stationary one; ``state_gap`` reports how far the run is from that.
    """
    lam = lambda_of(s)
    if lam < _DEGENERATE:
        raise PreconditionError("selector never selects in its ergodic set")
    bits = as_bits(x)
    n = bits.size if n is None else n
    bits = bits[:n]
    input_family = lifted_family(s, family) if lift else family
    dim_x = family_dimension(bits, n, input_family, tol=tol, workers=workers).dim_est
    sel = apply_selector(s, bits)
    measured, _, _ = _subsequence_dims(sel.selected, family, tol, workers)
    gap_states = state_gap(induce_chain(s), run_trace(s, bits, [n]))
    bound = (dim_x - (1.0 - lam)) / lam
    return LowerBound(bound, measured, lam, dim_x, gap_states)


def lifted_chain(s: Machine, chain: Machine, on_selected: bool = True) -> Machine:
    """Chain on X that follows s and advances ``chain`` only on selected bits.

    With ``on_selected=False`` the chain advances on the complement instead.
    Its conditional entropy on X mixes the chain's entropy on the
    subsequence with that of the other positions, which is how a gambler
    on S(X) becomes a gambler on X.
    """
    sel = _selecting_mask(s)
    if not on_selected:
        sel = ~sel
    ns, nc = len(s), len(chain)
    qs, qc = np.meshgrid(np.arange(ns), np.arange(nc), indexing="ij")
    qs, qc = qs.ravel(), qc.ravel()
    delta = np.empty((qs.size, 2), dtype=np.int64)
    for bit in (0, 1):
        delta[:, bit] = s.delta[qs, bit] * nc + np.where(sel[qs], chain.delta[qc, bit], qc)
    names = tuple(f"{s.names[a]}|{chain.names[b]}" for a, b in zip(qs, qc))
    return Machine(names, delta, int(s.start * nc + chain.start))


def lifted_family(s: Machine, family, sides=("selected",)) -> list:
    """``family`` plus every irreducible lift of its members through s."""
    members = parse_family(family) if isinstance(family, str) else list(family)
    out = list(members)
    for side in sides:
        tag = "sel" if side == "selected" else "comp"
        for label, m in members:
            lifted = lifted_chain(s, m, side == "selected")
            if ergodic_analysis(lifted).irreducible:
                out.append((f"lift[{tag}]({label})", lifted))
    return out
