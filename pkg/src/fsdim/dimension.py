"""Finite-state dimension estimates and finite-state martingales.

For a fair chain M and a sequence X, every limit point mu of the
empirical joints P_n has divergence 1 - H(E_mu | Q_mu) from the fair
conditionals.  Hence

    dim_FS(X) = inf over M, inf over mu  of H(E_mu | Q_mu)
    Dim_FS(X) = inf over M, sup over mu  of H(E_mu | Q_mu)

Here the outer infimum runs over a finite chain family and the limit
points are approximated by clustering tail checkpoints, so every value
reported is an upper bound on the true dimension.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .empirical import (
    DEFAULT_CLUSTER_TOL,
    DEFAULT_POINTS,
    JointDistribution,
    cluster_set,
    geometric_schedule,
    run_trace,
    word_codes,
)
from .errors import FsdimError, PreconditionError, ReducibleChainError
from .infotheory import conditional_entropy, entropy
from .machine import Machine, ergodic_analysis, load, run
from .markov import FairChain, induce_chain
from .sequence import as_bits

DEFAULT_FAMILY = "blocks:4+phase:2"
DEFAULT_PHASE_DEPTH = 2
MAX_BLOCK = 16


# --- chain families ----------------------------------------------------------

def block_chain(k: int) -> Machine:
    """State = last k bits read (all zeros at the start)."""
    size = 1 << k
    codes = np.arange(size)
    delta = np.stack([(codes << 1) & (size - 1), ((codes << 1) | 1) & (size - 1)], axis=1)
    names = tuple("s" + (format(c, f"0{k}b") if k else "") for c in range(size))
    return Machine(names, delta)


def phase_chain(d: int, k: int) -> Machine:
    """State = (position mod d, last k bits)."""
    if d < 1:
        raise FsdimError("phase period must be at least 1")
    size = 1 << k
    delta = np.empty((d * size, 2), dtype=np.int64)
    names = []
    for i in range(d):
        for c in range(size):
            for b in (0, 1):
                delta[i * size + c, b] = ((i + 1) % d) * size + (((c << 1) | b) & (size - 1))
            names.append(f"p{i}s" + (format(c, f"0{k}b") if k else ""))
    return Machine(tuple(names), delta)


def parse_family(spec: str) -> list:
    """Expand ``blocks:K``, ``phase:D[,K']`` and ``file:PATH`` terms joined by ``+``.

    Returns a list of (label, Machine) in a fixed order.
    """
    members = []
    seen = set()

    def add(label, machine_factory):
        if label not in seen:
            seen.add(label)
            members.append((label, machine_factory()))

    for term in spec.split("+"):
        term = term.strip()
        head, _, arg = term.partition(":")
        try:
            if head == "blocks":
                kmax = int(arg)
                if not 0 <= kmax <= MAX_BLOCK:
                    raise FsdimError(f"block depth must lie in [0, {MAX_BLOCK}]")
                for k in range(kmax + 1):
                    add(f"block(k={k})", lambda k=k: block_chain(k))
            elif head == "phase":
                parts = arg.split(",")
                dmax = int(parts[0])
                kmax = int(parts[1]) if len(parts) > 1 else DEFAULT_PHASE_DEPTH
                if dmax < 1 or not 0 <= kmax <= MAX_BLOCK:
                    raise FsdimError(f"bad phase term {term!r}")
                for d in range(2, dmax + 1):
                    for k in range(kmax + 1):
                        add(f"phase(d={d},k={k})", lambda d=d, k=k: phase_chain(d, k))
            elif head == "file" and arg:
                add(f"file:{arg}", lambda arg=arg: load(arg))
            else:
                raise FsdimError(f"unknown family term {term!r}")
        except ValueError:
            raise FsdimError(f"bad family term {term!r}") from None
    if not members:
        raise FsdimError("empty chain family")
    return members


def parse_schedule(spec: Optional[str], n: int) -> list:
    """``geometric:K`` (default K=24) or ``list:n1,n2,...``."""
    if spec is None:
        return geometric_schedule(n, DEFAULT_POINTS)
    head, _, arg = spec.partition(":")
    try:
        if head == "geometric":
            return geometric_schedule(n, int(arg) if arg else DEFAULT_POINTS)
        if head == "list":
            return sorted({int(v) for v in arg.split(",") if v.strip()})
    except ValueError:
        pass
    raise FsdimError(f"bad checkpoint schedule {spec!r}")


# --- per-chain and family estimates ------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainEstimate:
    label: str
    machine: Machine
    dim_upper: float
    strong_dim_upper: float
    clusters: tuple
    entropies: tuple

    @property
    def witness(self) -> JointDistribution:
        return self.clusters[int(np.argmin(self.entropies))]

    @property
    def strong_witness(self) -> JointDistribution:
        return self.clusters[int(np.argmax(self.entropies))]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "states": len(self.machine),
            "dim_upper": self.dim_upper,
            "strong_dim_upper": self.strong_dim_upper,
            "cluster_entropies": list(self.entropies),
        }


def _require_irreducible(m: Machine, label: str) -> None:
    if not ergodic_analysis(m).irreducible:
        raise ReducibleChainError(f"chain {label} is reducible")


def chain_dimension(c, x, n: Optional[int] = None, checkpoints=None,
                    tol: float = DEFAULT_CLUSTER_TOL, label: str = "chain") -> ChainEstimate:
    """Dimension upper bounds witnessed by one fair chain.

    dim_upper is the smallest conditional entropy over the clustered tail
    snapshots, strong_dim_upper the largest.
    """
    m = c.machine if isinstance(c, FairChain) else c
    _require_irreducible(m, label)
    bits = as_bits(x)
    n = bits.size if n is None else n
    if n > bits.size:
        raise PreconditionError(f"prefix length {n} exceeds sequence length {bits.size}")
    if n <= 0:
        raise PreconditionError("prefix length must be positive")
    cps = geometric_schedule(n) if checkpoints is None else [c for c in checkpoints if c <= n]
    trace = run_trace(m, bits[:n], cps)
    clusters = tuple(cluster_set(trace, tol))
    ents = tuple(conditional_entropy(mu) for mu in clusters)
    return ChainEstimate(label, m, min(ents), max(ents), clusters, ents)


@dataclass(frozen=True, eq=False)
class DimensionReport:
    dim_est: float
    strong_dim_est: float
    witness_chain: str
    witness_cluster: JointDistribution
    strong_witness_chain: str
    per_chain: tuple
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        witness = next(e for e in self.per_chain if e.label == self.witness_chain)
        return {
            "dim_est": self.dim_est,
            "strong_dim_est": self.strong_dim_est,
            "witness_chain": self.witness_chain,
            "witness_cluster": self.witness_cluster.to_record(witness.machine),
            "strong_witness_chain": self.strong_witness_chain,
            "per_chain": [e.to_dict() for e in self.per_chain],
            "diagnostics": self.diagnostics,
        }


def _workers(requested, count):
    if requested is not None:
        return max(1, requested)
    return max(1, min(count, os.cpu_count() or 1, 4))


def family_dimension(x, n: Optional[int] = None, family=DEFAULT_FAMILY, checkpoints=None,
                     tol: float = DEFAULT_CLUSTER_TOL, workers: Optional[int] = None) -> DimensionReport:
    """Minimum of the per-chain bounds over a finite family of fair chains.

    ``family`` is a family string or a list of (label, Machine).
    Members are evaluated concurrently and folded in family order.
    """
    members = parse_family(family) if isinstance(family, str) else list(family)
    if not members:
        raise FsdimError("empty chain family")
    for label, m in members:
        _require_irreducible(m, label)
    bits = as_bits(x)
    n = bits.size if n is None else n
    cps = geometric_schedule(n) if checkpoints is None else list(checkpoints)

    def job(member):
        label, m = member
        return chain_dimension(m, bits, n, cps, tol, label)

    nworkers = _workers(workers, len(members))
    if nworkers > 1:
        with ThreadPoolExecutor(nworkers) as pool:
            estimates = list(pool.map(job, members))
    else:
        estimates = [job(mem) for mem in members]

    best = min(range(len(estimates)), key=lambda i: estimates[i].dim_upper)
    strong = min(range(len(estimates)), key=lambda i: estimates[i].strong_dim_upper)
    diagnostics = {
        "estimate_kind": "dim_upper_bound",
        "n": n,
        "family": family if isinstance(family, str) else [lab for lab, _ in members],
        "checkpoints": [int(c) for c in cps if c <= n],
        "schedule": "custom" if checkpoints is not None else f"geometric:{DEFAULT_POINTS}",
        "cluster_tol": tol,
    }
    return DimensionReport(
        estimates[best].dim_upper,
        estimates[strong].strong_dim_upper,
        estimates[best].label,
        estimates[best].witness,
        estimates[strong].label,
        tuple(estimates),
        diagnostics,
    )


def block_entropy_dimension(x, n: Optional[int] = None, max_block: int = 8, checkpoints=None) -> tuple:
    """Sliding-block entropy estimate (dim_est, strong_dim_est).

    dim_est = min over k <= max_block of H_k / k at prefix n, where H_k is
    the entropy of the empirical sliding k-block distribution; the strong
    estimate is the largest such value over the tail checkpoints.
    """
    if not 1 <= max_block <= MAX_BLOCK:
        raise FsdimError(f"block length must lie in [1, {MAX_BLOCK}]")
    bits = as_bits(x)
    n = bits.size if n is None else n
    if n > bits.size:
        raise PreconditionError(f"prefix length {n} exceeds sequence length {bits.size}")
    cps = geometric_schedule(n) if checkpoints is None else [c for c in checkpoints if c <= n]
    tail = cps[len(cps) // 2:]
    codes = {k: word_codes(bits[:n], k) for k in range(1, max_block + 1)}

    def rate(m):
        vals = []
        for k in range(1, min(max_block, m) + 1):
            counts = np.bincount(codes[k][:m - k + 1], minlength=1 << k)
            vals.append(entropy(counts / counts.sum()) / k)
        return min(vals) if vals else 0.0

    dim = rate(n)
    strong = max([dim] + [rate(m) for m in tail])
    return dim, strong


# --- martingales --------------------------------------------------------------

def witness_martingale(c, mu: JointDistribution) -> Machine:
    """Bettor on c's transition structure that bets mu's conditional on 0.

    States that mu never visits bet 1/2.
    """
    m = c.machine if isinstance(c, FairChain) else c
    mass = mu.mass if isinstance(mu, JointDistribution) else np.asarray(mu, dtype=np.float64)
    if mass.shape != (len(m), 2):
        raise FsdimError(f"joint has shape {mass.shape}, chain needs ({len(m)}, 2)")
    marg = mass.sum(axis=1)
    beta = np.full(len(m), 0.5)
    pos = marg > 0
    beta[pos] = mass[pos, 0] / marg[pos]
    return Machine(m.names, m.delta, m.start, m.selecting, beta)


@dataclass(frozen=True, eq=False)
class CapitalTrace:
    log2_capital: np.ndarray
    machine: Machine

    @property
    def final(self) -> float:
        return float(self.log2_capital[-1])

    def __len__(self):
        return len(self.log2_capital)


def log2_increments(m: Machine, x) -> np.ndarray:
    """Per-step log2 capital factors: log2(2 beta) on 0, log2(2 (1 - beta)) on 1."""
    if m.betting is None:
        raise FsdimError("machine has no betting map")
    bits = as_bits(x)
    states = run(m, bits)[:-1]
    beta = m.betting[states]
    stake = np.where(bits == 0, beta, 1.0 - beta)
    with np.errstate(divide="ignore"):
        return 1.0 + np.log2(stake)


def run_martingale(m: Machine, x) -> CapitalTrace:
    """log2 capital after each prefix; -inf once an all-in bet is lost."""
    inc = log2_increments(m, x)
    trace = np.empty(inc.size + 1)
    trace[0] = 0.0
    np.cumsum(inc, out=trace[1:])
    return CapitalTrace(trace, m)


@dataclass(frozen=True, eq=False)
class MultiAccount:
    traces: tuple
    best: CapitalTrace
    best_index: int
    total: np.ndarray


def multi_account_run(machines: Sequence[Machine], x) -> MultiAccount:
    """Run N accounts with initial capital 1/N each.

    Account traces include the -log2 N offset.  ``best`` is the pointwise
    maximum over accounts, ``best_index`` the account with the largest
    final capital, and ``total`` the log2 capital of the combined gambler.
    """
    if not machines:
        raise FsdimError("need at least one account")
    offset = math.log2(len(machines))
    traces = tuple(
        CapitalTrace(run_martingale(m, x).log2_capital - offset, m) for m in machines
    )
    stack = np.stack([t.log2_capital for t in traces])
    best_index = int(np.argmax(stack[:, -1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        total = np.logaddexp2.reduce(stack, axis=0)
    return MultiAccount(traces, CapitalTrace(stack.max(axis=0), machines[best_index]), best_index, total)
