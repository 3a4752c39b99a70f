"""Empirical (state, edge) statistics of automaton runs.

A joint distribution over (state, edge) pairs is stored as a (|Q|, 2)
array indexed by (state, bit): the edge taken from q on bit b is
(q, b, delta(q, b)), so mass can never sit on an edge that does not
leave its state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import FsdimError, PreconditionError
from .machine import Machine, run
from .markov import FairChain, stationary
from .sequence import as_bits

DEFAULT_POINTS = 24
DEFAULT_RATIO = 2.0 / 3.0
DEFAULT_CLUSTER_TOL = 0.02
MAX_WORD = 16


@dataclass(frozen=True, eq=False)
class JointDistribution:
    mass: np.ndarray
    n: Optional[int] = None
    counts: Optional[np.ndarray] = None

    @classmethod
    def from_counts(cls, counts) -> "JointDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        n = int(counts.sum())
        if n <= 0:
            raise FsdimError("cannot normalize an empty count table")
        return cls(counts / n, n, counts)

    @property
    def marginal(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    @property
    def support(self) -> np.ndarray:
        return self.marginal > 0

    @property
    def conditional(self) -> np.ndarray:
        """Edge-given-state table; rows of zero-mass states are NaN."""
        q = self.marginal
        out = np.full(self.mass.shape, np.nan)
        pos = q > 0
        out[pos] = self.mass[pos] / q[pos, None]
        return out

    def l1(self, other: "JointDistribution") -> float:
        return float(np.abs(self.mass - other.mass).sum())

    def to_record(self, machine: Machine) -> dict:
        names = machine.names
        cond = self.conditional
        joint = {}
        table = self.counts if self.counts is not None else self.mass
        for q, b in zip(*np.nonzero(table)):
            key = f"{names[q]}:{b}→{names[machine.delta[q, b]]}"
            joint[key] = int(table[q, b]) if self.counts is not None else float(table[q, b])
        return {
            "n": self.n,
            "joint": joint,
            "marginal": {names[q]: float(v) for q, v in enumerate(self.marginal) if v > 0},
            "conditional": {
                names[q]: [float(cond[q, 0]), float(cond[q, 1])]
                for q in range(len(names)) if self.support[q]
            },
        }


def fair_joint(c: FairChain) -> JointDistribution:
    """Stationary joint of a fair chain: pi(q) / 2 on each out-edge."""
    pi = c.stationary if c.stationary is not None else stationary(c)
    return JointDistribution(np.repeat(pi[:, None] / 2.0, 2, axis=1))


@dataclass(frozen=True, eq=False)
class CheckpointTrace:
    machine: Machine
    checkpoints: tuple
    snapshots: tuple
    final_state_path_length: int

    @property
    def final(self) -> JointDistribution:
        return self.snapshots[-1]

    def tail(self) -> tuple:
        return self.snapshots[len(self.snapshots) // 2:]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(s.to_record(self.machine), ensure_ascii=False) + "\n" for s in self.snapshots
        )

    def to_csv(self) -> str:
        names = self.machine.names
        rows = ["n,state,bit,next,count,mass"]
        for s in self.snapshots:
            for q in range(len(names)):
                for b in (0, 1):
                    c = int(s.counts[q, b])
                    if c:
                        rows.append(f"{s.n},{names[q]},{b},{names[self.machine.delta[q, b]]},{c},{float(s.mass[q, b])!r}")
        return "\n".join(rows) + "\n"


def geometric_schedule(n: int, points: int = DEFAULT_POINTS, ratio: float = DEFAULT_RATIO) -> list:
    """Increasing checkpoints ceil(n * ratio**(points - i)), i = 1..points."""
    if n <= 0:
        return []
    out = sorted({max(1, math.ceil(n * ratio ** (points - i))) for i in range(1, points + 1)})
    out[-1] = n
    return out


def edge_codes(m: Machine, x) -> np.ndarray:
    """Edge index 2*q_i + x_i for every step i of the run."""
    bits = as_bits(x)
    states = run(m, bits)
    return 2 * states[:-1] + bits


def run_trace(m: Machine, x, checkpoints: Optional[Sequence[int]] = None) -> CheckpointTrace:
    """Exact count-based P_n at each checkpoint from a single run."""
    bits = as_bits(x)
    if checkpoints is None:
        checkpoints = geometric_schedule(bits.size)
    cps = [int(c) for c in checkpoints]
    if not cps:
        raise FsdimError("empty checkpoint list")
    if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] <= 0:
        raise FsdimError("checkpoints must be positive and strictly increasing")
    if cps[-1] > bits.size:
        raise PreconditionError(f"checkpoint {cps[-1]} exceeds sequence length {bits.size}")
    codes = edge_codes(m, bits[:cps[-1]])
    nedges = 2 * len(m)
    snaps = []
    total = np.zeros(nedges, dtype=np.int64)
    prev = 0
    for c in cps:
        total = total + np.bincount(codes[prev:c], minlength=nedges)
        prev = c
        snaps.append(JointDistribution.from_counts(total.reshape(-1, 2)))
    return CheckpointTrace(m, tuple(cps), tuple(snaps), cps[-1])


def cluster_set(trace: CheckpointTrace, tol: float = DEFAULT_CLUSTER_TOL) -> list:
    """Greedy L1 clustering of the tail snapshots, largest n first.

    A snapshot closer than ``tol`` to an existing representative is merged
    into it; the surviving representatives are pairwise at least ``tol``
    apart.  This is the finite-n stand-in for the set of limit points.
    """
    if tol <= 0:
        raise FsdimError("cluster tolerance must be positive")
    reps: list = []
    for snap in reversed(trace.tail()):
        if all(snap.l1(r) >= tol for r in reps):
            reps.append(snap)
    return reps


def state_gap(c: FairChain, trace: CheckpointTrace) -> float:
    """||Q_n - pi||_1 at the last checkpoint."""
    pi = c.stationary if c.stationary is not None else stationary(c)
    return float(np.abs(trace.final.marginal - pi).sum())


def word_codes(x, width: int) -> np.ndarray:
    """Integer codes of the sliding windows of the given width (MSB first)."""
    bits = as_bits(x).astype(np.int64)
    count = bits.size - width + 1
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    codes = np.zeros(count, dtype=np.int64)
    for j in range(width):
        codes = (codes << 1) | bits[j:j + count]
    return codes


def word_counts(x, width: int) -> np.ndarray:
    return np.bincount(word_codes(x, width), minlength=1 << width)


def word_min_frequency(x, n: int, width: int) -> float:
    """Smallest sliding-window frequency over all 2**width words in x[:n]."""
    if width > MAX_WORD:
        raise FsdimError(f"word length {width} exceeds {MAX_WORD}")
    if width < 1 or n < width:
        raise FsdimError(f"need 1 <= word length <= n, got length {width}, n={n}")
    bits = as_bits(x)
    if n > bits.size:
        raise PreconditionError(f"prefix length {n} exceeds sequence length {bits.size}")
    counts = word_counts(bits[:n], width)
    return float(counts.min() / (n - width + 1))
