"""Deterministic binary automata, selectors and finite-state martingales.

A :class:`Machine` is a total transition table over the alphabet {0, 1}
with an optional set of selecting states and an optional betting map.
The betting value of a state is the fraction of capital placed on the
next bit being 0; the remainder goes on 1.

Text format, one declaration per line (``#`` starts a comment)::

    states: a b c d
    start: a
    trans: a 0 b
    trans: a 1 b
    ...
    select: a c          # optional
    bet: a 0.5           # optional, one line per state; "p/q" allowed
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import FsdimError, MachineSpecError, PreconditionError
from .sequence import as_bits

# byte-table simulation is used once the input is long relative to |Q|
_TABLE_MAX_STATES = 4096


@dataclass(frozen=True, eq=False)
class Machine:
    names: tuple
    delta: np.ndarray
    start: int = 0
    selecting: Optional[frozenset] = None
    betting: Optional[np.ndarray] = None
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise FsdimError("duplicate state names")
        delta = np.asarray(self.delta, dtype=np.int64)
        if delta.shape != (len(names), 2):
            raise FsdimError(f"transition table must have shape ({len(names)}, 2), got {delta.shape}")
        if delta.size and (delta.min() < 0 or delta.max() >= len(names)):
            raise FsdimError("transition target out of range")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        if not 0 <= self.start < len(names):
            raise FsdimError("start state out of range")
        if self.selecting is not None:
            sel = frozenset(int(q) for q in self.selecting)
            if any(not 0 <= q < len(names) for q in sel):
                raise FsdimError("selecting state out of range")
            object.__setattr__(self, "selecting", sel)
        if self.betting is not None:
            beta = np.asarray(self.betting, dtype=np.float64)
            if beta.shape != (len(names),):
                raise FsdimError("betting map must give one value per state")
            if np.any(~np.isfinite(beta)) or np.any(beta < 0) or np.any(beta > 1):
                raise FsdimError("betting values must lie in [0, 1]")
            beta.setflags(write=False)
            object.__setattr__(self, "betting", beta)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise FsdimError(f"unknown state {name!r}") from None

    def with_selecting(self, states: Iterable) -> "Machine":
        """Copy with the given selecting set (names or indices)."""
        sel = frozenset(self.index(q) if isinstance(q, str) else int(q) for q in states)
        return Machine(self.names, self.delta, self.start, sel, self.betting)

    def with_betting(self, betting) -> "Machine":
        return Machine(self.names, self.delta, self.start, self.selecting, betting)

    def complement(self) -> "Machine":
        """The complementary selector (selecting Q minus S)."""
        if self.selecting is None:
            raise FsdimError("machine has no selecting set")
        return self.with_selecting(set(range(len(self))) - self.selecting)

    def to_spec(self) -> str:
        lines = [f"states: {' '.join(self.names)}", f"start: {self.names[self.start]}"]
        for q, name in enumerate(self.names):
            for b in (0, 1):
                lines.append(f"trans: {name} {b} {self.names[self.delta[q, b]]}")
        if self.selecting is not None:
            lines.append("select: " + " ".join(self.names[q] for q in sorted(self.selecting)))
        if self.betting is not None:
            lines.extend(f"bet: {name} {float(self.betting[q])!r}" for q, name in enumerate(self.names))
        return "\n".join(lines) + "\n"

    def _byte_tables(self):
        if "path" not in self._tables:
            nq = len(self)
            byte = np.arange(256)
            cur = np.broadcast_to(np.arange(nq)[:, None], (nq, 256))
            path = np.empty((nq, 256, 8), dtype=np.int64)
            for j in range(8):
                bit = (byte >> (7 - j)) & 1
                cur = self.delta[cur, bit[None, :]]
                path[:, :, j] = cur
            self._tables["path"] = path
            self._tables["last"] = path[:, :, 7].tolist()
        return self._tables["path"], self._tables["last"]


def run(m: Machine, x) -> np.ndarray:
    """State path q_0, ..., q_n of m on the bits x (length n + 1)."""
    bits = as_bits(x)
    n = bits.size
    states = np.empty(n + 1, dtype=np.int64)
    states[0] = m.start
    if n == 0:
        return states
    if len(m) > _TABLE_MAX_STATES or n < 16 * len(m):
        delta = m.delta.tolist()
        q = m.start
        for i, b in enumerate(bits.tolist()):
            q = delta[q][b]
            states[i + 1] = q
        return states
    path, last = m._byte_tables()
    nbytes = -(-n // 8)
    padded = np.zeros(nbytes * 8, dtype=np.uint8)
    padded[:n] = bits
    packed = np.packbits(padded)
    starts = np.empty(nbytes, dtype=np.int64)
    q = m.start
    for i, byte in enumerate(packed.tolist()):
        starts[i] = q
        q = last[q][byte]
    states[1:] = path[starts, packed].reshape(-1)[:n]
    return states


def final_state(m: Machine, x) -> int:
    return int(run(m, x)[-1])


# --- parsing ---------------------------------------------------------------

def _parse_bet(token: str, lineno: int) -> float:
    try:
        value = float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        raise MachineSpecError(f"bad betting value {token!r}", lineno) from None
    if not 0.0 <= value <= 1.0:
        raise MachineSpecError(f"betting value {token} outside [0, 1]", lineno)
    return value


def parse_spec(text: str) -> Machine:
    """Parse the line-oriented machine format into a validated Machine."""
    names: list = []
    index: dict = {}
    start = None
    trans: dict = {}
    selecting = None
    bets: dict = {}
    states_line = None

    def lookup(name, lineno):
        if name not in index:
            raise MachineSpecError(f"unknown state {name!r}", lineno)
        return index[name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise MachineSpecError(f"expected 'key: value', got {line!r}", lineno)
        key = key.strip()
        args = rest.split()
        if key == "states":
            states_line = states_line or lineno
            for name in args:
                if name in index:
                    raise MachineSpecError(f"duplicate state {name!r}", lineno)
                index[name] = len(names)
                names.append(name)
        elif key == "start":
            if len(args) != 1:
                raise MachineSpecError("start takes one state", lineno)
            start = lookup(args[0], lineno)
        elif key == "trans":
            if len(args) != 3 or args[1] not in ("0", "1"):
                raise MachineSpecError("trans expects: SOURCE BIT TARGET", lineno)
            src, dst = lookup(args[0], lineno), lookup(args[2], lineno)
            k = (src, int(args[1]))
            if k in trans and trans[k] != dst:
                raise MachineSpecError(f"conflicting transition for {args[0]} {args[1]}", lineno)
            trans[k] = dst
        elif key == "select":
            selecting = (selecting or set()) | {lookup(a, lineno) for a in args}
        elif key == "bet":
            if len(args) != 2:
                raise MachineSpecError("bet expects: STATE VALUE", lineno)
            q = lookup(args[0], lineno)
            if q in bets:
                raise MachineSpecError(f"duplicate bet for {args[0]!r}", lineno)
            bets[q] = _parse_bet(args[1], lineno)
        else:
            raise MachineSpecError(f"unknown declaration {key!r}", lineno)

    nlines = len(text.splitlines())
    if not names:
        raise MachineSpecError("no states declared", nlines)
    delta = np.empty((len(names), 2), dtype=np.int64)
    for q, name in enumerate(names):
        for b in (0, 1):
            if (q, b) not in trans:
                raise MachineSpecError(f"missing transition for {name} {b}", states_line)
            delta[q, b] = trans[(q, b)]
    betting = None
    if bets:
        missing = [names[q] for q in range(len(names)) if q not in bets]
        if missing:
            raise MachineSpecError(f"missing bet for {' '.join(missing)}", states_line)
        betting = np.array([bets[q] for q in range(len(names))])
    return Machine(tuple(names), delta, 0 if start is None else start, selecting, betting)


def load(path) -> Machine:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FsdimError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_spec(text)


def figure1() -> Machine:
    """The four-state base automaton a, b, c, d used by the selector examples."""
    return Machine(
        ("a", "b", "c", "d"),
        np.array([[1, 1], [0, 2], [3, 3], [0, 2]]),
    )


# --- structure ---------------------------------------------------------------

@dataclass(frozen=True)
class ErgodicAnalysis:
    classes: tuple
    ergodic_sets: tuple
    irreducible: bool

    @property
    def transient(self) -> frozenset:
        closed = set().union(*self.ergodic_sets) if self.ergodic_sets else set()
        return frozenset(q for cls in self.classes for q in cls) - closed


def communication_classes(adjacency) -> tuple:
    """Communication classes and closed classes of a directed graph.

    ``adjacency`` is an (n, n) array whose nonzero entries are edges.
    Returns ``(classes, closed)``, each a tuple of sorted index tuples
    ordered by smallest member.
    """
    adj = csr_matrix(np.asarray(adjacency) != 0)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    members = [[] for _ in range(ncomp)]
    for q, lab in enumerate(labels):
        members[lab].append(q)
    leaks = np.zeros(ncomp, dtype=bool)
    rows, cols = adj.nonzero()
    leaks[labels[rows][labels[rows] != labels[cols]]] = True
    classes = sorted(tuple(ms) for ms in members)
    closed = sorted(tuple(members[c]) for c in range(ncomp) if not leaks[c])
    return tuple(classes), tuple(closed)


def adjacency_matrix(m: Machine) -> np.ndarray:
    nq = len(m)
    adj = np.zeros((nq, nq), dtype=bool)
    adj[np.arange(nq), m.delta[:, 0]] = True
    adj[np.arange(nq), m.delta[:, 1]] = True
    return adj


def ergodic_analysis(m: Machine) -> ErgodicAnalysis:
    classes, closed = communication_classes(adjacency_matrix(m))
    # every state of a finite graph reaches some closed class
    return ErgodicAnalysis(classes, closed, len(closed) == 1)


def absorption_prefix(m: Machine) -> str:
    """Shortest bit-string driving m from its start state into an ergodic set."""
    ergodic = set().union(*ergodic_analysis(m).ergodic_sets)
    prev = {m.start: None}
    queue = deque([m.start])
    while queue:
        q = queue.popleft()
        if q in ergodic:
            word = []
            while prev[q] is not None:
                q, b = prev[q]
                word.append(str(b))
            return "".join(reversed(word))
        for b in (0, 1):
            r = int(m.delta[q, b])
            if r not in prev:
                prev[r] = (q, b)
                queue.append(r)
    raise AssertionError("unreachable: some ergodic set is always reachable")


def irreducible_completion(m: Machine, w: str = "") -> Machine:
    """Irreducible machine agreeing with m on every sequence extending w.

    The result has a fresh transient path of len(w) states reading w,
    ending in the state q_w reached by m on w, followed by m restricted to
    the ergodic set containing q_w.  Path states step to the next path
    state on either bit, so behavior off the prefix w is not meaningful.
    Selection and betting of path states copy those of the original run.
    """
    bits = as_bits(w)
    path = run(m, bits)
    target = int(path[-1])
    home = next((e for e in ergodic_analysis(m).ergodic_sets if target in e), None)
    if home is None:
        raise PreconditionError(
            f"run on w={w!r} ends in transient state {m.names[target]!r}, not in an ergodic set"
        )
    k = bits.size
    taken = set(m.names)
    fresh = []
    for i in range(k):
        name = f"w{i}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        fresh.append(name)

    remap = {q: k + j for j, q in enumerate(home)}
    names = tuple(fresh) + tuple(m.names[q] for q in home)
    delta = np.empty((len(names), 2), dtype=np.int64)
    for i in range(k):
        nxt = i + 1 if i + 1 < k else remap[target]
        delta[i] = (nxt, nxt)
    for q in home:
        delta[remap[q]] = (remap[int(m.delta[q, 0])], remap[int(m.delta[q, 1])])

    origin = [int(path[i]) for i in range(k)] + list(home)
    selecting = None
    if m.selecting is not None:
        selecting = frozenset(i for i, q in enumerate(origin) if q in m.selecting)
    betting = None
    if m.betting is not None:
        betting = m.betting[origin]
    start = 0 if k else remap[target]
    return Machine(names, delta, start, selecting, betting)


def renamed(m: Machine, names: Sequence[str], order: Optional[Sequence[int]] = None) -> Machine:
    """Isomorphic copy: old state ``order[i]`` becomes new state i named ``names[i]``."""
    nq = len(m)
    order = list(range(nq)) if order is None else list(order)
    inv = np.empty(nq, dtype=np.int64)
    inv[order] = np.arange(nq)
    delta = inv[m.delta[order]]
    sel = None if m.selecting is None else frozenset(int(inv[q]) for q in m.selecting)
    bet = None if m.betting is None else m.betting[order]
    return Machine(tuple(names), delta, int(inv[m.start]), sel, bet)
