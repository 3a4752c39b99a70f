"""Binary sequence sources.

Every source is an immutable description; bits are produced on demand as
``numpy.uint8`` arrays of zeros and ones.  Reading the same source twice
gives the same bits, and shorter reads are prefixes of longer ones.

Source descriptions have a compact string form used by the CLI::

    champernowne
    zeros
    periodic:0110
    diluted:champernowne        (inner source after the colon)
    file:path/to/data.txt       (ASCII '0'/'1', whitespace ignored)
    file:path/to/data.bits      (packed, 8 bits per byte, MSB first)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import FsdimError, SourceExhausted

KINDS = ("champernowne", "diluted", "periodic", "zeros", "file")

_CHUNK = 1 << 16


@dataclass(frozen=True)
class BitSource:
    kind: str
    inner: Optional["BitSource"] = None
    pattern: str = ""
    path: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FsdimError(f"unknown source kind {self.kind!r}")
        if self.kind == "diluted" and self.inner is None:
            raise FsdimError("diluted source needs an inner source")
        if self.kind == "periodic":
            if not self.pattern or set(self.pattern) - {"0", "1"}:
                raise FsdimError(f"periodic pattern must be a nonempty bit-string, got {self.pattern!r}")

    def __str__(self):
        if self.kind == "diluted":
            return f"diluted:{self.inner}"
        if self.kind == "periodic":
            return f"periodic:{self.pattern}"
        if self.kind == "file":
            return f"file:{self.path}"
        return self.kind

    @property
    def length_hint(self) -> Optional[int]:
        """Number of available bits, or None when unbounded."""
        if self.kind == "file":
            return len(_read_file(self.path))
        if self.kind == "diluted":
            inner = self.inner.length_hint
            return None if inner is None else 2 * inner
        return None


def champernowne() -> BitSource:
    return BitSource("champernowne")


def zeros() -> BitSource:
    return BitSource("zeros")


def periodic(pattern: str) -> BitSource:
    return BitSource("periodic", pattern=pattern)


def diluted(inner: BitSource) -> BitSource:
    return BitSource("diluted", inner=inner)


def from_file(path) -> BitSource:
    return BitSource("file", path=str(path))


def parse_source(text: str) -> BitSource:
    """Parse the compact string form, e.g. ``diluted:champernowne``."""
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "champernowne" and not rest:
        return champernowne()
    if head == "zeros" and not rest:
        return zeros()
    if head == "periodic":
        return periodic(rest)
    if head == "diluted":
        return diluted(parse_source(rest or "champernowne"))
    if head == "file" and rest:
        return from_file(rest)
    raise FsdimError(f"cannot parse source {text!r}")


def champernowne_bits(n: int) -> np.ndarray:
    """Concatenated binary numerals of 0, 1, 2, ... truncated to n bits."""
    out = np.empty(max(n, 1), dtype=np.uint8)
    out[0] = 0
    filled = 1
    width = 1
    while filled < n:
        lo, hi = 1 << (width - 1), 1 << width
        # numerals of this width needed to pass n, at most hi - lo
        count = min(hi - lo, -(-(n - filled) // width))
        nums = np.arange(lo, lo + count, dtype=np.int64)
        shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
        block = ((nums[:, None] >> shifts) & 1).astype(np.uint8).ravel()
        take = min(block.size, n - filled)
        out[filled:filled + take] = block[:take]
        filled += take
        width += 1
    return out[:n]


def _read_file(path: str) -> np.ndarray:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise FsdimError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if p.suffix == ".bits":
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    text = raw.decode("ascii", errors="replace")
    cleaned = "".join(text.split())
    bad = set(cleaned) - {"0", "1"}
    if bad:
        raise FsdimError(f"{path}: unexpected characters {''.join(sorted(bad))!r}")
    return np.frombuffer(cleaned.encode("ascii"), dtype=np.uint8) - ord("0")


def generate(source: BitSource, n: int) -> np.ndarray:
    """Return the first n bits of source as a uint8 array."""
    if n < 0:
        raise FsdimError(f"bit count must be nonnegative, got {n}")
    kind = source.kind
    if kind == "champernowne":
        return champernowne_bits(n)
    if kind == "zeros":
        return np.zeros(n, dtype=np.uint8)
    if kind == "periodic":
        pat = np.frombuffer(source.pattern.encode("ascii"), dtype=np.uint8) - ord("0")
        return np.resize(pat, n).astype(np.uint8)
    if kind == "diluted":
        out = np.zeros(n, dtype=np.uint8)
        out[0::2] = generate(source.inner, (n + 1) // 2)
        return out
    data = _read_file(source.path)
    if data.size < n:
        raise SourceExhausted(source, n, data.size)
    return data[:n].copy()


def stream(source: BitSource, n: int, chunk: int = _CHUNK) -> Iterator[np.ndarray]:
    """Yield the first n bits in consecutive chunks."""
    bits = generate(source, n)
    for start in range(0, n, chunk):
        yield bits[start:start + chunk]


def to_str(bits) -> str:
    """Render a bit array as a '0'/'1' string."""
    return (np.asarray(bits, dtype=np.uint8) + ord("0")).tobytes().decode("ascii")


def from_str(text: str) -> np.ndarray:
    text = "".join(text.split())
    if set(text) - {"0", "1"}:
        raise FsdimError(f"not a bit-string: {text[:20]!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def as_bits(x) -> np.ndarray:
    """Coerce a bit-string or array-like to a uint8 array."""
    if isinstance(x, str):
        return from_str(x)
    return np.asarray(x, dtype=np.uint8)


def write_bits(path, bits) -> None:
    """Write bits in the format selected by the file extension."""
    p = Path(path)
    bits = as_bits(bits)
    if p.suffix == ".bits":
        if bits.size % 8:
            raise FsdimError(f"packed .bits files need a multiple of 8 bits, got {bits.size}")
        p.write_bytes(np.packbits(bits).tobytes())
    else:
        p.write_text(to_str(bits) + "\n")
