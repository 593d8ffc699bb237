"""Adaptive zero-order entropy coder for bounded-alphabet symbol streams.

Binary arithmetic coding with 32-bit state and an adaptive frequency
model (Fenwick tree for cumulative counts). Correctness contract:
``decode_symbols(encode_symbols(s, A), len(s), A)`` reproduces ``s``
exactly, and the coded size tracks the empirical zero-order entropy
closely on long streams. An alphabet of size one carries no information,
so it encodes to an empty payload.
"""

from __future__ import annotations

import numpy as np

_HALF = 1 << 31
_QUARTER = 1 << 30
_THREE_QUARTERS = 3 << 30
_MASK = (1 << 32) - 1

_INCREMENT = 16
_RESCALE_TOTAL = 1 << 18


class RangeCoderError(ValueError):
    pass


class _AdaptiveModel:
    """Symbol frequencies, all initialized to 1, bumped after each use."""

    __slots__ = ("n", "counts", "tree", "total")

    def __init__(self, n: int):
        self.n = n
        self.counts = [1] * n
        # Fenwick node i covers (i & -i) unit counts after uniform init
        self.tree = [0] + [i & (-i) for i in range(1, n + 1)]
        self.total = n

    def _cum(self, s: int) -> int:
        acc = 0
        i = s
        tree = self.tree
        while i > 0:
            acc += tree[i]
            i -= i & (-i)
        return acc

    def _add(self, s: int, delta: int) -> None:
        i = s + 1
        tree = self.tree
        n = self.n
        while i <= n:
            tree[i] += delta
            i += i & (-i)

    def find(self, target: int) -> int:
        """Symbol s with cum(s) <= target < cum(s) + counts[s]."""
        pos = 0
        rem = target
        bit = 1
        while (bit << 1) <= self.n:
            bit <<= 1
        tree = self.tree
        while bit:
            nxt = pos + bit
            if nxt <= self.n and tree[nxt] <= rem:
                pos = nxt
                rem -= tree[nxt]
            bit >>= 1
        return pos

    def update(self, s: int) -> None:
        self.counts[s] += _INCREMENT
        self._add(s, _INCREMENT)
        self.total += _INCREMENT
        if self.total >= _RESCALE_TOTAL:
            self.counts = [(c + 1) // 2 for c in self.counts]
            tree = [0] * (self.n + 1)
            for i in range(1, self.n + 1):
                tree[i] += self.counts[i - 1]
                parent = i + (i & (-i))
                if parent <= self.n:
                    tree[parent] += tree[i]
            self.tree = tree
            self.total = sum(self.counts)


class _BitWriter:
    __slots__ = ("buf", "cur", "nbits")

    def __init__(self):
        self.buf = bytearray()
        self.cur = 0
        self.nbits = 0

    def write(self, bit: int) -> None:
        self.cur = (self.cur << 1) | bit
        self.nbits += 1
        if self.nbits == 8:
            self.buf.append(self.cur)
            self.cur = 0
            self.nbits = 0

    def finish(self) -> bytes:
        if self.nbits:
            self.buf.append(self.cur << (8 - self.nbits))
        return bytes(self.buf)


class _BitReader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self) -> int:
        byte_index = self.pos >> 3
        if byte_index >= len(self.data):
            return 0
        bit = (self.data[byte_index] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit


def _validate(symbols: np.ndarray, alphabet_size: int) -> np.ndarray:
    if alphabet_size < 1:
        raise RangeCoderError(f"alphabet_size must be >= 1, got {alphabet_size}")
    symbols = np.asarray(symbols)
    if symbols.ndim != 1:
        raise RangeCoderError("symbol stream must be one-dimensional")
    if symbols.size and (symbols.min() < 0 or symbols.max() >= alphabet_size):
        raise RangeCoderError(
            f"symbols outside [0, {alphabet_size}): "
            f"range [{symbols.min()}, {symbols.max()}]"
        )
    return symbols.astype(np.int64)


def encode_symbols(symbols, alphabet_size: int) -> bytes:
    """Arithmetic-code a symbol stream; empty payload for trivial alphabets."""
    symbols = _validate(symbols, alphabet_size)
    if alphabet_size == 1 or symbols.size == 0:
        return b""

    model = _AdaptiveModel(alphabet_size)
    writer = _BitWriter()
    low = 0
    high = _MASK
    pending = 0

    def emit(bit: int) -> None:
        nonlocal pending
        writer.write(bit)
        opposite = 1 - bit
        for _ in range(pending):
            writer.write(opposite)
        pending = 0

    for s in symbols.tolist():
        cum = model._cum(s)
        freq = model.counts[s]
        total = model.total
        span = high - low + 1
        high = low + (span * (cum + freq)) // total - 1
        low = low + (span * cum) // total
        while True:
            if high < _HALF:
                emit(0)
            elif low >= _HALF:
                emit(1)
                low -= _HALF
                high -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                pending += 1
                low -= _QUARTER
                high -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        model.update(s)

    pending += 1
    emit(0 if low < _QUARTER else 1)
    return writer.finish()


def decode_symbols(data: bytes, n_symbols: int, alphabet_size: int) -> np.ndarray:
    """Invert encode_symbols given the stream length and alphabet size."""
    if alphabet_size < 1:
        raise RangeCoderError(f"alphabet_size must be >= 1, got {alphabet_size}")
    if n_symbols < 0:
        raise RangeCoderError(f"n_symbols must be >= 0, got {n_symbols}")
    if alphabet_size == 1 or n_symbols == 0:
        return np.zeros(n_symbols, dtype=np.int64)

    model = _AdaptiveModel(alphabet_size)
    reader = _BitReader(data)
    low = 0
    high = _MASK
    code = 0
    for _ in range(32):
        code = (code << 1) | reader.read()

    out = np.empty(n_symbols, dtype=np.int64)
    for i in range(n_symbols):
        total = model.total
        span = high - low + 1
        target = ((code - low + 1) * total - 1) // span
        s = model.find(target)
        cum = model._cum(s)
        freq = model.counts[s]
        high = low + (span * (cum + freq)) // total - 1
        low = low + (span * cum) // total
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                code -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                low -= _QUARTER
                high -= _QUARTER
                code -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            code = (code << 1) | reader.read()
        model.update(s)
        out[i] = s
    return out


def stream_entropy_bits(symbols) -> float:
    """Shannon bits of the empirical histogram: n * H(counts/n)."""
    symbols = np.asarray(symbols).ravel()
    if symbols.size == 0:
        return 0.0
    _, counts = np.unique(symbols, return_counts=True)
    p = counts / symbols.size
    return float(-symbols.size * np.sum(p * np.log2(p)))
