"""Frequency data from text and FASTA files, and synthetic simplex samples."""

from __future__ import annotations

import csv
import io
import itertools
import re
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int
from .errors import EmptyDistributionError, ParameterError, ParseError

__all__ = [
    "EmpiricalDistribution",
    "tokenize",
    "word_frequencies",
    "kmer_frequencies",
    "sample_uniform_simplex",
    "read_distribution_csv",
    "read_count_table",
]

_TOKEN = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)
_COUNT_MAGIC = b"KLCT"


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Symbol counts and the probability vector they define.

    Attributes
    ----------
    label : str
    symbols : tuple of str
    counts : ndarray of int64
    source : dict
        Free-form metadata such as the input path.
    """

    label: str
    symbols: tuple
    counts: np.ndarray
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or len(counts) != len(self.symbols):
            raise ParameterError("need one count per symbol")
        if np.any(counts < 0):
            raise ParameterError("counts must be nonnegative")
        if counts.sum() == 0:
            raise EmptyDistributionError(f"{self.label}: no observations")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def K(self):
        return len(self.symbols)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def probabilities(self):
        return self.counts / self.total

    def as_dict(self):
        """Map symbol to frequency, omitting zero counts."""
        p = self.probabilities
        return {s: float(v) for s, v in zip(self.symbols, p) if v > 0}

    def to_csv(self, path_or_buf):
        """Write ``symbol,count,frequency`` rows."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["symbol", "count", "frequency"])
            for s, c, p in zip(self.symbols, self.counts, self.probabilities):
                w.writerow([s, int(c), repr(float(p))])
        finally:
            if own:
                fh.close()

    def to_count_table(self, path):
        """Write a compact binary table: magic, count of symbols, then length-prefixed UTF-8 symbols with uint64 counts."""
        with open(path, "wb") as fh:
            fh.write(_COUNT_MAGIC)
            fh.write(struct.pack("<I", self.K))
            for s, c in zip(self.symbols, self.counts):
                raw = s.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<Q", int(c)))


def read_distribution_csv(path, label=None):
    """Inverse of :meth:`EmpiricalDistribution.to_csv`; frequencies are recomputed from counts."""
    symbols, counts = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if lineno == 1:
                if row != ["symbol", "count", "frequency"]:
                    raise ParseError("header must be symbol,count,frequency", lineno)
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                counts.append(int(row[1]))
            except ValueError:
                raise ParseError(f"bad count {row[1]!r}", lineno) from None
            symbols.append(row[0])
    return EmpiricalDistribution(label or str(path), symbols, counts, {"path": str(path)})


def read_count_table(path, label=None):
    """Inverse of :meth:`EmpiricalDistribution.to_count_table`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _COUNT_MAGIC:
        raise ParseError("not a count table", 1)
    try:
        (k,) = struct.unpack_from("<I", data, 4)
        pos = 8
        symbols, counts = [], []
        for _ in range(k):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            symbols.append(data[pos : pos + n].decode("utf-8"))
            pos += n
            (c,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            counts.append(c)
    except struct.error:
        raise ParseError("truncated count table", 1) from None
    return EmpiricalDistribution(label or str(path), symbols, counts, {"path": str(path)})


def _lines(stream):
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8"))
    return stream


def tokenize(text):
    """Case-folded tokens: maximal alphanumeric runs, and each other non-space character alone."""
    return _TOKEN.findall(text.casefold())


def word_frequencies(stream, label="text"):
    """Token frequencies of a text, a file object, or bytes.

    Symbols are ordered by decreasing count, ties broken by first appearance.

    Examples
    --------
    >>> word_frequencies("Hi, hi!").as_dict()
    {'hi': 0.5, ',': 0.25, '!': 0.25}
    """
    counter = Counter()
    for line in _lines(stream):
        counter.update(tokenize(line))
    if not counter:
        raise EmptyDistributionError(f"{label}: no tokens")
    items = counter.most_common()
    return EmpiricalDistribution(label, [s for s, _ in items], [c for _, c in items], {"kind": "words"})


# uppercase A, C, G, T map to 0..3; everything else (N, soft-masked lowercase) invalidates a window
_BASE_CODE = np.full(256, -1, dtype=np.int64)
_BASE_CODE[np.frombuffer(b"ACGT", dtype=np.uint8)] = np.arange(4)


def kmer_frequencies(stream, k, label="fasta"):
    """Counts of the ``4**k`` k-mers over every record of a FASTA stream.

    Windows containing ``N`` or any lowercase (soft-masked) base are
    skipped, and windows never span two records. Absent k-mers keep a
    zero count. Symbols are in lexicographic ``ACGT`` order.

    Raises
    ------
    ParseError
        An empty header or a character outside ``ACGTN`` in either case.
        Sequence lines before any header form one unnamed record.
    EmptyDistributionError
        No valid window.
    """
    k = check_int(k, "k", 1)
    if k > 12:
        raise ParameterError("k > 12 would allocate more than 4**12 counters")
    counts = np.zeros(4**k, dtype=np.int64)
    tail = ""
    for lineno, raw in enumerate(_lines(stream), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            if len(line) == 1:
                raise ParseError("empty FASTA header", lineno)
            tail = ""
            continue
        if line.startswith(";"):
            continue
        bad = re.search(r"[^ACGTNacgtn]", line)
        if bad:
            raise ParseError(f"unexpected character {bad.group()!r} in sequence", lineno)
        seq = tail + line
        if len(seq) >= k:
            base = _BASE_CODE[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]
            win = np.lib.stride_tricks.sliding_window_view(base, k)
            ok = np.all(win >= 0, axis=1)
            idx = win[ok] @ (4 ** np.arange(k - 1, -1, -1, dtype=np.int64))
            counts += np.bincount(idx, minlength=counts.size)
        tail = seq[-(k - 1) :] if k > 1 else ""
    if counts.sum() == 0:
        raise EmptyDistributionError(f"{label}: no valid {k}-mer windows")
    symbols = ["".join(t) for t in itertools.product("ACGT", repeat=k)]
    return EmpiricalDistribution(label, symbols, counts, {"kind": "kmer", "k": k})


def sample_uniform_simplex(K, rng=None, size=None):
    """Uniform draws from the probability simplex via normalized unit exponentials.

    Parameters
    ----------
    K : int
        At least 2.
    rng : numpy.random.Generator or seed, optional
    size : int, optional
        Number of rows; a single vector when omitted.
    """
    K = check_int(K, "K", 2)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    shape = (K,) if size is None else (check_int(size, "size", 1), K)
    e = rng.standard_exponential(shape)
    return e / e.sum(axis=-1, keepdims=True)
