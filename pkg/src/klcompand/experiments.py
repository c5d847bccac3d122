"""Seeded experiment grids that produce loss tables as CSV."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_int
from .compander import PowerCompander
from .datasets import (
    kmer_frequencies,
    read_count_table,
    read_distribution_csv,
    sample_uniform_simplex,
    word_frequencies,
)
from .errors import ParameterError
from .losses import LN2, LOSS_FIELDS, LossReport, expected_loss_mc, kl_divergence, phi_divergence
from .methods import METHODS, make_quantizer
from .priors import UniformDensity, read_constants, solve_maximin_constants, uniform_bad_prior, write_constants
from .quantizer import Quantizer

__all__ = [
    "ExperimentConfig",
    "run",
    "format_csv",
    "read_report_csv",
    "load_dataset",
    "power_sweep",
    "badprior_study",
    "BadPriorResult",
]

FASTA_SUFFIXES = (".fa", ".fasta", ".fna", ".fas")


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid of methods, alphabet sizes (or datasets) and bit widths.

    Synthetic runs draw ``trials`` vectors per ``K`` from the uniform
    simplex prior. Every method sees the same draws for a given ``K``.
    Dataset runs quantize each dataset's single frequency vector.
    """

    methods: tuple = ("truncation", "approx_minimax", "power", "float")
    K: tuple = (10_000,)
    bits: tuple = (8, 16)
    decode: str = "midpoint"
    trials: int = 100
    seed: int = 0
    datasets: tuple = ()
    kmer_k: int = 8
    out: str | None = None
    constants_cache: str | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("methods", "K", "bits", "datasets"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.methods:
            raise ParameterError("method list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ParameterError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not self.bits:
            raise ParameterError("bit width list is empty")
        for b in self.bits:
            if not 1 <= check_int(b, "bits") <= 32:
                raise ParameterError(f"bit width {b} outside 1..32")
        if not self.datasets:
            if not self.K:
                raise ParameterError("give alphabet sizes or datasets")
            for k in self.K:
                check_int(k, "K", 2)
        if self.decode not in ("midpoint", "centroid"):
            raise ParameterError(f"decode must be 'midpoint' or 'centroid', got {self.decode!r}")
        check_int(self.trials, "trials", 1)
        check_int(self.seed, "seed", 0)
        check_int(self.kmer_k, "kmer_k", 1)

    def digest(self):
        """Short hash of every field that affects results."""
        d = asdict(self)
        d.pop("out")
        d.pop("constants_cache")
        blob = json.dumps(d, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_dataset(path, kmer_k=8):
    """Frequency vector from a FASTA, text, CSV or binary count table file."""
    path = os.fspath(path)
    low = path.lower()
    label = os.path.basename(path)
    if low.endswith(FASTA_SUFFIXES):
        with open(path, encoding="ascii") as fh:
            return kmer_frequencies(fh, kmer_k, label=label)
    if low.endswith(".csv"):
        return read_distribution_csv(path, label=label)
    if low.endswith(".klct"):
        return read_count_table(path, label=label)
    with open(path, encoding="utf-8") as fh:
        return word_frequencies(fh, label=label)


def _constants(config):
    """Maximin constants for every K the grid needs, via the optional text cache."""
    if "minimax" not in config.methods or config.datasets:
        return {}
    cache = {}
    if config.constants_cache and os.path.exists(config.constants_cache):
        cache = read_constants(config.constants_cache)
    missing = [k for k in config.K if k not in cache]
    for k in missing:
        cache[k] = solve_maximin_constants(k)
    if config.constants_cache and missing:
        write_constants(config.constants_cache, [cache[k] for k in sorted(cache)])
    return {k: cache[k] for k in config.K}


def _method_params(method, K, constants):
    if method == "minimax" and K in constants:
        return {"constants": constants[K]}
    return {}


def run(config):
    """Evaluate every method, alphabet size and width in config order.

    Returns
    -------
    reports : list of LossReport
    constants : dict
        Maximin constants used, keyed by ``K``.
    """
    constants = _constants(config)
    reports = []
    if config.datasets:
        for path in config.datasets:
            dist = load_dataset(path, config.kmer_k)
            x = dist.probabilities
            for b in config.bits:
                for m in config.methods:
                    q = make_quantizer(m, dist.K, b, decode=config.decode)
                    _, z, y = q.quantize(x)
                    nats = float(kl_divergence(x, z))
                    reports.append(
                        LossReport(
                            method=f"{m}:{dist.label}",
                            K=dist.K,
                            N=int(getattr(q, "N", 1 << b)),
                            b=float(b),
                            nats=nats,
                            bits_per_entry=nats / (dist.K * LN2),
                            raw_loss=float(np.sum(x[x > 0] * np.log(x[x > 0] / y[x > 0]))),
                            trials=1,
                            stderr=0.0,
                        )
                    )
        return reports, constants
    for ki, K in enumerate(config.K):
        for b in config.bits:
            for m in config.methods:
                q = make_quantizer(m, K, b, decode=config.decode, **_method_params(m, K, constants))
                # same stream for every method at this K: common random numbers sharpen comparisons
                rng = np.random.default_rng([config.seed, ki])
                rep = expected_loss_mc(
                    lambda g, n, K=K: sample_uniform_simplex(K, g, n), q, config.trials, rng, K=K, method=m, N=1 << b
                )
                reports.append(rep)
    return reports, constants


def format_csv(config, reports, constants=None):
    """CSV text: ``#`` metadata lines, then the loss table."""
    buf = io.StringIO()
    buf.write(f"# seed={config.seed}\n")
    buf.write(f"# config_hash={config.digest()}\n")
    buf.write(f"# decode={config.decode}\n")
    for k in sorted(constants or {}):
        buf.write(f"# constants {constants[k].to_record()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOSS_FIELDS)
    for r in reports:
        w.writerow([repr(v) if isinstance(v, float) else str(v) for v in r.row()])
    return buf.getvalue()


def read_report_csv(text):
    """Parse :func:`format_csv` output back into LossReports, checking the bits column."""
    body = [line for line in text.splitlines() if line and not line.startswith("#")]
    return [LossReport.from_row(row) for row in csv.DictReader(body)]


def power_sweep(x, bits, s_grid):
    """KL of one frequency vector under power companders over a grid of exponents.

    Returns
    -------
    list of (s, nats)
    """
    x = np.asarray(x, dtype=float)
    out = []
    for s in s_grid:
        q = Quantizer(PowerCompander(float(s)), 1 << check_int(bits, "bits", 1))
        _, z, _ = q.quantize(x)
        out.append((float(s), float(kl_divergence(x, z))))
    return out


@dataclass(frozen=True)
class BadPriorResult:
    """``raw * N**2`` against ``log N`` for one method under the paired uniform prior.

    ``scaled`` holds Monte-Carlo means of ``N**2`` times the raw loss per
    vector; ``slope``, ``slope_se`` and ``t`` are the ordinary least
    squares fit of ``scaled = a + slope * log N``.
    """

    method: str
    K: int
    Ns: tuple
    scaled: tuple
    scaled_se: tuple
    slope: float
    intercept: float
    slope_se: float
    t: float

    @property
    def dof(self):
        return len(self.Ns) - 2


def _ols(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    A = np.column_stack([np.ones_like(xs), xs])
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ coef
    dof = len(xs) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else math.nan
    cov = s2 * np.linalg.inv(A.T @ A)
    se = math.sqrt(cov[1, 1]) if s2 > 0 else 0.0
    t = coef[1] / se if se > 0 else math.copysign(math.inf, coef[1]) if coef[1] else 0.0
    return float(coef[0]), float(coef[1]), se, float(t)


def badprior_study(K=256, exponents=range(6, 13), methods=("truncation", "approx_minimax"), trials=2000, seed=0):
    """Raw loss scaling under the paired prior with uniform ``[0, 2/K]`` marginal.

    Each quantizer decodes by the centroid of the marginal. The loss
    estimate per vector is ``sum x log(x/y) - x + y``, which has the
    same mean as the raw divergence under centroid decoding.
    """
    K = check_int(K, "K", 2)
    density = UniformDensity(0.0, 2.0 / K)
    Ns = tuple(1 << e for e in exponents)
    results = []
    for m in methods:
        vals, ses = [], []
        for i, N in enumerate(Ns):
            q = make_quantizer(m, K, int(math.log2(N)), decode="centroid", density=density)
            rng = np.random.default_rng([seed, i])
            x = uniform_bad_prior(K, rng, trials)
            _, _, y = q.quantize(x)
            d = np.asarray(phi_divergence(x, y)) * N**2
            vals.append(float(d.mean()))
            ses.append(float(d.std(ddof=1) / math.sqrt(len(d))))
        a, slope, se, t = _ols(np.log(Ns), vals)
        results.append(BadPriorResult(m, K, Ns, tuple(vals), tuple(ses), slope, a, se, t))
    return results
