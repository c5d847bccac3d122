"""Worst-case KL bounds for midpoint decoding and an adversarial search that probes them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int
from .compander import ArcSinhCompander, PowerCompander, asinh_sqrt
from .errors import ParameterError
from .losses import kl_divergence

__all__ = [
    "WorstCaseBound",
    "worstcase_bound",
    "arcsinh_detailed_bound",
    "adversarial_search",
    "SearchResult",
    "WORSTCASE_FIELDS",
]

WORSTCASE_FIELDS = ("method", "K", "N", "bound", "achieved", "ratio")


@dataclass(frozen=True)
class WorstCaseBound:
    """A worst-case divergence bound and whether its preconditions hold.

    Attributes
    ----------
    value : float
        Bound in nats, or ``nan`` when ``valid`` is false.
    err : float
        The error term multiplying the leading ``N**-2 log(K)**2`` term.
    valid : bool
        False when the alphabet size or granularity condition fails.
    reason : str
        Explanation when ``valid`` is false.
    simplified : float or None
        For the power compander with ``N >= e log K``, the bound ``e**2 N**-2 log(K)**2``.
    """

    method: str
    K: int
    N: int
    value: float
    err: float
    valid: bool
    reason: str = ""
    simplified: float | None = None


def _invalid(method, K, N, err, reason):
    return WorstCaseBound(method, K, N, math.nan, err, False, reason)


def minimax_n_threshold(K):
    """Smallest admissible granularity bound ``8 log(2 sqrt(K log K) + 1)``."""
    return 8.0 * math.log(2.0 * math.sqrt(K * math.log(K)) + 1.0)


def worstcase_bound(method, K, N, *, sharpened=False):
    """Closed-form worst-case divergence bound for midpoint decoding.

    Parameters
    ----------
    method : {"minimax", "approx_minimax", "power"}
        The power bound assumes the exponent ``s = 1/log K``.
    K, N : int
    sharpened : bool
        Use the tighter large-alphabet constant
        ``(1 + 6 loglog K / log K)``, available for ``approx_minimax`` with
        ``K >= 55`` and ``N > 6 log(2 sqrt(K log K / 2) + 1)``.

    Returns
    -------
    WorstCaseBound
    """
    K = check_int(K, "K", 2)
    N = check_int(N, "N", 1)
    logK = math.log(K)
    if method in ("minimax", "approx_minimax"):
        if sharpened:
            if method != "approx_minimax":
                raise ParameterError("the sharpened constant is only available for approx_minimax")
            err = 6.0 * math.log(logK) / logK if K > 2 else math.nan
            if K < 55:
                return _invalid(method, K, N, err, "sharpened bound needs K >= 55")
            thr = 6.0 * math.log(2.0 * math.sqrt(0.5 * K * logK) + 1.0)
            if not N > thr:
                return _invalid(method, K, N, err, f"sharpened bound needs N > {thr:.4g}")
            return WorstCaseBound(method, K, N, (1.0 + err) * logK**2 / N**2, err, True)
        err = 18.0 * math.log(logK) / logK if K > 2 else math.nan
        if K <= 4:
            return _invalid(method, K, N, err, "needs K > 4")
        thr = minimax_n_threshold(K)
        if N < thr:
            return _invalid(method, K, N, err, f"needs N >= {thr:.4g}")
        return WorstCaseBound(method, K, N, (1.0 + err) * logK**2 / N**2, err, True)
    if method == "power":
        if K <= 7:
            return _invalid(method, K, N, math.nan, "needs K > 7")
        half = 0.5 * math.e * logK
        if not N > half:
            return _invalid(method, K, N, math.nan, f"needs N > {half:.4g}")
        err = half / (N - half)
        value = (1.0 + err) * 0.5 * math.e**2 * logK**2 / N**2
        simplified = math.e**2 * logK**2 / N**2 if N >= math.e * logK else None
        return WorstCaseBound(method, K, N, value, err, True, simplified=simplified)
    raise ParameterError(f"no worst-case bound for method {method!r}")


def arcsinh_detailed_bound(K, N, c):
    """Intermediate bound ``2 N**-2 A**2 (K/gamma + N/(N - eta A))`` for an ArcSinh compander.

    Here ``gamma = c K log K``, ``A = ArcSinh(sqrt(gamma))`` and
    ``eta = 1 + (c log K)**-0.5``. Returns ``inf`` when ``N <= eta A``.
    """
    gamma = c * K * math.log(K)
    A = float(asinh_sqrt(gamma))
    eta = 1.0 + (c * math.log(K)) ** -0.5
    if N <= eta * A:
        return math.inf
    return 2.0 * A * A / N**2 * (K / gamma + N / (N - eta * A))


# ---------------------------------------------------------------------------
# adversarial search


@dataclass(frozen=True)
class SearchResult:
    """Worst vector found, its divergence, and the number of candidates evaluated."""

    x: np.ndarray
    achieved: float
    evaluated: int

    def __iter__(self):
        yield self.x
        yield self.achieved


def _complete(rows):
    """Make rows valid probability vectors by putting the slack in the last coordinate."""
    rows = np.clip(rows, 0.0, None)
    head = rows[:, :-1]
    total = head.sum(axis=1)
    over = total > 1.0
    head[over] /= total[over, None]
    rows[:, -1] = np.maximum(1.0 - head.sum(axis=1), 0.0)
    return rows


def _structured_candidates(q, K, rng, limit):
    N = q.N
    edges = q.edges() if N <= 2**20 else None
    out = []
    # bin-edge vectors: m copies of a value just inside a bin, rest in one coordinate
    if edges is not None:
        codes = np.unique(np.geomspace(1, N, num=min(N, 64)).astype(int))
        for n in codes:
            lo, hi = edges[n - 1], edges[n]
            for v in (lo * (1 + 1e-12) + 1e-300, hi):
                if v <= 0:
                    continue
                mmax = min(K - 1, int(1.0 / v))
                for m in np.unique(np.geomspace(1, max(mmax, 1), num=12).astype(int)):
                    row = np.zeros(K)
                    row[:m] = v
                    out.append(row)
    # one-hot plus dust
    for d in np.geomspace(1e-12, 1.0 / K, 40):
        row = np.full(K, d)
        out.append(row)
    # geometric ladders
    for r in np.linspace(0.5, 0.9999, 30):
        row = r ** np.arange(K)
        row /= row.sum()
        out.append(row[::-1].copy())
    # uniform dust snapped to lower bin edges
    if edges is not None:
        for _ in range(20):
            x = rng.dirichlet(np.full(K, rng.choice([0.1, 1.0, 10.0])))
            n = np.clip(np.asarray(q.encode(x)), 1, N)
            row = edges[n - 1] * (1 + 1e-12)
            out.append(row)
    rows = _complete(np.array(out[:limit], dtype=float))
    return rows


def adversarial_search(q, K, budget=10_000, rng=None, *, batch=256):
    """Search for probability vectors with large divergence after quantization.

    Candidates are structured vectors (entries just inside bin edges,
    one-hot plus dust, geometric ladders) followed by a hill climb that
    moves mass between pairs of coordinates and snaps the receiving
    coordinate to a bin edge. This is a heuristic; it never certifies
    the maximum.

    Parameters
    ----------
    q : Quantizer
        Must use midpoint decoding.
    K : int
    budget : int
        Number of candidate vectors to evaluate.

    Returns
    -------
    SearchResult
    """
    if getattr(q, "decode_mode", "midpoint") != "midpoint":
        raise ParameterError("adversarial search assumes midpoint decoding")
    K = check_int(K, "K", 2)
    budget = check_int(budget, "budget", 1)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def score(rows):
        _, z, _ = q.quantize(rows)
        return np.asarray(kl_divergence(rows, z), dtype=float).reshape(-1)

    rows = _structured_candidates(q, K, rng, budget)
    vals = score(rows)
    evaluated = len(rows)
    order = np.argsort(-vals)
    pool = rows[order[: min(16, len(order))]].copy()
    pool_vals = vals[order[: min(16, len(order))]].copy()
    N = q.N
    edges = q.edges() if N <= 2**20 else None
    while evaluated < budget:
        size = min(batch, budget - evaluated)
        parents = rng.integers(0, len(pool), size)
        cand = pool[parents].copy()
        i = rng.integers(0, K, size)
        j = rng.integers(0, K, size)
        frac = rng.random(size)
        ar = np.arange(size)
        move = cand[ar, i] * frac
        cand[ar, i] -= move
        cand[ar, j] += move
        if edges is not None:
            # snap coordinate j to just inside its bin, compensating with coordinate i
            n = np.clip(np.asarray(q.encode(np.clip(cand[ar, j], 0, 1))), 1, N)
            target = np.where(rng.random(size) < 0.5, edges[n - 1] * (1 + 1e-12), edges[n])
            delta = target - cand[ar, j]
            ok = cand[ar, i] - delta >= 0
            cand[ar[ok], j[ok]] = target[ok]
            cand[ar[ok], i[ok]] -= delta[ok]
        cand = np.clip(cand, 0.0, None)
        cand /= cand.sum(axis=1, keepdims=True)
        v = score(cand)
        evaluated += size
        both = np.vstack([pool, cand])
        bv = np.concatenate([pool_vals, v])
        keep = np.argsort(-bv)[: len(pool)]
        pool, pool_vals = both[keep], bv[keep]
    best = int(np.argmax(pool_vals))
    best_seen = max(float(pool_vals[best]), float(vals.max()))
    x = pool[best] if pool_vals[best] >= vals.max() else rows[int(np.argmax(vals))]
    return SearchResult(x=x, achieved=best_seen, evaluated=evaluated)


def worstcase_rows(results):
    """Format ``(bound, search_result)`` pairs as CSV text with the standard header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WORSTCASE_FIELDS)
    for bound, res in results:
        ratio = res.achieved / bound.value if bound.valid else math.nan
        w.writerow([bound.method, bound.K, bound.N, repr(bound.value), repr(res.achieved), repr(ratio)])
    return buf.getvalue()


def default_compander(method, K):
    """Compander used for a worst-case method tag."""
    if method == "minimax":
        return ArcSinhCompander.minimax(K)
    if method == "approx_minimax":
        return ArcSinhCompander.approx_minimax(K)
    if method == "power":
        return PowerCompander(1.0 / math.log(K))
    raise ParameterError(f"no worst-case compander for method {method!r}")
