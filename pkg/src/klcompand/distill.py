"""Information distillation on finite joint distributions and its link to KL quantization.

A distiller ``h`` maps observations ``b`` to at most ``M`` labels and loses
``I(A;B) - I(A;h(B))`` nats. Labelling ``b`` by a quantizer cell of the
conditional vector ``x(b) = P(A | B=b)`` and decoding each cell by its
conditional mean makes this loss equal to the expected KL divergence of the
quantizer on the push-forward prior of ``x(b)``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int
from .errors import NumericalError, ParameterError, ParseError, SizeError
from .losses import kl_divergence

__all__ = [
    "JointDistribution",
    "mutual_information",
    "pushforward_prior",
    "labeled_information_loss",
    "distiller_from_quantizer",
    "DistillerResult",
    "brute_force_distiller",
    "brute_force_quantizer",
    "degrading_cost_bounds",
    "DegradingCostBounds",
]

MERGE_TOL = 1e-12
BRUTE_FORCE_LIMIT = 10**7


def _xlogy_sum(p, q):
    """``sum p log(p / q)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])))


@dataclass(frozen=True)
class JointDistribution:
    """Joint pmf ``P[a, b]`` over ``K`` values of ``A`` and ``|B|`` observations.

    Parameters
    ----------
    matrix : array_like of shape (K, nB)
        Nonnegative, summing to one within ``1e-12``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        P = np.array(self.matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
            raise ParameterError("joint distribution must be a nonempty 2-D array")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise ParameterError("joint probabilities must be finite and nonnegative")
        if abs(P.sum() - 1.0) > 1e-12:
            raise ParameterError(f"joint probabilities sum to {P.sum()!r}, not 1")
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)

    @property
    def K(self):
        return self.matrix.shape[0]

    @property
    def n_obs(self):
        return self.matrix.shape[1]

    @property
    def p_a(self):
        return self.matrix.sum(axis=1)

    @property
    def p_b(self):
        return self.matrix.sum(axis=0)

    def conditional(self, b):
        """``x(b) = P(A | B=b)``; raises for observations with zero mass."""
        pb = self.p_b[b]
        if pb <= 0:
            raise ParameterError(f"observation {b} has zero probability")
        return self.matrix[:, b] / pb

    def conditionals(self):
        """Matrix whose column ``b`` is ``x(b)``; zero-mass columns are uniform."""
        pb = self.p_b
        out = np.full(self.matrix.shape, 1.0 / self.K)
        pos = pb > 0
        out[:, pos] = self.matrix[:, pos] / pb[pos]
        return out

    @classmethod
    def from_csv(cls, path):
        """Read ``a,b,probability`` rows; ``a`` and ``b`` are labels mapped in order of appearance."""
        a_index, b_index, entries = {}, {}, []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, 1):
                if not row or (lineno == 1 and row[:3] == ["a", "b", "probability"]):
                    continue
                if len(row) != 3:
                    raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
                try:
                    p = float(row[2])
                except ValueError:
                    raise ParseError(f"bad probability {row[2]!r}", lineno) from None
                ia = a_index.setdefault(row[0], len(a_index))
                ib = b_index.setdefault(row[1], len(b_index))
                entries.append((ia, ib, p))
        if not entries:
            raise ParseError("no joint probability rows", 1)
        P = np.zeros((len(a_index), len(b_index)))
        for ia, ib, p in entries:
            P[ia, ib] += p
        return cls(P)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "b", "probability"])
            for a in range(self.K):
                for b in range(self.n_obs):
                    if self.matrix[a, b] > 0:
                        w.writerow([a, b, repr(float(self.matrix[a, b]))])


def mutual_information(j):
    """``I(A;B)`` in nats."""
    P = j.matrix
    return max(_xlogy_sum(P, np.outer(j.p_a, j.p_b)), 0.0)


def _merge_labels(j, labels):
    """Joint of ``(A, h(B))`` as a ``K x L`` matrix with ``L = max(label) + 1``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (j.n_obs,):
        raise ParameterError(f"need one label per observation ({j.n_obs})")
    L = int(labels.max()) + 1
    out = np.zeros((j.K, L))
    np.add.at(out.T, labels, j.matrix.T)
    return out


def labeled_information_loss(j, labels):
    """``I(A;B) - I(A;h(B))`` for the labelling ``h(b) = labels[b]``."""
    Q = _merge_labels(j, labels)
    pa, ph = Q.sum(axis=1), Q.sum(axis=0)
    i_h = _xlogy_sum(Q, np.outer(pa, ph))
    return max(mutual_information(j) - i_h, 0.0)


def pushforward_prior(j, tol=MERGE_TOL):
    """Atoms ``(x(b), P_B(b))`` with columns equal within ``tol`` merged.

    Returns
    -------
    atoms : ndarray of shape (n_atoms, K)
    weights : ndarray of shape (n_atoms,)
    index : ndarray of shape (nB,)
        Atom of each observation, ``-1`` for zero-mass observations.
    """
    X = j.conditionals().T
    pb = j.p_b
    atoms, weights = [], []
    index = np.full(j.n_obs, -1, dtype=np.int64)
    for b in range(j.n_obs):
        if pb[b] <= 0:
            continue
        for k, a in enumerate(atoms):
            if np.max(np.abs(a - X[b])) <= tol:
                weights[k] += pb[b]
                index[b] = k
                break
        else:
            index[b] = len(atoms)
            atoms.append(X[b].copy())
            weights.append(float(pb[b]))
    return np.array(atoms), np.array(weights), index


def _cell_kl(atoms, weights, cells):
    """``sum_i w_i D(x_i || mean of its cell)``; cells is an integer label per atom."""
    total = 0.0
    for c in np.unique(cells):
        m = cells == c
        w = weights[m]
        z = (w[:, None] * atoms[m]).sum(axis=0) / w.sum()
        total += float(np.dot(w, kl_divergence(atoms[m], np.broadcast_to(z, atoms[m].shape))))
    return total


@dataclass(frozen=True)
class DistillerResult:
    """Labels and losses of a compander-derived distiller.

    Attributes
    ----------
    labels : ndarray of int
        Label of each observation; zero-mass observations get label 0.
    info_loss : float
        ``I(A;B) - I(A;h(B))`` in nats.
    quantizer_kl : float
        Expected KL of the quantizer's own normalized reconstruction on
        the push-forward prior. Never below ``info_loss``.
    cells : list of tuple
        Code tuple of each label.
    """

    labels: np.ndarray
    info_loss: float
    quantizer_kl: float
    cells: list

    def __iter__(self):
        yield self.labels
        yield self.info_loss


def distiller_from_quantizer(j, q, M=None, *, tol=1e-10):
    """Label each observation by the entrywise code tuple of ``x(b)``.

    Parameters
    ----------
    j : JointDistribution
    q : Quantizer
        Applied to every entry of ``x(b)``.
    M : int, optional
        Label budget. The quantizer's codebook size ``(N + 1)**K`` must not exceed it.
    tol : float
        Tolerance for the check that the information loss equals the
        cell-conditional-mean KL expectation.

    Returns
    -------
    DistillerResult
    """
    codebook = (q.N + 1) ** j.K
    if M is not None and codebook > check_int(M, "M", 1):
        raise ParameterError(f"quantizer codebook size {codebook} exceeds M={M}")
    atoms, weights, index = pushforward_prior(j)
    codes, z_own, _ = q.quantize(atoms)
    keys = [tuple(int(c) for c in row) for row in np.atleast_2d(codes)]
    cell_of = {}
    atom_cells = np.array([cell_of.setdefault(k, len(cell_of)) for k in keys], dtype=np.int64)
    labels = np.where(index >= 0, atom_cells[np.maximum(index, 0)], 0)
    info = labeled_information_loss(j, labels)
    kl_opt = _cell_kl(atoms, weights, atom_cells)
    if abs(info - kl_opt) > tol:
        raise NumericalError(f"information loss {info!r} differs from cell KL {kl_opt!r}")
    own = float(np.dot(weights, kl_divergence(atoms, np.atleast_2d(z_own))))
    return DistillerResult(labels=labels, info_loss=info, quantizer_kl=own, cells=list(cell_of))


def _check_size(n_atoms, M):
    if M ** n_atoms > BRUTE_FORCE_LIMIT:
        raise SizeError(f"{M}**{n_atoms} labelings exceed the brute-force limit {BRUTE_FORCE_LIMIT}")


def brute_force_distiller(j, M):
    """Exhaustive minimum information loss over labelings of distinct columns.

    Returns
    -------
    labels : ndarray of int
    loss : float
    """
    M = check_int(M, "M", 1)
    atoms, _, index = pushforward_prior(j)
    n = len(atoms)
    _check_size(n, M)
    best, best_labels = math.inf, None
    for assign in itertools.product(range(M), repeat=n):
        a = np.asarray(assign)
        labels = np.where(index >= 0, a[np.maximum(index, 0)], 0)
        loss = labeled_information_loss(j, labels)
        if loss < best:
            best, best_labels = loss, labels
    return best_labels, best


def _set_partitions(n, max_blocks):
    """Restricted growth strings of length ``n`` using at most ``max_blocks`` blocks."""

    def rec(prefix, used):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for c in range(min(used + 1, max_blocks)):
            prefix.append(c)
            yield from rec(prefix, max(used, c + 1))
            prefix.pop()

    if n == 0:
        yield ()
        return
    yield from rec([], 0)


def brute_force_quantizer(j, M):
    """Minimum expected KL over partitions of the push-forward atoms into at most ``M`` cells.

    Each cell is decoded by its conditional mean, which is the optimal
    reconstruction for expected KL.

    Returns
    -------
    cells : tuple of int
        Cell of each atom.
    loss : float
    """
    M = check_int(M, "M", 1)
    atoms, weights, _ = pushforward_prior(j)
    _check_size(len(atoms), M)
    best, best_cells = math.inf, None
    for part in _set_partitions(len(atoms), M):
        loss = _cell_kl(atoms, weights, np.asarray(part))
        if loss < best:
            best, best_cells = loss, part
    return best_cells, best


@dataclass(frozen=True)
class DegradingCostBounds:
    """Three upper bounds on the degrading cost, ``nan`` where unavailable.

    Attributes
    ----------
    compander : float
        ``(1 + 18 loglog K / log K) M**(-2/K) log(K)**2``.
    scalar : float
        ``1268 (K - 1) M**(-2/(K-1))``, valid for ``M**(1/(K-1)) >= 4``.
    covering : float
        ``800 log(K) M**(-2/(K-1))``.
    best : str
        Name of the smallest available bound.
    reasons : dict
        Why a bound is unavailable.
    """

    K: int
    log_M: float
    compander: float
    scalar: float
    covering: float
    best: str
    reasons: dict

    @property
    def compander_ok(self):
        return not math.isnan(self.compander)


def compander_level_threshold(K):
    """``ceil(8 log(2 sqrt(K log K) + 1))``, the smallest per-entry level count the compander bound needs to exceed."""
    return math.ceil(8.0 * math.log(2.0 * math.sqrt(K * math.log(K)) + 1.0))


def degrading_cost_bounds(K, M=None, *, log_M=None):
    """Compare upper bounds on ``DC(K, M)``.

    Parameters
    ----------
    K : int
        At least 5.
    M : int or float, optional
        Label count. Python integers of any size are accepted.
    log_M : float, optional
        Natural log of ``M``, for counts beyond float range.
    """
    K = check_int(K, "K", 5)
    if (M is None) == (log_M is None):
        raise ParameterError("give exactly one of M and log_M")
    if log_M is None:
        if M <= 1:
            raise ParameterError("M must exceed 1")
        log_M = math.log(M)
    log_M = float(log_M)
    logK = math.log(K)
    reasons = {}
    thr = compander_level_threshold(K)
    exact = isinstance(M, (int, np.integer))
    if (int(M) > thr**K) if exact else (log_M / K > math.log(thr)):
        comp = (1.0 + 18.0 * math.log(logK) / logK) * math.exp(-2.0 * log_M / K) * logK**2
    else:
        comp = math.nan
        reasons["compander"] = f"needs M**(1/K) > {thr}"
    if (int(M) >= 4 ** (K - 1)) if exact else (log_M / (K - 1) >= math.log(4.0)):
        scal = 1268.0 * (K - 1) * math.exp(-2.0 * log_M / (K - 1))
    else:
        scal = math.nan
        reasons["scalar"] = "needs M**(1/(K-1)) >= 4"
    cover = 800.0 * logK * math.exp(-2.0 * log_M / (K - 1))
    vals = {"compander": comp, "scalar": scal, "covering": cover}
    best = min((v, k) for k, v in vals.items() if not math.isnan(v))[1]
    return DegradingCostBounds(K, log_M, comp, scal, cover, best, reasons)


def compander_scalar_crossing_log(K):
    """Natural log of the ``M`` where the compander and 1268 bounds coincide."""
    K = check_int(K, "K", 5)
    logK = math.log(K)
    ratio = 1268.0 * (K - 1) / ((1.0 + 18.0 * math.log(logK) / logK) * logK**2)
    return 0.5 * K * (K - 1) * math.log(ratio)
