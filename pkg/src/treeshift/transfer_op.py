"""The nonlinear transfer operator in log domain.

The single-step map sends a nonnegative vector x to (A^T x)^s, entrywise; a
full cycle composes p such steps with exponents r_0..r_{p-1}.  Raw values
grow doubly exponentially (block counts obey c_{n+1} = (A^T c_n)^d), so every
computation here runs on logarithms with -inf encoding exact zeros.

Rotation: one transfer step moves support from class k to class k-1, so the
step the covering recursion applies to class-j vectors carries exponent
r_{p-j}.  The cycle used on cone j therefore starts at index (p - j) mod p;
rotation 0 is the plain composition, which is also the cone-0 case.  The
companion coefficient in the dimension objective rotates the same way, which
makes the per-cone objective values agree (see ``dimension``).  The unrotated
pairing is available via ``rotate=False`` for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from .alphabet_graph import AdjacencyModel, PeriodStructure
from .errors import BadExponent, NoConvergence

EIGEN_TOL = 1e-11
EIGEN_MAX_ITER = 10**4
PRODUCT_TOL = 1e-12


@dataclass(frozen=True)
class LogVector:
    """A nonnegative vector stored as logs; -inf marks entries that are exactly 0."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def support(self) -> np.ndarray:
        return np.isfinite(self.values)

    @classmethod
    def from_linear(cls, x) -> "LogVector":
        x = np.asarray(x, dtype=float)
        if (x < 0).any():
            raise ValueError("log vectors encode nonnegative data")
        with np.errstate(divide="ignore"):
            return cls(np.log(x))

    @classmethod
    def indicator(cls, n: int, mask) -> "LogVector":
        vals = np.full(n, -np.inf)
        vals[np.asarray(mask)] = 0.0
        return cls(vals)

    def normalized(self) -> "LogVector":
        return LogVector(self.values - logsumexp(self.values))

    def to_linear(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.values)


def log_weights(w) -> np.ndarray:
    """Entrywise log of a nonnegative matrix, -inf on zeros."""
    w = np.asarray(w, dtype=float)
    if (w < 0).any():
        raise ValueError("weight matrices must be nonnegative")
    with np.errstate(divide="ignore"):
        return np.log(w)


def logsumexp(x: np.ndarray) -> float:
    m = np.max(x, initial=-np.inf)
    if not np.isfinite(m):
        return -np.inf
    return float(m + np.log(np.exp(x - m).sum()))


def _lse_columns(m: np.ndarray) -> np.ndarray:
    """Column-wise log-sum-exp of a matrix that may contain -inf."""
    tops = m.max(axis=0)
    out = np.full(m.shape[1], -np.inf)
    finite = tops > -np.inf
    if finite.any():
        with np.errstate(invalid="ignore"):
            out[finite] = tops[finite] + np.log(
                np.exp(m[:, finite] - tops[finite]).sum(axis=0)
            )
    return out


def psi(log_w: np.ndarray, s: float, log_x: np.ndarray) -> np.ndarray:
    """One transfer step: component b of the result is s * log sum_a w[a,b] x[a].

    Accepts a weighted matrix, which generalizes the 0/1 adjacency case; the
    rate-function recursion relies on that.
    """
    if s <= 0:
        raise BadExponent(f"exponent must be positive, got {s}")
    x = np.asarray(log_x, dtype=float)
    with np.errstate(invalid="ignore"):
        return s * _lse_columns(log_w + x[:, None])


def _check_exponents(r: np.ndarray, d: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if (r <= 0).any() or (r > d + 1e-12).any():
        raise BadExponent(f"exponents must lie in (0, {d}], got {r}")
    prod = float(np.prod(r))
    if abs(prod - 1.0) > PRODUCT_TOL * max(1.0, abs(prod)):
        raise BadExponent(f"exponent product must be 1, got {prod}")
    return r


def apply_l(
    model: AdjacencyModel,
    r,
    log_x: np.ndarray,
    rotation: int = 0,
    _log_adj: np.ndarray | None = None,
) -> np.ndarray:
    """Full p-step cycle, starting with exponent r_rotation."""
    r = _check_exponents(r, model.arity)
    log_adj = _log_adj if _log_adj is not None else log_weights(model.adjacency)
    p = len(r)
    x = np.asarray(log_x, dtype=float)
    for i in range(p):
        x = psi(log_adj, float(r[(rotation + i) % p]), x)
    return x


@dataclass(frozen=True)
class EigenPair:
    """Principal eigenvalue (log) and normalized eigenvector on one cone."""

    log_rho: float
    eigvec: LogVector
    class_index: int
    iterations: int
    residual: float


def principal_eigenpair(
    model: AdjacencyModel,
    period: PeriodStructure,
    r,
    class_index: int = 0,
    rotate: bool = True,
    tol: float = EIGEN_TOL,
    max_iter: int = EIGEN_MAX_ITER,
) -> EigenPair:
    """Power iteration for the cone-restricted principal eigenpair.

    Starts from the indicator of the class, renormalizes in log domain each
    cycle, and brackets the eigenvalue with the Collatz-Wielandt bounds
    min/max of (L(x) - x) over the common support.  The bracket is valid for
    order-preserving homogeneous maps, which the cycle is.
    """
    r = _check_exponents(r, model.arity)
    if len(r) != period.period:
        raise BadExponent(f"need {period.period} exponents, got {len(r)}")
    log_adj = log_weights(model.adjacency)
    j = class_index % period.period
    x = LogVector.indicator(model.n_symbols, period.class_mask(j, model.n_symbols)).values
    rotation = (period.period - j) % period.period if rotate else 0
    lo = hi = np.nan
    for it in range(1, max_iter + 1):
        y = apply_l(model, r, x, rotation, _log_adj=log_adj)
        common = np.isfinite(x) & np.isfinite(y)
        if not common.any():
            # the cone collapses: eigenvalue 0
            return EigenPair(-np.inf, LogVector(y), j, it, 0.0)
        with np.errstate(invalid="ignore"):
            diffs = (y - x)[common]
        lo, hi = float(diffs.min()), float(diffs.max())
        x = np.where(np.isfinite(y), y - logsumexp(y[common]), -np.inf)
        if hi - lo < tol:
            return EigenPair(0.5 * (lo + hi), LogVector(x), j, it, hi - lo)
    best = EigenPair(0.5 * (lo + hi), LogVector(x), j, max_iter, hi - lo)
    raise NoConvergence(
        f"eigen bracket width {hi - lo:.3e} after {max_iter} iterations",
        bracket=(lo, hi),
        best=best,
    )


@dataclass(frozen=True)
class EntropySequence:
    """Normalized log block counts by depth and the extrapolated limit."""

    depths: tuple[int, ...]
    values: tuple[float, ...]
    h_top: float


def entropy_iterate(model: AdjacencyModel, n_max: int = 40) -> EntropySequence:
    """Topological-entropy recursion log c_{k+1} = psi(A, d, log c_k).

    Emits log(sum_a c_k(a)) / |Lambda(k)| for k = 0..n_max and an Aitken
    extrapolation of the last three terms as the limit estimate.
    """
    d = model.arity
    log_adj = log_weights(model.adjacency)
    x = np.zeros(model.n_symbols)
    depths = [0]
    values = [logsumexp(x) / 1.0]
    for k in range(1, n_max + 1):
        x = psi(log_adj, d, x)
        size = (d ** (k + 1) - 1.0) / (d - 1.0)  # float on purpose: huge at large k
        depths.append(k)
        values.append(logsumexp(x) / size)
    h = values[-1]
    if len(values) >= 3:
        e1, e2, e3 = values[-3], values[-2], values[-1]
        denom = e2 - e1
        if denom != 0.0:
            q = (e3 - e2) / denom
            if abs(q) < 1.0:
                h = e3 + (e3 - e2) * q / (1.0 - q)
    return EntropySequence(tuple(depths), tuple(values), float(h))
