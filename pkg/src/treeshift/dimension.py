"""Hausdorff dimension of the tree-shift under the lattice metric.

For an irreducible adjacency matrix with period p the dimension is a minimum
of coefficient(r) * log rho_class(cycle_r) over exponent vectors r in
(0, d]^p with unit product.  The search runs over the probability simplex
instead: the affine map

    q_i(s) = sum_j s_{i-j} d^{-j} * (d^p - d^{p-1}) / (d^p - 1),
    r_i    = q_i / q_{i+1}           (indices mod p)

is a bijection from the simplex onto the exponent set, the coefficient in
the objective equals q_0, and the boundary r_i = d (often optimal) sits at
simplex vertices, so no boundary handling is needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import inf

import numpy as np
from scipy.optimize import minimize

from .alphabet_graph import (
    AdjacencyModel,
    PeriodStructure,
    find_a0_and_period,
    is_irreducible,
    linear_spectral_radius,
    reachability,
    reduce_a0,
)
from .errors import (
    ClassInconsistency,
    EmptyRecurrentSet,
    ModelValidationError,
    SearchFailed,
    ValidationFailed,
)
from .rate_function import (
    WeightedChainModel,
    lln_limit,
    reciprocal_on_support,
    stationary_class_vector,
)
from .transfer_op import (
    EIGEN_TOL,
    entropy_iterate,
    log_weights,
    logsumexp,
    principal_eigenpair,
    psi,
)

SIMPLEX_TOL = 1e-12
GRID_POINT_LIMIT = 200_000
NM_FTOL = 1e-12
NM_XTOL = 1e-9


@dataclass(frozen=True)
class SimplexPoint:
    """Nonnegative weights summing to 1; parameterizes the exponent set."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if (s < -SIMPLEX_TOL).any() or abs(s.sum() - 1.0) > 1e-9:
            raise ModelValidationError(f"not a simplex point: {s}")
        s = np.clip(s, 0.0, None)
        s.setflags(write=False)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class ExponentVector:
    """r in (0, d]^p with product 1, plus the simplex weights q it came from."""

    r: np.ndarray
    q: np.ndarray

    @property
    def coefficient(self) -> float:
        """q_0 = (sum_l prod_{i<=l} r_i^{-1})^{-1}, the dimension-objective prefactor."""
        return float(self.q[0])


def simplex_to_ratios(s, d: int, p: int) -> ExponentVector:
    """The bijection from the simplex onto the admissible exponent vectors."""
    s = SimplexPoint(np.asarray(s, dtype=float)).s
    if s.shape != (p,):
        raise ModelValidationError(f"expected {p} simplex coordinates, got {s.shape}")
    scale = (d**p - d ** (p - 1)) / (d**p - 1.0)
    q = np.array(
        [sum(s[(i - j) % p] * d ** (-j) for j in range(p)) * scale for i in range(p)]
    )
    r = q / np.roll(q, -1)
    return ExponentVector(r=r, q=q)


def ratios_to_simplex(r, d: int, p: int) -> np.ndarray:
    """Inverse bijection: recover q from cumulative ratio products, then s."""
    r = np.asarray(r, dtype=float)
    inv_cum = np.cumprod(1.0 / r)
    q0 = 1.0 / inv_cum.sum()
    q = q0 * np.concatenate(([1.0], inv_cum[:-1]))
    s = (d * q - np.roll(q, 1)) / (d - 1.0)
    return s


@dataclass(frozen=True)
class DimensionReport:
    dim: float
    argmin_r: np.ndarray
    argmin_s: np.ndarray
    class_values: tuple[float, ...]
    h_top: float
    log_rho_linear: float
    method: str
    iterations: int
    a0: int
    period: int


def dim_objective(
    model: AdjacencyModel,
    period: PeriodStructure,
    s,
    class_index: int = 0,
    rotate: bool = True,
    eigen_tol: float = EIGEN_TOL,
) -> float:
    """Rotated coefficient times the log principal eigenvalue on cone j.

    With ``rotate`` the cycle on cone j starts at exponent r_{p-j} (the step
    the covering recursion applies to class-j vectors) and the matching
    coefficient is the bijection component q_{p-j}; that pairing makes the
    value independent of j, to roundoff.  The literal unrotated pairing is
    kept behind the flag for comparison.
    """
    p = period.period
    param = simplex_to_ratios(s, model.arity, p)
    j = class_index % p
    coeff = param.q[(p - j) % p] if rotate else param.coefficient
    pair = principal_eigenpair(
        model, period, param.r, class_index=j, rotate=rotate, tol=eigen_tol
    )
    if not np.isfinite(pair.log_rho):
        return -inf
    return float(coeff * pair.log_rho)


def _simplex_grid(p: int, step_denom: int):
    """Lattice points of the (p-1)-simplex with denominator ``step_denom``."""
    def rec(prefix, remaining, slots):
        if slots == 1:
            yield prefix + [remaining]
            return
        for k in range(remaining + 1):
            yield from rec(prefix + [k], remaining - k, slots - 1)

    for point in rec([], step_denom, p):
        yield np.array(point, dtype=float) / step_denom


def _grid_denominator(p: int) -> int:
    if p <= 3:
        return 50
    if p <= 5:
        return 12
    return 8


def hausdorff_dimension(
    model: AdjacencyModel,
    period: PeriodStructure | None = None,
    eigen_tol: float = EIGEN_TOL,
    grid_denom: int | None = None,
    entropy_n: int = 40,
    with_entropy: bool = True,
    threads: int = 1,
) -> DimensionReport:
    """Exact dimension for irreducible models: simplex grid + Nelder-Mead refine.

    Grid points are independent; ``threads`` sizes a worker pool over them.
    The reduction always scans results in grid-index order, so the report is
    bit-stable whatever the worker count.
    """
    if not is_irreducible(model):
        raise ModelValidationError(
            "model is not irreducible; use general_upper_bound instead"
        )
    if period is None:
        period = find_a0_and_period(model)
    p = period.period
    log_rho = linear_spectral_radius(model.adjacency.T.astype(float))
    h_top = entropy_iterate(model, entropy_n).h_top if with_entropy else float("nan")

    if p == 1:
        return DimensionReport(
            dim=log_rho,
            argmin_r=np.array([1.0]),
            argmin_s=np.array([1.0]),
            class_values=(log_rho,),
            h_top=h_top,
            log_rho_linear=log_rho,
            method="exact_irreducible",
            iterations=0,
            a0=period.a0,
            period=1,
        )

    denom = grid_denom if grid_denom is not None else _grid_denominator(p)
    n_points = _grid_size(p, denom)
    if n_points > GRID_POINT_LIMIT:
        raise SearchFailed(
            f"simplex grid for p={p} at step 1/{denom} has {n_points} points "
            f"(limit {GRID_POINT_LIMIT})"
        )

    points = list(_simplex_grid(p, denom))
    if not points:
        raise SearchFailed("empty simplex grid")

    def eval_point(s):
        return dim_objective(model, period, s, 0, eigen_tol=eigen_tol)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(eval_point, points))
    else:
        values = [eval_point(s) for s in points]
    evals = len(points)
    scored = sorted(zip(values, points), key=lambda t: t[0])

    # Nelder-Mead over the first p-1 coordinates, seeded by the best p grid points
    def objective_u(u: np.ndarray) -> float:
        s = np.concatenate([u, [1.0 - u.sum()]])
        if (s < -1e-12).any():
            return 1e9
        return dim_objective(model, period, np.clip(s, 0.0, None), 0, eigen_tol=eigen_tol)

    seeds = [s for _, s in scored[: p]]
    init = np.array([s[:-1] for s in seeds])
    if len(seeds) < p or np.linalg.matrix_rank(init - init[0]) < p - 1:
        base = seeds[0][:-1]
        init = np.vstack([base] + [base + 1e-3 * np.eye(p - 1)[k] for k in range(p - 1)])
    result = minimize(
        objective_u,
        init[0],
        method="Nelder-Mead",
        options={
            "initial_simplex": init[: p],
            "xatol": NM_XTOL,
            "fatol": NM_FTOL,
            "maxiter": 2000,
        },
    )
    evals += result.nfev
    best_u = result.x if result.fun <= scored[0][0] else scored[0][1][:-1]
    s_star = np.concatenate([best_u, [1.0 - np.sum(best_u)]])
    s_star = np.clip(s_star, 0.0, None)
    s_star /= s_star.sum()
    dim = dim_objective(model, period, s_star, 0, eigen_tol=eigen_tol)
    class_values = tuple(
        dim_objective(model, period, s_star, j, eigen_tol=eigen_tol) for j in range(p)
    )
    param = simplex_to_ratios(s_star, model.arity, p)
    return DimensionReport(
        dim=dim,
        argmin_r=param.r,
        argmin_s=s_star,
        class_values=class_values,
        h_top=h_top,
        log_rho_linear=log_rho,
        method="exact_irreducible",
        iterations=evals,
        a0=period.a0,
        period=p,
    )


def _grid_size(p: int, denom: int) -> int:
    from math import comb

    return comb(denom + p - 1, p - 1)


def general_upper_bound(
    model: AdjacencyModel,
    eigen_tol: float = EIGEN_TOL,
    grid_denom: int | None = None,
    entropy_n: int = 40,
) -> DimensionReport:
    """Upper bound for arbitrary (A0) models: max over recurrent closures.

    Each recurrent symbol a spans the submodel on its descendant closure,
    which satisfies the generation assumption with a as the base symbol; the
    irreducible formula evaluated there bounds the closure's dimension.  If
    the closure's class labeling is inconsistent (possible for reducible
    models), the linear spectral radius of the closure is used instead, which
    is always a valid upper bound.
    """
    model = reduce_a0(model)
    report = reachability(model)
    if not report.recurrent:
        raise EmptyRecurrentSet(
            "no symbol lies on a cycle: the shift holds finitely many trees (dimension 0)"
        )
    h_top = entropy_iterate(model, entropy_n).h_top
    log_rho = linear_spectral_radius(model.adjacency.T.astype(float))

    best = None
    evals = 0
    seen: dict[frozenset, tuple] = {}
    for a in sorted(report.recurrent):
        closure = report.closures[a]
        key = closure
        if key in seen:
            continue
        keep = sorted(closure)
        sub = model.submodel(keep)
        local_a0 = keep.index(a)
        try:
            sub_period = find_a0_and_period(sub, a0=local_a0)
            if sub_period.period == 1:
                value = linear_spectral_radius(sub.adjacency.T.astype(float))
                s_arg, r_arg, p_found = np.array([1.0]), np.array([1.0]), 1
            elif is_irreducible(sub):
                sub_rep = hausdorff_dimension(
                    sub, sub_period, eigen_tol=eigen_tol, grid_denom=grid_denom,
                    with_entropy=False,
                )
                value, s_arg, r_arg, p_found = (
                    sub_rep.dim, sub_rep.argmin_s, sub_rep.argmin_r, sub_rep.period
                )
                evals += sub_rep.iterations
            else:
                value, s_arg, r_arg, evals_a = _minimize_on_period(
                    sub, sub_period, eigen_tol, grid_denom
                )
                p_found = sub_period.period
                evals += evals_a
        except ClassInconsistency:
            value = linear_spectral_radius(sub.adjacency.T.astype(float))
            s_arg = np.array([1.0])
            r_arg = np.array([1.0])
            p_found = 1
        seen[key] = (value,)
        if best is None or value > best[0]:
            best = (value, s_arg, r_arg, a, p_found)

    value, s_arg, r_arg, a_best, p_found = best
    return DimensionReport(
        dim=float(value),
        argmin_r=np.asarray(r_arg, dtype=float),
        argmin_s=np.asarray(s_arg, dtype=float),
        class_values=(float(value),),
        h_top=h_top,
        log_rho_linear=log_rho,
        method="upper_bound_general",
        iterations=evals,
        a0=int(a_best),
        period=int(p_found),
    )


def _minimize_on_period(model, period, eigen_tol, grid_denom):
    """Grid + Nelder-Mead minimization for a merely-(A1) closure."""
    p = period.period
    denom = grid_denom if grid_denom is not None else _grid_denominator(p)
    best_val, best_s = inf, None
    evals = 0
    for s in _simplex_grid(p, denom):
        val = dim_objective(model, period, s, 0, eigen_tol=eigen_tol)
        evals += 1
        if val < best_val:
            best_val, best_s = val, s

    def objective_u(u: np.ndarray) -> float:
        s = np.concatenate([u, [1.0 - u.sum()]])
        if (s < -1e-12).any():
            return 1e9
        return dim_objective(model, period, np.clip(s, 0.0, None), 0, eigen_tol=eigen_tol)

    result = minimize(
        objective_u, best_s[:-1], method="Nelder-Mead",
        options={"xatol": NM_XTOL, "fatol": NM_FTOL, "maxiter": 2000},
    )
    evals += result.nfev
    if result.fun < best_val:
        best_val = float(result.fun)
        best_s = np.concatenate([result.x, [1.0 - result.x.sum()]])
    best_s = np.clip(best_s, 0.0, None)
    best_s /= best_s.sum()
    param = simplex_to_ratios(best_s, model.arity, p)
    return float(best_val), best_s, param.r, evals


@dataclass(frozen=True)
class SpectralBoundReport:
    dim: float
    log_rho: float
    h_top: float
    bound_holds: bool
    equality_predicate: bool
    dim_equality_observed: bool
    entropy_equality_observed: bool


def spectral_bound_report(model: AdjacencyModel, tol: float = 1e-6) -> SpectralBoundReport:
    """dim <= log rho(A), plus the constant-column-sum equality predicate.

    Constant column sums characterize the collapse h_top = log rho (and then
    everything collapses: dim = log rho = h_top).  They do NOT characterize
    dim = log rho alone: any primitive matrix has dim = log rho by the p = 1
    case of the dimension formula, whatever its column sums (golden mean:
    dim = log rho = log phi < h_top).  The report carries both observed
    equalities so callers can test the predicate against the right one.
    """
    model = reduce_a0(model)
    if is_irreducible(model):
        rep = hausdorff_dimension(model)
    else:
        rep = general_upper_bound(model)
    log_rho = rep.log_rho_linear
    col_sums = model.adjacency.sum(axis=0)
    predicate = bool((col_sums == col_sums[0]).all())
    return SpectralBoundReport(
        dim=rep.dim,
        log_rho=log_rho,
        h_top=rep.h_top,
        bound_holds=bool(rep.dim <= log_rho + 1e-9),
        equality_predicate=predicate,
        dim_equality_observed=bool(abs(rep.dim - log_rho) < tol),
        entropy_equality_observed=bool(abs(rep.h_top - log_rho) < max(tol, 2e-3)),
    )


@dataclass(frozen=True)
class OptimalMeasure:
    """Markov measure attaining the dimension, with its numeric certificate."""

    M: np.ndarray
    pi: np.ndarray
    phases: tuple[float, ...]
    validation_value: float
    dim: float


def optimal_markov_measure(
    model: AdjacencyModel,
    report: DimensionReport,
    tol: float = 1e-6,
    eigen_tol: float = EIGEN_TOL,
) -> OptimalMeasure:
    """Markov measure whose cylinder decay attains the Hausdorff dimension.

    The eigenvector chain w^(j+1) = normalize(psi(A, r_j, w^(j))) at the
    minimizing exponents feeds columnwise weights: a parent in class j sends
    mass to child a proportional to A[a, b] * w^(j+1)[a].  (The support
    restriction to A and the per-parent normalization are a corrected reading
    of the construction; correctness is certified numerically instead: the
    smallest likelihood-decay phase of the built chain must reproduce the
    dimension.)
    """
    if not is_irreducible(model):
        raise ModelValidationError("optimal measure needs an irreducible model")
    period = find_a0_and_period(model)
    p = period.period
    n = model.n_symbols
    log_adj = log_weights(model.adjacency)

    pair = principal_eigenpair(
        model, period, report.argmin_r, class_index=0, rotate=True, tol=eigen_tol
    )
    w_chain = [pair.eigvec.values]
    for j in range(p):
        nxt = psi(log_adj, float(report.argmin_r[j % p]), w_chain[-1])
        w_chain.append(nxt - logsumexp(nxt))

    m_star = np.zeros((n, n))
    for b in range(n):
        j = period.class_of[b]
        # each psi step lowers the supported class by one, so the chain entry
        # carrying the children of class j lives at index -(j+1) mod p
        w_next = w_chain[(-(j + 1)) % p]
        col_support = model.adjacency[:, b] == 1
        logs = np.where(col_support, log_adj[:, b] + w_next, -np.inf)
        norm = logsumexp(logs)
        m_star[col_support, b] = np.exp(logs[col_support] - norm)

    chain = WeightedChainModel(model, m_star, reciprocal_on_support(m_star))
    phases = tuple(lln_limit(chain, j, period) for j in range(p))
    validation = min(phases)
    if abs(validation - report.dim) > tol:
        raise ValidationFailed(
            f"optimal-measure certificate missed: min phase {validation} vs dim {report.dim}",
            expected=report.dim,
            got=validation,
        )
    pi_star = stationary_class_vector(chain, period)
    return OptimalMeasure(
        M=m_star, pi=pi_star, phases=phases, validation_value=validation, dim=report.dim
    )
