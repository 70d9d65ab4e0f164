"""Sanov/Cramer machinery for tree sample means.

The pressure of the tilted matrix E = M * W^mu drives everything.  Writing
x_n for the log of the E-weighted partition function over depth-n trees
(one entry per root symbol), the recursion is

    x_0 = 0,    x_{n+1} = d * log(E^T exp(x_n)),

i.e. exactly ``transfer_op.psi`` with weight E and exponent d.  The pressure
is lim (d-1)/d^(n+1) * max of x_n over the class that roots a depth-n tree
whose bottom level lies in class j; the Legendre-type dual of the pressure in
mu is the rate function for conditional sample means observed at depths
congruent to j mod p.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import inf, log, sqrt
from typing import Callable

import numpy as np

from .alphabet_graph import AdjacencyModel, PeriodStructure, find_a0_and_period
from .errors import ModelParseError, ModelValidationError, NoConvergence, SupportViolation
from .transfer_op import log_weights, psi

STOCHASTIC_TOL = 1e-12
PRESSURE_TOL = 1e-10
PRESSURE_MAX_ITER = 4000
MAX_DOUBLINGS = 40
GOLDEN = (sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class WeightedChainModel:
    """Transition matrix M and observable weights W sharing the adjacency support.

    Both matrices are indexed (child row, parent column); each column of M is
    a probability vector over the children of that parent symbol.
    """

    base: AdjacencyModel
    M: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.M, dtype=float)
        w = np.asarray(self.W, dtype=float)
        adj = self.base.adjacency
        if m.shape != adj.shape or w.shape != adj.shape:
            raise ModelValidationError(
                f"M and W must match the adjacency shape {adj.shape}"
            )
        for name, mat in (("M", m), ("A", w)):
            bad = np.argwhere((mat > 0) != (adj == 1))
            if bad.size:
                r, c = bad[0]
                raise ModelValidationError(
                    f"{name} must be positive exactly on the adjacency support; "
                    f"offending entry at ({r}, {c})",
                    row=int(r), col=int(c),
                )
        col_sums = m.sum(axis=0)
        off = np.argwhere(np.abs(col_sums - 1.0) > STOCHASTIC_TOL)
        if off.size:
            c = int(off[0][0])
            raise ModelValidationError(
                f"column {c} of M sums to {col_sums[c]!r}, expected 1", col=c
            )
        m.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "W", w)

    @property
    def arity(self) -> int:
        return self.base.arity

    def log_m(self) -> np.ndarray:
        return log_weights(self.M)

    def log_w(self) -> np.ndarray:
        return log_weights(self.W)


def chain_from_matrices(m, w=None, d: int = 2, symbols=None) -> WeightedChainModel:
    """Build a weighted chain from a column-stochastic M (W defaults to M)."""
    m = np.asarray(m, dtype=float)
    if symbols is None:
        symbols = tuple(str(i) for i in range(m.shape[0]))
    base = AdjacencyModel(tuple(symbols), (m > 0).astype(int), d)
    w = m if w is None else np.asarray(w, dtype=float)
    return WeightedChainModel(base, m, w)


def parse_weighted(data: dict, model: AdjacencyModel) -> tuple[WeightedChainModel, np.ndarray | None]:
    """Extract M (required), A (defaults to M), and the optional initial pi."""
    if "M" not in data:
        raise ModelParseError("this command needs a transition matrix 'M' in the model file")
    m = np.asarray(data["M"], dtype=float)
    w = np.asarray(data["A"], dtype=float) if "A" in data else m
    pi = np.asarray(data["pi"], dtype=float) if "pi" in data else None
    if pi is not None:
        if pi.shape != (model.n_symbols,):
            raise ModelValidationError(f"pi must have {model.n_symbols} entries")
        if abs(pi.sum() - 1.0) > 1e-9 or (pi < 0).any():
            raise ModelValidationError("pi must be a probability vector")
    return WeightedChainModel(model, m, w), pi


def reciprocal_on_support(m: np.ndarray) -> np.ndarray:
    """Entrywise 1/m on the support, 0 elsewhere (the likelihood-decay observable)."""
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    sup = m > 0
    out[sup] = 1.0 / m[sup]
    return out


def phi(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Column-wise negative relative entropy: phi_b = sum_a -p[a,b] log(p[a,b]/w[a,b]).

    0 * log(0/0) counts as 0.  Raises SupportViolation if p charges an entry
    where w vanishes.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    bad = np.argwhere((p > 0) & (w <= 0))
    if bad.size:
        r, c = bad[0]
        raise SupportViolation(f"p[{r}, {c}] > 0 where the reference weight is 0")
    mask = p > 0
    safe_w = np.where(mask, w, 1.0)
    safe_p = np.where(mask, p, 1.0)
    return (-safe_p * np.log(safe_p / safe_w) * mask).sum(axis=0)


def tilted_matrix(chain: WeightedChainModel, mu) -> np.ndarray:
    """log of the tilted matrix E on the support, -inf off it.

    A scalar ``mu`` gives the usual E = M * W^mu.  A matrix ``mu`` tilts each
    edge separately, log E = log M + mu (the per-edge exponent family); the
    scalar case is the section mu_matrix = mu * log W of that family.
    """
    log_e = np.full(chain.M.shape, -np.inf)
    sup = chain.base.adjacency == 1
    if np.ndim(mu) == 0:
        log_e[sup] = np.log(chain.M[sup]) + mu * np.log(chain.W[sup])
    else:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != chain.M.shape:
            raise ModelValidationError(f"edge tilt must have shape {chain.M.shape}")
        log_e[sup] = np.log(chain.M[sup]) + mu[sup]
    return log_e


def _recursion_constant(chain: WeightedChainModel) -> float:
    sup = chain.base.adjacency == 1
    c_w = np.abs(np.log(chain.W[sup])).max(initial=0.0)
    c_m = np.abs(np.log(chain.M[sup])).max(initial=0.0)
    return max(c_w, c_m, log(chain.base.n_symbols))


@dataclass(frozen=True)
class PressureResult:
    mu: float
    value: float
    iterations: int
    error_bound: float


def pressure(
    chain: WeightedChainModel,
    mu: float,
    class_index: int = 0,
    period: PeriodStructure | None = None,
    tol: float = PRESSURE_TOL,
    max_iter: int = PRESSURE_MAX_ITER,
) -> PressureResult:
    """Limit of the lambda-recursion for the tilted matrix, with certified error.

    At step n the recursion reads out max of lambda^(n) = (d-1)/d^(n+1) x_n
    over the class of root symbols compatible with bottom class j at depth n,
    i.e. class (j - n) mod p.  Stops once the a-priori bound
    C d^(-n) (|mu| + 2) drops below ``tol``; convergence is geometric, so this
    always terminates.
    """
    if period is None:
        period = find_a0_and_period(chain.base)
    d = chain.arity
    p = period.period
    log_e = tilted_matrix(chain, mu)
    c_const = _recursion_constant(chain)
    mu_scale = abs(mu) if np.ndim(mu) == 0 else float(np.abs(mu).max())
    x = np.zeros(chain.base.n_symbols)
    n = 0
    err = inf
    while n < max_iter:
        x = psi(log_e, d, x)
        n += 1
        err = c_const * d ** (-n) * (mu_scale + 2.0)
        if err < tol:
            break
    mask = period.class_mask((class_index - n) % p, chain.base.n_symbols)
    value = float((d - 1.0) / d ** (n + 1.0) * x[mask].max())
    return PressureResult(mu=mu, value=value, iterations=n, error_bound=err)


def _golden_max(g: Callable[[float], float], a: float, b: float, xtol: float = 1e-9):
    """Golden-section maximization of a unimodal function on [a, b]."""
    c = b - GOLDEN * (b - a)
    d_ = a + GOLDEN * (b - a)
    fc, fd = g(c), g(d_)
    while d_ - c > xtol:
        if fc > fd:
            b, d_, fd = d_, c, fc
            c = b - GOLDEN * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + GOLDEN * (b - a)
            fd = g(d_)
    return (fc, c) if fc > fd else (fd, d_)


def _expand_bracket(g: Callable[[float], float], max_doublings: int = MAX_DOUBLINGS):
    """Scan g at 0, +-1, +-2, +-4, ... until the best point is interior.

    Returns (best_value, best_mu, bracket, bounded); ``bounded`` is False when
    the best point still sits on the boundary at the cap 2^max_doublings.
    """
    best_val, best_mu = g(0.0), 0.0
    bracket = 1.0
    while True:
        for mu in (-bracket, bracket):
            val = g(mu)
            if val > best_val + 1e-15 * max(1.0, abs(best_val)):
                best_val, best_mu = val, mu
        if abs(best_mu) < bracket / 2.0 or bracket >= 2.0**max_doublings:
            break
        bracket *= 2.0
    return best_val, best_mu, bracket, abs(best_mu) < bracket


def _maximize_concave(g: Callable[[float], float], max_doublings: int = MAX_DOUBLINGS):
    """sup of a concave g over the reals via expanding brackets.

    Returns (value, argmax, bounded); ``bounded`` is False when the optimum
    still improved at the bracket cap 2^max_doublings, which callers combine
    with a domain test to declare +inf.
    """
    best_val, best_mu, bracket, bounded = _expand_bracket(g, max_doublings)
    # concavity places the argmax between the scanned neighbors of best_mu
    lo = max(best_mu - bracket, -bracket)
    hi = min(best_mu + bracket, bracket)
    val, mu = _golden_max(g, lo, hi)
    if val < best_val:
        val, mu = best_val, best_mu
    return val, mu, bounded


def rate(
    chain: WeightedChainModel,
    class_index: int,
    alpha: float,
    period: PeriodStructure | None = None,
    endpoints: tuple[float, float] | None = None,
    pressure_tol: float = PRESSURE_TOL,
) -> float:
    """Legendre-type dual sup_mu (mu alpha - pressure(mu)); +inf outside the domain."""
    value, _, _ = rate_with_argmax(
        chain, class_index, alpha, period=period, endpoints=endpoints,
        pressure_tol=pressure_tol,
    )
    return value


def rate_with_argmax(
    chain: WeightedChainModel,
    class_index: int,
    alpha: float,
    period: PeriodStructure | None = None,
    endpoints: tuple[float, float] | None = None,
    pressure_tol: float = PRESSURE_TOL,
    boundary_slack: float = 1e-7,
) -> tuple[float, float, bool]:
    """As ``rate`` but also reports the maximizing mu and finiteness."""
    if period is None:
        period = find_a0_and_period(chain.base)

    def g(mu: float) -> float:
        return mu * alpha - pressure(
            chain, mu, class_index, period, tol=pressure_tol
        ).value

    if endpoints is not None:
        a1, a2 = endpoints
        if alpha < a1 - boundary_slack or alpha > a2 + boundary_slack:
            return inf, float("nan"), False
    val, mu, bounded = _maximize_concave(g)
    if not bounded:
        a1, a2 = endpoints if endpoints is not None else domain_endpoints(
            chain, class_index, period
        )
        if alpha < a1 - boundary_slack or alpha > a2 + boundary_slack:
            return inf, float("nan"), False
    return val, mu, True


def domain_endpoints(
    chain: WeightedChainModel,
    class_index: int,
    period: PeriodStructure | None = None,
    mu_big: float = 1e3,
    slope_tol: float = 1e-6,
) -> tuple[float, float]:
    """Finiteness interval (alpha_1, alpha_2) of the rate, via pressure slopes.

    The pressure is convex with asymptotic slopes alpha_1 (mu -> -inf) and
    alpha_2 (mu -> +inf); central differences at +-mu_big are refined by
    doubling mu_big until two successive slope estimates agree to slope_tol.
    """
    if period is None:
        period = find_a0_and_period(chain.base)
    h = 1.0
    p_tol = min(PRESSURE_TOL, slope_tol * h * 1e-2)

    def slope(mu: float) -> float:
        hi = pressure(chain, mu + h, class_index, period, tol=p_tol).value
        lo = pressure(chain, mu - h, class_index, period, tol=p_tol).value
        return (hi - lo) / (2.0 * h)

    ends = []
    for sign in (-1.0, 1.0):
        mu = mu_big
        est = slope(sign * mu)
        while mu < 2.0**MAX_DOUBLINGS:
            mu *= 2.0
            nxt = slope(sign * mu)
            if abs(nxt - est) < slope_tol:
                est = nxt
                break
            est = nxt
        ends.append(est)
    return ends[0], ends[1]


def stationary_class_vector(
    chain: WeightedChainModel,
    period: PeriodStructure,
    tol: float = 1e-15,
    max_iter: int = 10**5,
) -> np.ndarray:
    """Probability eigenvector of M^p supported on class A_0, by power iteration."""
    p = period.period
    m_pow = np.linalg.matrix_power(chain.M, p)
    n = chain.base.n_symbols
    y = period.class_mask(0, n).astype(float)
    y /= y.sum()
    for _ in range(max_iter):
        z = m_pow @ y
        z /= z.sum()
        if np.abs(z - y).sum() < tol:
            return z
        y = z
    raise NoConvergence("stationary vector of M^p did not converge", best=y)


def lln_limit(
    chain: WeightedChainModel,
    class_index: int = 0,
    period: PeriodStructure | None = None,
) -> float:
    """Almost-sure limit of sample means over depths congruent to j mod p.

    Level phases aggregate with weights d^(-i) / sum_l d^(-l); the edge layer
    at distance i from the bottom of a depth-(pn+j) tree has its parents
    distributed as pi^{(i+1-j)}, where pi^{(k)} = M^{p-k} pi^{(0)} and pi^{(0)}
    is the M^p-eigenvector on class A_0.  (The parent index is pinned by the
    closed-form period-2 model: phase j=0 must average an edge layer whose
    parents sit in class A_1.)
    """
    if period is None:
        period = find_a0_and_period(chain.base)
    p = period.period
    d = chain.arity
    pi0 = stationary_class_vector(chain, period)
    pis = [pi0]
    for k in range(1, p):
        pis.append(np.linalg.matrix_power(chain.M, p - k) @ pi0)
    sup = chain.base.adjacency == 1
    m_logw = np.zeros_like(chain.M)
    m_logw[sup] = chain.M[sup] * np.log(chain.W[sup])
    layer_value = [float(m_logw.sum(axis=0) @ pis[k]) for k in range(p)]
    weights = np.array([float(d) ** (-i) for i in range(p)])
    weights /= weights.sum()
    return float(
        sum(weights[i] * layer_value[(i + 1 - class_index) % p] for i in range(p))
    )


def lln_beta_bounds(
    chain: WeightedChainModel,
    pi: np.ndarray,
    period: PeriodStructure | None = None,
) -> tuple[float, float]:
    """liminf/limsup of the unconditional expected sample mean for initial law pi."""
    if period is None:
        period = find_a0_and_period(chain.base)
    p = period.period
    alphas = [lln_limit(chain, j, period) for j in range(p)]
    masses = [float(sum(pi[a] for a in period.classes[j])) for j in range(p)]
    totals = [
        sum(masses[j] * alphas[(i + j) % p] for j in range(p)) for i in range(p)
    ]
    return min(totals), max(totals)


@dataclass(frozen=True)
class RateCurve:
    """Rate-function values over an alpha grid, CSV-ready."""

    alphas: np.ndarray
    values: np.ndarray
    argmax_mu: np.ndarray
    alpha1: float
    alpha2: float
    alpha_star: float
    class_index: int

    def rows(self):
        for a, v, m in zip(self.alphas, self.values, self.argmax_mu):
            yield float(a), float(v), float(m), bool(np.isfinite(v))

    def to_csv(self, fh) -> None:
        fh.write("alpha,rate,argmax_mu,finite\n")
        for a, v, m, finite in self.rows():
            v_txt = "inf" if not finite else repr(v)
            m_txt = "" if not finite else repr(m)
            fh.write(f"{a!r},{v_txt},{m_txt},{str(finite).lower()}\n")

    def summary(self) -> dict:
        return {
            "class": self.class_index,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "alpha_star": self.alpha_star,
            "n_points": int(self.alphas.size),
            "finite_points": int(np.isfinite(self.values).sum()),
        }


def rate_curve(
    chain: WeightedChainModel,
    class_index: int = 0,
    n_points: int = 200,
    margin: float | None = None,
    period: PeriodStructure | None = None,
    pressure_tol: float = PRESSURE_TOL,
) -> RateCurve:
    """Evaluate the rate over a uniform grid clipped around its finite domain."""
    if period is None:
        period = find_a0_and_period(chain.base)
    a1, a2 = domain_endpoints(chain, class_index, period)
    if margin is None:
        margin = max(0.05 * (a2 - a1), 0.01)
    alphas = np.linspace(a1 - margin, a2 + margin, n_points)
    values = np.empty(n_points)
    argmax = np.empty(n_points)
    for i, a in enumerate(alphas):
        v, mu, _ = rate_with_argmax(
            chain, class_index, float(a), period=period, endpoints=(a1, a2),
            pressure_tol=pressure_tol,
        )
        values[i] = v
        argmax[i] = mu
    alpha_star = lln_limit(chain, class_index, period)
    return RateCurve(
        alphas=alphas, values=values, argmax_mu=argmax,
        alpha1=a1, alpha2=a2, alpha_star=alpha_star, class_index=class_index,
    )
