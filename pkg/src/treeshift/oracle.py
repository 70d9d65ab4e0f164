"""Exact ground truth at tiny scale: block counts, type classes, finite-n duality.

Counting conventions.  A type class fixes the per-level symbol counts N^(i)
and the per-level edge counts k^(i)[a, b] (children labeled a under parents
labeled b, between levels i and i+1).  Child slots are distinguishable and
labeled independently given the parents, so the class size is the exact
product of multinomials

    prod_i prod_b  (d N^(i)_b)! / prod_a k^(i)[a, b]!

and the probability of any single member is prod M^k.  Counts use Python big
integers throughout; 64-bit multinomials already overflow at n = 4, d = 2.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from math import inf

import numpy as np

from .alphabet_graph import AdjacencyModel, PeriodStructure, find_a0_and_period
from .errors import TooLarge
from .rate_function import WeightedChainModel, _maximize_concave, tilted_matrix
from .transfer_op import psi
from .tree_core import lattice_size

LIST_GUARD = 10**8
CLASS_GUARD = 10**6


def block_counts(model: AdjacencyModel, n: int) -> list[int]:
    """Exact number of admissible depth-n labeled trees per root symbol.

    Uses the recursion c_{k+1}(b) = (sum_a A[a, b] c_k(a))^d on big integers.
    """
    counts = [1] * model.n_symbols
    adj = model.adjacency
    for _ in range(n):
        counts = [
            int(sum(counts[a] for a in range(model.n_symbols) if adj[a, b])) ** model.arity
            for b in range(model.n_symbols)
        ]
    return counts


@dataclass(frozen=True)
class BlockCounts:
    counts: tuple[int, ...]
    total: int
    trees: tuple[tuple[int, ...], ...] | None


def enumerate_blocks(
    model: AdjacencyModel,
    n: int,
    root: int | None = None,
    want_list: bool = False,
    list_guard: int = LIST_GUARD,
) -> BlockCounts:
    """Counts via the exact recursion, plus an optional explicit listing.

    The recursion is unbounded; the listing is guarded by ``list_guard`` and
    raises TooLarge beyond it.
    """
    counts = block_counts(model, n)
    if root is not None:
        total = counts[root]
    else:
        total = sum(counts)
    trees = None
    if want_list:
        if total > list_guard:
            raise TooLarge(f"{total} trees exceed the listing guard {list_guard}")
        roots = [root] if root is not None else list(range(model.n_symbols))
        trees = tuple(
            tree for r in roots for tree in _list_trees(model, n, r)
        )
    return BlockCounts(tuple(counts), total, trees)


def _list_trees(model: AdjacencyModel, n: int, root: int):
    """Yield admissible depth-n labelings in BFS order, root fixed."""
    d = model.arity
    children = [tuple(int(a) for a in model.children_of(b)) for b in range(model.n_symbols)]

    def rec(levels: list[tuple[int, ...]]):
        if len(levels) == n + 1:
            yield tuple(itertools.chain.from_iterable(levels))
            return
        slot_choices = [children[b] for b in levels[-1] for _ in range(d)]
        for combo in itertools.product(*slot_choices):
            yield from rec(levels + [combo])

    yield from rec([(root,)])


@dataclass(frozen=True)
class TypeClass:
    """All labeled trees sharing the same level counts and edge counts."""

    levels: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[tuple[int, ...], ...], ...]
    count: int
    log_prob: float
    prob: Fraction | None

    @property
    def total_edge_counts(self) -> np.ndarray:
        """Aggregated edge-count matrix K = sum_i k^(i), an integer tensor."""
        out = np.zeros((len(self.levels[0]), len(self.levels[0])), dtype=np.int64)
        for k in self.edges:
            out += np.asarray(k, dtype=np.int64)
        return out

    def empirical_pair(self, model: AdjacencyModel) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Implied level distributions and transitions (adjacency fallback columns)."""
        d = model.arity
        adj = model.adjacency.astype(float)
        fallback = adj / adj.sum(axis=0, keepdims=True)
        taus = []
        etas = []
        for i, level in enumerate(self.levels):
            nvec = np.asarray(level, dtype=float)
            taus.append(nvec / nvec.sum())
            if i < len(self.edges):
                kmat = np.asarray(self.edges[i], dtype=float)
                eta = fallback.copy()
                present = nvec > 0
                eta[:, present] = kmat[:, present] / (d * nvec[present])
                etas.append(eta)
        return taus, etas

    def mean(self, chain: WeightedChainModel) -> float:
        """Exact sample-mean value shared by every member of the class."""
        k = self.total_edge_counts
        sup = k > 0
        total_nodes = sum(sum(level) for level in self.levels)
        return float((k[sup] * np.log(chain.W[sup])).sum() / total_nodes)


def _log_big(x: int) -> float:
    if x <= 0:
        raise ValueError("log of a nonpositive integer")
    if x.bit_length() <= 900:
        return math.log(x)
    shift = x.bit_length() - 60
    return math.log(x >> shift) + shift * math.log(2.0)


def _multinomial(total: int, parts: tuple[int, ...]) -> int:
    out = math.factorial(total)
    for k in parts:
        out //= math.factorial(k)
    return out


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _exact_fractions(chain: WeightedChainModel) -> list[list[Fraction]] | None:
    """Fractions for M when its float entries are exactly rational per column.

    Binary floats are exact rationals; the column-sum test distinguishes
    genuinely dyadic input (1/2, 3/4, ...) from rounded decimals (0.333...),
    for which we fall back to log-domain arithmetic.
    """
    n = chain.base.n_symbols
    fr = [[Fraction(float(chain.M[a, b])) for b in range(n)] for a in range(n)]
    for b in range(n):
        if sum(fr[a][b] for a in range(n)) != 1:
            return None
    return fr


def enumerate_type_classes(
    chain: WeightedChainModel,
    n: int,
    root: int | None = None,
    class_guard: int = CLASS_GUARD,
    exact: bool | None = None,
) -> list[TypeClass]:
    """Every integer count system consistent with depth n and the given root."""
    model = chain.base
    d = model.arity
    n_sym = model.n_symbols
    if root is None:
        root = find_a0_and_period(model).a0
    children = [tuple(int(a) for a in model.children_of(b)) for b in range(n_sym)]
    fractions = _exact_fractions(chain) if exact in (None, True) else None
    if exact is True and fractions is None:
        raise ValueError("exact probabilities requested but M is not exactly rational")
    log_m = np.where(chain.M > 0, np.log(np.where(chain.M > 0, chain.M, 1.0)), 0.0)

    results: list[TypeClass] = []

    def rec(level_idx, nvec, levels, edge_mats, log_prob_edges, prob_edges):
        if level_idx == n:
            count = 1
            for i, kmat in enumerate(edge_mats):
                for b in range(n_sym):
                    col = tuple(kmat[a][b] for a in range(n_sym))
                    if sum(col):
                        count *= _multinomial(sum(col), col)
            log_prob = _log_big(count) + log_prob_edges
            prob = count * prob_edges if prob_edges is not None else None
            results.append(
                TypeClass(
                    levels=tuple(levels),
                    edges=tuple(tuple(tuple(row) for row in kmat) for kmat in edge_mats),
                    count=count,
                    log_prob=log_prob,
                    prob=prob,
                )
            )
            if len(results) > class_guard:
                raise TooLarge(f"more than {class_guard} type classes at depth {n}")
            return
        parents = [b for b in range(n_sym) if nvec[b] > 0]
        options = []
        for b in parents:
            if not children[b]:
                options.append([])  # dead parent symbol: no admissible continuation
                continue
            opts = []
            for comp in _compositions(d * nvec[b], len(children[b])):
                col = [0] * n_sym
                for a, cnt in zip(children[b], comp):
                    col[a] = cnt
                opts.append(col)
            options.append(opts)
        for combo in itertools.product(*options):
            kmat = [[0] * n_sym for _ in range(n_sym)]
            for b, col in zip(parents, combo):
                for a in range(n_sym):
                    kmat[a][b] = col[a]
            next_n = tuple(sum(kmat[a][b] for b in parents) for a in range(n_sym))
            dlog = sum(
                kmat[a][b] * log_m[a, b] for b in parents for a in children[b]
            )
            dprob = None
            if prob_edges is not None:
                dprob = prob_edges
                for b in parents:
                    for a in children[b]:
                        if kmat[a][b]:
                            dprob *= fractions[a][b] ** kmat[a][b]
            rec(
                level_idx + 1,
                next_n,
                levels + [next_n],
                edge_mats + [kmat],
                log_prob_edges + dlog,
                dprob,
            )

    start = tuple(1 if a == root else 0 for a in range(n_sym))
    rec(0, start, [start], [], 0.0, Fraction(1) if fractions is not None else None)
    return results


@dataclass(frozen=True)
class MeanAtom:
    mean: float
    prob: float
    prob_exact: Fraction | None
    weighted_counts: tuple[tuple[int, int, int], ...]  # (child, parent, count)


@dataclass(frozen=True)
class MeanDistribution:
    """Exact distribution of the depth-n sample mean.

    Grouping keys are integer count vectors over the edges with nonzero
    log-weight, never floating means: equal keys force exactly equal means,
    and no float-equality comparison ever happens.
    """

    atoms: tuple[MeanAtom, ...]
    depth: int
    root: int

    def prob_in(self, lo: float, hi: float) -> float:
        return float(sum(a.prob for a in self.atoms if lo <= a.mean <= hi))

    def prob_in_exact(self, lo: float, hi: float) -> Fraction | None:
        if any(a.prob_exact is None for a in self.atoms):
            return None
        return sum(a.prob_exact for a in self.atoms if lo <= a.mean <= hi)

    def total_prob(self) -> float:
        return float(math.fsum(a.prob for a in self.atoms))


def exact_mean_distribution(
    chain: WeightedChainModel,
    n: int,
    root: int | None = None,
    class_guard: int = CLASS_GUARD,
) -> MeanDistribution:
    """Aggregate type classes by their aggregated edge-count tensor."""
    if root is None:
        root = find_a0_and_period(chain.base).a0
    classes = enumerate_type_classes(chain, n, root, class_guard=class_guard)
    total_nodes = lattice_size(chain.arity, n)
    sup = chain.base.adjacency == 1
    log_w = np.zeros_like(chain.W)
    log_w[sup] = np.log(chain.W[sup])
    weighted_edges = [
        (a, b) for a in range(chain.base.n_symbols)
        for b in range(chain.base.n_symbols) if log_w[a, b] != 0.0
    ]

    grouped: dict[tuple, dict] = {}
    for cls in classes:
        key_mat = cls.total_edge_counts
        key = tuple((a, b, int(key_mat[a, b])) for a, b in weighted_edges)
        slot = grouped.setdefault(
            key, {"probs": [], "exacts": [] if cls.prob is not None else None}
        )
        slot["probs"].append(math.exp(cls.log_prob))
        if slot["exacts"] is not None and cls.prob is not None:
            slot["exacts"].append(cls.prob)

    atoms = []
    for key, slot in grouped.items():
        mean = float(sum(cnt * log_w[a, b] for a, b, cnt in key) / total_nodes)
        prob_exact = sum(slot["exacts"]) if slot["exacts"] is not None else None
        atoms.append(
            MeanAtom(
                mean=mean,
                prob=float(math.fsum(slot["probs"])),
                prob_exact=prob_exact,
                weighted_counts=key,
            )
        )
    atoms.sort(key=lambda a: a.mean)
    return MeanDistribution(tuple(atoms), depth=n, root=root)


def finite_rate(
    chain: WeightedChainModel,
    class_index: int,
    n: int,
    alpha: float,
    period: PeriodStructure | None = None,
) -> float:
    """Finite-depth dual value F_{n,j}(alpha) = inf_mu -mu alpha + V_n(mu).

    V_n normalizes the n-step tilted recursion by the exact lattice size
    1/|Lambda(n)| (the infinite-depth pressure uses the idealized weight
    (d-1)/d^(n+1) instead; both share the same x-iteration).  With the exact
    normalization the Chernoff bound gives weak duality against enumerated
    type classes with no tolerance at all, only float roundoff.
    """
    if period is None:
        period = find_a0_and_period(chain.base)
    d = chain.arity
    n_sym = chain.base.n_symbols
    total = lattice_size(d, n)
    mask = period.class_mask((class_index - n) % period.period, n_sym)

    def v_of(mu: float) -> float:
        log_e = tilted_matrix(chain, mu)
        x = np.zeros(n_sym)
        for _ in range(n):
            x = psi(log_e, d, x)
        return float(x[mask].max() / total)

    val, _, bounded = _maximize_concave(lambda mu: mu * alpha - v_of(mu))
    if not bounded:
        return -inf
    return -val
