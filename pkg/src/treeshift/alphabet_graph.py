"""Symbolic model: adjacency matrix, period/partition structure, reachability.

Orientation convention, used everywhere in this package:

    rows index CHILDREN, columns index PARENTS.

``adjacency[a, b] == 1`` means a node labeled ``b`` may have a child labeled
``a``.  The parent-to-child digraph therefore has an edge b -> a exactly when
``adjacency[a, b] == 1``, and powers ``(A^n)[a, b] > 0`` count length-n
descendant chains from ``b`` down to ``a``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import gcd, log
from typing import Sequence

import numpy as np

from .errors import (
    A1Violated,
    ClassInconsistency,
    EmptyModel,
    ModelParseError,
    ModelValidationError,
    NoConvergence,
)

DEFAULT_MAX_SYMBOLS = 64


@dataclass(frozen=True)
class AdjacencyModel:
    """A 0/1 adjacency matrix over a named alphabet, plus the tree arity d."""

    symbols: tuple[str, ...]
    adjacency: np.ndarray
    arity: int

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ModelValidationError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] != len(self.symbols):
            raise ModelValidationError(
                f"{len(self.symbols)} symbols but adjacency is {adj.shape[0]}x{adj.shape[0]}"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise ModelValidationError("symbol names must be unique")
        bad = np.argwhere((adj != 0) & (adj != 1))
        if bad.size:
            r, c = bad[0]
            raise ModelValidationError(
                f"adjacency entries must be 0 or 1; offending entry at ({r}, {c})",
                row=int(r), col=int(c),
            )
        if self.arity < 2:
            raise ModelValidationError(f"arity must be >= 2, got {self.arity}")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    def children_of(self, b: int) -> np.ndarray:
        """Symbols admissible as children of parent symbol b."""
        return np.nonzero(self.adjacency[:, b])[0]

    def satisfies_a0(self) -> bool:
        """Every symbol admits at least one child (all column sums positive)."""
        return bool((self.adjacency.sum(axis=0) > 0).all())

    def submodel(self, keep: Sequence[int]) -> "AdjacencyModel":
        keep = list(keep)
        sub = self.adjacency[np.ix_(keep, keep)]
        return AdjacencyModel(tuple(self.symbols[i] for i in keep), sub, self.arity)


@dataclass(frozen=True)
class PeriodStructure:
    """Distinguished symbol a0, its period p, and the induced class partition.

    ``classes[j]`` holds the symbols reachable from a0 at generation distance
    congruent to j mod p; ``class_of[a]`` is that j, or -1 for symbols not
    reachable as descendants of a0.
    """

    a0: int
    period: int
    classes: tuple[frozenset[int], ...]
    class_of: tuple[int, ...]

    def class_mask(self, j: int, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[list(self.classes[j % self.period])] = True
        return mask


@dataclass(frozen=True)
class ReachabilityReport:
    """Descendant closures, the recurrent symbol set, and SCCs."""

    closures: tuple[frozenset[int], ...]
    recurrent: frozenset[int]
    scc_list: tuple[frozenset[int], ...]


def model_from_dict(data: dict, max_symbols: int = DEFAULT_MAX_SYMBOLS) -> AdjacencyModel:
    """Build a model from the JSON schema {"symbols", "adjacency", "d", ...}.

    ``adjacency`` is row-major with row = child.  Raises ModelParseError for
    missing/ill-typed fields and ModelValidationError (with row/column indices
    where possible) for structural violations.
    """
    if not isinstance(data, dict):
        raise ModelParseError("model document must be a JSON object")
    try:
        symbols = [str(s) for s in data["symbols"]]
        rows = data["adjacency"]
        d = int(data["d"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"model file needs 'symbols', 'adjacency', 'd': {exc}") from exc
    if len(symbols) > max_symbols:
        raise ModelValidationError(
            f"{len(symbols)} symbols exceeds the configured cap of {max_symbols}"
        )
    n = len(symbols)
    if not isinstance(rows, list) or len(rows) != n:
        raise ModelValidationError(f"adjacency must have {n} rows", row=len(rows) if isinstance(rows, list) else None)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ModelValidationError(f"adjacency row {i} must have {n} entries", row=i)
    return AdjacencyModel(tuple(symbols), np.array(rows), d)


def load_model(path) -> AdjacencyModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelParseError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(data)


def reduce_a0(model: AdjacencyModel) -> AdjacencyModel:
    """Largest principal submatrix whose column sums are all positive.

    Symbols with no admissible child can never label a node of an infinite
    tree; deleting them (to a fixpoint) leaves the tree-shift unchanged.
    """
    keep = np.arange(model.n_symbols)
    adj = model.adjacency
    while True:
        alive = adj.sum(axis=0) > 0
        if alive.all():
            break
        keep = keep[alive]
        if keep.size == 0:
            raise EmptyModel("every symbol was deleted: no column-positive submatrix exists")
        adj = adj[np.ix_(alive.nonzero()[0], alive.nonzero()[0])]
    if keep.size == model.n_symbols:
        return model
    return model.submodel(keep)


def _descendants(model: AdjacencyModel, start: int) -> tuple[set[int], dict[int, int]]:
    """BFS over parent->child edges; returns reached set and distances."""
    dist = {start: 0}
    queue = [start]
    while queue:
        b = queue.pop(0)
        for a in model.children_of(b):
            a = int(a)
            if a not in dist:
                dist[a] = dist[b] + 1
                queue.append(a)
    return set(dist), dist


def _sccs(model: AdjacencyModel) -> list[set[int]]:
    """Strongly connected components of the parent->child digraph (iterative Tarjan)."""
    n = model.n_symbols
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[set[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, iter(model.children_of(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                w = int(w)
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(model.children_of(w))))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.add(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def find_a0_and_period(model: AdjacencyModel, a0: int | None = None) -> PeriodStructure:
    """Pick a generating symbol, its period, and the mod-p class partition.

    A symbol qualifies as a0 when every symbol appears among its descendants.
    Ties break to the smallest index (the choice does not change the period
    or any quantity derived from the partition).  The period is the gcd of
    cycle lengths through a0, computed as gcd of dist(u)+1-dist(v) over edges
    u->v inside a0's strongly connected component.  Classes are BFS distance
    from a0 mod p; edge consistency of that labeling is verified and a
    ClassInconsistency is raised where the partition is ill-defined.
    """
    n = model.n_symbols
    if not model.satisfies_a0():
        raise ModelValidationError("model has empty columns; call reduce_a0 first")
    if a0 is None:
        candidate = None
        recurrent = set()
        for s in range(n):
            reached, _ = _descendants(model, s)
            if s in {int(a) for b in reached for a in model.children_of(b)}:
                recurrent.add(s)
            if len(reached) == n:
                candidate = s
                break
        if candidate is None:
            raise A1Violated(
                "no symbol generates every symbol as a descendant",
                recurrent=sorted(recurrent),
            )
        a0 = candidate
    reached, dist = _descendants(model, a0)
    if len(reached) != n:
        raise A1Violated(f"symbol {a0} does not generate every symbol", recurrent=())

    scc_of = {}
    for comp in _sccs(model):
        for v in comp:
            scc_of[v] = comp
    home = scc_of[a0]
    p = 0
    for u in home:
        for v in model.children_of(u):
            v = int(v)
            if v in home:
                p = gcd(p, dist[u] + 1 - dist[v])
    if p == 0:
        # a0 lies on no cycle; (A1) plus (A0) force a cycle somewhere below,
        # so this only happens for a0 outside every cycle, which (A1) forbids.
        raise A1Violated(f"symbol {a0} lies on no cycle", recurrent=())
    p = abs(p)

    class_of = [-1] * n
    for a, k in dist.items():
        class_of[a] = k % p
    for b in range(n):
        if class_of[b] < 0:
            continue
        for a in model.children_of(b):
            a = int(a)
            if class_of[a] != (class_of[b] + 1) % p:
                raise ClassInconsistency(
                    f"edge {b}->{a} breaks the mod-{p} class labeling", row=a, col=b
                )
    classes = tuple(
        frozenset(a for a in range(n) if class_of[a] == j) for j in range(p)
    )
    return PeriodStructure(a0=int(a0), period=p, classes=classes, class_of=tuple(class_of))


def is_irreducible(model: AdjacencyModel) -> bool:
    """True when the parent->child digraph is strongly connected."""
    return len(_sccs(model)) == 1


def reachability(model: AdjacencyModel) -> ReachabilityReport:
    """Descendant closures A^(a), the recurrent set, and the SCC list."""
    closures = []
    for a in range(model.n_symbols):
        reached, _ = _descendants(model, a)
        closures.append(frozenset(reached))
    sccs = tuple(frozenset(c) for c in _sccs(model))
    # a symbol is recurrent iff it lies on a directed cycle: its SCC is
    # nontrivial or it carries a self-loop
    recurrent = set()
    for comp in sccs:
        for a in comp:
            if len(comp) > 1 or model.adjacency[a, a]:
                recurrent.add(a)
    return ReachabilityReport(tuple(closures), frozenset(recurrent), sccs)


def linear_spectral_radius(
    w: np.ndarray, tol: float = 1e-12, max_iter: int = 10**5
) -> float:
    """log of the spectral radius of a nonnegative matrix.

    Decomposes into SCCs and takes the max Perron value over the diagonal
    blocks; raw power iteration on the full matrix can stall on nilpotent
    parts.  Each block is shifted by the identity so the iteration is
    primitive, and the Collatz-Wielandt bracket gives a certified enclosure.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ModelValidationError(f"matrix must be square, got {w.shape}")
    if (w < 0).any():
        raise ModelValidationError("matrix must be nonnegative")
    n = w.shape[0]
    helper = AdjacencyModel(tuple(str(i) for i in range(n)), (w > 0).astype(int), 2)
    best = -np.inf
    for comp in _sccs(helper):
        idx = sorted(comp)
        block = w[np.ix_(idx, idx)]
        if len(idx) == 1 and block[0, 0] == 0.0:
            continue
        rho = _perron_value(block, tol, max_iter)
        best = max(best, log(rho) if rho > 0 else -np.inf)
    return best


def _perron_value(block: np.ndarray, tol: float, max_iter: int) -> float:
    """Perron root of an irreducible nonnegative block via shifted power iteration."""
    m = block.shape[0]
    if m == 1:
        return float(block[0, 0])
    shifted = block + np.eye(m)
    x = np.ones(m)
    lo, hi = 0.0, np.inf
    for _ in range(max_iter):
        y = shifted @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        if hi - lo < tol:
            return 0.5 * (lo + hi) - 1.0
        x = y / y.sum()
    raise NoConvergence(
        f"Collatz-Wielandt bracket stagnated at width {hi - lo:.3e}",
        bracket=(lo - 1.0, hi - 1.0),
    )
