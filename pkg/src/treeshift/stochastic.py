"""Reproducible Monte-Carlo over tree-indexed chains.

Randomness contract: the uniform for BFS node i is a pure function of
(seed, trial, level, offset) through a Philox-4x64 stream keyed by
(seed, trial << 32 | level), drawing the whole level in offset order.  Since
BFS index = level start + offset, trees are reproducible and independent of
evaluation order, and trials or levels may be generated in parallel without
changing a single draw.  Generator name recorded in reports: "philox4x64".
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .alphabet_graph import PeriodStructure, find_a0_and_period
from .errors import TooLarge
from .rate_function import WeightedChainModel, lln_limit
from .tree_core import LabeledTree, TreeShape, lattice_size

GENERATOR_NAME = "philox4x64"
DEFAULT_SAMPLE_CAP = 2**25


@dataclass(frozen=True)
class SampleConfig:
    """Depth, trial count, seed, and root law for sampling runs."""

    depth: int
    trials: int = 1
    seed: int = 0
    root: int | np.ndarray = 0
    node_cap: int = DEFAULT_SAMPLE_CAP

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")

    def check_size(self, d: int) -> int:
        count = lattice_size(d, self.depth)
        if count > self.node_cap:
            raise TooLarge(f"|Lambda({self.depth})| = {count} exceeds cap {self.node_cap}")
        return count


def _level_stream(seed: int, trial: int, level: int) -> np.random.Generator:
    key = np.array(
        [np.uint64(seed & (2**64 - 1)), (np.uint64(trial) << np.uint64(32)) | np.uint64(level)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _root_label(chain: WeightedChainModel, config: SampleConfig, trial: int) -> int:
    if isinstance(config.root, (int, np.integer)):
        return int(config.root)
    pi = np.asarray(config.root, dtype=float)
    u = float(_level_stream(config.seed, trial, 0).random(1)[0])
    return int(min(np.searchsorted(np.cumsum(pi), u, side="right"), pi.size - 1))


def _next_level(chain, parents: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of one full level given the parent labels per slot."""
    cum = np.cumsum(chain.M, axis=0)
    thresholds = cum[:, parents]
    labels = (u[None, :] >= thresholds).sum(axis=0)
    return np.minimum(labels, chain.base.n_symbols - 1).astype(np.int16)


def sample_tree(chain: WeightedChainModel, config: SampleConfig, trial: int = 0) -> LabeledTree:
    """One labeled tree, BFS order, fully materialized (guarded by the node cap)."""
    d = chain.arity
    config.check_size(d)
    levels = [np.array([_root_label(chain, config, trial)], dtype=np.int16)]
    for k in range(1, config.depth + 1):
        parents = np.repeat(levels[-1], d)
        u = _level_stream(config.seed, trial, k).random(d**k)
        levels.append(_next_level(chain, parents, u))
    labels = np.concatenate(levels)
    return LabeledTree(TreeShape(d, config.depth, node_cap=config.node_cap), labels)


def _streamed_level_sums(chain: WeightedChainModel, config: SampleConfig, trial: int):
    """Per-level log-weight sums without keeping more than one level alive.

    Yields (level, sum of log W over edges into that level).  Draws are
    identical to ``sample_tree``'s by the randomness contract.
    """
    d = chain.arity
    sup = chain.base.adjacency == 1
    log_w = np.zeros_like(chain.W)
    log_w[sup] = np.log(chain.W[sup])
    current = np.array([_root_label(chain, config, trial)], dtype=np.int16)
    for k in range(1, config.depth + 1):
        parents = np.repeat(current, d)
        u = _level_stream(config.seed, trial, k).random(d**k)
        current = _next_level(chain, parents, u)
        yield k, float(log_w[current, parents].sum())


def running_means(chain: WeightedChainModel, config: SampleConfig, trial: int) -> np.ndarray:
    """Sample means by depth m = 0..depth for one trial (streaming, cap-free)."""
    d = chain.arity
    out = np.zeros(config.depth + 1)
    acc = 0.0
    for k, level_sum in _streamed_level_sums(chain, config, trial):
        acc += level_sum
        out[k] = acc / lattice_size(d, k)
    return out


@dataclass(frozen=True)
class PhaseCheck:
    phase: int
    depth: int
    target: float
    empirical: float
    stderr: float
    z_score: float
    passed: bool


@dataclass(frozen=True)
class ExperimentReport:
    trial_means: np.ndarray
    depth_means: np.ndarray          # trials x (depth+1)
    empirical_mean: float
    stderr: float
    phase_checks: tuple[PhaseCheck, ...]
    passed: bool
    generator: str
    seed: int


def _all_running_means(chain, config, threads: int = 1) -> np.ndarray:
    trials = range(config.trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda t: running_means(chain, config, t), trials))
    else:
        rows = [running_means(chain, config, t) for t in trials]
    return np.vstack(rows)  # trial order fixed regardless of worker count


def lln_experiment(
    chain: WeightedChainModel,
    config: SampleConfig,
    period: PeriodStructure | None = None,
    threads: int = 1,
    sigma: float = 3.0,
) -> ExperimentReport:
    """Compare sampled running means against the almost-sure phase limits.

    Means at depths congruent to j mod p are tested against the phase-j
    limit; aperiodic chains get a single check at the full depth.
    """
    if period is None:
        period = find_a0_and_period(chain.base)
    p = period.period
    depth_means = _all_running_means(chain, config, threads)
    trial_means = depth_means[:, -1]
    emp = float(trial_means.mean())
    se = float(trial_means.std(ddof=1) / sqrt(config.trials)) if config.trials > 1 else 0.0
    sup = chain.base.adjacency == 1
    log_w_scale = float(np.abs(np.log(chain.W[sup])).max(initial=0.0))

    checks = []
    for j in range(p):
        depth = max(m for m in range(config.depth + 1) if m % p == j % p and m > 0)
        target = lln_limit(chain, j, period)
        col = depth_means[:, depth]
        c_emp = float(col.mean())
        c_se = float(col.std(ddof=1) / sqrt(config.trials)) if config.trials > 1 else 0.0
        if c_se > 0:
            z = (c_emp - target) / c_se
        else:
            # degenerate sampling distribution: only the finite-depth
            # truncation bias, O(d^-depth), separates mean from limit
            allowance = max(1e-9, log_w_scale * (depth + 1) * chain.arity ** (-depth))
            z = 0.0 if abs(c_emp - target) <= allowance else float("inf")
        checks.append(
            PhaseCheck(
                phase=j, depth=depth, target=target, empirical=c_emp,
                stderr=c_se, z_score=float(z), passed=bool(abs(z) <= sigma),
            )
        )
    return ExperimentReport(
        trial_means=trial_means,
        depth_means=depth_means,
        empirical_mean=emp,
        stderr=se,
        phase_checks=tuple(checks),
        passed=all(c.passed for c in checks),
        generator=GENERATOR_NAME,
        seed=config.seed,
    )


@dataclass(frozen=True)
class TailReport:
    depths: tuple[int, ...]
    frequency: tuple[float, ...]
    log_rate: tuple[float, ...]       # (1/|Lambda(m)|) log freq, -inf when 0
    wilson_low: tuple[float, ...]
    wilson_high: tuple[float, ...]
    interval: tuple[float, float]
    trials: int


def _wilson(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1.0 + z**2 / n
    center = (phat + z**2 / (2 * n)) / denom
    half = z * sqrt(phat * (1 - phat) / n + z**2 / (4 * n**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def tail_estimate(
    chain: WeightedChainModel,
    config: SampleConfig,
    interval: tuple[float, float],
    period: PeriodStructure | None = None,
    threads: int = 1,
) -> TailReport:
    """Naive frequency estimate of P(mean in S | root) per depth.

    Validation-grade only: no importance sampling, so genuinely rare events
    need exponentially many trials.  Wilson intervals quantify that honestly.
    """
    lo, hi = interval
    depth_means = _all_running_means(chain, config, threads)
    d = chain.arity
    depths, freqs, rates, wlo, whi = [], [], [], [], []
    for m in range(1, config.depth + 1):
        hits = int(((depth_means[:, m] >= lo) & (depth_means[:, m] <= hi)).sum())
        freq = hits / config.trials
        size = lattice_size(d, m)
        depths.append(m)
        freqs.append(freq)
        rates.append(float(np.log(freq) / size) if freq > 0 else float("-inf"))
        w = _wilson(hits, config.trials)
        wlo.append(w[0])
        whi.append(w[1])
    return TailReport(
        depths=tuple(depths), frequency=tuple(freqs), log_rate=tuple(rates),
        wilson_low=tuple(wlo), wilson_high=tuple(whi),
        interval=(lo, hi), trials=config.trials,
    )
