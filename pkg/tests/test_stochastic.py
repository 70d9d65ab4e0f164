from math import log, sqrt

import numpy as np
import pytest

from treeshift import (
    SampleConfig,
    chain_from_matrices,
    empirical_pair,
    find_a0_and_period,
    lln_experiment,
    lln_limit,
    sample_tree,
    tail_estimate,
    validate_admissible,
)
from treeshift.errors import TooLarge
from treeshift.oracle import exact_mean_distribution
from treeshift.stochastic import running_means


@pytest.fixture(scope="module")
def flat_chain():
    m = np.full((2, 2), 0.5)
    return chain_from_matrices(m, np.ones((2, 2)), d=2)


class TestSampleTree:
    def test_deterministic_column_forces_label(self, example1):
        # parent symbol 1 sends every child to symbol 0
        tree = sample_tree(example1, SampleConfig(depth=8, seed=5))
        shape = tree.shape
        for i in range(1, shape.node_count):
            if tree.labels[shape.parent(i)] == 1:
                assert tree.labels[i] == 0

    def test_reproducible_across_runs(self, example1):
        cfg = SampleConfig(depth=9, seed=123)
        a = sample_tree(example1, cfg, trial=7)
        b = sample_tree(example1, cfg, trial=7)
        assert np.array_equal(a.labels, b.labels)
        c = sample_tree(example1, cfg, trial=8)
        assert not np.array_equal(a.labels, c.labels)

    def test_streamed_means_match_full_tree(self, example1):
        cfg = SampleConfig(depth=8, seed=21)
        tree = sample_tree(example1, cfg, trial=2)
        means = running_means(example1, cfg, trial=2)
        from treeshift import sample_mean

        for m in range(1, 9):
            assert means[m] == pytest.approx(
                sample_mean(tree, example1.W, m), abs=1e-12
            )

    def test_sampled_trees_admissible(self, example1, example2):
        for chain in (example1, example2):
            for trial in range(5):
                tree = sample_tree(chain, SampleConfig(depth=7, seed=3), trial)
                validate_admissible(tree, chain.base)

    def test_root_distribution(self, example1):
        pi = np.array([0.25, 0.75])
        roots = [
            sample_tree(example1, SampleConfig(depth=1, seed=9, root=pi), t).labels[0]
            for t in range(400)
        ]
        frac = np.mean(np.array(roots) == 1)
        assert abs(frac - 0.75) < 3 * sqrt(0.25 * 0.75 / 400)

    def test_node_cap(self, example1):
        with pytest.raises(TooLarge):
            sample_tree(example1, SampleConfig(depth=26, seed=0))

    def test_level_frequencies_approach_stationary(self, example1):
        # stationary law of M is (2/3, 1/3)
        tree = sample_tree(example1, SampleConfig(depth=14, seed=77))
        level = tree.level_labels(14)
        frac = np.mean(level == 0)
        se = sqrt((2 / 3) * (1 / 3) / level.size)
        # tree-correlated samples: allow a generous factor over iid error
        assert abs(frac - 2 / 3) < 30 * se

    def test_empirical_transitions_approach_m(self, example1):
        tree = sample_tree(example1, SampleConfig(depth=12, seed=31))
        pair = empirical_pair(tree, example1.base)
        eta = pair.trans[11]
        counts = np.bincount(tree.level_labels(11), minlength=2)
        for b in range(2):
            if counts[b] == 0:
                continue
            se = sqrt(0.25 / (2 * counts[b]))
            assert np.abs(eta[:, b] - example1.M[:, b]).max() <= 3 * max(se, 1e-3)

    def test_empirical_transitions_decline_with_depth(self, example1):
        # distribution-free smoke: the deviation from M shrinks down the tree
        tree = sample_tree(example1, SampleConfig(depth=14, seed=19))
        pair = empirical_pair(tree, example1.base)
        early = np.abs(pair.trans[3] - example1.M).max()
        late = np.abs(pair.trans[13] - example1.M).max()
        assert late < early


class TestLlnExperiment:
    def test_example1_within_three_sigma(self, example1):
        cfg = SampleConfig(depth=12, trials=30, seed=2)
        report = lln_experiment(example1, cfg)
        assert report.passed
        check = report.phase_checks[0]
        assert check.target == pytest.approx(log(2) / 3, abs=1e-12)
        assert abs(check.empirical - check.target) <= 3 * check.stderr

    def test_thread_count_invariance(self, example1):
        cfg = SampleConfig(depth=11, trials=16, seed=4)
        serial = lln_experiment(example1, cfg, threads=1)
        parallel = lln_experiment(example1, cfg, threads=4)
        assert np.array_equal(serial.depth_means, parallel.depth_means)
        assert serial.phase_checks == parallel.phase_checks

    def test_extreme_parity_separation(self, extreme):
        period = find_a0_and_period(extreme.base)
        cfg = SampleConfig(depth=13, trials=8, seed=6)
        report = lln_experiment(extreme, cfg, period)
        targets = {c.phase: c for c in report.phase_checks}
        assert targets[0].target == pytest.approx(-log(2) / 3, abs=1e-12)
        assert targets[1].target == pytest.approx(-2 * log(2) / 3, abs=1e-12)
        assert report.passed
        # running means at consecutive depths straddle the two limits
        sep = np.abs(report.depth_means[:, -1] - report.depth_means[:, -2])
        assert np.all(sep > 0.2)

    def test_unit_weights_give_zero_means(self, flat_chain):
        report = lln_experiment(flat_chain, SampleConfig(depth=8, trials=5, seed=1))
        assert np.all(report.depth_means == 0.0)
        assert report.passed

    def test_trial_means_within_weight_range(self, example1):
        report = lln_experiment(example1, SampleConfig(depth=10, trials=20, seed=13))
        sup = example1.W > 0
        lo, hi = np.log(example1.W[sup]).min(), np.log(example1.W[sup]).max()
        assert np.all(report.trial_means >= lo - 1e-12)
        assert np.all(report.trial_means <= hi + 1e-12)


class TestTailEstimate:
    def test_whole_line(self, example1):
        report = tail_estimate(
            example1, SampleConfig(depth=6, trials=50, seed=3), (-1e9, 1e9)
        )
        assert all(f == 1.0 for f in report.frequency)
        assert all(r == 0.0 for r in report.log_rate)

    def test_concentration_near_limit(self, example1):
        # frequency of a fixed window around the limit grows toward 1
        star = lln_limit(example1, 0)
        report = tail_estimate(
            example1,
            SampleConfig(depth=10, trials=300, seed=8),
            (star - 0.02, star + 0.02),
        )
        assert report.frequency[-1] > 0.95
        assert report.frequency[-1] >= report.frequency[2]

    def test_moderate_deviation_matches_oracle(self, example1):
        # exact depth-5 probability of [0.28, 0.33] is ~0.0674
        exact = exact_mean_distribution(example1, 5, root=0).prob_in(0.28, 0.33)
        report = tail_estimate(
            example1, SampleConfig(depth=5, trials=4000, seed=11, root=0), (0.28, 0.33)
        )
        size = 63.0
        assert report.log_rate[-1] == pytest.approx(log(exact) / size, abs=0.1)
        assert report.wilson_low[-1] <= exact <= report.wilson_high[-1]

    def test_rare_event_reported_honestly(self, example1):
        # P([0.4, 0.45]) at depth 6 is ~1.1e-7: a naive estimator sees nothing,
        # and the report must say so rather than fake a rate
        report = tail_estimate(
            example1, SampleConfig(depth=6, trials=2000, seed=11, root=0), (0.4, 0.45)
        )
        assert report.frequency[-1] == 0.0
        assert report.log_rate[-1] == float("-inf")
        assert report.wilson_high[-1] >= 1.1e-7
