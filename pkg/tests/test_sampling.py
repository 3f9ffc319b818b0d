import numpy as np
import pytest

from dualrail.decoder import CLASSES, metrics_from_counts
from dualrail.protocols import experiments as ex
from dualrail.protocols.sampling import sample_records, sample_shots


@pytest.fixture(scope="module")
def dist(paper):
    return ex.run_spam(paper, 2, preps=("01",))["01"]


def test_no_shots_no_counts(dist):
    assert sum(sample_shots(dist, 0).values()) == 0
    assert sample_records(dist, 0) == []


def test_fixed_seed_is_deterministic(dist):
    assert sample_shots(dist, 5000, seed=7) == sample_shots(dist, 5000, seed=7)
    assert sample_records(dist, 50, seed=7) == sample_records(dist, 50, seed=7)


def test_sampled_frequencies_within_five_sigma(dist):
    n = 1_000_000
    counts = sample_shots(dist, n, seed=11)
    assert sum(counts.values()) == n
    norm = sum(dist.probs.values())
    for c in CLASSES:
        p = dist.probs[c] / norm
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(counts[c] - n * p) <= 5 * sigma + 1e-9


def test_sampled_metrics_match_exact(dist):
    counts = sample_shots(dist, 200_000, seed=2)
    m = metrics_from_counts(counts, "01")
    exact = dist.metrics()
    assert abs(m.erasure.value - exact.erasure.value) < 5 * m.erasure.sigma
