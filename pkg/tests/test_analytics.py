import itertools
from collections import Counter

import pytest

from uorasim.analytics import (
    capacity_bound,
    cycle_time_estimate,
    expected_success_count,
    saturation_estimate,
    success_distribution,
)
from uorasim.config import SimConfig


def brute_force(n, m):
    counts = Counter()
    for picks in itertools.product(range(m), repeat=n):
        occ = Counter(picks)
        counts[sum(1 for v in occ.values() if v == 1)] += 1
    total = m**n
    return {k: c / total for k, c in counts.items()}


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (3, 3), (4, 3), (5, 4), (3, 6), (6, 2)])
def test_exact_matches_enumeration(n, m):
    dist = success_distribution(n, m, method="exact")
    assert dist.probs == pytest.approx(brute_force(n, m), abs=1e-12)


def test_small_known_values():
    assert success_distribution(2, 2).probs == {0: 0.5, 2: 0.5}
    assert success_distribution(3, 3).mean == pytest.approx(4 / 3, abs=1e-12)
    assert expected_success_count(3, 3) == pytest.approx(4 / 3)
    assert expected_success_count(0, 5) == 0
    assert expected_success_count(1, 1) == 1


@pytest.mark.parametrize("n,m", [(9, 3), (12, 8), (5, 9), (20, 9), (7, 1)])
def test_exact_mean_formula(n, m):
    dist = success_distribution(n, m, method="exact")
    assert dist.mean == pytest.approx(expected_success_count(n, m), abs=1e-9)
    assert sum(dist.probs.values()) == pytest.approx(1, abs=1e-12)
    assert max(dist.probs) <= min(n, m)


@pytest.mark.parametrize("n,m", [(9, 3), (30, 9), (99, 9)])
def test_monte_carlo_agrees(n, m):
    mc = success_distribution(n, m, method="mc", samples=200_000, seed=3)
    assert not mc.exact
    assert abs(mc.mean - expected_success_count(n, m)) < 3 * mc.mean_stderr


def test_auto_switches_method():
    assert success_distribution(5, 5).exact
    assert not success_distribution(40, 9, samples=1000).exact


@pytest.mark.parametrize("n", [3, 5, 8])
def test_one_short_of_all_singletons_is_impossible(n):
    # n-1 singleton RUs would force the last station into a singleton too
    probs = success_distribution(n, n).probs
    assert n - 1 not in probs
    assert n in probs


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        expected_success_count(3, 0)
    with pytest.raises(ValueError):
        success_distribution(3, 3, method="other")


def test_estimate_below_capacity():
    config = SimConfig(n_stas=40, traffic="full_buffer")
    est = saturation_estimate(config, cycles=3000)
    assert 0 < est.throughput < capacity_bound(config)
    assert est.mean_served <= config.layout.count


def test_single_station_estimate_is_closed_form():
    config = SimConfig(n_stas=1, n_ra=1, eocw_min=0, eocw_max=0)
    est = saturation_estimate(config, cycles=500)
    bits = config.max_mpdus_per_grant * config.payload_bytes * 8
    assert est.throughput == pytest.approx(bits / cycle_time_estimate(config), rel=1e-12)


def test_wider_channel_scales():
    narrow = saturation_estimate(SimConfig(n_stas=99, n_ra=1), cycles=5000)
    wide = saturation_estimate(
        SimConfig(n_stas=99, n_ra=1, bandwidth_mhz=80, ru_tones=106), cycles=5000
    )
    assert 3.3 <= wide.throughput / narrow.throughput <= 4.5
