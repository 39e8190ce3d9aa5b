import math
import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from uorasim.backoff import TriggerDecision, UoraState, initialize
from uorasim.errors import ConfigError


def eligible_reference(obo, n_ra):
    return n_ra > 0 and obo <= n_ra


class TestInitialize:
    def test_table_window(self, rng):
        state = initialize(5, 7, rng)
        assert state.ocw == 31
        assert 0 <= state.obo <= 31

    def test_degenerate_window(self, rng):
        state = initialize(0, 0, rng)
        assert (state.ocw, state.obo) == (0, 0)
        assert state.process_trigger(1) is TriggerDecision.TRANSMIT

    def test_bad_exponents(self, rng):
        with pytest.raises(ConfigError):
            initialize(6, 5, rng)

    def test_initial_obo_uniform(self):
        rng = random.Random(2024)
        counts = Counter(initialize(5, 7, rng).obo for _ in range(100_000))
        assert set(counts) == set(range(32))
        assert chisquare([counts[k] for k in range(32)]).pvalue > 0.01


class TestProcessTrigger:
    @pytest.mark.parametrize(
        "obo,n_ra,decision,after",
        [
            (15, 3, TriggerDecision.DEFER, 12),
            (1, 3, TriggerDecision.TRANSMIT, 0),
            (5, 3, TriggerDecision.DEFER, 2),
            (0, 1, TriggerDecision.TRANSMIT, 0),
            (3, 3, TriggerDecision.TRANSMIT, 0),
            (7, 0, TriggerDecision.DEFER, 7),
        ],
    )
    def test_examples(self, obo, n_ra, decision, after):
        state = UoraState(5, 7, 31, obo)
        assert state.process_trigger(n_ra) is decision
        assert state.obo == after

    def test_exchange_tables(self):
        before = {1: 15, 2: 1, 3: 2, 4: 5, 6: 7, 8: 3}
        after = {}
        transmit = set()
        for aid, obo in before.items():
            state = UoraState(5, 7, 31, obo)
            if state.process_trigger(3) is TriggerDecision.TRANSMIT:
                transmit.add(aid)
            after[aid] = state.obo
        assert after == {1: 12, 2: 0, 3: 0, 4: 2, 6: 4, 8: 0}
        assert transmit == {2, 3, 8}

    def test_matches_brute_force_predicate(self):
        for obo in range(201):
            for n_ra in range(17):
                state = UoraState(7, 7, 255, obo)
                decision = state.process_trigger(n_ra)
                assert (decision is TriggerDecision.TRANSMIT) == eligible_reference(obo, n_ra)
                assert state.obo <= obo

    @given(st.integers(0, 127), st.integers(1, 16))
    def test_no_starvation(self, obo, n_ra):
        state = UoraState(5, 7, 127, obo)
        bound = math.ceil(state.ocw_max / n_ra) + 1
        for _ in range(bound):
            if state.process_trigger(n_ra) is TriggerDecision.TRANSMIT:
                return
        pytest.fail("station never became eligible")


class TestSelectRaRu:
    def test_single(self, rng):
        assert UoraState(5, 7, 31, 0).select_ra_ru([4], rng) == 4

    def test_empty(self, rng):
        with pytest.raises(ValueError):
            UoraState(5, 7, 31, 0).select_ra_ru([], rng)

    def test_two_stations_can_pick_same_ru(self):
        rng = random.Random(1)
        picks = [(UoraState(5, 7, 31, 0).select_ra_ru([0, 1, 2], rng),
                  UoraState(5, 7, 31, 0).select_ra_ru([0, 1, 2], rng)) for _ in range(100)]
        assert any(a == b for a, b in picks)

    def test_uniform(self):
        rng = random.Random(99)
        state = UoraState(5, 7, 31, 0)
        n = 100_000
        counts = Counter(state.select_ra_ru([10, 11, 12], rng) for _ in range(n))
        sigma = math.sqrt(n * (1 / 3) * (2 / 3))
        for ru in (10, 11, 12):
            assert abs(counts[ru] - n / 3) <= 3 * sigma


class TestOcwUpdates:
    def test_success_resets(self, rng):
        state = UoraState(5, 7, 127, 0)
        state.on_success(rng)
        assert state.ocw == 31
        state.on_success(rng)
        assert state.ocw == 31

    def test_success_obo_bounded(self):
        rng = random.Random(5)
        state = UoraState(5, 7, 127, 0)
        for _ in range(100_000):
            state.on_success(rng)
            assert 0 <= state.obo <= 31

    def test_failure_doubles(self, rng):
        state = UoraState(5, 7, 31, 0)
        state.on_failure(rng)
        assert state.ocw == 63

    def test_failure_capped(self, rng):
        state = UoraState(5, 7, 127, 0)
        state.on_failure(rng)
        assert state.ocw == 127

    def test_consecutive_failures(self):
        rng = random.Random(3)
        for lo in range(8):
            for hi in range(lo, 8):
                state = initialize(lo, hi, rng)
                for j in range(1, 11):
                    state.on_failure(rng)
                    assert state.ocw == min(2 ** (lo + j) - 1, 2**hi - 1)
                    assert 0 <= state.obo <= state.ocw

    @given(st.integers(0, 7), st.integers(0, 7), st.lists(st.booleans(), max_size=60), st.integers())
    def test_window_shape_invariant(self, a, b, outcomes, seed):
        lo, hi = min(a, b), max(a, b)
        rng = random.Random(seed)
        state = initialize(lo, hi, rng)
        shapes = {2**k - 1 for k in range(lo, hi + 1)}
        for ok in outcomes:
            state.process_trigger(rng.randint(0, 9))
            if ok:
                state.on_success(rng)
            else:
                state.on_failure(rng)
            assert state.ocw in shapes
            assert 0 <= state.obo <= state.ocw
