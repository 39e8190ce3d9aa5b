import re
from collections import defaultdict

import pytest

from uorasim.analytics import cycle_time_estimate
from uorasim.config import SimConfig, offered_load_per_sta
from uorasim.engine import (
    EventQueue,
    Scenario,
    Simulator,
    format_trace,
    parse_trace,
    run,
    run_with_trace,
)
from uorasim.errors import ConfigError
from uorasim.scenarios import frame_exchange_example

SHORT = dict(sim_duration_us=300_000)


def exchange_outcome():
    config, scenario = frame_exchange_example()
    metrics, records = run_with_trace(config, scenario=scenario)
    rows = parse_trace(format_trace(records))
    after = {}
    for _, kind, actor, detail in rows:
        if kind == "obo" and detail.startswith("trigger"):
            after[int(actor[3:])] = int(re.match(r"trigger \d+->(\d+)", detail).group(1))
    rx = {}
    for _, kind, actor, detail in rows:
        if kind.startswith("rx_") and len(rx) < 4:
            ru = int(re.search(r"ru=(\d+)", detail).group(1))
            rx[ru] = (kind[3:], detail.split("aids=")[1])
    basic = next(d for _, k, _, d in rows if k == "tf_tx" and d.startswith("Basic"))
    grants = [int(x.split(":")[1]) for x in re.search(r"\[(.*)\]", basic).group(1).split()]
    return metrics, after, rx, grants


class TestFrameExchangeExample:
    def test_post_trigger_obo(self):
        _, after, _, _ = exchange_outcome()
        assert after == {1: 12, 2: 0, 3: 0, 4: 2, 6: 4, 8: 0}

    def test_bsr_reception(self):
        metrics, _, rx, _ = exchange_outcome()
        assert rx == {
            0: ("collision", "2,8"),
            1: ("idle", "-"),
            2: ("success", "3"),
            3: ("success", "5"),
        }
        assert (metrics.ra_success, metrics.ra_collision, metrics.ra_idle) == (1, 1, 1)

    def test_basic_grants(self):
        metrics, _, _, grants = exchange_outcome()
        assert grants == [6, 1, 3, 5]
        assert metrics.rescheduled_rus == 2
        assert set(k for k, v in metrics.delivered_mpdus.items() if v) == {1, 3, 5, 6}


class TestEventQueue:
    def test_order(self):
        q = EventQueue()
        fired = []
        q.schedule(5, lambda t: fired.append("b"), actor=2)
        q.schedule(5, lambda t: fired.append("a"), actor=0)
        q.schedule(1, lambda t: fired.append("first"), actor=9)
        q.schedule(5, lambda t: fired.append("c"), actor=2)
        while q:
            t, action = q.pop()
            action(t)
        assert fired == ["first", "a", "b", "c"]


class TestRun:
    def test_no_stations(self):
        m = run(SimConfig(n_stas=0, n_ra=9, **SHORT))
        assert m.throughput_mbps == 0
        assert m.cycles > 0
        assert m.ra_idle == m.ra_rus_offered == 9 * m.bsrp_tfs
        assert m.basic_tfs == 0

    def test_single_station_closed_form(self):
        config = SimConfig(n_stas=1, n_ra=1, eocw_min=0, eocw_max=0, **SHORT)
        m = run(config)
        cycle_us = cycle_time_estimate(config)
        assert m.delivered_mpdus[1] >= m.cycles - 1
        expected = config.payload_bytes * 8 / cycle_us
        assert m.throughput_mbps == pytest.approx(expected, rel=13.6 / cycle_us + 0.005)

    def test_determinism(self):
        config = SimConfig(n_stas=18, n_ra=3, **SHORT)
        a_metrics, a_trace = run_with_trace(config, seed=42)
        b_metrics, b_trace = run_with_trace(config, seed=42)
        assert a_metrics == b_metrics
        assert format_trace(a_trace) == format_trace(b_trace)
        assert run(config, seed=43) != a_metrics

    def test_adding_station_keeps_other_streams(self):
        a = Simulator(SimConfig(n_stas=3, **SHORT), seed=5)
        b = Simulator(SimConfig(n_stas=4, **SHORT), seed=5)
        for aid in (1, 2, 3):
            assert a.stations[aid].uora.obo == b.stations[aid].uora.obo
            assert a.stations[aid].next_arrival_ns == b.stations[aid].next_arrival_ns

    @pytest.mark.parametrize("traffic", ["cbr", "full_buffer"])
    @pytest.mark.parametrize("n_ra_basic", [0, 2])
    def test_accounting(self, traffic, n_ra_basic):
        config = SimConfig(n_stas=27, n_ra=3, traffic=traffic, n_ra_basic=n_ra_basic, **SHORT)
        m = run(config)
        assert sum(m.airtime_ns.values()) == m.duration_ns == 300_000_000
        assert m.total_delivered_bytes <= m.total_generated_bytes
        assert m.total_delivered_bytes > 0

    def test_offered_load(self):
        assert offered_load_per_sta(SimConfig()) == 1700 * 8 / 520
        assert offered_load_per_sta(SimConfig(payload_bytes=0)) == 0
        assert offered_load_per_sta(SimConfig(payload_bytes=850)) * 2 == offered_load_per_sta(SimConfig())

    @pytest.mark.parametrize(
        "changes",
        [dict(n_ra=10), dict(mu_edca_aifsn=2), dict(mu_edca_timer_us=1000),
         dict(bandwidth_mhz=25), dict(eocw_min=6, eocw_max=5), dict(traffic="poisson"),
         dict(gi_us=0.7)],
    )
    def test_invalid_config(self, changes):
        with pytest.raises(ConfigError):
            SimConfig(**changes)

    def test_partial_run_by_cycles(self):
        config, scenario = frame_exchange_example()
        m = run(config, scenario=scenario)
        assert m.cycles == 1
        assert sum(m.airtime_ns.values()) == m.duration_ns


@pytest.fixture(scope="module")
def traced():
    config = SimConfig(n_stas=18, n_ra=3, n_ra_basic=2, **SHORT)
    metrics, records = run_with_trace(config, seed=9)
    return config, metrics, parse_trace(format_trace(records))


class TestTrace:
    def test_causality_and_order(self, traced):
        _, _, rows = traced
        times = [r[0] for r in rows]
        assert times == sorted(times)
        first_bsrp = next(i for i, r in enumerate(rows) if r[1] == "tf_tx")
        first_bsr = next(i for i, r in enumerate(rows) if r[1].endswith("bsr_tx"))
        assert first_bsrp < first_bsr

    def test_obo_transitions_explained(self, traced):
        _, _, rows = traced
        current = {}
        for _, kind, actor, detail in rows:
            if kind != "obo":
                continue
            cause = detail.split()[0]
            assert cause in {"init", "trigger", "success", "failure"}
            if cause == "init":
                current[actor] = int(re.search(r"obo=(\d+)", detail).group(1))
            elif cause == "trigger":
                before, after = map(int, re.match(r"trigger (\d+)->(\d+)", detail).groups())
                assert before == current[actor]
                current[actor] = after
            else:
                current[actor] = int(re.search(r"obo=(\d+)", detail).group(1))

    def test_data_only_with_grant_or_ra(self, traced):
        _, _, rows = traced
        allowed = {}
        for _, kind, actor, detail in rows:
            if kind == "tf_tx" and detail.startswith("Basic"):
                pairs = re.search(r"\[(.*)\]", detail).group(1).split()
                allowed = defaultdict(set)
                for p in pairs:
                    ru, aid = map(int, p.split(":"))
                    allowed[aid].add(ru)
            elif kind == "data_tx":
                aid = int(actor[3:])
                ru = int(re.search(r"ru=(\d+)", detail).group(1))
                assert ru in allowed.get(aid, set()) or ru in allowed.get(0, set())

    def test_replay(self, traced):
        config, metrics, rows = traced
        again, records = run_with_trace(config, seed=9)
        assert parse_trace(format_trace(records)) == rows
        assert again == metrics
