"""Analytic cross-checks for the simulator.

Random-access outcomes follow a balls-in-bins law: ``n`` stations each pick
one of ``m`` RUs uniformly, and an RU succeeds when exactly one station
picked it. Throughput is estimated from the duration model plus a Monte
Carlo of the back-off and scheduler state machines, without the event loop.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from uorasim.backoff import TriggerDecision, UoraState
from uorasim.config import SimConfig, ul_length_us
from uorasim.phy import Reception, resolve_reception, us_to_ns
from uorasim.scheduler import RoundRobinScheduler
from uorasim.wire_formats import BufferStatusReport

EXACT_LIMIT = 10**7


def expected_success_count(n: int, m: int) -> float:
    """Expected number of RUs chosen by exactly one of ``n`` stations."""
    if m < 1:
        raise ValueError("need at least one RU")
    if n <= 0:
        return 0.0
    if m == 1:
        return 1.0 if n == 1 else 0.0
    return n * (1 - 1 / m) ** (n - 1)


@dataclass
class SuccessDistribution:
    probs: dict[int, float]
    exact: bool
    mean: float
    # standard error of ``mean``; zero for the exact method
    mean_stderr: float = 0.0


def _exact_counts(n: int, m: int) -> list[int]:
    """counts[k] = number of the m**n assignments with exactly k singleton RUs."""
    # ways[j][s]: j balls placed in the RUs seen so far, s of those RUs singletons
    ways = [[0] * (m + 1) for _ in range(n + 1)]
    ways[0][0] = 1
    for bin_idx in range(m):
        nxt = [[0] * (m + 1) for _ in range(n + 1)]
        for j in range(n + 1):
            for s in range(bin_idx + 1):
                w = ways[j][s]
                if not w:
                    continue
                for c in range(n - j + 1):
                    nxt[j + c][s + (c == 1)] += w * math.comb(n - j, c)
        ways = nxt
    return ways[n]


def success_distribution(
    n: int, m: int, method: str = "auto", samples: int = 10**6, seed: int = 0
) -> SuccessDistribution:
    if m < 1 or n < 0:
        raise ValueError("need n >= 0 and m >= 1")
    if method == "auto":
        method = "exact" if m**n <= EXACT_LIMIT else "mc"
    if method == "exact":
        counts = _exact_counts(n, m)
        total = m**n
        probs = {k: float(Fraction(c, total)) for k, c in enumerate(counts) if c}
        mean = float(Fraction(sum(k * c for k, c in enumerate(counts)), total))
        return SuccessDistribution(probs, True, mean)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    return _monte_carlo(n, m, samples, seed)


def _monte_carlo(n: int, m: int, samples: int, seed: int) -> SuccessDistribution:
    rng = np.random.default_rng(seed)
    hist = np.zeros(min(n, m) + 1, dtype=np.int64)
    chunk = max(1, min(samples, 2_000_000 // max(n, 1)))
    done = 0
    while done < samples:
        rows = min(chunk, samples - done)
        if n == 0:
            hist[0] += rows
        else:
            picks = rng.integers(0, m, size=(rows, n))
            flat = picks + (np.arange(rows)[:, None] * m)
            occupancy = np.bincount(flat.ravel(), minlength=rows * m).reshape(rows, m)
            singles = (occupancy == 1).sum(axis=1)
            hist += np.bincount(singles, minlength=hist.size)
        done += rows
    ks = np.arange(hist.size)
    p = hist / samples
    mean = float((ks * p).sum())
    var = float((ks**2 * p).sum()) - mean**2
    probs = {int(k): float(v) for k, v in zip(ks, p) if v > 0}
    return SuccessDistribution(probs, False, mean, math.sqrt(max(var, 0.0) / samples))


# -- cycle time and throughput ----------------------------------------------


def cycle_time_ns(config: SimConfig, n_bsrp_allocs: int, n_bsr_acked: int,
                  n_basic_allocs: int, n_data_acked: int, data_mpdus: int) -> int:
    """Airtime of one exchange, excluding beacons.

    With no Basic TF allocations the exchange stops after the first M-BA.
    """
    phy = config.phy
    sifs = us_to_ns(config.sifs_us)
    t = (
        us_to_ns(config.access_req_interval_us)
        + phy.trigger_duration_ns(n_bsrp_allocs)
        + ul_length_us(config.bsr_duration_ns()) * 1000
        + phy.block_ack_duration_ns(n_bsr_acked)
        + 2 * sifs
    )
    if n_basic_allocs:
        t += (
            phy.trigger_duration_ns(n_basic_allocs)
            + ul_length_us(config.data_duration_ns(max(data_mpdus, 1))) * 1000
            + phy.block_ack_duration_ns(n_data_acked)
            + 3 * sifs
        )
    return t


def cycle_time_estimate(config: SimConfig, n_grants: int | None = None) -> float:
    """Saturated cycle time in us with ``n_grants`` data grants (default: all RUs usable)."""
    count = config.layout.count
    if n_grants is None:
        n_grants = min(config.n_stas, count - config.n_ra_basic)
    if config.sa_polling:
        bsrp_allocs = count
    else:
        bsrp_allocs = config.n_ra
    acked = min(config.n_stas, count)
    basic_allocs = n_grants + config.n_ra_basic
    return cycle_time_ns(
        config, bsrp_allocs, acked, basic_allocs, n_grants, config.max_mpdus_per_grant
    ) / 1000


@dataclass
class SaturationEstimate:
    throughput: float  # bits/us
    mean_served: float  # successful data transmissions per exchange
    mean_cycle_us: float
    mean_ra_successes: float  # per BSRP TF
    cycles: int


def saturation_estimate(config: SimConfig, cycles: int = 10**6, seed: int = 0) -> SaturationEstimate:
    """Monte Carlo over exchanges with every station permanently backlogged."""
    rng = random.Random(seed)
    layout = config.layout
    payload = config.payload_bytes
    per_grant = config.max_mpdus_per_grant
    reported = config.queue_limit * payload
    aids = list(range(1, config.n_stas + 1))
    sched = RoundRobinScheduler(layout, config.policy, aids)
    states = {a: UoraState.initialize(config.eocw_min, config.eocw_max, rng) for a in aids}
    total_bits = 0
    total_ns = 0
    served = 0
    ra_succ = 0
    for _ in range(cycles):
        sched.advance_round()
        bsrp = sched.build_bsrp_trigger()
        sa = bsrp.sa_allocations()
        ra_rus = bsrp.ra_ru_indices()
        tx = []
        contenders = []
        for aid in aids:
            if aid in sa:
                tx.append((aid, sa[aid]))
            elif ra_rus and states[aid].process_trigger(len(ra_rus)) is TriggerDecision.TRANSMIT:
                tx.append((aid, states[aid].select_ra_ru(ra_rus, rng)))
                contenders.append(aid)
        outcomes = resolve_reception(tx, [a.ru_index for a in bsrp.allocations], config.capture)
        winners = {o.winner for o in outcomes.values() if o.kind is Reception.SUCCESS}
        ra_set = set(ra_rus)
        ra_succ += sum(1 for ru, o in outcomes.items() if ru in ra_set and o.kind is Reception.SUCCESS)
        sched.ingest_bsr_results([BufferStatusReport(a, reported) for a in sorted(winners)])
        for aid in contenders:
            if aid in winners:
                states[aid].on_success(rng)
            else:
                states[aid].on_failure(rng)

        basic = sched.build_basic_trigger()
        granted = basic.sa_allocations()
        data_ok = list(granted)
        if basic.n_ra:
            data_ra = basic.ra_ru_indices()
            ra_tx = []
            for aid in aids:
                if aid in granted:
                    continue
                if states[aid].process_trigger(len(data_ra)) is TriggerDecision.TRANSMIT:
                    ra_tx.append((aid, states[aid].select_ra_ru(data_ra, rng)))
            ra_out = resolve_reception(ra_tx, data_ra, config.capture)
            ra_win = {o.winner for o in ra_out.values() if o.kind is Reception.SUCCESS}
            for aid, _ in ra_tx:
                if aid in ra_win:
                    states[aid].on_success(rng)
                else:
                    states[aid].on_failure(rng)
            data_ok += sorted(ra_win)
        for aid in granted:
            sched.record_delivery(aid, per_grant * payload)
        served += len(data_ok)
        total_bits += len(data_ok) * per_grant * payload * 8
        total_ns += cycle_time_ns(
            config, len(bsrp.allocations), len(winners), len(basic.allocations),
            len(data_ok), per_grant,
        )
    return SaturationEstimate(
        throughput=total_bits / (total_ns / 1000) if total_ns else 0.0,
        mean_served=served / cycles if cycles else 0.0,
        mean_cycle_us=total_ns / 1000 / cycles if cycles else 0.0,
        mean_ra_successes=ra_succ / cycles if cycles else 0.0,
        cycles=cycles,
    )


def saturation_throughput_estimate(config: SimConfig, cycles: int = 10**6, seed: int = 0) -> float:
    """Estimated aggregate saturation throughput in bits/us."""
    return saturation_estimate(config, cycles, seed).throughput


def capacity_bound(config: SimConfig) -> float:
    """Upper bound: every RU carrying data at its PHY rate all the time."""
    rate = config.phy.rates.data_rate(config.ru_tones, config.mcs_index, config.gi_us)
    return config.layout.count * rate
