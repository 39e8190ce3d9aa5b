"""Discrete-event loop driving repeated UL OFDMA exchanges.

One exchange (a *cycle*) is::

    access gap | [beacon] | BSRP TF | SIFS | BSRs | SIFS | M-BA | SIFS |
    Basic TF | SIFS | data | SIFS | M-BA

The Basic TF half is skipped when the scheduler has nothing to grant.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

from uorasim.backoff import TriggerDecision, UoraState
from uorasim.config import SimConfig, ul_length_us
from uorasim.errors import UoraSimError
from uorasim.mu_edca import MuEdcaState
from uorasim.phy import Reception, RuOutcome, resolve_reception, us_to_ns
from uorasim.scheduler import BufferStatus, RoundRobinScheduler, rescheduled_ru_count
from uorasim.wire_formats import BufferStatusReport, TriggerFrame

AIRTIME_CATEGORIES = ("gap", "beacon", "tf", "bsr", "ba", "sifs", "data")

AP = "AP"


def station_rng(seed: int, aid: int) -> random.Random:
    """Independent stream per (seed, station) so adding STAs leaves others untouched."""
    digest = hashlib.sha256(f"uorasim/{seed}/{aid}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


class EventQueue:
    """Time-ordered events; equal times fire AP first, then by AID, then FIFO."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = itertools.count()

    def schedule(self, time_ns: int, action: Callable[[int], None], actor: int = 0) -> None:
        heapq.heappush(self._heap, (time_ns, actor, next(self._seq), action))

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> tuple[int, Callable[[int], None]]:
        time_ns, _, _, action = heapq.heappop(self._heap)
        return time_ns, action

    def __len__(self) -> int:
        return len(self._heap)


@dataclass(frozen=True)
class TraceRecord:
    time_ns: int
    kind: str
    actor: str
    detail: str

    def format(self) -> str:
        return f"{self.time_ns / 1000:.3f}\t{self.kind}\t{self.actor}\t{self.detail}"


@dataclass
class Scenario:
    """Scripted overrides used to replay hand-built exchanges."""

    initial_obo: Mapping[int, int] = field(default_factory=dict)
    # (cycle, aid) -> RA RU index picked in that cycle's BSRP TF.
    ru_choices: Mapping[tuple[int, int], int] = field(default_factory=dict)
    initial_queue_packets: Mapping[int, int] = field(default_factory=dict)
    # AP-side buffer statuses known before the run, all marked stale.
    ap_known_bytes: Mapping[int, int] = field(default_factory=dict)
    cursor_aid: int | None = None
    max_cycles: int | None = None


@dataclass
class Metrics:
    duration_ns: int = 0
    cycles: int = 0
    bsrp_tfs: int = 0
    basic_tfs: int = 0
    delivered_bytes: dict[int, int] = field(default_factory=dict)
    delivered_mpdus: dict[int, int] = field(default_factory=dict)
    generated_bytes: dict[int, int] = field(default_factory=dict)
    dropped_mpdus: dict[int, int] = field(default_factory=dict)
    delay_sum_ns: dict[int, int] = field(default_factory=dict)
    ra_success: int = 0
    ra_collision: int = 0
    ra_idle: int = 0
    data_ra_success: int = 0
    data_ra_collision: int = 0
    data_ra_idle: int = 0
    sa_polls: int = 0
    sa_grants: int = 0
    unallocated_rus: int = 0
    rescheduled_rus: int = 0
    # number of BSRP TFs that saw k RA successes / k RA collisions
    ra_success_hist: Counter = field(default_factory=Counter)
    ra_collision_hist: Counter = field(default_factory=Counter)
    airtime_ns: dict[str, int] = field(default_factory=lambda: dict.fromkeys(AIRTIME_CATEGORIES, 0))

    @property
    def duration_us(self) -> float:
        return self.duration_ns / 1000

    @property
    def total_delivered_bytes(self) -> int:
        return sum(self.delivered_bytes.values())

    @property
    def total_generated_bytes(self) -> int:
        return sum(self.generated_bytes.values())

    @property
    def throughput_mbps(self) -> float:
        """Aggregate application throughput in Mb/s (bits per microsecond)."""
        if not self.duration_ns:
            return 0.0
        return self.total_delivered_bytes * 8 / self.duration_us

    @property
    def ra_rus_offered(self) -> int:
        return self.ra_success + self.ra_collision + self.ra_idle

    def _ra_rate(self, count: int) -> float:
        offered = self.ra_rus_offered
        return count / offered if offered else 0.0

    @property
    def ra_success_rate(self) -> float:
        return self._ra_rate(self.ra_success)

    @property
    def ra_collision_rate(self) -> float:
        return self._ra_rate(self.ra_collision)

    @property
    def ra_idle_rate(self) -> float:
        return self._ra_rate(self.ra_idle)

    @property
    def mean_delay_us(self) -> float:
        """Mean enqueue-to-Block-Ack delay over all delivered MPDUs."""
        n = sum(self.delivered_mpdus.values())
        return sum(self.delay_sum_ns.values()) / n / 1000 if n else 0.0

    def mean_delay_us_of(self, aid: int) -> float:
        n = self.delivered_mpdus.get(aid, 0)
        return self.delay_sum_ns.get(aid, 0) / n / 1000 if n else 0.0


@dataclass
class Station:
    aid: int
    uora: UoraState
    mu_edca: MuEdcaState
    rng: random.Random
    queue: deque = field(default_factory=deque)
    next_arrival_ns: int | None = None
    ap_view_bytes: int = 0
    reported_bytes: int = 0


class Simulator:
    def __init__(
        self,
        config: SimConfig,
        seed: int | None = None,
        scenario: Scenario | None = None,
        trace: bool = False,
    ):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.scenario = scenario or Scenario()
        self.trace: list[TraceRecord] | None = [] if trace else None
        self.metrics = Metrics()

        cfg = config
        self.layout = cfg.layout
        self.sifs_ns = us_to_ns(cfg.sifs_us)
        self.gap_ns = us_to_ns(cfg.access_req_interval_us)
        self.end_ns = us_to_ns(cfg.sim_duration_us)
        self.beacon_interval_ns = us_to_ns(cfg.beacon_interval_us)
        self.interval_ns = us_to_ns(cfg.effective_packet_interval_us)
        self.payload = cfg.payload_bytes
        self.events = EventQueue()
        self.next_beacon_ns = 0
        self.cycle = 0
        self._phase = "gap"
        self._last_ns = 0

        aids = list(range(1, cfg.n_stas + 1))
        self.scheduler = RoundRobinScheduler(self.layout, cfg.policy, aids)
        self.stations: dict[int, Station] = {}
        for aid in aids:
            self.stations[aid] = self._make_station(aid)
        for aid, known in self.scenario.ap_known_bytes.items():
            self.scheduler.buffer_status[aid] = BufferStatus(known, fresh=False)
            self.stations[aid].ap_view_bytes = known
        if self.scenario.cursor_aid is not None:
            self.scheduler.set_cursor_to(self.scenario.cursor_aid)

        m = self.metrics
        for aid in aids:
            m.delivered_bytes[aid] = 0
            m.delivered_mpdus[aid] = 0
            m.dropped_mpdus[aid] = 0
            m.delay_sum_ns[aid] = 0
            m.generated_bytes.setdefault(aid, 0)

        # per-cycle scratch
        self._bsrp: TriggerFrame | None = None
        self._basic: TriggerFrame | None = None
        self._bsr_tx: dict[int, int] = {}
        self._bsr_reports: dict[int, int] = {}
        self._ra_contenders: set[int] = set()
        self._bsr_outcomes: dict[int, RuOutcome] = {}
        self._data_tx: dict[int, tuple[int, int]] = {}
        self._data_ra: set[int] = set()
        self._data_outcomes: dict[int, RuOutcome] = {}

    # -- setup --------------------------------------------------------------

    def _make_station(self, aid: int) -> Station:
        cfg = self.config
        rng = station_rng(self.seed, aid)
        uora = UoraState.initialize(cfg.eocw_min, cfg.eocw_max, rng)
        if aid in self.scenario.initial_obo:
            uora.obo = self.scenario.initial_obo[aid]
        mu = MuEdcaState()
        mu.apply_parameters(cfg.mu_edca_aifsn, None if cfg.mu_edca_timer_us is None
                            else us_to_ns(cfg.mu_edca_timer_us), 0)
        sta = Station(aid, uora, mu, rng)
        self._log(0, "obo", aid, f"init ocw={uora.ocw} obo={uora.obo}")
        for _ in range(self.scenario.initial_queue_packets.get(aid, 0)):
            self._enqueue(sta, 0)
        if cfg.traffic == "cbr":
            sta.next_arrival_ns = rng.randrange(self.interval_ns)
        elif cfg.traffic == "full_buffer":
            self._refill(sta, 0)
        return sta

    # -- traffic --------------------------------------------------------------

    def _enqueue(self, sta: Station, now: int) -> None:
        self.metrics.generated_bytes[sta.aid] = (
            self.metrics.generated_bytes.get(sta.aid, 0) + self.payload
        )
        if len(sta.queue) >= self.config.queue_limit:
            self.metrics.dropped_mpdus[sta.aid] = self.metrics.dropped_mpdus.get(sta.aid, 0) + 1
            return
        sta.queue.append(now)

    def _refill(self, sta: Station, now: int) -> None:
        while len(sta.queue) < self.config.queue_limit:
            self._enqueue(sta, now)

    def _sync_traffic(self, sta: Station, now: int) -> None:
        """Materialise CBR arrivals up to ``now`` (arrival times are exact)."""
        if self.config.traffic == "cbr":
            while sta.next_arrival_ns <= now:
                self._enqueue(sta, sta.next_arrival_ns)
                sta.next_arrival_ns += self.interval_ns
        elif self.config.traffic == "full_buffer":
            self._refill(sta, now)

    def _queue_bytes(self, sta: Station) -> int:
        return len(sta.queue) * self.payload

    def _has_news(self, sta: Station) -> bool:
        """Whether the STA holds data the AP does not know about yet."""
        if self.config.traffic == "full_buffer":
            return True
        return self._queue_bytes(sta) > sta.ap_view_bytes

    # -- bookkeeping ----------------------------------------------------------

    def _log(self, now: int, kind: str, actor, detail: str) -> None:
        if self.trace is not None:
            name = AP if actor == AP else f"STA{actor}"
            self.trace.append(TraceRecord(now, kind, name, detail))

    def _enter(self, phase: str) -> None:
        self._phase = phase

    def _charge(self, now: int) -> None:
        self.metrics.airtime_ns[self._phase] += now - self._last_ns
        self._last_ns = now

    def _at(self, when: int, action: Callable[[int], None]) -> None:
        self.events.schedule(when, action)

    # -- run ----------------------------------------------------------------

    def run(self) -> Metrics:
        for sta in self.stations.values():
            if sta.mu_edca.edca_enabled(0):
                raise UoraSimError(f"STA{sta.aid} would contend with EDCA")
        self._at(0, self._cycle_start)
        while self.events:
            when = self.events.peek_time()
            if when > self.end_ns:
                break
            when, action = self.events.pop()
            self._charge(when)
            action(when)
        self._charge(self.end_ns if self.events else self._last_ns)
        self.metrics.duration_ns = self._last_ns
        return self.metrics

    def _cycle_start(self, now: int) -> None:
        limit = self.scenario.max_cycles
        if limit is not None and self.cycle >= limit:
            return
        self._enter("gap")
        self._at(now + self.gap_ns, self._access_granted)

    def _access_granted(self, now: int) -> None:
        if now >= self.next_beacon_ns:
            self.next_beacon_ns += self.beacon_interval_ns
            self._enter("beacon")
            self._log(now, "beacon", AP, "")
            self._at(now + self.config.phy.control_frame_duration_ns(self.config.beacon_bytes),
                     self._send_bsrp)
        else:
            self._send_bsrp(now)

    # BSRP TF -> BSR phase

    def _send_bsrp(self, now: int) -> None:
        self.scheduler.advance_round()
        bsr_len = ul_length_us(self.config.bsr_duration_ns())
        tf = self.scheduler.build_bsrp_trigger()
        tf = TriggerFrame(tf.variant, bsr_len, tf.allocations)
        self._bsrp = tf
        self.metrics.bsrp_tfs += 1
        self.metrics.unallocated_rus += self.layout.count - len(tf.allocations)
        self._enter("tf")
        self._log(now, "tf_tx", AP, "BSRP " + _describe_tf(tf))
        self._at(now + self.config.phy.trigger_duration_ns(len(tf.allocations)), self._bsrp_received)

    def _bsrp_received(self, now: int) -> None:
        tf = self._bsrp
        sa = tf.sa_allocations()
        ra_rus = tf.ra_ru_indices()
        n_ra = len(ra_rus)
        tx: dict[int, int] = {}
        reports: dict[int, int] = {}
        contenders: set[int] = set()
        for aid, sta in self.stations.items():
            self._sync_traffic(sta, now)
            if aid in sa:
                tx[aid] = sa[aid]
                reports[aid] = self._queue_bytes(sta)
                self.metrics.sa_polls += 1
                continue
            if not self._has_news(sta) or n_ra == 0:
                continue
            before = sta.uora.obo
            decision = sta.uora.process_trigger(n_ra)
            self._log(now, "obo", aid, f"trigger {before}->{sta.uora.obo} n_ra={n_ra} {decision.value}")
            if decision is TriggerDecision.TRANSMIT:
                forced = self.scenario.ru_choices.get((self.cycle, aid))
                ru = forced if forced is not None else sta.uora.select_ra_ru(ra_rus, sta.rng)
                tx[aid] = ru
                reports[aid] = self._queue_bytes(sta)
                contenders.add(aid)
        self._bsr_tx, self._bsr_reports, self._ra_contenders = tx, reports, contenders
        self._enter("sifs")
        self._at(now + self.sifs_ns, self._bsr_start)

    def _bsr_start(self, now: int) -> None:
        for aid, ru in sorted(self._bsr_tx.items()):
            kind = "ra_bsr_tx" if aid in self._ra_contenders else "sa_bsr_tx"
            self._log(now, kind, aid, f"ru={ru} queue={self._bsr_reports[aid]}")
        self._enter("bsr")
        self._at(now + self._bsrp.ul_length_us * 1000, self._bsr_end)

    def _bsr_end(self, now: int) -> None:
        tf = self._bsrp
        outcomes = resolve_reception(
            sorted(self._bsr_tx.items()), [a.ru_index for a in tf.allocations],
            capture=self.config.capture,
        )
        self._bsr_outcomes = outcomes
        ra_set = set(tf.ra_ru_indices())
        succ = coll = 0
        received: dict[int, int] = {}
        for ru in sorted(outcomes):
            o = outcomes[ru]
            self._log(now, f"rx_{o.kind.value}", AP, f"ru={ru} aids={_aids(o.aids)}")
            if o.kind is Reception.SUCCESS:
                received[o.winner] = self._bsr_reports[o.winner]
            if ru in ra_set:
                if o.kind is Reception.SUCCESS:
                    succ += 1
                elif o.kind is Reception.COLLISION:
                    coll += 1
        m = self.metrics
        m.ra_success += succ
        m.ra_collision += coll
        m.ra_idle += len(ra_set) - succ - coll
        m.ra_success_hist[succ] += 1
        m.ra_collision_hist[coll] += 1
        self.scheduler.ingest_bsr_results(
            [BufferStatusReport(aid, min(b, 0xFFFFFFFF)) for aid, b in sorted(received.items())]
        )
        self._bsr_received = received
        self._enter("sifs")
        self._at(now + self.sifs_ns, self._send_bsr_ba)

    def _send_bsr_ba(self, now: int) -> None:
        acked = sorted(self._bsr_received)
        self._log(now, "ba_tx", AP, f"acked={_aids(acked)}")
        self._enter("ba")
        self._at(now + self.config.phy.block_ack_duration_ns(len(acked)), self._bsr_ba_received)

    def _bsr_ba_received(self, now: int) -> None:
        for aid in sorted(self._bsr_tx):
            sta = self.stations[aid]
            ok = aid in self._bsr_received
            if ok:
                sta.ap_view_bytes = self._bsr_reports[aid]
            if aid in self._ra_contenders:
                self._update_ocw(sta, ok, now)
        basic = self.scheduler.build_basic_trigger()
        if not basic.allocations:
            self._finish_cycle(now)
            return
        self._basic = basic
        self._enter("sifs")
        self._at(now + self.sifs_ns, self._send_basic)

    def _update_ocw(self, sta: Station, success: bool, now: int) -> None:
        before = sta.uora.ocw
        if success:
            sta.uora.on_success(sta.rng)
        else:
            sta.uora.on_failure(sta.rng)
        cause = "success" if success else "failure"
        self._log(now, "obo", sta.aid, f"{cause} ocw {before}->{sta.uora.ocw} obo={sta.uora.obo}")

    # Basic TF -> data phase

    def _send_basic(self, now: int) -> None:
        cfg = self.config
        tf = self._basic
        sa = tf.sa_allocations()
        longest = 0
        for aid in sa:
            known = self.scheduler.known_bytes(aid)
            planned = min(-(-known // self.payload), cfg.max_mpdus_per_grant)
            longest = max(longest, cfg.data_duration_ns(max(planned, 1)))
        if tf.n_ra:
            longest = max(longest, cfg.data_duration_ns(1))
        tf = TriggerFrame(tf.variant, ul_length_us(longest), tf.allocations)
        self._basic = tf
        m = self.metrics
        m.basic_tfs += 1
        m.sa_grants += len(sa)
        m.unallocated_rus += self.layout.count - len(tf.allocations)
        m.rescheduled_rus += rescheduled_ru_count(tf, self._bsr_outcomes)
        self._enter("tf")
        self._log(now, "tf_tx", AP, "Basic " + _describe_tf(tf))
        self._at(now + cfg.phy.trigger_duration_ns(len(tf.allocations)), self._basic_received)

    def _basic_received(self, now: int) -> None:
        cfg = self.config
        tf = self._basic
        sa = tf.sa_allocations()
        ra_rus = tf.ra_ru_indices()
        fits = cfg.mpdus_in(tf.ul_length_us * 1000)
        tx: dict[int, tuple[int, int]] = {}
        contenders: set[int] = set()
        for aid, sta in self.stations.items():
            self._sync_traffic(sta, now)
            n = min(len(sta.queue), fits)
            if aid in sa:
                tx[aid] = (sa[aid], n)
                continue
            if not ra_rus or not sta.queue:
                continue
            before = sta.uora.obo
            decision = sta.uora.process_trigger(len(ra_rus))
            self._log(now, "obo", aid,
                      f"trigger {before}->{sta.uora.obo} n_ra={len(ra_rus)} {decision.value}")
            if decision is TriggerDecision.TRANSMIT:
                tx[aid] = (sta.uora.select_ra_ru(ra_rus, sta.rng), n)
                contenders.add(aid)
        self._data_tx, self._data_ra = tx, contenders
        self._enter("sifs")
        self._at(now + self.sifs_ns, self._data_start)

    def _data_start(self, now: int) -> None:
        for aid, (ru, n) in sorted(self._data_tx.items()):
            self._log(now, "data_tx", aid, f"ru={ru} mpdus={n}")
        self._enter("data")
        self._at(now + self._basic.ul_length_us * 1000, self._data_end)

    def _data_end(self, now: int) -> None:
        tf = self._basic
        sending = [(aid, ru) for aid, (ru, n) in sorted(self._data_tx.items()) if n > 0]
        outcomes = resolve_reception(
            sending, [a.ru_index for a in tf.allocations], capture=self.config.capture
        )
        self._data_outcomes = outcomes
        ra_set = set(tf.ra_ru_indices())
        m = self.metrics
        for ru in sorted(outcomes):
            o = outcomes[ru]
            self._log(now, f"rx_{o.kind.value}", AP, f"ru={ru} aids={_aids(o.aids)}")
            if ru in ra_set:
                if o.kind is Reception.SUCCESS:
                    m.data_ra_success += 1
                elif o.kind is Reception.COLLISION:
                    m.data_ra_collision += 1
                else:
                    m.data_ra_idle += 1
        self._enter("sifs")
        self._at(now + self.sifs_ns, self._send_data_ba)

    def _data_winners(self) -> list[int]:
        return sorted(o.winner for o in self._data_outcomes.values() if o.kind is Reception.SUCCESS)

    def _send_data_ba(self, now: int) -> None:
        acked = self._data_winners()
        self._log(now, "ba_tx", AP, f"acked={_aids(acked)}")
        self._enter("ba")
        self._at(now + self.config.phy.block_ack_duration_ns(len(acked)), self._data_ba_received)

    def _data_ba_received(self, now: int) -> None:
        m = self.metrics
        winners = set(self._data_winners())
        sa = self._basic.sa_allocations()
        for aid, (ru, n) in sorted(self._data_tx.items()):
            sta = self.stations[aid]
            ok = aid in winners
            if ok:
                for _ in range(n):
                    m.delay_sum_ns[aid] += now - sta.queue.popleft()
                delivered = n * self.payload
                m.delivered_bytes[aid] += delivered
                m.delivered_mpdus[aid] += n
                sta.ap_view_bytes = max(0, sta.ap_view_bytes - delivered)
                sta.mu_edca.on_ofdma_success(now)
                self._log(now, "deliver", aid, f"mpdus={n} bytes={delivered}")
            if aid in sa:
                self.scheduler.record_delivery(aid, n * self.payload if ok else 0, transmitted=n > 0)
                if n == 0:
                    sta.ap_view_bytes = 0
            if aid in self._data_ra:
                self._update_ocw(sta, ok, now)
        self._finish_cycle(now)

    def _finish_cycle(self, now: int) -> None:
        self.cycle += 1
        self.metrics.cycles += 1
        for sta in self.stations.values():
            if sta.mu_edca.edca_enabled(now):
                raise UoraSimError(f"STA{sta.aid} re-enabled EDCA at {now} ns")
        self._cycle_start(now)


def _aids(aids) -> str:
    return ",".join(str(a) for a in sorted(aids)) or "-"


def _describe_tf(tf: TriggerFrame) -> str:
    alloc = " ".join(f"{a.ru_index}:{a.aid}" for a in tf.allocations)
    return f"ul_len={tf.ul_length_us} [{alloc}]"


def run(
    config: SimConfig,
    seed: int | None = None,
    scenario: Scenario | None = None,
    trace: bool = False,
) -> Metrics:
    return Simulator(config, seed, scenario, trace).run()


def run_with_trace(
    config: SimConfig, seed: int | None = None, scenario: Scenario | None = None
) -> tuple[Metrics, list[TraceRecord]]:
    sim = Simulator(config, seed, scenario, trace=True)
    metrics = sim.run()
    return metrics, sim.trace


def format_trace(records: list[TraceRecord]) -> str:
    return "".join(r.format() + "\n" for r in records)


def parse_trace(text: str) -> list[tuple[float, str, str, str]]:
    rows = []
    for line in text.splitlines():
        if not line:
            continue
        time_us, kind, actor, detail = line.split("\t", 3)
        rows.append((float(time_us), kind, actor, detail))
    return rows
