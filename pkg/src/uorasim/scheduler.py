"""AP-side round-robin scheduler for BSRP and Basic trigger frames.

Polling (BSRP) and data (Basic) resources are allocated separately: every
Basic TF re-plans the whole RU layout, so RUs that collided or stayed idle
while polling are reused for data in the same exchange.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from uorasim.errors import ConfigError
from uorasim.phy import Reception, RuLayout, RuOutcome
from uorasim.wire_formats import (
    RA_AID,
    BufferStatusReport,
    RuAllocation,
    TriggerFrame,
    TriggerVariant,
)


@dataclass
class SchedulerPolicy:
    n_ra_bsrp: int = 9
    n_ra_basic: int = 0
    allow_stale_allocation: bool = True
    # Fill the non-RA RUs of a BSRP TF with scheduled polls; when off they stay unallocated.
    sa_polling: bool = True

    def validate(self, layout: RuLayout) -> None:
        if layout.count < 1:
            raise ConfigError("RU layout is empty")
        if not 0 <= self.n_ra_bsrp <= layout.count:
            raise ConfigError(f"n_ra_bsrp={self.n_ra_bsrp} outside 0..{layout.count}")
        if not 0 <= self.n_ra_basic <= layout.count:
            raise ConfigError(f"n_ra_basic={self.n_ra_basic} outside 0..{layout.count}")


@dataclass
class BufferStatus:
    queue_bytes: int
    fresh: bool = True


@dataclass
class RoundRobinScheduler:
    layout: RuLayout
    policy: SchedulerPolicy
    associated: list[int] = field(default_factory=list)
    cursor: int = 0
    buffer_status: dict[int, BufferStatus] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.policy.validate(self.layout)
        if len(set(self.associated)) != len(self.associated):
            raise ConfigError("duplicate AID in association list")
        self.associated = list(self.associated)
        self.advance_round()

    # -- association bookkeeping -------------------------------------------

    def advance_round(self) -> None:
        self.cursor = self.cursor % len(self.associated) if self.associated else 0

    def associate(self, aid: int) -> None:
        if aid in self.associated:
            return
        self.associated.append(aid)

    def disassociate(self, aid: int) -> None:
        if aid not in self.associated:
            return
        idx = self.associated.index(aid)
        del self.associated[idx]
        self.buffer_status.pop(aid, None)
        if idx < self.cursor:
            self.cursor -= 1
        self.advance_round()

    def set_cursor_to(self, aid: int) -> None:
        self.cursor = self.associated.index(aid)

    def rr_order(self, aids: Iterable[int] | None = None) -> list[int]:
        """Associated AIDs starting at the cursor, optionally filtered."""
        n = len(self.associated)
        order = [self.associated[(self.cursor + i) % n] for i in range(n)]
        if aids is None:
            return order
        wanted = set(aids)
        return [a for a in order if a in wanted]

    def _advance_past(self, aid: int) -> None:
        self.cursor = (self.associated.index(aid) + 1) % len(self.associated)

    # -- trigger construction ----------------------------------------------

    def build_bsrp_trigger(self, candidates: Iterable[int] | None = None) -> TriggerFrame:
        layout, policy = self.layout, self.policy
        allocs = [RuAllocation(i, layout.ru_tones, RA_AID) for i in range(policy.n_ra_bsrp)]
        free = list(range(policy.n_ra_bsrp, layout.count))
        if policy.sa_polling and free:
            polled = self.rr_order(candidates)[: len(free)]
            for ru, aid in zip(free, polled):
                allocs.append(RuAllocation(ru, layout.ru_tones, aid))
            # Surplus RUs are opened to random access rather than wasted.
            for ru in free[len(polled):]:
                allocs.append(RuAllocation(ru, layout.ru_tones, RA_AID))
            if polled:
                self._advance_past(polled[-1])
        allocs.sort(key=lambda a: a.ru_index)
        return TriggerFrame(TriggerVariant.BSRP, 0, tuple(allocs))

    def ingest_bsr_results(self, reports: Iterable[BufferStatusReport] | Mapping[int, int]) -> None:
        """Record decoded BSRs; everything not reported now becomes stale."""
        if isinstance(reports, Mapping):
            reports = [BufferStatusReport(a, b) for a, b in reports.items()]
        for status in self.buffer_status.values():
            status.fresh = False
        for bsr in reports:
            if bsr.aid not in self.associated:
                continue
            self.buffer_status[bsr.aid] = BufferStatus(bsr.queue_bytes, fresh=True)

    def data_candidates(self) -> list[int]:
        fresh = [a for a in self.rr_order() if self._wants(a, fresh=True)]
        stale = []
        if self.policy.allow_stale_allocation:
            stale = [a for a in self.rr_order() if self._wants(a, fresh=False)]
        return fresh + stale

    def _wants(self, aid: int, fresh: bool) -> bool:
        status = self.buffer_status.get(aid)
        return status is not None and status.fresh == fresh and status.queue_bytes > 0

    def build_basic_trigger(self) -> TriggerFrame:
        """Grant data RUs: fresh nonzero reports first, then stale ones.

        Grants are laid out over the RUs in round-robin order from the cursor.
        Returns a TF with no allocations when nothing is schedulable.
        """
        layout, policy = self.layout, self.policy
        slots = layout.count - policy.n_ra_basic
        chosen = self.data_candidates()[:slots]
        granted = self.rr_order(chosen)
        allocs = [RuAllocation(i, layout.ru_tones, RA_AID) for i in range(policy.n_ra_basic)]
        for offset, aid in enumerate(granted):
            allocs.append(RuAllocation(policy.n_ra_basic + offset, layout.ru_tones, aid))
        if granted:
            self._advance_past(granted[-1])
        return TriggerFrame(TriggerVariant.BASIC, 0, tuple(allocs))

    def known_bytes(self, aid: int) -> int:
        status = self.buffer_status.get(aid)
        return status.queue_bytes if status else 0

    def record_delivery(self, aid: int, delivered_bytes: int, transmitted: bool = True) -> None:
        """Deduct delivered bytes; a granted STA that sent nothing is taken as empty."""
        status = self.buffer_status.get(aid)
        if status is None:
            return
        if not transmitted:
            status.queue_bytes = 0
            return
        status.queue_bytes = max(0, status.queue_bytes - delivered_bytes)


def rescheduled_ru_count(basic_tf: TriggerFrame, bsr_outcomes: Mapping[int, RuOutcome]) -> int:
    """Number of RUs wasted while polling that carry a data grant in ``basic_tf``."""
    wasted = {ru for ru, o in bsr_outcomes.items() if o.kind is not Reception.SUCCESS}
    return sum(1 for a in basic_tf.allocations if a.aid != RA_AID and a.ru_index in wasted)
