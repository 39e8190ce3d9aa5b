"""RU geometry, HE data rates, frame airtime and per-RU reception outcomes.

Durations are computed in integer nanoseconds so that airtime bookkeeping
stays exact; the ``*_us`` helpers convert for callers that want microseconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from uorasim.errors import ConfigError

# Number of RUs of each size per channel width.
RU_COUNTS: dict[tuple[int, int], int] = {
    (20, 26): 9, (20, 52): 4, (20, 106): 2, (20, 242): 1,
    (40, 26): 18, (40, 52): 8, (40, 106): 4, (40, 242): 2,
    (80, 26): 37, (80, 52): 16, (80, 106): 8, (80, 242): 4,
    (160, 26): 74, (160, 52): 32, (160, 106): 16, (160, 242): 8,
}

DATA_SUBCARRIERS = {26: 24, 52: 48, 106: 102, 242: 234}

# mcs -> (coded bits per subcarrier, coding rate)
HE_MCS = {
    0: (1, Fraction(1, 2)),
    1: (2, Fraction(1, 2)),
    2: (2, Fraction(3, 4)),
    3: (4, Fraction(1, 2)),
    4: (4, Fraction(3, 4)),
    5: (6, Fraction(2, 3)),
    6: (6, Fraction(3, 4)),
    7: (6, Fraction(5, 6)),
    8: (8, Fraction(3, 4)),
    9: (8, Fraction(5, 6)),
    10: (10, Fraction(3, 4)),
    11: (10, Fraction(5, 6)),
}

HE_SYMBOL_NO_GI_NS = 12_800
GUARD_INTERVALS_NS = (800, 1600, 3200)


def us_to_ns(value_us: float) -> int:
    ns = round(value_us * 1000)
    if abs(ns - value_us * 1000) > 1e-6:
        raise ConfigError(f"{value_us} us is not a whole number of nanoseconds")
    return ns


def ns_to_us(value_ns: int) -> float:
    return value_ns / 1000


@dataclass(frozen=True)
class RuLayout:
    bandwidth_mhz: int
    ru_tones: int
    count: int

    def __post_init__(self) -> None:
        expected = RU_COUNTS.get((self.bandwidth_mhz, self.ru_tones))
        if expected is None:
            raise ConfigError(
                f"unsupported RU geometry: {self.ru_tones}-tone in {self.bandwidth_mhz} MHz"
            )
        if self.count != expected:
            raise ConfigError(
                f"{self.bandwidth_mhz} MHz holds {expected} {self.ru_tones}-tone RUs, not {self.count}"
            )

    @classmethod
    def for_channel(cls, bandwidth_mhz: int, ru_tones: int) -> RuLayout:
        count = RU_COUNTS.get((bandwidth_mhz, ru_tones))
        if count is None:
            raise ConfigError(
                f"unsupported RU geometry: {ru_tones}-tone in {bandwidth_mhz} MHz"
            )
        return cls(bandwidth_mhz, ru_tones, count)

    @property
    def indices(self) -> range:
        return range(self.count)


class PhyRateTable:
    """(ru_tones, mcs, gi) -> data bits carried per OFDM symbol.

    Rates follow data_subcarriers * bits_per_subcarrier * coding_rate per
    symbol of 12.8 us plus guard interval.
    """

    def __init__(self, bits_per_symbol: Mapping[tuple[int, int, int], Fraction] | None = None):
        self._bits: dict[tuple[int, int, int], Fraction] = dict(bits_per_symbol or {})

    @classmethod
    def standard(cls) -> PhyRateTable:
        table = {}
        for tones, nsd in DATA_SUBCARRIERS.items():
            for mcs, (nbpscs, rate) in HE_MCS.items():
                for gi in GUARD_INTERVALS_NS:
                    table[(tones, mcs, gi)] = nsd * nbpscs * rate
        return cls(table)

    @staticmethod
    def symbol_ns(gi_us: float) -> int:
        return HE_SYMBOL_NO_GI_NS + us_to_ns(gi_us)

    def bits_per_symbol(self, ru_tones: int, mcs: int, gi_us: float) -> Fraction:
        key = (ru_tones, mcs, us_to_ns(gi_us))
        try:
            return self._bits[key]
        except KeyError:
            raise ConfigError(
                f"no rate entry for {ru_tones}-tone RU, MCS {mcs}, GI {gi_us} us"
            ) from None

    def data_rate(self, ru_tones: int, mcs: int, gi_us: float) -> float:
        """Data rate in bits/us (numerically equal to Mb/s)."""
        bits = self.bits_per_symbol(ru_tones, mcs, gi_us)
        return float(bits * 1000 / self.symbol_ns(gi_us))

    def set_rate(self, ru_tones: int, mcs: int, gi_us: float, bits_per_us: float) -> None:
        gi_ns = us_to_ns(gi_us)
        symbol_us = Fraction(HE_SYMBOL_NO_GI_NS + gi_ns, 1000)
        self._bits[(ru_tones, mcs, gi_ns)] = Fraction(str(bits_per_us)) * symbol_us

    def load_overrides(self, path: str | Path) -> None:
        """Read ``ru_tones,mcs,gi_us,bits_per_us`` lines; ``#`` starts a comment."""
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ConfigError(f"{path}:{lineno}: expected 4 comma-separated fields")
            try:
                tones, mcs = int(parts[0]), int(parts[1])
                gi, rate = float(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            if tones not in DATA_SUBCARRIERS or rate <= 0:
                raise ConfigError(f"{path}:{lineno}: invalid entry {line!r}")
            self.set_rate(tones, mcs, gi, rate)


@dataclass
class PhyModel:
    """Airtime model shared by the engine and the analytic estimator."""

    rates: PhyRateTable = field(default_factory=PhyRateTable.standard)
    preamble_us: float = 40.0
    basic_rate_mbps: int = 6
    mpdu_overhead_bytes: int = 34

    def frame_duration_ns(self, payload_bytes: int, ru_tones: int, mcs: int, gi_us: float) -> int:
        if payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")
        bits_per_symbol = self.rates.bits_per_symbol(ru_tones, mcs, gi_us)
        n_symbols = math.ceil(Fraction(payload_bytes * 8) / bits_per_symbol)
        return us_to_ns(self.preamble_us) + n_symbols * PhyRateTable.symbol_ns(gi_us)

    def frame_duration(self, payload_bytes: int, ru_tones: int, mcs: int, gi_us: float) -> float:
        return ns_to_us(self.frame_duration_ns(payload_bytes, ru_tones, mcs, gi_us))

    def control_frame_duration_ns(self, n_bytes: int) -> int:
        """Non-HT OFDM duplicate frame at the basic rate (20 us preamble, 4 us symbols)."""
        bits_per_symbol = self.basic_rate_mbps * 4
        n_symbols = math.ceil((16 + 8 * n_bytes + 6) / bits_per_symbol)
        return 20_000 + 4_000 * n_symbols

    # MAC header (16) + common info (8) + FCS (4), then 5 octets per user field.
    @staticmethod
    def trigger_frame_bytes(n_allocations: int) -> int:
        return 28 + 5 * n_allocations

    # Header, BA control and FCS (22), then 12 octets per acknowledged STA.
    @staticmethod
    def multi_sta_ba_bytes(n_acked: int) -> int:
        return 22 + 12 * n_acked

    def trigger_duration_ns(self, n_allocations: int) -> int:
        return self.control_frame_duration_ns(self.trigger_frame_bytes(n_allocations))

    def block_ack_duration_ns(self, n_acked: int) -> int:
        return self.control_frame_duration_ns(self.multi_sta_ba_bytes(n_acked))

    def mpdu_bytes(self, payload_bytes: int) -> int:
        return payload_bytes + self.mpdu_overhead_bytes

    def max_mpdus(self, window_ns: int, payload_bytes: int, ru_tones: int, mcs: int, gi_us: float) -> int:
        """Largest MPDU count whose aggregate PPDU fits in ``window_ns``."""
        per = self.mpdu_bytes(payload_bytes)
        n = 0
        while self.frame_duration_ns((n + 1) * per, ru_tones, mcs, gi_us) <= window_ns:
            n += 1
        return n


class Reception(enum.Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True)
class RuOutcome:
    kind: Reception
    aids: frozenset[int] = frozenset()

    @property
    def winner(self) -> int | None:
        if self.kind is Reception.SUCCESS:
            return next(iter(self.aids))
        return None


def resolve_reception(
    transmissions: Iterable[tuple[int, int]],
    ru_indices: Iterable[int],
    capture: bool = False,
) -> dict[int, RuOutcome]:
    """Outcome on every RU in ``ru_indices`` given ``(aid, ru_index)`` pairs.

    Two or more transmitters on one RU all fail. With ``capture`` the first
    listed transmitter on a contested RU is decoded instead.
    """
    by_ru: dict[int, list[int]] = {ru: [] for ru in ru_indices}
    seen: set[int] = set()
    for aid, ru in transmissions:
        if aid in seen:
            raise ValueError(f"aid {aid} transmits twice")
        seen.add(aid)
        if ru not in by_ru:
            raise ValueError(f"transmission on unknown RU {ru}")
        by_ru[ru].append(aid)
    outcomes = {}
    for ru, aids in by_ru.items():
        if not aids:
            outcomes[ru] = RuOutcome(Reception.IDLE)
        elif len(aids) == 1:
            outcomes[ru] = RuOutcome(Reception.SUCCESS, frozenset(aids))
        elif capture:
            outcomes[ru] = RuOutcome(Reception.SUCCESS, frozenset(aids[:1]))
        else:
            outcomes[ru] = RuOutcome(Reception.COLLISION, frozenset(aids))
    return outcomes


def pad_to_longest(durations: Sequence[int] | Iterable[int]):
    durations = list(durations)
    if not durations:
        raise ValueError("no durations to pad")
    return max(durations)
