"""Simulation parameters.

Defaults reproduce the single-BSS validation setup: 20 MHz with 26-tone RUs,
MCS 8, 0.8 us GI, 2080 us TXOP, OCW 31..127, 124 us AP access interval,
1700-byte payload every TXOP/4, 15 s runs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

from uorasim.errors import ConfigError
from uorasim.phy import PhyModel, PhyRateTable, RuLayout, us_to_ns
from uorasim.scheduler import SchedulerPolicy

TRAFFIC_MODELS = ("cbr", "full_buffer", "none")

# RU size used for each channel width in the validation scenario.
DEFAULT_RU_TONES = {20: 26, 80: 106}


@dataclass(frozen=True)
class SimConfig:
    bandwidth_mhz: int = 20
    ru_tones: int = 26
    mcs_index: int = 8
    gi_us: float = 0.8
    txop_us: float = 2080
    beacon_interval_us: float = 204800
    eocw_min: int = 5
    eocw_max: int = 7
    access_req_interval_us: float = 124
    payload_bytes: int = 1700
    packet_interval_us: float | None = None
    n_stas: int = 9
    n_ra: int = 3
    n_ra_basic: int = 0
    allow_stale_allocation: bool = True
    sa_polling: bool = True
    sim_duration_us: float = 15_000_000
    n_runs: int = 5
    sifs_us: float = 16
    traffic: str = "cbr"
    queue_limit: int = 500
    bsr_bytes: int = 40
    beacon_bytes: int = 200
    preamble_us: float = 40
    basic_rate_mbps: int = 6
    mpdu_overhead_bytes: int = 34
    mu_edca_aifsn: int = 0
    mu_edca_timer_us: float | None = None
    capture: bool = False
    rate_table_path: str | None = None
    seed: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        positive = (
            "txop_us", "beacon_interval_us", "sim_duration_us",
            "n_runs", "sifs_us", "queue_limit", "bsr_bytes", "beacon_bytes",
            "preamble_us", "basic_rate_mbps",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("payload_bytes", "access_req_interval_us", "n_stas", "n_ra", "n_ra_basic", "mpdu_overhead_bytes")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.packet_interval_us is not None and self.packet_interval_us <= 0:
            raise ConfigError("packet_interval_us must be positive")
        if not (0 <= self.eocw_min <= self.eocw_max <= 7):
            raise ConfigError(
                f"need 0 <= eocw_min <= eocw_max <= 7, got {self.eocw_min}, {self.eocw_max}"
            )
        if self.traffic not in TRAFFIC_MODELS:
            raise ConfigError(f"traffic must be one of {TRAFFIC_MODELS}, got {self.traffic!r}")
        if self.n_stas > 2007:
            raise ConfigError("too many stations for the AID space")
        layout = self.layout
        if self.n_ra > layout.count:
            raise ConfigError(f"n_ra={self.n_ra} exceeds the {layout.count} RUs available")
        if self.n_ra_basic > layout.count:
            raise ConfigError(f"n_ra_basic={self.n_ra_basic} exceeds the {layout.count} RUs")
        # Stations would fall back to EDCA contention, which is not modelled.
        if self.mu_edca_aifsn != 0:
            raise ConfigError("MU EDCA AIFSN must be 0: STA-side EDCA contention is not simulated")
        if self.mu_edca_timer_us is not None and self.mu_edca_timer_us < self.sim_duration_us:
            raise ConfigError(
                "MU EDCA timer shorter than the simulation would re-enable STA-side EDCA"
            )
        for name in ("gi_us", "txop_us", "sifs_us", "access_req_interval_us", "sim_duration_us",
                     "beacon_interval_us", "preamble_us"):
            us_to_ns(getattr(self, name))
        self.phy.rates.bits_per_symbol(self.ru_tones, self.mcs_index, self.gi_us)
        if self.max_mpdus_per_grant < 1:
            raise ConfigError("one MPDU does not fit in the TXOP data window")

    @cached_property
    def layout(self) -> RuLayout:
        return RuLayout.for_channel(self.bandwidth_mhz, self.ru_tones)

    @cached_property
    def phy(self) -> PhyModel:
        rates = PhyRateTable.standard()
        if self.rate_table_path:
            rates.load_overrides(self.rate_table_path)
        return PhyModel(
            rates=rates,
            preamble_us=self.preamble_us,
            basic_rate_mbps=self.basic_rate_mbps,
            mpdu_overhead_bytes=self.mpdu_overhead_bytes,
        )

    @property
    def policy(self) -> SchedulerPolicy:
        return SchedulerPolicy(
            n_ra_bsrp=self.n_ra,
            n_ra_basic=self.n_ra_basic,
            allow_stale_allocation=self.allow_stale_allocation,
            sa_polling=self.sa_polling,
        )

    @property
    def effective_packet_interval_us(self) -> float:
        if self.packet_interval_us is not None:
            return self.packet_interval_us
        return self.txop_us / 4

    @property
    def data_window_ns(self) -> int:
        """TXOP share left for the data PPDU after Basic TF, M-BA and two SIFS."""
        count = self.layout.count
        phy = self.phy
        return (
            us_to_ns(self.txop_us)
            - phy.trigger_duration_ns(count)
            - phy.block_ack_duration_ns(count)
            - 2 * us_to_ns(self.sifs_us)
        )

    @cached_property
    def max_mpdus_per_grant(self) -> int:
        return self.phy.max_mpdus(
            self.data_window_ns, self.payload_bytes, self.ru_tones, self.mcs_index, self.gi_us
        )

    def mpdus_in(self, duration_ns: int) -> int:
        """MPDUs that fit in a data PPDU of ``duration_ns`` (capped by the TXOP window)."""
        n = self.phy.max_mpdus(
            duration_ns, self.payload_bytes, self.ru_tones, self.mcs_index, self.gi_us
        )
        return min(n, self.max_mpdus_per_grant)

    def data_duration_ns(self, n_mpdus: int) -> int:
        return self.phy.frame_duration_ns(
            n_mpdus * self.phy.mpdu_bytes(self.payload_bytes),
            self.ru_tones, self.mcs_index, self.gi_us,
        )

    def bsr_duration_ns(self) -> int:
        return self.phy.frame_duration_ns(self.bsr_bytes, self.ru_tones, self.mcs_index, self.gi_us)


def ul_length_us(duration_ns: int) -> int:
    """Round a TB PPDU duration up to the 16 us granularity of the UL Length field."""
    return -(-duration_ns // 16_000) * 16


def offered_load_per_sta(config: SimConfig) -> float:
    """Offered load of one CBR station in bits/us (= Mb/s)."""
    return config.payload_bytes * 8 / config.effective_packet_interval_us
