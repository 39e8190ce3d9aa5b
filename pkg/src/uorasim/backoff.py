"""Per-station UORA contention state (OFDMA contention window and back-off)."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol, Sequence

from uorasim.errors import ConfigError


class RandomSource(Protocol):
    def randint(self, a: int, b: int) -> int: ...


class TriggerDecision(enum.Enum):
    TRANSMIT = "transmit"
    DEFER = "defer"


def _check_exponents(eocw_min: int, eocw_max: int) -> None:
    if not (0 <= eocw_min <= 7 and 0 <= eocw_max <= 7):
        raise ConfigError(f"EOCW exponents must be in 0..7, got {eocw_min}, {eocw_max}")
    if eocw_min > eocw_max:
        raise ConfigError(f"eocw_min ({eocw_min}) exceeds eocw_max ({eocw_max})")


@dataclass
class UoraState:
    """OCW and OBO of one station.

    ``ocw`` is always of the form 2**k - 1 with eocw_min <= k <= eocw_max.
    """

    eocw_min: int
    eocw_max: int
    ocw: int
    obo: int

    @classmethod
    def initialize(cls, eocw_min: int, eocw_max: int, rng: RandomSource) -> UoraState:
        _check_exponents(eocw_min, eocw_max)
        ocw = (1 << eocw_min) - 1
        return cls(eocw_min, eocw_max, ocw, rng.randint(0, ocw))

    @property
    def ocw_min(self) -> int:
        return (1 << self.eocw_min) - 1

    @property
    def ocw_max(self) -> int:
        return (1 << self.eocw_max) - 1

    def process_trigger(self, n_ra: int) -> TriggerDecision:
        """Count down on a trigger advertising ``n_ra`` RA RUs.

        The station is eligible when its counter does not exceed ``n_ra``;
        the counter is then zeroed. Otherwise it drops by ``n_ra``.
        """
        if n_ra < 0:
            raise ValueError(f"n_ra must be >= 0, got {n_ra}")
        if n_ra == 0:
            return TriggerDecision.DEFER
        if self.obo <= n_ra:
            self.obo = 0
            return TriggerDecision.TRANSMIT
        self.obo -= n_ra
        return TriggerDecision.DEFER

    def select_ra_ru(self, ra_ru_indices: Sequence[int], rng: RandomSource) -> int:
        if not ra_ru_indices:
            raise ValueError("no RA RU to select from")
        return ra_ru_indices[rng.randint(0, len(ra_ru_indices) - 1)]

    def on_success(self, rng: RandomSource) -> None:
        self.ocw = self.ocw_min
        self.obo = rng.randint(0, self.ocw)

    def on_failure(self, rng: RandomSource) -> None:
        self.ocw = min(2 * self.ocw + 1, self.ocw_max)
        self.obo = rng.randint(0, self.ocw)


def initialize(eocw_min: int, eocw_max: int, rng: RandomSource) -> UoraState:
    return UoraState.initialize(eocw_min, eocw_max, rng)
