"""MU EDCA Parameter Set state held by each station.

Times are plain numbers in whatever unit the caller uses consistently.
Only the AIFSN and the validity timer affect behaviour. The alternate
contention-window values are stored for completeness but never used, since
legacy EDCA contention is not simulated.
"""

from __future__ import annotations

from dataclasses import dataclass

# Timer duration meaning "valid for the whole simulation".
WHOLE_SIMULATION = None


@dataclass
class MuEdcaState:
    aifsn: int = 2
    cw_min: int = 15
    cw_max: int = 1023
    timer_duration: float | None = 0.0
    timer_deadline: float | None = None
    infinite: bool = False

    def apply_parameters(self, aifsn: int, timer_duration: float | None, now: float) -> None:
        """Install announced parameters; ``None`` duration never expires."""
        self.aifsn = aifsn
        self.timer_duration = timer_duration
        if timer_duration is WHOLE_SIMULATION:
            self.infinite = True
            self.timer_deadline = None
        else:
            self.infinite = False
            self.timer_deadline = now + timer_duration

    def on_ofdma_success(self, now: float) -> None:
        if self.infinite or self.timer_duration is None:
            return
        self.timer_deadline = now + self.timer_duration

    def active(self, now: float) -> bool:
        if self.infinite:
            return True
        return self.timer_deadline is not None and now < self.timer_deadline

    def edca_enabled(self, now: float) -> bool:
        return not (self.active(now) and self.aifsn == 0)
