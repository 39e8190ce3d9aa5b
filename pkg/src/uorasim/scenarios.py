"""Ready-made scripted scenarios."""

from __future__ import annotations

from uorasim.config import SimConfig
from uorasim.engine import Scenario

EXAMPLE_OBO = {1: 15, 2: 1, 3: 2, 4: 5, 6: 7, 8: 3}


def frame_exchange_example() -> tuple[SimConfig, Scenario]:
    """The canonical single exchange with eight stations and four 52-tone RUs.

    Three RUs are open to random access and one polls STA 5. STAs 2 and 8
    collide on the first RU, STA 3 wins the third, the second stays idle.
    STAs 1 and 6 are known to the AP from earlier (now stale) reports, STA 7
    has nothing queued.
    """
    config = SimConfig(
        bandwidth_mhz=20, ru_tones=52, n_stas=8, n_ra=3, traffic="none",
        sim_duration_us=1_000_000,
    )
    scenario = Scenario(
        initial_obo=dict(EXAMPLE_OBO),
        ru_choices={(0, 2): 0, (0, 8): 0, (0, 3): 2},
        initial_queue_packets={aid: 3 for aid in (1, 2, 3, 4, 5, 6, 8)},
        ap_known_bytes={1: 1700, 6: 1700},
        cursor_aid=5,
        max_cycles=1,
    )
    return config, scenario
