"""Track + raceline + occupancy grid bundles shared by the environment and the harness."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from racelab.corpus import resolve_track
from racelab.raceline import Raceline, RacelineParams, build_raceline
from racelab.track import OccupancyGrid, Track, rasterize

# Wall clearance used for racing: 0.5 m keeps the vehicle's LiDAR outside the
# 0.2 m collision radius once the map is quantized to 5 cm cells.
RACING_MARGIN = 0.5


@dataclass(frozen=True)
class Scenario:
    track: Track
    raceline: Raceline
    grid: OccupancyGrid

    @property
    def name(self) -> str:
        return self.track.name

    def spawn(self, index: int = 0):
        """Pose at raceline waypoint ``index`` facing along the line."""
        i = index % len(self.raceline)
        tx, ty = self.raceline.tangent[i]
        return float(self.raceline.x[i]), float(self.raceline.y[i]), math.atan2(ty, tx)


@functools.lru_cache(maxsize=16)
def load_scenario(spec: str, margin: float = RACING_MARGIN, resolution: float = 0.05,
                  stepsize: float = 0.25) -> Scenario:
    """Build (and memoize) the scenario for a corpus name or racetrack CSV path."""
    track = resolve_track(spec, stepsize)
    rl = build_raceline(track, RacelineParams(margin=margin, stepsize=stepsize))
    return Scenario(track, rl, rasterize(track, resolution))
