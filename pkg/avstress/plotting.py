from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .artifacts import TraceStep  # noqa: E402
from .crosswalk import ScenarioConfig  # noqa: E402

PED_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:purple", "tab:brown")


def plot_trajectory(scenario: ScenarioConfig, steps: Sequence[TraceStep], collided: bool, path: Path) -> None:
    """
    Pedestrian paths over the road, with start markers and a star at the collision.

    The SVG carries no date and a fixed id salt, so equal inputs give equal bytes.
    """
    road = scenario.road
    with matplotlib.rc_context({"svg.hashsalt": "avstress", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.axhline(road.y_min, color="black", linewidth=1.0)
        ax.axhline(road.y_max, color="black", linewidth=1.0)
        for k in range(1, road.lanes):
            ax.axhline(road.y_min + k * road.lane_width, color="gray", linewidth=0.8, linestyle="--")
        ax.axvspan(-road.crosswalk_half_width, road.crosswalk_half_width, color="0.9", zorder=0)

        for i, start in enumerate(scenario.pedestrians):
            xs = [start.x] + [s.state.pedestrians[i].x for s in steps]
            ys = [start.y] + [s.state.pedestrians[i].y for s in steps]
            color = PED_COLORS[i % len(PED_COLORS)]
            ax.plot(xs, ys, color=color, linewidth=1.5, label=f"pedestrian {i}")
            ax.plot(xs[0], ys[0], marker="o", color=color, linestyle="none")

        if collided and steps:
            last = steps[-1].state
            veh = last.vehicle
            hit = min(last.pedestrians, key=lambda p: (p.x - veh.x) ** 2 + (p.y - veh.y) ** 2)
            ax.plot(hit.x, hit.y, marker="*", markersize=14, color="red", linestyle="none", label="collision")

        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title(f"{scenario.name}: {'collision' if collided else 'no collision'} after {len(steps)} steps")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
