"""Multi-agent observation windows ("scenes") and their dataset machinery:
sliding-window assembly from gridded tracks, group-wise dataset split,
per-channel normalization stats, and the JSON-lines scene format.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tracks import TrajectoryTrack, WakeClass

__all__ = [
    "SceneAgent",
    "Scene",
    "NormStats",
    "build_scenes",
    "split_dataset",
    "read_scenes",
    "write_scenes",
]

log = logging.getLogger(__name__)

WINDOW_STEPS = 20
SAMPLE_DT_S = 6.0


@dataclass
class SceneAgent:
    callsign: str
    wtc: WakeClass
    window: np.ndarray  # (T, 3) lat/lon/alt
    remaining_s: float


@dataclass
class Scene:
    """All qualifying aircraft over one T-step window ending at `t_end`."""

    scene_id: str
    t_end: float
    agents: list[SceneAgent]
    dt: float = SAMPLE_DT_S

    def __post_init__(self):
        if not self.agents:
            raise ValueError(f"{self.scene_id}: a scene needs at least one agent")
        for a in self.agents:
            a.window = np.asarray(a.window, dtype=np.float64)
            if a.window.shape != (WINDOW_STEPS, 3):
                raise ValueError(
                    f"{self.scene_id}/{a.callsign}: window shape {a.window.shape}, "
                    f"want ({WINDOW_STEPS}, 3)"
                )
            if not a.remaining_s > 0:
                raise ValueError(
                    f"{self.scene_id}/{a.callsign}: remaining_s must be > 0, "
                    f"got {a.remaining_s}"
                )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def callsigns(self) -> list[str]:
        return [a.callsign for a in self.agents]


def build_scenes(
    tracks: Sequence[TrajectoryTrack],
    dt: float = SAMPLE_DT_S,
    window_steps: int = WINDOW_STEPS,
    n_max: int = 16,
) -> list[Scene]:
    """Slide a `window_steps`-sample window over phase-aligned tracks.

    At every grid time t_end, each aircraft with a full window of history
    ending at t_end and landing strictly after t_end becomes an agent;
    remaining_s is its landing time minus t_end. Grid times with no agents
    produce no scene. Scenes wider than n_max keep the n_max aircraft
    closest to landing.
    """
    per_track = []
    for tr in tracks:
        k0 = int(round(tr.t[0] / dt))
        if not np.allclose(tr.t, (k0 + np.arange(len(tr))) * dt, atol=1e-6):
            raise ValueError(f"{tr.callsign}: track not on a common {dt:.0f} s grid")
        per_track.append((tr, k0, k0 + len(tr) - 1))
    if not per_track:
        return []

    # index grid times by the tracks eligible there (full history, not landed)
    eligible: dict[int, list[int]] = {}
    for ti, (tr, k0, k_land) in enumerate(per_track):
        for k in range(k0 + window_steps - 1, k_land):
            eligible.setdefault(k, []).append(ti)

    scenes = []
    truncated = 0
    for k in sorted(eligible):
        t_end = k * dt
        agents = []
        for ti in eligible[k]:
            tr, k0, k_land = per_track[ti]
            s = k - k0
            agents.append(
                SceneAgent(
                    callsign=tr.callsign,
                    wtc=tr.wtc,
                    window=tr.positions[s - window_steps + 1 : s + 1],
                    remaining_s=(k_land - k) * dt,
                )
            )
        agents.sort(key=lambda a: (a.remaining_s, a.callsign))
        if len(agents) > n_max:
            truncated += 1
            agents = agents[:n_max]
        scenes.append(Scene(scene_id=f"s{k}", t_end=t_end, agents=agents, dt=dt))
    if truncated:
        log.warning("%d scene(s) truncated to the %d aircraft closest to landing",
                    truncated, n_max)
    return scenes


def split_dataset(
    scenes: Sequence[Scene],
    ratios: tuple[float, float, float] = (8.0, 1.0, 1.0),
    seed: int = 0,
) -> tuple[list[Scene], list[Scene], list[Scene]]:
    """Partition scenes into train/val/test without any aircraft straddling splits.

    Flights co-occurring in a scene are merged into one group (connected
    components over shared scenes); whole groups are then allocated to the
    split with the largest remaining scene-count deficit, in seeded order.
    """
    total = float(sum(ratios))
    if total <= 0 or any(r < 0 for r in ratios):
        raise ValueError(f"bad split ratios {ratios}")
    fracs = [r / total for r in ratios]

    parent: dict[str, str] = {}

    def find(a: str) -> str:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for sc in scenes:
        names = sc.callsigns()
        for cs in names:
            parent.setdefault(cs, cs)
        for cs in names[1:]:
            union(names[0], cs)

    groups: dict[str, list[Scene]] = {}
    for sc in scenes:
        groups.setdefault(find(sc.agents[0].callsign), []).append(sc)
    if len(groups) < 3:
        raise ValueError(
            f"only {len(groups)} independent flight group(s); need >= 3 to split "
            "(aircraft sharing scenes must stay in one split)"
        )

    keys = sorted(groups)
    order = np.random.default_rng(seed).permutation(len(keys))
    n_total = len(scenes)
    targets = [f * n_total for f in fracs]
    counts = [0.0, 0.0, 0.0]
    out: tuple[list[Scene], list[Scene], list[Scene]] = ([], [], [])
    for gi in order:
        group = groups[keys[gi]]
        deficits = [t - c for t, c in zip(targets, counts)]
        dest = max(range(3), key=lambda i: deficits[i])
        out[dest].extend(group)
        counts[dest] += len(group)
    for split in out:
        split.sort(key=lambda sc: sc.t_end)
    return out


@dataclass
class NormStats:
    """Z-score parameters for the 3 input channels and the target, train-split only."""

    mean: np.ndarray  # (3,) lat, lon, alt
    std: np.ndarray  # (3,)
    target_mean: float
    target_std: float

    @classmethod
    def fit(cls, scenes: Iterable[Scene]) -> "NormStats":
        windows = []
        targets = []
        for sc in scenes:
            for a in sc.agents:
                windows.append(a.window)
                targets.append(a.remaining_s)
        if not windows:
            raise ValueError("cannot fit normalization stats on an empty split")
        stacked = np.concatenate(windows, axis=0)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        t = np.asarray(targets, dtype=np.float64)
        t_std = float(t.std())
        if (std <= 0).any() or t_std <= 0:
            raise ValueError(
                f"degenerate channel: stds {std.tolist()}, target std {t_std}"
            )
        return cls(mean=mean, std=std, target_mean=float(t.mean()), target_std=t_std)

    def normalize_window(self, window: np.ndarray) -> np.ndarray:
        return (window - self.mean) / self.std

    def denormalize_window(self, window: np.ndarray) -> np.ndarray:
        return window * self.std + self.mean

    def normalize_target(self, y):
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def denormalize_target(self, y_std):
        return np.asarray(y_std, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            target_mean=float(d["target_mean"]),
            target_std=float(d["target_std"]),
        )


# ---------------------------------------------------------------------------
# scene JSON-lines format
# ---------------------------------------------------------------------------

def write_scenes(path, scenes: Iterable[Scene]) -> None:
    with open(path, "w") as fh:
        for sc in scenes:
            rec = {
                "scene_id": sc.scene_id,
                "t_end": float(sc.t_end),
                "dt": float(sc.dt),
                "agents": [
                    {
                        "callsign": a.callsign,
                        "wtc": a.wtc.label(),
                        "window": [[float(v) for v in row] for row in a.window],
                        "remaining_s": float(a.remaining_s),
                    }
                    for a in sc.agents
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def read_scenes(path) -> list[Scene]:
    scenes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            agents = [
                SceneAgent(
                    callsign=a["callsign"],
                    wtc=WakeClass.parse(a["wtc"]),
                    window=np.asarray(a["window"], dtype=np.float64),
                    remaining_s=float(a["remaining_s"]),
                )
                for a in rec["agents"]
            ]
            scenes.append(
                Scene(scene_id=rec["scene_id"], t_end=float(rec["t_end"]),
                      agents=agents, dt=float(rec.get("dt", SAMPLE_DT_S)))
            )
    return scenes
