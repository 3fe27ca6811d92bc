"""Seeded terminal-airspace arrival generator.

Flights enter at named fixes on an outer ring, fly fix -> merge -> airport
at a wake-class ground speed with jitter, and receive triangular path-stretch
(dog-leg) vectors whenever their projected gap to the preceding arrival
falls below the wake-separation matrix. Everything is deterministic per seed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tracks import KM_PER_NM, TrajectoryTrack, WakeClass

__all__ = [
    "AirspaceConfig",
    "GeneratedFlight",
    "SeparationViolation",
    "generate_corpus",
    "check_separation",
]

log = logging.getLogger(__name__)

NM_PER_DEG_LAT = 60.0  # great-circle minutes; fine at terminal scale


@dataclass
class AirspaceConfig:
    """Geometry, speeds, separation rules, and noise knobs for the generator."""

    arp: tuple[float, float] = (37.4692, 126.4505)
    # fix name -> bearing from the ARP, degrees clockwise from north
    entry_fixes: dict[str, float] = field(
        default_factory=lambda: {"REBIT": 45.0, "OLMEN": 135.0, "GUKDO": 225.0, "KARBU": 315.0}
    )
    spawn_radius_nm: float = 80.0
    merge_bearing_deg: float = 180.0
    merge_distance_nm: float = 10.0
    speeds_kt: dict[WakeClass, float] = field(
        default_factory=lambda: {
            WakeClass.LIGHT: 180.0,
            WakeClass.MEDIUM: 220.0,
            WakeClass.HEAVY: 240.0,
            WakeClass.SUPER: 250.0,
        }
    )
    wtc_weights: dict[WakeClass, float] = field(
        default_factory=lambda: {
            WakeClass.LIGHT: 0.05,
            WakeClass.MEDIUM: 0.60,
            WakeClass.HEAVY: 0.30,
            WakeClass.SUPER: 0.05,
        }
    )
    # leader (row) x follower (column) required landing separation, seconds
    sep_matrix_s: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [90.0, 90.0, 90.0, 90.0],
                [90.0, 90.0, 90.0, 90.0],
                [90.0, 120.0, 90.0, 90.0],
                [180.0, 120.0, 120.0, 90.0],
            ]
        )
    )
    ring_altitude_ft: float = 18000.0
    boundary_nm: float = 70.0
    speed_jitter: float = 0.03  # relative std of per-flight speed
    heading_jitter_deg: float = 2.0  # lateral waviness of the flown path
    vector_prob: float = 0.1  # chance of a spacing vector despite compliance
    vector_max_s: float = 45.0
    raw_dt_s: tuple[float, float] = (4.0, 8.0)  # irregular ADS-B-like sampling

    def __post_init__(self):
        self.sep_matrix_s = np.asarray(self.sep_matrix_s, dtype=np.float64)
        if self.sep_matrix_s.shape != (4, 4):
            raise ValueError("sep_matrix_s must be 4x4 (leader x follower)")
        if (self.sep_matrix_s <= 0).any():
            raise ValueError("separations must be positive")
        if len(self.entry_fixes) < 2:
            raise ValueError("need at least two entry fixes")
        if any(v <= 0 for v in self.speeds_kt.values()):
            raise ValueError("speeds must be positive")
        if not 0.0 <= self.vector_prob <= 1.0:
            raise ValueError("vector_prob must be in [0, 1]")

    @classmethod
    def from_file(cls, path) -> "AirspaceConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path) as fh:
                raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "AirspaceConfig":
        kwargs = dict(raw)
        if "arp" in kwargs:
            kwargs["arp"] = tuple(kwargs["arp"])
        if "raw_dt_s" in kwargs:
            kwargs["raw_dt_s"] = tuple(kwargs["raw_dt_s"])
        for key in ("speeds_kt", "wtc_weights"):
            if key in kwargs:
                kwargs[key] = {WakeClass.parse(k): float(v) for k, v in kwargs[key].items()}
        if "sep_matrix_s" in kwargs:
            kwargs["sep_matrix_s"] = np.asarray(kwargs["sep_matrix_s"], dtype=np.float64)
        known = set(cls.__dataclass_fields__)
        unknown = set(kwargs) - known
        if unknown:
            raise ValueError(f"unknown airspace config keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass
class GeneratedFlight:
    track: TrajectoryTrack
    landing_time: float
    delay_s: float
    entry_time: float
    entry_fix: str

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError(f"{self.track.callsign}: negative delay")
        if not math.isclose(self.landing_time, self.track.landing_time):
            raise ValueError(f"{self.track.callsign}: landing time != last track timestamp")


@dataclass
class SeparationViolation:
    leader: str
    follower: str
    gap_s: float
    required_s: float


def _fix_position(arp, bearing_deg: float, radius_nm: float) -> np.ndarray:
    """Local east/north offsets (nm) of a point at bearing/range from the ARP."""
    b = math.radians(bearing_deg)
    return np.array([radius_nm * math.sin(b), radius_nm * math.cos(b)])


def _to_latlon(arp, en: np.ndarray) -> tuple[float, float]:
    lat = arp[0] + en[1] / NM_PER_DEG_LAT
    lon = arp[1] + en[0] / (NM_PER_DEG_LAT * math.cos(math.radians(arp[0])))
    return lat, lon


def _polyline_lengths(points: list[np.ndarray]) -> np.ndarray:
    return np.array([np.linalg.norm(b - a) for a, b in zip(points[:-1], points[1:])])


def _point_along(points: list[np.ndarray], cum: np.ndarray, s: float) -> np.ndarray:
    """Point at arc length s along a polyline with cumulative lengths `cum`."""
    s = min(max(s, 0.0), cum[-1])
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(points) - 2)
    seg = cum[i + 1] - cum[i]
    frac = 0.0 if seg == 0 else (s - cum[i]) / seg
    return points[i] + frac * (points[i + 1] - points[i])


def generate_corpus(
    cfg: AirspaceConfig,
    n_flights: int,
    arrival_rate_per_hr: float,
    seed: int = 0,
) -> list[GeneratedFlight]:
    """Generate `n_flights` arrivals with Poisson entries at the given rate."""
    if n_flights <= 0:
        raise ValueError("n_flights must be positive")
    if arrival_rate_per_hr <= 0:
        raise ValueError("arrival rate must be positive")

    mean_sep = float(cfg.sep_matrix_s.mean())
    if arrival_rate_per_hr * mean_sep > 3600.0:
        log.warning(
            "arrival rate %.1f/hr exceeds the ~%.0f s mean separation capacity; "
            "expect queuing delays", arrival_rate_per_hr, mean_sep,
        )

    rng = np.random.default_rng(seed)
    fix_names = sorted(cfg.entry_fixes)
    wtcs = sorted(cfg.wtc_weights)
    weights = np.array([cfg.wtc_weights[w] for w in wtcs])
    weights = weights / weights.sum()

    merge_en = _fix_position(cfg.arp, cfg.merge_bearing_deg, cfg.merge_distance_nm)
    arp_en = np.zeros(2)

    # sample entries and nominal (unconstrained) kinematics
    gaps = rng.exponential(3600.0 / arrival_rate_per_hr, size=n_flights)
    entry_times = np.cumsum(gaps)
    flights = []
    for i in range(n_flights):
        fix = fix_names[int(rng.integers(len(fix_names)))]
        wtc = wtcs[int(rng.choice(len(wtcs), p=weights))]
        speed_kt = cfg.speeds_kt[wtc] * (1.0 + cfg.speed_jitter * float(rng.standard_normal()))
        speed_kt = max(speed_kt, 60.0)
        entry_en = _fix_position(cfg.arp, cfg.entry_fixes[fix], cfg.spawn_radius_nm)
        leg1 = float(np.linalg.norm(merge_en - entry_en))
        leg2 = float(np.linalg.norm(arp_en - merge_en))
        v_nm_s = speed_kt / 3600.0
        flights.append(
            {
                "callsign": f"SYN{i:04d}",
                "wtc": wtc,
                "fix": fix,
                "entry_en": entry_en,
                "entry_time": float(entry_times[i]),
                "speed_nm_s": v_nm_s,
                "merge_nominal": float(entry_times[i]) + leg1 / v_nm_s,
                "land_nominal": float(entry_times[i]) + (leg1 + leg2) / v_nm_s,
                "leg1_nm": leg1,
            }
        )

    # first-come-first-served at the merge; stretch paths to restore gaps
    flights.sort(key=lambda f: f["merge_nominal"])
    last_merge = -math.inf
    last_land = -math.inf
    last_wtc = None
    for f in flights:
        delay = 0.0
        if last_wtc is not None:
            req = float(cfg.sep_matrix_s[int(last_wtc), int(f["wtc"])])
            delay = max(
                0.0,
                (last_merge + req) - f["merge_nominal"],
                (last_land + req) - f["land_nominal"],
            )
        if cfg.vector_prob > 0 and rng.random() < cfg.vector_prob:
            delay += float(rng.uniform(0.0, cfg.vector_max_s))
        f["delay"] = delay
        f["merge_time"] = f["merge_nominal"] + delay
        f["landing_time"] = f["land_nominal"] + delay
        last_merge, last_land, last_wtc = f["merge_time"], f["landing_time"], f["wtc"]

    out = []
    for f in flights:
        track = _synthesize_track(cfg, f, rng)
        out.append(
            GeneratedFlight(
                track=track,
                landing_time=track.landing_time,
                delay_s=f["delay"],
                entry_time=f["entry_time"],
                entry_fix=f["fix"],
            )
        )
    out.sort(key=lambda g: g.entry_time)
    return out


def _synthesize_track(cfg: AirspaceConfig, f: dict, rng) -> TrajectoryTrack:
    """Positions along entry->(dog-leg)->merge->ARP at irregular timestamps."""
    entry_en = f["entry_en"]
    merge_en = _fix_position(cfg.arp, cfg.merge_bearing_deg, cfg.merge_distance_nm)
    arp_en = np.zeros(2)

    points = [entry_en]
    if f["delay"] > 0:
        # symmetric tent between 30% and 70% of the entry leg whose two sides
        # add exactly delay*speed of extra path
        extra_nm = f["delay"] * f["speed_nm_s"]
        p1 = entry_en + 0.3 * (merge_en - entry_en)
        p2 = entry_en + 0.7 * (merge_en - entry_en)
        base = float(np.linalg.norm(p2 - p1))
        stretched = base + extra_nm
        h = math.sqrt(max(stretched**2 - base**2, 0.0)) / 2.0
        direction = (merge_en - entry_en) / float(np.linalg.norm(merge_en - entry_en))
        normal = np.array([-direction[1], direction[0]])
        side = 1.0 if rng.random() < 0.5 else -1.0
        apex = (p1 + p2) / 2.0 + side * h * normal
        points.extend([p1, apex, p2])
    points.extend([merge_en, arp_en])

    seg = _polyline_lengths(points)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total_nm = float(cum[-1])
    duration = total_nm / f["speed_nm_s"]

    # distance-to-go at the boundary ring sets the top of the descent profile
    ring_to_go = min(total_nm, cfg.boundary_nm + cfg.merge_distance_nm * 0.0)
    ring_to_go = cfg.boundary_nm if total_nm >= cfg.boundary_nm else total_nm

    ts = [0.0]
    lo, hi = cfg.raw_dt_s
    while ts[-1] < duration:
        ts.append(ts[-1] + float(rng.uniform(lo, hi)))
    ts[-1] = duration
    if len(ts) < 2:
        ts = [0.0, duration]

    lateral_sigma = cfg.heading_jitter_deg / 60.0  # degrees of heading -> ~nm wobble
    rows = []
    for tau in ts:
        s = tau * f["speed_nm_s"]
        en = _point_along(points, cum, s)
        if 0.0 < tau < duration and lateral_sigma > 0:
            en = en + rng.normal(0.0, lateral_sigma, size=2)
        to_go = max(total_nm - s, 0.0)
        alt = cfg.ring_altitude_ft * min(to_go / ring_to_go, 1.3)
        if tau >= duration:
            alt = 0.0
        lat, lon = _to_latlon(cfg.arp, en)
        rows.append((f["entry_time"] + tau, lat, lon, max(alt, 0.0)))

    arr = np.array(rows)
    return TrajectoryTrack(f["callsign"], f["wtc"], arr[:, 0], arr[:, 1:])


def check_separation(corpus: list[GeneratedFlight], cfg: AirspaceConfig,
                     tolerance_s: float = 1.0) -> list[SeparationViolation]:
    """Landing-gap audit: consecutive arrivals must respect the wake matrix."""
    ordered = sorted(corpus, key=lambda g: g.landing_time)
    violations = []
    for lead, follow in zip(ordered[:-1], ordered[1:]):
        gap = follow.landing_time - lead.landing_time
        required = float(cfg.sep_matrix_s[int(lead.track.wtc), int(follow.track.wtc)])
        if gap < required - tolerance_s:
            violations.append(
                SeparationViolation(
                    leader=lead.track.callsign,
                    follower=follow.track.callsign,
                    gap_s=gap,
                    required_s=required,
                )
            )
    return violations
