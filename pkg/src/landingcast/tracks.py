"""Aircraft trajectory tracks: validation, geodesy, boundary truncation,
uniform resampling, and the CSV / JSON-lines file formats.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable

import numpy as np

from .pchip import pchip_eval, resample_grid

__all__ = [
    "WakeClass",
    "TrajectoryTrack",
    "TrackValidationError",
    "NeverEntersBoundaryError",
    "great_circle_nm",
    "truncate_at_boundary",
    "resample_track",
    "read_tracks",
    "write_tracks",
]

EARTH_RADIUS_KM = 6371.0
KM_PER_NM = 1.852


class TrackValidationError(ValueError):
    """A track violates its invariants (ordering, ranges, point count)."""


class NeverEntersBoundaryError(ValueError):
    """The track never comes inside the truncation radius; skip and count it."""


class WakeClass(IntEnum):
    """Wake turbulence category; the index doubles as the embedding row."""

    LIGHT = 0
    MEDIUM = 1
    HEAVY = 2
    SUPER = 3

    @classmethod
    def parse(cls, text: str) -> "WakeClass":
        key = text.strip().upper()
        alias = {"L": "LIGHT", "M": "MEDIUM", "H": "HEAVY", "J": "SUPER", "S": "SUPER"}
        key = alias.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise TrackValidationError(f"unknown wake turbulence category {text!r}") from None

    def label(self) -> str:
        return self.name.capitalize()


@dataclass
class TrajectoryTrack:
    """One aircraft's timestamped 3-d path.

    `t` is UNIX seconds (strictly increasing); `positions` is an (n, 3)
    array with columns latitude deg, longitude deg, altitude ft.
    """

    callsign: str
    wtc: WakeClass
    t: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.t.ndim != 1 or self.positions.shape != (self.t.size, 3):
            raise TrackValidationError(
                f"{self.callsign}: expected t (n,) and positions (n, 3), got "
                f"{self.t.shape} and {self.positions.shape}"
            )
        if self.t.size < 2:
            raise TrackValidationError(f"{self.callsign}: need at least 2 points")
        if not (np.diff(self.t) > 0).all():
            raise TrackValidationError(f"{self.callsign}: timestamps not strictly increasing")
        lat, lon, alt = self.positions.T
        if (np.abs(lat) > 90).any() or (np.abs(lon) > 180).any():
            raise TrackValidationError(f"{self.callsign}: coordinates out of range")
        if (alt < 0).any():
            raise TrackValidationError(f"{self.callsign}: negative altitude")

    def __len__(self) -> int:
        return self.t.size

    @property
    def landing_time(self) -> float:
        return float(self.t[-1])


def great_circle_nm(p1, p2) -> float:
    """Haversine distance in nautical miles (R = 6371 km, 1 nm = 1.852 km)."""
    lat1, lon1 = p1
    lat2, lon2 = p2
    for lat, lon in ((lat1, lon1), (lat2, lon2)):
        if not (np.all(np.abs(lat) <= 90) and np.all(np.abs(lon) <= 180)):
            raise ValueError(f"coordinates out of range: ({lat}, {lon})")
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    km = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))
    return km / KM_PER_NM


def truncate_at_boundary(track: TrajectoryTrack, arp, radius_nm: float = 70.0) -> TrajectoryTrack:
    """Cut a track so it starts where it enters the `radius_nm` circle.

    The crossing instant is found by interpolating t linearly between the
    bracketing samples; the synthesized first point sits on the boundary
    (within that linearization). The track must end inside the circle.
    """
    lat, lon = track.positions[:, 0], track.positions[:, 1]
    dist = great_circle_nm((lat, lon), (float(arp[0]), float(arp[1])))
    inside = dist <= radius_nm
    if not inside[-1]:
        raise TrackValidationError(
            f"{track.callsign}: track ends {dist[-1]:.1f} nm from the airport, "
            f"outside the {radius_nm:.0f} nm boundary"
        )
    if not inside.any():
        raise NeverEntersBoundaryError(track.callsign)
    # last outside->inside crossing, so every retained point is inside
    outside_idx = np.nonzero(~inside)[0]
    if outside_idx.size == 0:
        return track
    j = int(outside_idx[-1]) + 1
    d0, d1 = dist[j - 1], dist[j]
    frac = (d0 - radius_nm) / (d0 - d1)
    t_cross = track.t[j - 1] + frac * (track.t[j] - track.t[j - 1])
    p_cross = track.positions[j - 1] + frac * (track.positions[j] - track.positions[j - 1])
    if np.isclose(t_cross, track.t[j]):
        t_new = track.t[j:]
        p_new = track.positions[j:]
    else:
        t_new = np.concatenate(([t_cross], track.t[j:]))
        p_new = np.vstack([p_cross, track.positions[j:]])
    return TrajectoryTrack(track.callsign, track.wtc, t_new, p_new)


def resample_track(
    track: TrajectoryTrack, dt: float = 6.0, origin: float | None = None
) -> TrajectoryTrack:
    """Resample each channel independently on a uniform dt grid.

    Channels are interpolated with monotone (Fritsch-Carlson) cubic Hermite
    polynomials. With `origin` set, the grid is phase-aligned to
    origin + k*dt so separately resampled tracks share grid times.
    """
    if np.unique(track.t).size != track.t.size:
        raise TrackValidationError(f"{track.callsign}: duplicate timestamps")
    grid = resample_grid(float(track.t[0]), float(track.t[-1]), dt, origin=origin)
    if grid.size < 2:
        raise TrackValidationError(
            f"{track.callsign}: track span {track.t[-1] - track.t[0]:.1f} s too short "
            f"for a {dt:.0f} s grid"
        )
    cols = [pchip_eval(track.t, track.positions[:, k], grid) for k in range(3)]
    pos = np.column_stack(cols)
    # pchip can undershoot 0 ft by rounding noise only; clamp to the invariant
    pos[:, 2] = np.maximum(pos[:, 2], 0.0)
    return TrajectoryTrack(track.callsign, track.wtc, grid, pos)


# ---------------------------------------------------------------------------
# file formats: CSV (callsign,wtc,t,lat,lon,alt) and JSON-lines
# ---------------------------------------------------------------------------

_CSV_HEADER = ["callsign", "wtc", "t", "lat", "lon", "alt"]


def write_tracks(path, tracks: Iterable[TrajectoryTrack]) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_CSV_HEADER)
            for tr in tracks:
                for ti, (la, lo, al) in zip(tr.t, tr.positions):
                    w.writerow([tr.callsign, tr.wtc.label(), repr(float(ti)),
                                repr(float(la)), repr(float(lo)), repr(float(al))])
    else:
        with open(path, "w") as fh:
            for tr in tracks:
                rec = {
                    "callsign": tr.callsign,
                    "wtc": tr.wtc.label(),
                    "t": [float(v) for v in tr.t],
                    "lat": [float(v) for v in tr.positions[:, 0]],
                    "lon": [float(v) for v in tr.positions[:, 1]],
                    "alt": [float(v) for v in tr.positions[:, 2]],
                }
                fh.write(json.dumps(rec) + "\n")


def read_tracks(path) -> list[TrajectoryTrack]:
    path = Path(path)
    if path.suffix == ".csv":
        return _read_tracks_csv(path)
    return _read_tracks_jsonl(path)


def _read_tracks_csv(path) -> list[TrajectoryTrack]:
    rows: dict[str, list] = {}
    wtcs: dict[str, WakeClass] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(_CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise TrackValidationError(f"{path}: missing CSV columns {sorted(missing)}")
        for rec in reader:
            cs = rec["callsign"]
            wtcs[cs] = WakeClass.parse(rec["wtc"])
            rows.setdefault(cs, []).append(
                (float(rec["t"]), float(rec["lat"]), float(rec["lon"]), float(rec["alt"]))
            )
    tracks = []
    for cs, pts in rows.items():
        pts.sort(key=lambda p: p[0])
        arr = np.array(pts, dtype=np.float64)
        tracks.append(TrajectoryTrack(cs, wtcs[cs], arr[:, 0], arr[:, 1:]))
    return tracks


def _read_tracks_jsonl(path) -> list[TrajectoryTrack]:
    tracks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrackValidationError(f"{path}:{lineno}: bad JSON: {exc}") from None
            pos = np.column_stack([rec["lat"], rec["lon"], rec["alt"]])
            tracks.append(
                TrajectoryTrack(rec["callsign"], WakeClass.parse(rec["wtc"]),
                                np.asarray(rec["t"], dtype=np.float64), pos)
            )
    return tracks
