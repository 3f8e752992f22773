"""Walker-style shell generation, circular two-body propagation and
UE-satellite geometry on a spherical Earth.

Satellites are addressed by ``(plane_index, slot_index)``; the flat index
used by the array routines is ``plane_index * sats_per_plane + slot_index``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import EARTH_MU, EARTH_RADIUS, EARTH_ROTATION_RATE

SatId = tuple[int, int]


class InvalidConfigError(ValueError):
    """Raised for a shell configuration that violates its invariants."""


@dataclass(frozen=True)
class ShellConfig:
    num_planes: int = 40
    sats_per_plane: int = 60
    altitude: float = 1.2e6  # m
    inclination: float = 87.5  # deg
    raan_offset: float = 0.0  # deg
    phasing_factor: int = 1
    earth_rotation: bool = True

    def validate(self) -> None:
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise InvalidConfigError("num_planes and sats_per_plane must be >= 1")
        if not self.altitude > 0:
            raise InvalidConfigError(f"altitude must be positive, got {self.altitude}")
        if not 0.0 <= self.inclination <= 180.0:
            raise InvalidConfigError(f"inclination out of [0, 180]: {self.inclination}")

    @property
    def semi_major_axis(self) -> float:
        return EARTH_RADIUS + self.altitude

    @property
    def size(self) -> int:
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True)
class OrbitalElements:
    """Initial circular-orbit elements for the whole shell (angles in radians)."""

    plane_index: np.ndarray
    slot_index: np.ndarray
    raan: np.ndarray
    inclination: np.ndarray
    arg_latitude: np.ndarray  # argument of latitude at epoch 0
    semi_major_axis: float
    earth_rotation: bool = True

    def __len__(self) -> int:
        return len(self.raan)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(EARTH_MU / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion

    def sat_id(self, index: int) -> SatId:
        return int(self.plane_index[index]), int(self.slot_index[index])


@dataclass(frozen=True)
class SatelliteState:
    """Position and velocity of one satellite at an epoch.

    ``velocity`` is the inertial orbital velocity expressed in the
    Earth-fixed axes (no ``omega x r`` term), so it stays perpendicular to
    ``position`` and lies in the orbital plane.
    """

    sat_id: SatId
    position: np.ndarray
    velocity: np.ndarray
    nadir_point: tuple[float, float, float]  # lat deg, lon deg, alt m


@dataclass(frozen=True)
class GeometrySample:
    elevation: float  # deg
    slant_range: float  # m
    unit_vector_ue_to_sat: np.ndarray


@dataclass(frozen=True)
class ShellSnapshot:
    """Array view of the whole shell at one epoch."""

    epoch: float
    positions: np.ndarray  # (N, 3) m
    velocities: np.ndarray  # (N, 3) m/s
    elements: OrbitalElements

    def state(self, index: int) -> SatelliteState:
        pos = self.positions[index]
        return SatelliteState(
            sat_id=self.elements.sat_id(index),
            position=pos.copy(),
            velocity=self.velocities[index].copy(),
            nadir_point=ecef_to_geodetic(pos)[:2] + (0.0,),
        )

    def states(self) -> list[SatelliteState]:
        return [self.state(i) for i in range(len(self.positions))]


def build_constellation(cfg: ShellConfig) -> OrbitalElements:
    """Lay out ``num_planes x sats_per_plane`` satellites of a Walker shell.

    RAANs are spread evenly over 360 degrees starting at ``raan_offset``;
    in-plane slots are evenly spaced and plane ``p`` is advanced by
    ``p * phasing_factor * 360 / total`` degrees.
    """
    cfg.validate()
    planes, slots = np.meshgrid(
        np.arange(cfg.num_planes), np.arange(cfg.sats_per_plane), indexing="ij"
    )
    planes = planes.ravel()
    slots = slots.ravel()
    raan = np.radians(cfg.raan_offset + planes * 360.0 / cfg.num_planes)
    anomaly = (
        slots * 360.0 / cfg.sats_per_plane
        + planes * cfg.phasing_factor * 360.0 / cfg.size
    )
    return OrbitalElements(
        plane_index=planes,
        slot_index=slots,
        raan=np.mod(raan, 2 * np.pi),
        inclination=np.full(cfg.size, math.radians(cfg.inclination)),
        arg_latitude=np.mod(np.radians(anomaly), 2 * np.pi),
        semi_major_axis=cfg.semi_major_axis,
        earth_rotation=cfg.earth_rotation,
    )


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def propagate_arrays(elements: OrbitalElements, epoch_seconds: float) -> ShellSnapshot:
    if epoch_seconds < 0:
        raise ValueError("epoch must be non-negative")
    a = elements.semi_major_axis
    n = elements.mean_motion
    u = elements.arg_latitude + n * epoch_seconds
    cu, su = np.cos(u), np.sin(u)
    cO, sO = np.cos(elements.raan), np.sin(elements.raan)
    ci, si = np.cos(elements.inclination), np.sin(elements.inclination)
    # Rz(raan) @ Rx(inc) applied to (cos u, sin u, 0) and (-sin u, cos u, 0)
    pos = a * np.stack([cO * cu - sO * ci * su, sO * cu + cO * ci * su, si * su], axis=1)
    vel = a * n * np.stack(
        [-cO * su - sO * ci * cu, -sO * su + cO * ci * cu, si * cu], axis=1
    )
    if elements.earth_rotation:
        rot = _rot_z(-EARTH_ROTATION_RATE * epoch_seconds)
        pos = pos @ rot.T
        vel = vel @ rot.T
    return ShellSnapshot(epoch_seconds, pos, vel, elements)


def propagate(elements: OrbitalElements, epoch_seconds: float) -> list[SatelliteState]:
    return propagate_arrays(elements, epoch_seconds).states()


def geodetic_to_ecef(lat_deg, lon_deg, alt=0.0) -> np.ndarray:
    """Spherical-Earth conversion; broadcasts over array inputs."""
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    r = EARTH_RADIUS + np.asarray(alt, dtype=float)
    return np.stack(
        np.broadcast_arrays(r * np.cos(lat) * np.cos(lon),
                            r * np.cos(lat) * np.sin(lon),
                            r * np.sin(lat)),
        axis=-1,
    )


def ecef_to_geodetic(xyz) -> tuple[float, float, float]:
    x, y, z = (float(c) for c in xyz)
    r = math.sqrt(x * x + y * y + z * z)
    return math.degrees(math.asin(z / r)), math.degrees(math.atan2(y, x)), r - EARTH_RADIUS


def geometry(sat: SatelliteState, ue) -> GeometrySample:
    """Elevation, slant range and line-of-sight unit vector for a ground UE.

    ``ue`` is ``(lat_deg, lon_deg)`` or ``(lat_deg, lon_deg, 0)``.
    """
    ue_ecef = geodetic_to_ecef(ue[0], ue[1])
    los = np.asarray(sat.position, dtype=float) - ue_ecef
    rng = float(np.linalg.norm(los))
    unit = los / rng
    up = ue_ecef / np.linalg.norm(ue_ecef)
    elev = math.degrees(math.asin(np.clip(unit @ up, -1.0, 1.0)))
    return GeometrySample(elev, rng, unit)


def elevations(ue_ecef: np.ndarray, sat_positions: np.ndarray) -> np.ndarray:
    """Elevation in degrees of every satellite from every UE, shape (U, N)."""
    ue_ecef = np.atleast_2d(ue_ecef)
    los = sat_positions[None, :, :] - ue_ecef[:, None, :]
    rng = np.linalg.norm(los, axis=-1)
    up = ue_ecef / np.linalg.norm(ue_ecef, axis=-1, keepdims=True)
    sin_el = np.einsum("unk,uk->un", los, up) / rng
    return np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


def visible_satellites(ue, states: list[SatelliteState], min_elevation_deg: float = 10.0):
    """Satellites at or above the elevation mask, highest first.

    Returns ``(state, GeometrySample)`` pairs; ties break on ``sat_id``.
    """
    if not 0.0 <= min_elevation_deg <= 90.0:
        raise ValueError("min_elevation_deg must lie in [0, 90]")
    out = []
    for st in states:
        g = geometry(st, ue)
        if g.elevation >= min_elevation_deg:
            out.append((st, g))
    out.sort(key=lambda p: (-p[1].elevation, p[0].sat_id))
    return out
