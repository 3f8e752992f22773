"""UV-plane beam layouts, frequency colouring, beam re-pointing and the
circular-aperture (Bessel) antenna pattern.

A satellite's UV plane is normal to its nadir direction ``w``. The first
axis ``x`` is the velocity projected onto that plane and ``y = w x x``, so
a direction ``d`` maps to ``(u, v) = (d.x, d.y) = (sin t cos p, sin t sin p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import j1

from .constants import EARTH_RADIUS, SPEED_OF_LIGHT
from .constellation import SatId, SatelliteState

BEAMS_PER_SATELLITE = 61
RINGS_61 = 4

COMMUNICATION = "communication"
POSITIONING = "positioning"
CRSB = "CRSB"
PRSB = "PRSB"
BH = "BH"
TMCB = "TMCB"

# first zero of J1 and the half-power argument of (2 J1(x)/x)^2
J1_FIRST_ZERO = 3.8317059702075125


class LayoutError(ValueError):
    """A beam centre falls outside the unit disk of direction cosines."""


class SteeringError(ValueError):
    """Target lies behind the satellite's UV plane."""


class UVPoint(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class AntennaModel:
    aperture_radius: float = 1.0  # m
    carrier_frequency: float = 2e9  # Hz
    boresight_eirp_density: float = 40.0  # dBW/MHz

    def __post_init__(self):
        if min(self.aperture_radius, self.carrier_frequency) <= 0:
            raise ValueError("aperture radius and carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def ka(self) -> float:
        return 2.0 * math.pi * self.aperture_radius / self.wavelength


@dataclass(frozen=True)
class BeamSpec:
    owner_sat: SatId
    beam_index: int
    uv_center: UVPoint
    color: int
    role: str
    active: bool


@dataclass(frozen=True, eq=False)
class BeamPlan:
    """Beam configuration of a set of satellites during one ISB phase.

    Array fields are indexed ``[satellite, beam]`` in the order of
    ``sat_ids``. ``basis`` holds each satellite's UV axes ``(x, y, w)``.
    """

    mode: str
    phase: str
    serving: SatId | None
    assisting: tuple[SatId, ...]
    sat_ids: tuple[SatId, ...]
    uv_centers: np.ndarray  # (S, B, 2)
    colors: np.ndarray  # (S, B)
    positioning: np.ndarray  # (S, B) bool, role flag
    active: np.ndarray  # (S, B) bool
    basis: np.ndarray  # (S, 3, 3)
    positions: np.ndarray  # (S, 3)
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index.update({sid: i for i, sid in enumerate(self.sat_ids)})

    @property
    def cluster(self) -> tuple[SatId | None, tuple[SatId, ...]]:
        return self.serving, self.assisting

    def index_of(self, sat_id: SatId) -> int:
        return self._index[sat_id]

    def active_count(self, sat_id: SatId) -> int:
        return int(self.active[self._index[sat_id]].sum())

    def beam_directions(self) -> np.ndarray:
        """Unit pointing vectors in ECEF, shape (S, B, 3)."""
        return uv_to_direction(self.uv_centers, self.basis)

    def beams(self, sat_id: SatId | None = None) -> list[BeamSpec]:
        rows = [self._index[sat_id]] if sat_id is not None else range(len(self.sat_ids))
        out = []
        for s in rows:
            for b in range(self.uv_centers.shape[1]):
                out.append(BeamSpec(
                    owner_sat=self.sat_ids[s],
                    beam_index=b,
                    uv_center=UVPoint(*map(float, self.uv_centers[s, b])),
                    color=int(self.colors[s, b]),
                    role=POSITIONING if self.positioning[s, b] else COMMUNICATION,
                    active=bool(self.active[s, b]),
                ))
        return out


# ---------------------------------------------------------------- layouts

def hex_axial(rings: int) -> np.ndarray:
    """Axial lattice coordinates ``(q, r)`` ring by ring, centre first."""
    if rings < 0:
        raise ValueError("rings must be >= 0")
    steps = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    coords = [(0, 0)]
    for ring in range(1, rings + 1):
        q, r = -ring, ring
        for dq, dr in steps:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr
    return np.array(coords, dtype=int)


_LATTICE = np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])


def _check_unit_disk(points: np.ndarray) -> None:
    radius = np.hypot(points[..., 0], points[..., 1])
    if np.any(radius > 1.0):
        raise LayoutError(
            f"layout reaches |(u, v)| = {radius.max():.4f} > 1"
        )


def hex_layout(rings: int, uv_spacing: float) -> np.ndarray:
    """Hexagonal lattice of ``3 r^2 + 3 r + 1`` UV points centred at the origin."""
    if not uv_spacing > 0:
        raise ValueError("uv_spacing must be positive")
    points = uv_spacing * (hex_axial(rings) @ _LATTICE)
    _check_unit_disk(points)
    return points


def translate_layout(layout: np.ndarray, center) -> np.ndarray:
    out = np.asarray(layout, dtype=float) + np.asarray(center, dtype=float)
    _check_unit_disk(out)
    return out


def assign_colors(layout: np.ndarray, reuse_factor: int) -> np.ndarray:
    """Colour index per beam of a hexagonal layout.

    Reuse 3 uses ``(q - r) mod 3`` on the lattice coordinates and reuse 4
    uses the two coordinate parities; both are proper colourings of the
    nearest-neighbour graph.
    """
    layout = np.asarray(layout, dtype=float)
    if reuse_factor not in (1, 3, 4):
        raise ValueError(f"unsupported reuse factor {reuse_factor}")
    if reuse_factor == 1 or len(layout) == 1:
        return np.zeros(len(layout), dtype=int)
    rel = layout - layout[0]
    dist = np.hypot(rel[1:, 0], rel[1:, 1])
    spacing = dist.min()
    axial = np.rint(rel @ np.linalg.inv(_LATTICE) / spacing).astype(int)
    q, r = axial[:, 0], axial[:, 1]
    if reuse_factor == 3:
        return np.mod(q - r, 3)
    return np.mod(q, 2) + 2 * np.mod(r, 2)


# ---------------------------------------------------------------- pattern

def pattern_gain(off_boresight_angle, model: AntennaModel):
    """Normalised gain ``4 |J1(x) / x|^2`` with ``x = k a sin(angle)``."""
    x = model.ka * np.sin(np.asarray(off_boresight_angle, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(np.abs(x) < 1e-12, 1.0, 4.0 * (j1(x) / x) ** 2)
    return float(g) if np.ndim(g) == 0 else g


def half_power_argument() -> float:
    return brentq(lambda x: 4.0 * (j1(x) / x) ** 2 - 0.5, 0.5, J1_FIRST_ZERO)


def half_power_angle(model: AntennaModel) -> float:
    """Off-boresight angle (rad) where the pattern drops to one half."""
    return math.asin(half_power_argument() / model.ka)


def default_beam_spacing(model: AntennaModel) -> float:
    """UV distance between adjacent beams: sqrt(3) * sin(HPBW / 2)."""
    return math.sqrt(3.0) * math.sin(half_power_angle(model))


# ---------------------------------------------------------------- pointing

def uv_basis(position, velocity) -> np.ndarray:
    """Rows ``x, y, w`` of the satellite's UV frame (w points to nadir)."""
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    w = -position / np.linalg.norm(position, axis=-1, keepdims=True)
    x = velocity - np.sum(velocity * w, axis=-1, keepdims=True) * w
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    y = np.cross(w, x)
    return np.stack([x, y, w], axis=-2)


def uv_to_direction(uv: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Unit direction vectors for UV points; broadcasts ``(..., 2)`` against ``(..., 3, 3)``."""
    uv = np.asarray(uv, dtype=float)
    u, v = uv[..., 0], uv[..., 1]
    n = np.sqrt(np.clip(1.0 - u * u - v * v, 0.0, None))
    if basis.ndim == 3 and uv.ndim == 3:
        basis = basis[:, None, :, :]
    return u[..., None] * basis[..., 0, :] + v[..., None] * basis[..., 1, :] + n[..., None] * basis[..., 2, :]


def steer_to_target(sat: SatelliteState, target_ecef) -> UVPoint:
    """UV coordinates that point a beam from ``sat`` at ``target_ecef``."""
    basis = uv_basis(sat.position, sat.velocity)
    d = np.asarray(target_ecef, dtype=float) - sat.position
    d = d / np.linalg.norm(d)
    if d @ basis[2] <= 0.0:
        raise SteeringError("target is not in front of the satellite")
    return UVPoint(float(d @ basis[0]), float(d @ basis[1]))


def nadir_ecef(position) -> np.ndarray:
    position = np.asarray(position, dtype=float)
    return EARTH_RADIUS * position / np.linalg.norm(position, axis=-1, keepdims=True)


def ground_intersection(position, directions) -> np.ndarray:
    """First intersection of rays with the Earth sphere; NaN where they miss."""
    position = np.asarray(position, dtype=float)
    d = np.asarray(directions, dtype=float)
    b = np.sum(d * position, axis=-1)
    c = np.sum(position * position, axis=-1) - EARTH_RADIUS**2
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        t = -b - np.sqrt(disc)
    t = np.where((disc >= 0) & (t > 0), t, np.nan)
    return position + t[..., None] * d


def central_angle(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cos = np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


# ---------------------------------------------------------------- plans

def _ensure_sequence(states) -> list[SatelliteState]:
    return list(states.values()) if isinstance(states, dict) else list(states)


def build_beam_plan(
    mode: str,
    phase: str,
    serving: SatId | None,
    assisting: Sequence[SatId],
    states,
    layout: np.ndarray,
    colors: np.ndarray,
    edge_shutoff: bool = False,
) -> BeamPlan:
    """Beam plan for ``states`` in one phase of the ISB period.

    In the CRSB phase, and for TMCB in either phase, every satellite keeps
    its own-nadir layout. For BH in the PRSB phase the serving satellite
    keeps its layout and each assisting satellite shifts its layout onto
    the serving nadir. With ``edge_shutoff`` assisting beams landing beyond
    the serving footprint (or missing the Earth) are switched off instead
    of raising.
    """
    if mode not in (BH, TMCB) or phase not in (CRSB, PRSB):
        raise ValueError(f"unknown mode/phase {mode}/{phase}")
    states = _ensure_sequence(states)
    layout = np.asarray(layout, dtype=float)
    colors = np.asarray(colors, dtype=int)
    sat_ids = tuple(st.sat_id for st in states)
    by_id = {st.sat_id: st for st in states}
    n_sat, n_beam = len(states), len(layout)

    positions = np.array([st.position for st in states], dtype=float).reshape(n_sat, 3)
    velocities = np.array([st.velocity for st in states], dtype=float).reshape(n_sat, 3)
    basis = uv_basis(positions, velocities) if n_sat else np.zeros((0, 3, 3))
    uv = np.broadcast_to(layout, (n_sat, n_beam, 2)).copy()
    active = np.ones((n_sat, n_beam), dtype=bool)
    role = np.zeros((n_sat, n_beam), dtype=bool)
    color_grid = np.broadcast_to(colors, (n_sat, n_beam)).copy()
    assisting = tuple(a for a in assisting if a != serving)

    if mode == BH and phase == PRSB:
        if serving not in by_id:
            raise KeyError(f"serving satellite {serving} not among states")
        srv = by_id[serving]
        target = nadir_ecef(srv.position)
        if edge_shutoff:
            own_dirs = uv_to_direction(layout, basis[sat_ids.index(serving)])
            hits = ground_intersection(srv.position, own_dirs)
            footprint = np.nanmax(central_angle(hits, target))
        role[sat_ids.index(serving)] = True
        for sid in assisting:
            i = sat_ids.index(sid)
            center = steer_to_target(by_id[sid], target)
            if edge_shutoff:
                moved = layout + np.asarray(center)
                inside = np.hypot(moved[:, 0], moved[:, 1]) <= 1.0
                moved[~inside] = np.asarray(center)  # placeholder; beam is off
                hits = ground_intersection(positions[i], uv_to_direction(moved, basis[i]))
                dist = central_angle(hits, target)
                active[i] = inside & np.isfinite(hits[:, 0]) & (dist <= footprint + 1e-12)
            else:
                moved = translate_layout(layout, center)
            uv[i] = moved
            role[i] = True

    return BeamPlan(
        mode=mode,
        phase=phase,
        serving=serving,
        assisting=assisting,
        sat_ids=sat_ids,
        uv_centers=uv,
        colors=color_grid,
        positioning=role,
        active=active,
        basis=basis,
        positions=positions,
    )
