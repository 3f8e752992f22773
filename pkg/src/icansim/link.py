"""Clear-sky line-of-sight downlink budget and co-colour SINR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .beams import AntennaModel, BeamPlan, BeamSpec, pattern_gain, uv_basis, uv_to_direction
from .constants import BOLTZMANN, REFERENCE_TEMPERATURE, SPEED_OF_LIGHT
from .constellation import SatId, SatelliteState, geodetic_to_ecef


class InactiveBeamError(ValueError):
    pass


@dataclass(frozen=True)
class UeRfModel:
    """Handheld terminal receive chain."""

    antenna_gain: float = 0.0  # dBi
    noise_figure: float = 7.0  # dB
    antenna_temperature: float = 290.0  # K
    per_color_bandwidth: float = 10e6  # Hz
    scenario_loss: float = 0.0  # dB, extra fixed loss for sensitivity runs

    def __post_init__(self):
        if not self.per_color_bandwidth > 0:
            raise ValueError("per_color_bandwidth must be positive")
        if self.noise_figure < 0:
            raise ValueError("noise_figure must be non-negative")


@dataclass(frozen=True)
class LinkMeasurement:
    ue_id: int
    sat_id: SatId
    beam_index: int
    rsrp: float  # dBm
    sinr: float  # dB
    snr: float  # dB
    off_boresight: float  # rad
    slant_range: float  # m


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(lin, dtype=float))


def free_space_path_loss(distance: float, frequency: float) -> float:
    if not np.all(np.asarray(distance) > 0):
        raise ValueError("distance must be positive")
    return 20.0 * np.log10(4.0 * math.pi * np.asarray(distance) * frequency / SPEED_OF_LIGHT)


def noise_power(rf: UeRfModel) -> float:
    """Thermal noise in dBm over one colour's bandwidth."""
    t_sys = rf.antenna_temperature + REFERENCE_TEMPERATURE * (10 ** (rf.noise_figure / 10) - 1)
    return 10.0 * math.log10(BOLTZMANN * t_sys * rf.per_color_bandwidth) + 30.0


def eirp_dbw(model: AntennaModel, rf: UeRfModel) -> float:
    return model.boresight_eirp_density + 10.0 * math.log10(rf.per_color_bandwidth / 1e6)


def _ue_ecef(ue) -> np.ndarray:
    ue = np.asarray(ue, dtype=float)
    if ue.shape == (3,) and np.linalg.norm(ue) > 1e5:
        return ue
    return geodetic_to_ecef(ue[0], ue[1])


def _off_boresight(sat_pos, beam_dir, ue_ecef) -> tuple[float, float]:
    los = ue_ecef - sat_pos
    rng = float(np.linalg.norm(los))
    cos = float(np.clip(beam_dir @ los / rng, -1.0, 1.0))
    return math.acos(cos), rng


def received_power(beam: BeamSpec, sat: SatelliteState, ue, model: AntennaModel,
                   rf: UeRfModel) -> float:
    """Received power in dBm at ``ue`` from one beam.

    ``ue`` is ``(lat, lon)`` in degrees or an ECEF vector.
    """
    if not beam.active:
        raise InactiveBeamError(f"beam {beam.owner_sat}/{beam.beam_index} is off")
    direction = uv_to_direction(np.asarray(beam.uv_center), uv_basis(sat.position, sat.velocity))
    angle, rng = _off_boresight(sat.position, direction, _ue_ecef(ue))
    gain = pattern_gain(angle, model)
    if gain <= 0.0:
        return -math.inf
    return (eirp_dbw(model, rf) + 10.0 * math.log10(gain)
            - free_space_path_loss(rng, model.carrier_frequency)
            + rf.antenna_gain - rf.scenario_loss + 30.0)


def _p0_watts(model: AntennaModel, rf: UeRfModel) -> float:
    return 10.0 ** ((eirp_dbw(model, rf) + rf.antenna_gain - rf.scenario_loss) / 10.0)


def plan_power(ue_ecef: np.ndarray, plan: BeamPlan, model: AntennaModel, rf: UeRfModel,
               n_colors: int, visible: np.ndarray | None = None,
               active: np.ndarray | None = None):
    """Per (UE, satellite, colour) received power in watts for a whole plan.

    ``visible`` masks satellites below each UE's horizon; by default the
    horizon test is done here.
    """
    ue_ecef = np.atleast_2d(np.asarray(ue_ecef, dtype=float))
    if visible is None:
        visible = above_horizon(ue_ecef, plan.positions)
    return kernels.aggregate_beam_power(
        ue_ecef,
        np.ascontiguousarray(plan.positions),
        np.ascontiguousarray(plan.beam_directions()),
        np.ascontiguousarray(plan.colors, dtype=np.int64),
        np.ascontiguousarray(plan.active if active is None else active, dtype=np.uint8),
        np.ascontiguousarray(visible, dtype=np.uint8),
        model.ka,
        model.wavelength,
        _p0_watts(model, rf),
        n_colors,
    )


def above_horizon(ue_ecef: np.ndarray, sat_positions: np.ndarray) -> np.ndarray:
    ue_ecef = np.atleast_2d(ue_ecef)
    up = ue_ecef / np.linalg.norm(ue_ecef, axis=1, keepdims=True)
    los = sat_positions[None, :, :] - ue_ecef[:, None, :]
    return np.einsum("usk,uk->us", los, up) >= 0.0


def sinr(ue, sat_id: SatId, beam_index: int, plan: BeamPlan, model: AntennaModel,
         rf: UeRfModel, ue_id: int = 0) -> LinkMeasurement:
    """SINR of one active beam against every other active co-colour beam.

    Interferers are all active beams in ``plan`` with the target's colour
    on satellites above the UE's horizon.
    """
    s = plan.index_of(sat_id)
    if not plan.active[s, beam_index]:
        raise InactiveBeamError(f"beam {sat_id}/{beam_index} is off")
    ue_ecef = _ue_ecef(ue)
    others = plan.active.copy()
    others[s, beam_index] = False
    color = int(plan.colors[s, beam_index])
    n_colors = int(plan.colors.max()) + 1
    color_power, _, _ = plan_power(ue_ecef, plan, model, rf, n_colors, active=others)
    interference = float(color_power[0, :, color].sum())

    direction = plan.beam_directions()[s, beam_index]
    angle, rng = _off_boresight(plan.positions[s], direction, ue_ecef)
    signal = _p0_watts(model, rf) * pattern_gain(angle, model) \
        * (model.wavelength / (4 * math.pi * rng)) ** 2
    noise_w = 10.0 ** ((noise_power(rf) - 30.0) / 10.0)
    rsrp = float(linear_to_db(signal)) + 30.0
    snr_db = float(linear_to_db(signal / noise_w))
    sinr_db = float(linear_to_db(signal / (interference + noise_w)))
    return LinkMeasurement(ue_id, sat_id, beam_index, rsrp, sinr_db, snr_db, angle, rng)
