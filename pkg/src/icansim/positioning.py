"""ToA error model, positioning-satellite selection, TDOA Fisher
information / CRLB / GDOP, and a Monte-Carlo Gauss-Newton oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT
from .constellation import SatId

MODE_3D = "3D"
MODE_2D = "2D"

# reciprocal condition number below which a FIM is declared singular
_RCOND_FLOOR = 1e-12


class SingularFimError(np.linalg.LinAlgError):
    """Geometry leaves at least one position axis unobservable."""


class InsufficientSatellitesError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PrsbSignal:
    """Ranging burst. ``coherent_gain`` is the time-bandwidth product
    collected by the correlator (one 15 kHz symbol over 3.6 MHz by default)."""

    occupied_bandwidth: float = 3.6e6  # Hz
    coherent_gain: float = 240.0
    flat_spectrum: bool = True
    rms_bandwidth_override: float | None = None

    def __post_init__(self):
        if not self.occupied_bandwidth > 0:
            raise ValueError("occupied_bandwidth must be positive")
        if self.coherent_gain < 1:
            raise ValueError("coherent_gain must be >= 1")

    @property
    def rms_bandwidth(self) -> float:
        if self.flat_spectrum or self.rms_bandwidth_override is None:
            return self.occupied_bandwidth / math.sqrt(12.0)
        return self.rms_bandwidth_override


@dataclass
class CrlbResult:
    ue_id: int
    snapshot_index: int
    scheme: str
    num_sats: int
    sat_set: tuple
    fim: np.ndarray
    crlb_rmse: float
    gdop: float
    per_sat_sigma_range: np.ndarray
    extra: dict = field(default_factory=dict)


def toa_variance(sinr_linear, signal: PrsbSignal):
    """ToA variance (s^2): ``1 / (8 pi^2 beta^2 SINR G)``."""
    sinr_linear = np.asarray(sinr_linear, dtype=float)
    if np.any(sinr_linear <= 0):
        raise ValueError("SINR must be positive")
    beta = signal.rms_bandwidth
    out = 1.0 / (8.0 * math.pi**2 * beta**2 * sinr_linear * signal.coherent_gain)
    return float(out) if out.ndim == 0 else out


def select_positioning_sats(
    serving: SatId,
    candidates: Mapping[SatId, tuple[float, float]],
    n: int,
    rule: str = "sinr",
) -> list[SatId]:
    """Serving satellite first, then the ``n - 1`` best others.

    ``candidates`` maps sat_id to ``(sinr_db, elevation_deg)`` for every
    measurable satellite. ``rule`` is ``"sinr"`` or ``"elevation"``.
    """
    if rule not in ("sinr", "elevation"):
        raise ValueError(f"unknown selection rule {rule!r}")
    if serving not in candidates or len(candidates) < n:
        raise InsufficientSatellitesError(
            f"{len(candidates)} measurable satellites, {n} required"
        )
    key = 0 if rule == "sinr" else 1
    others = sorted(
        (sid for sid in candidates if sid != serving),
        key=lambda sid: (-candidates[sid][key], sid),
    )
    return [serving] + others[: n - 1]


def local_horizontal(ue_ecef) -> np.ndarray:
    """East and north unit vectors at ``ue_ecef`` as a (3, 2) matrix."""
    up = np.asarray(ue_ecef, dtype=float)
    up = up / np.linalg.norm(up)
    east = np.cross([0.0, 0.0, 1.0], up)
    if np.linalg.norm(east) < 1e-12:
        east = np.array([0.0, 1.0, 0.0])
    east /= np.linalg.norm(east)
    north = np.cross(up, east)
    return np.stack([east, north], axis=1)


def tdoa_jacobian(ue_ecef, sat_positions) -> np.ndarray:
    """Rows ``e_ref - e_i`` (i >= 1) with ``e`` the UE-to-satellite unit vectors."""
    los = np.asarray(sat_positions, dtype=float) - np.asarray(ue_ecef, dtype=float)
    e = los / np.linalg.norm(los, axis=-1, keepdims=True)
    return e[..., :1, :] - e[..., 1:, :]


def _project(jac, ue_ecef, mode):
    if mode == MODE_3D:
        return jac
    if mode == MODE_2D:
        return jac @ local_horizontal(ue_ecef)
    raise ValueError(f"unknown CRLB mode {mode!r}")


def _checked_inverse(mat: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(mat)
    if eig[0] <= _RCOND_FLOOR * max(eig[-1], 0.0) or eig[-1] <= 0:
        raise SingularFimError(f"singular FIM (eigenvalues {eig})")
    return np.linalg.inv(mat)


def tdoa_covariance(sigma_range) -> np.ndarray:
    """Covariance of range differences against the first satellite."""
    var = np.asarray(sigma_range, dtype=float) ** 2
    return np.diag(var[1:]) + var[0]


def tdoa_crlb(ue_true_position, sat_positions, sigma_tau, mode: str = MODE_3D,
              ue_id: int = 0, snapshot_index: int = 0, scheme: str = "",
              sat_set: Sequence = ()) -> CrlbResult:
    """TDOA CRLB with the first satellite as reference.

    Raises :class:`SingularFimError` for unobservable geometries.
    """
    sat_positions = np.asarray(sat_positions, dtype=float)
    n = len(sat_positions)
    need = 4 if mode == MODE_3D else 3
    if n < need:
        raise InsufficientSatellitesError(f"{mode} TDOA needs {need} satellites, got {n}")
    sigma_range = SPEED_OF_LIGHT * np.asarray(sigma_tau, dtype=float)
    jac = _project(tdoa_jacobian(ue_true_position, sat_positions), ue_true_position, mode)
    cov = tdoa_covariance(sigma_range)
    fim = jac.T @ np.linalg.solve(cov, jac)
    fim = 0.5 * (fim + fim.T)
    crlb = math.sqrt(np.trace(_checked_inverse(fim)))
    dop = math.sqrt(np.trace(_checked_inverse(jac.T @ jac)))
    return CrlbResult(
        ue_id=ue_id,
        snapshot_index=snapshot_index,
        scheme=scheme,
        num_sats=n,
        sat_set=tuple(sat_set),
        fim=fim,
        crlb_rmse=crlb,
        gdop=dop,
        per_sat_sigma_range=sigma_range,
    )


def gdop(ue_ecef, sat_positions, mode: str = MODE_3D) -> float:
    jac = _project(tdoa_jacobian(ue_ecef, sat_positions), ue_ecef, mode)
    return math.sqrt(np.trace(_checked_inverse(jac.T @ jac)))


@dataclass(frozen=True)
class MonteCarloResult:
    rmse: float
    nonconvergence: float
    trials: int


def monte_carlo_rmse(ue_true, sat_states, sigma_tau, trials: int = 10_000,
                     seed: int = 0, mode: str = MODE_3D, init_spread: float = 1000.0,
                     max_iter: int = 50, step_tol: float = 1e-4,
                     max_nonconvergence: float = 0.05) -> MonteCarloResult:
    """Empirical RMSE of a weighted Gauss-Newton TDOA solver.

    Each trial draws Gaussian ToA errors, forms range differences against
    the first satellite and iterates from the truth displaced by
    ``init_spread`` metres (per axis, Gaussian). In 2D mode the solver
    moves only along the local horizontal plane.
    """
    if trials < 100:
        raise ValueError("at least 100 trials required")
    truth = np.asarray(ue_true, dtype=float)
    sats = np.array([getattr(s, "position", s) for s in sat_states], dtype=float)
    sigma_r = SPEED_OF_LIGHT * np.asarray(sigma_tau, dtype=float)
    rng = np.random.default_rng(seed)

    true_ranges = np.linalg.norm(sats - truth, axis=1)
    noisy = true_ranges + sigma_r * rng.standard_normal((trials, len(sats)))
    meas = noisy[:, 1:] - noisy[:, :1]
    var = sigma_r**2
    weight = np.linalg.inv(np.diag(var[1:]) + var[0])

    if mode == MODE_2D:
        basis = local_horizontal(truth)
    else:
        basis = np.eye(3)
    dim = basis.shape[1]
    coeff = rng.standard_normal((trials, dim)) * init_spread
    done = np.zeros(trials, dtype=bool)
    for _ in range(max_iter):
        pos = truth + coeff @ basis.T
        diff = sats[None, :, :] - pos[:, None, :]
        ranges = np.linalg.norm(diff, axis=2)
        unit = diff / ranges[..., None]
        pred = ranges[:, 1:] - ranges[:, :1]
        jac = (unit[:, :1, :] - unit[:, 1:, :]) @ basis  # d(pred)/d(coeff)
        resid = meas - pred
        jtw = np.einsum("tij,ik->tjk", jac, weight)
        normal = jtw @ jac
        rhs = np.einsum("tjk,tk->tj", jtw, resid)
        step = np.linalg.solve(normal, rhs[..., None])[..., 0]
        step[done] = 0.0
        coeff = coeff + step
        done |= np.linalg.norm(step, axis=1) < step_tol
        if done.all():
            break
    err = coeff[done]
    frac_bad = 1.0 - done.mean()
    if frac_bad > max_nonconvergence:
        raise NonConvergenceError(f"{frac_bad:.1%} of trials did not converge")
    rmse = math.sqrt(np.mean(np.sum(err**2, axis=1))) if len(err) else math.nan
    return MonteCarloResult(rmse, float(frac_bad), trials)
