"""Pure-numpy reference implementation of the hot kernels."""
import numpy as np
from scipy.special import j1

_UE_CHUNK = 32


def aggregate_beam_power(ue_ecef, sat_pos, beam_dirs, colors, active, visible,
                         ka, wavelength, p0, n_colors):
    """Received power of every active beam summed per (UE, satellite, colour).

    Power of one beam is ``p0 * G(x) * (wavelength / (4 pi d))**2`` with
    ``G(x) = 4 (J1(x)/x)^2`` and ``x = ka * sin(off-boresight)``.

    Returns ``(color_power[U, S, C], best_power[U, S], best_beam[U, S])``;
    ``best_beam`` is -1 where the satellite is not visible.
    """
    ue_ecef = np.ascontiguousarray(ue_ecef, dtype=np.float64)
    n_ue, n_sat, n_beam = len(ue_ecef), len(sat_pos), beam_dirs.shape[1]
    color_power = np.zeros((n_ue, n_sat, n_colors))
    best_power = np.zeros((n_ue, n_sat))
    best_beam = np.full((n_ue, n_sat), -1, dtype=np.int64)
    onehot = (colors[:, :, None] == np.arange(n_colors)) & active[:, :, None].astype(bool)
    onehot = onehot.astype(np.float64)
    scale = p0 * (wavelength / (4.0 * np.pi)) ** 2
    for lo in range(0, n_ue, _UE_CHUNK):
        hi = min(lo + _UE_CHUNK, n_ue)
        los = ue_ecef[lo:hi, None, :] - sat_pos[None, :, :]
        dist2 = np.einsum("usk,usk->us", los, los)
        los = los / np.sqrt(dist2)[..., None]
        cos = np.einsum("usk,sbk->usb", los, beam_dirs)
        sin = np.sqrt(np.clip(1.0 - cos * cos, 0.0, None))
        x = ka * sin
        with np.errstate(invalid="ignore", divide="ignore"):
            gain = np.where(x < 1e-12, 1.0, 4.0 * (j1(x) / x) ** 2)
        power = gain * (scale / dist2)[..., None]
        vis = visible[lo:hi]
        power = np.where(vis[:, :, None] & active[None].astype(bool), power, 0.0)
        color_power[lo:hi] = np.einsum("usb,sbc->usc", power, onehot)
        idx = np.argmax(power, axis=2)
        best_power[lo:hi] = np.take_along_axis(power, idx[..., None], axis=2)[..., 0]
        best_beam[lo:hi] = np.where(vis, idx, -1)
    return color_power, best_power, best_beam
