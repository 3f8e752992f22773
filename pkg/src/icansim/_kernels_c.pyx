# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled received-power aggregation; mirrors ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, M_PI
from scipy.special.cython_special cimport j1

cnp.import_array()


def aggregate_beam_power(ue_ecef, sat_pos, beam_dirs, colors, active, visible,
                         double ka, double wavelength, double p0, int n_colors):
    cdef double[:, ::1] ue = np.ascontiguousarray(ue_ecef, dtype=np.float64)
    cdef double[:, ::1] sp = np.ascontiguousarray(sat_pos, dtype=np.float64)
    cdef double[:, :, ::1] bd = np.ascontiguousarray(beam_dirs, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] col = np.ascontiguousarray(colors, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] vis = np.ascontiguousarray(visible, dtype=np.uint8)
    cdef Py_ssize_t n_ue = ue.shape[0], n_sat = sp.shape[0], n_beam = bd.shape[1]
    color_power_arr = np.zeros((n_ue, n_sat, n_colors))
    best_power_arr = np.zeros((n_ue, n_sat))
    best_beam_arr = np.full((n_ue, n_sat), -1, dtype=np.int64)
    cdef double[:, :, ::1] cpow = color_power_arr
    cdef double[:, ::1] bpow = best_power_arr
    cdef cnp.int64_t[:, ::1] bbeam = best_beam_arr
    cdef double scale = p0 * (wavelength / (4.0 * M_PI)) ** 2
    cdef Py_ssize_t u, s, b, best
    cdef double lx, ly, lz, d2, inv, c, sn, x, g, p, pmax

    with nogil:
        for u in range(n_ue):
            for s in range(n_sat):
                if not vis[u, s]:
                    continue
                lx = ue[u, 0] - sp[s, 0]
                ly = ue[u, 1] - sp[s, 1]
                lz = ue[u, 2] - sp[s, 2]
                d2 = lx * lx + ly * ly + lz * lz
                inv = 1.0 / sqrt(d2)
                lx = lx * inv
                ly = ly * inv
                lz = lz * inv
                best = 0
                pmax = -1.0
                for b in range(n_beam):
                    if act[s, b]:
                        c = lx * bd[s, b, 0] + ly * bd[s, b, 1] + lz * bd[s, b, 2]
                        sn = 1.0 - c * c
                        sn = sqrt(sn) if sn > 0.0 else 0.0
                        x = ka * sn
                        if x < 1e-12:
                            g = 1.0
                        else:
                            g = j1(x) / x
                            g = 4.0 * g * g
                        p = g * scale / d2
                    else:
                        p = 0.0
                    if col[s, b] < n_colors:
                        cpow[u, s, col[s, b]] += p
                    if p > pmax:
                        pmax = p
                        best = b
                bpow[u, s] = pmax if pmax > 0.0 else 0.0
                bbeam[u, s] = best
    return color_power_arr, best_power_arr, best_beam_arr
