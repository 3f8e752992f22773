"""End-to-end scenario runner, summary statistics and result emission."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beams import (BH, CRSB, PRSB, TMCB, LayoutError, assign_colors, build_beam_plan,
                    central_angle, default_beam_spacing, ground_intersection, hex_layout,
                    nadir_ecef, steer_to_target, uv_basis, uv_to_direction)
from .config import ScenarioConfig, tool_version
from .constellation import (OrbitalElements, ShellSnapshot, build_constellation, elevations,
                            geodetic_to_ecef, propagate_arrays)
from .link import noise_power, plan_power
from .positioning import (MODE_2D, MODE_3D, InsufficientSatellitesError, SingularFimError,
                          select_positioning_sats, tdoa_crlb, toa_variance)
from .procedure import Action, Phase, RadioSnapshot, Thresholds, UEProcState, step

log = logging.getLogger(__name__)

CSV_COLUMNS = ("snapshot", "ue_id", "scheme", "num_sats", "crlb_m", "gdop",
               "serving_sat", "num_measurable", "status")
ACTION_COLUMNS = ("snapshot", "ue_id", "phase_before", "phase_after", "action", "serving_sat")

STATUS_OK = "ok"
STATUS_INSUFFICIENT = "insufficient_satellites"
STATUS_SINGULAR = "singular_fim"
STATUS_NOT_CAMPED = "not_camped"


class EmptyResultsError(ValueError):
    pass


def format_sat(sat_id) -> str:
    return "" if sat_id is None else f"{sat_id[0]}-{sat_id[1]}"


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.9g}"


@dataclass
class ResultRow:
    snapshot: int
    ue_id: int
    scheme: str
    num_sats: int
    crlb_m: float
    gdop: float
    serving_sat: str
    num_measurable: int
    status: str
    crlb_3d_m: float = math.nan
    crlb_2d_m: float = math.nan

    def csv_fields(self) -> list[str]:
        return [str(self.snapshot), str(self.ue_id), self.scheme, str(self.num_sats),
                _fmt(self.crlb_m), _fmt(self.gdop), self.serving_sat,
                str(self.num_measurable), self.status]

    def to_json(self) -> dict:
        return {
            "snapshot": self.snapshot, "ue_id": self.ue_id, "scheme": self.scheme,
            "num_sats": self.num_sats, "crlb_m": _json_float(self.crlb_m),
            "gdop": _json_float(self.gdop), "serving_sat": self.serving_sat,
            "num_measurable": self.num_measurable, "status": self.status,
            "crlb_3d_m": _json_float(self.crlb_3d_m), "crlb_2d_m": _json_float(self.crlb_2d_m),
        }


def _json_float(x):
    return None if x is None or math.isnan(x) else float(x)


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)
    link_rows: list[dict] = field(default_factory=list)
    actions: list[tuple] = field(default_factory=list)
    fingerprint: str = ""
    version: str = ""
    config: dict = field(default_factory=dict)
    epochs: list[float] = field(default_factory=list)

    def sort(self) -> None:
        order = {BH: 0, TMCB: 1}
        self.rows.sort(key=lambda r: (r.snapshot, r.ue_id, order.get(r.scheme, 9), r.num_sats))
        self.link_rows.sort(key=lambda r: (r["snapshot"], r["ue_id"], order.get(r["scheme"], 9),
                                           r["num_sats"]))


# ---------------------------------------------------------------- scenario context

@dataclass
class Scenario:
    """Everything derived once from a configuration."""

    cfg: ScenarioConfig
    elements: OrbitalElements
    layout: np.ndarray
    colors: np.ndarray
    footprint_angle: float  # rad, Earth central angle of the outermost own beam centre
    ue_lonlat: np.ndarray
    ue_ecef: np.ndarray
    noise_w: float
    ue_ids: np.ndarray

    @classmethod
    def build(cls, cfg: ScenarioConfig) -> "Scenario":
        cfg.validate()
        elements = build_constellation(cfg.shell)
        spacing = cfg.beam_spacing or default_beam_spacing(cfg.antenna)
        layout = hex_layout(cfg.rings, spacing)
        colors = assign_colors(layout, cfg.reuse_factor)
        # own-layout footprint is identical for every satellite of the shell
        pos = np.array([elements.semi_major_axis, 0.0, 0.0])
        basis = uv_basis(pos, np.array([0.0, 1.0, 0.0]))
        hits = ground_intersection(pos, uv_to_direction(layout, basis))
        footprint = float(np.nanmax(central_angle(hits, nadir_ecef(pos))))
        rng = np.random.default_rng(cfg.seed)
        lon0, lon1, lat0, lat1 = cfg.ue_region
        lon = rng.uniform(lon0, lon1, cfg.ue_count)
        lat = rng.uniform(lat0, lat1, cfg.ue_count)
        noise_w = 10.0 ** ((noise_power(cfg.rf) - 30.0) / 10.0)
        return cls(cfg, elements, layout, colors, footprint, np.stack([lon, lat], axis=1),
                   geodetic_to_ecef(lat, lon), noise_w, np.arange(cfg.ue_count))

    def subset(self, ue_ids) -> "Scenario":
        """Same scenario restricted to some UEs; per-UE results are unchanged."""
        ids = np.asarray(ue_ids, dtype=int)
        if ids.size == 0 or ids.min() < 0 or ids.max() >= self.cfg.ue_count:
            raise IndexError(f"UE ids out of range 0..{self.cfg.ue_count - 1}")
        return dataclasses.replace(self, ue_lonlat=self.ue_lonlat[ids],
                                   ue_ecef=self.ue_ecef[ids], ue_ids=ids)

    @property
    def n_colors(self) -> int:
        return int(self.colors.max()) + 1

    def epoch(self, index: int) -> float:
        return index * self.elements.period / self.cfg.num_snapshots


def _worker_count(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("ICAN_SIM_THREADS", "1") or 1)
    return max(1, threads)


class _PowerEvaluator:
    """Splits UE batches across threads; each UE is computed independently,
    so results do not depend on the worker count."""

    def __init__(self, scn: Scenario, pool: ThreadPoolExecutor | None, workers: int):
        self.scn = scn
        self.pool = pool
        self.workers = workers

    def __call__(self, ue_ecef, plan, visible):
        cfg = self.scn.cfg
        n = len(ue_ecef)
        if self.pool is None or n < 2 * self.workers:
            return plan_power(ue_ecef, plan, cfg.antenna, cfg.rf, self.scn.n_colors, visible)
        bounds = np.linspace(0, n, self.workers + 1).astype(int)
        jobs = [self.pool.submit(plan_power, ue_ecef[a:b], plan, cfg.antenna, cfg.rf,
                                 self.scn.n_colors, visible[a:b])
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        parts = [j.result() for j in jobs]
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


# ---------------------------------------------------------------- cluster selection

def select_assisting(scn: Scenario, snap: ShellSnapshot, rel: np.ndarray, serving: int,
                     count: int) -> list[int]:
    """Assisting satellites for a serving satellite (indices into ``rel``).

    Candidates see the serving nadir at or above the elevation mask and are
    ranked by that elevation. Satellites whose own footprint already covers
    the serving nadir are skipped when ``exclude_covering_assistants`` is
    set; without edge shutoff only satellites whose shifted layout stays
    inside the unit disk qualify.
    """
    cfg = scn.cfg
    positions = snap.positions[rel]
    target = nadir_ecef(positions[serving])
    elev = elevations(target[None], positions)[0]
    order = sorted(range(len(rel)), key=lambda i: (-elev[i], int(rel[i])))
    radius = float(np.max(np.hypot(scn.layout[:, 0], scn.layout[:, 1])))
    chosen: list[int] = []
    for i in order:
        if len(chosen) == count or elev[i] < cfg.min_elevation:
            break
        if i == serving:
            continue
        if cfg.exclude_covering_assistants and \
                central_angle(nadir_ecef(positions[i]), target) <= scn.footprint_angle:
            continue
        if not cfg.edge_shutoff:
            center = steer_to_target(snap.state(int(rel[i])), target)
            if math.hypot(*center) + radius > 1.0:
                continue
        chosen.append(i)
    return chosen


# ---------------------------------------------------------------- measurements

@dataclass
class Measurements:
    """PRSB measurements of one scheme for a block of UEs over ``rel`` satellites."""

    sinr: np.ndarray  # (U, S) linear; 0 where nothing is received
    rsrp_w: np.ndarray  # (U, S) best-beam power


def _sinr_from_power(color_power, best_power, best_beam, colors, noise_w):
    total = color_power.sum(axis=1)  # (U, C)
    beam = np.maximum(best_beam, 0)
    beam_color = colors[np.arange(colors.shape[0])[None, :], beam]  # (U, S)
    same = np.take_along_axis(total, beam_color, axis=1)
    interference = np.clip(same - best_power, 0.0, None)
    sinr = np.where(best_power > 0, best_power / (interference + noise_w), 0.0)
    return sinr


# ---------------------------------------------------------------- procedure helpers

def _radio(rsrp_dbm_row: np.ndarray, sat_ids: list, eligible: np.ndarray, serving,
           measurable=None) -> RadioSnapshot:
    idx = np.flatnonzero(eligible)
    rsrp = {sat_ids[i]: float(rsrp_dbm_row[i]) for i in idx}
    if serving is not None and serving not in rsrp:
        rsrp[serving] = -math.inf
    avail = None
    if measurable is not None:
        avail = {sat_ids[i]: True for i in np.flatnonzero(measurable)}
    return RadioSnapshot(rsrp, avail)


def _log_action(table: ResultsTable, snapshot, ue_id, before: UEProcState, after: UEProcState,
                actions) -> None:
    for act in actions:
        table.actions.append((snapshot, ue_id, before.phase.name, after.phase.name,
                              act.value, format_sat(after.serving_sat)))


# ---------------------------------------------------------------- main loop

def run_scenario(cfg: ScenarioConfig, threads: int | None = None, progress=None,
                 ue_ids=None, last_snapshot: int | None = None,
                 capture: dict | None = None, first_snapshot: int = 0) -> ResultsTable:
    """Simulate every snapshot for all UEs, schemes and satellite counts.

    ``ue_ids`` restricts the run to some UEs and ``last_snapshot`` stops
    early; neither changes the rows that are produced. A non-zero
    ``first_snapshot`` starts with every UE searching at that epoch. ``capture`` receives
    the full :class:`CrlbResult` of every located UE keyed by
    ``(snapshot, ue_id, scheme, n)``.
    """
    scn = Scenario.build(cfg)
    if ue_ids is not None:
        scn = scn.subset(ue_ids)
    stop = cfg.num_snapshots if last_snapshot is None else min(last_snapshot + 1,
                                                               cfg.num_snapshots)
    table = ResultsTable(fingerprint=cfg.fingerprint(), version=tool_version(),
                         config=cfg.to_dict())
    workers = _worker_count(threads)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        power = _PowerEvaluator(scn, pool, workers)
        states = [UEProcState() for _ in range(len(scn.ue_ids))]
        for k in range(first_snapshot, stop):
            _run_snapshot(scn, k, states, power, table, capture)
            if progress is not None:
                progress(k + 1, stop)
    finally:
        if pool is not None:
            pool.shutdown()
    table.sort()
    return table


def _run_snapshot(scn: Scenario, k: int, ue_states: list[UEProcState], power,
                  table: ResultsTable, capture: dict | None = None) -> None:
    cfg = scn.cfg
    n_ue = len(scn.ue_ids)
    ids = [int(i) for i in scn.ue_ids]
    epoch = scn.epoch(k)
    table.epochs.append(epoch)
    snap = propagate_arrays(scn.elements, epoch)
    elev_all = elevations(scn.ue_ecef, snap.positions)
    rel = np.flatnonzero((elev_all >= 0.0).any(axis=0))
    elev = elev_all[:, rel]
    visible = elev >= 0.0
    masked = elev >= cfg.min_elevation
    sat_states = [snap.state(int(i)) for i in rel]
    sat_ids = [s.sat_id for s in sat_states]
    index_of = {sid: i for i, sid in enumerate(sat_ids)}

    crsb = build_beam_plan(TMCB, CRSB, None, (), sat_states, scn.layout, scn.colors)
    cp, bp, bb = power(scn.ue_ecef, crsb, visible)
    with np.errstate(divide="ignore"):
        rsrp_dbm = 10.0 * np.log10(bp) + 30.0

    # control procedure up to the positioning request
    for u in range(n_ue):
        st = ue_states[u]
        for _ in range(2):
            radio = _radio(rsrp_dbm[u], sat_ids, masked[u] & (bp[u] > 0), st.serving_sat)
            new, acts = step(st, radio, cfg.thresholds, positioning_requested=True)
            _log_action(table, k, ids[u], st, new, acts)
            st = new
            if st.phase != Phase.CAMPED:
                break
        ue_states[u] = st

    positioning = np.array([s.phase == Phase.POSITIONING for s in ue_states])
    serving_idx = np.array([index_of.get(s.serving_sat, -1) if s.phase == Phase.POSITIONING
                            else -1 for s in ue_states])

    # per-scheme, per-n measurement arrays
    sinr_tmcb = _sinr_from_power(cp, bp, bb, crsb.colors, scn.noise_w)
    meas: dict[tuple[str, int], np.ndarray] = {}
    for n in cfg.num_sats_list:
        if TMCB in cfg.schemes:
            meas[(TMCB, n)] = sinr_tmcb
        if BH in cfg.schemes:
            meas[(BH, n)] = _bh_sinr(scn, snap, rel, sat_states, crsb, cp, bp, bb, visible,
                                     serving_idx, n, power)

    located = np.zeros(n_ue, dtype=bool)
    for (scheme, n) in sorted(meas, key=lambda key: (key[0] != BH, key[1])):
        sinr = meas[(scheme, n)]
        with np.errstate(divide="ignore"):
            sinr_db = 10.0 * np.log10(sinr)
        measurable = masked & (sinr > 0)
        if cfg.min_prsb_sinr_db is not None:
            measurable &= sinr_db >= cfg.min_prsb_sinr_db
        counts = measurable.sum(axis=1)
        thresholds = Thresholds(cfg.thresholds.access_rsrp_dbm, cfg.thresholds.hysteresis_db, n)
        for u in range(n_ue):
            st = ue_states[u]
            serving = format_sat(st.serving_sat)
            if not positioning[u]:
                table.rows.append(ResultRow(k, ids[u], scheme, n, math.nan, math.nan, serving,
                                            int(counts[u]), STATUS_NOT_CAMPED))
                continue
            radio = _radio(rsrp_dbm[u], sat_ids, masked[u] & (bp[u] > 0), st.serving_sat,
                           measurable[u])
            new, acts = step(st, radio, thresholds)
            _log_action(table, k, ids[u], st, new, acts)
            if new.phase != Phase.LOCATED:
                table.rows.append(ResultRow(k, ids[u], scheme, n, math.nan, math.nan, serving,
                                            int(counts[u]), STATUS_INSUFFICIENT))
                continue
            located[u] = True
            row, link = _crlb_row(scn, k, u, scheme, n, st, sat_ids, index_of, rel, snap,
                                  sinr[u], sinr_db[u], elev[u], measurable[u], rsrp_dbm[u],
                                  capture)
            row.num_measurable = int(counts[u])
            table.rows.append(row)
            if link is not None:
                table.link_rows.append(link)

    for u in range(n_ue):
        if located[u]:
            st = UEProcState(Phase.LOCATED, ue_states[u].serving_sat, True, ue_states[u].last_fix)
            new, acts = step(st, RadioSnapshot({}), cfg.thresholds, fix=(tuple(scn.ue_ecef[u]), k))
            _log_action(table, k, ids[u], st, new, acts)
            ue_states[u] = new


def _bh_sinr(scn, snap, rel, sat_states, crsb, cp, bp, bb, visible, serving_idx, n, power):
    """SINR of every satellite at every UE when its serving cluster hops."""
    cfg = scn.cfg
    sinr = np.zeros_like(bp)
    for srv in sorted(set(serving_idx[serving_idx >= 0].tolist())):
        users = np.flatnonzero(serving_idx == srv)
        assist = select_assisting(scn, snap, rel, srv, n - 1)
        cluster = [srv] + assist
        plan = build_beam_plan(BH, PRSB, sat_states[srv].sat_id,
                               [sat_states[i].sat_id for i in assist],
                               [sat_states[i] for i in cluster], scn.layout, scn.colors,
                               edge_shutoff=cfg.edge_shutoff)
        c2, b2, bb2 = power(scn.ue_ecef[users], plan, visible[users][:, cluster])
        outside = np.ones(len(rel), dtype=bool)
        outside[cluster] = False
        cpu = cp[users].copy()
        cpu[:, cluster, :] = c2
        bpu = bp[users].copy()
        bpu[:, cluster] = b2
        bbu = bb[users].copy()
        bbu[:, cluster] = bb2
        colors = crsb.colors.copy()
        colors[cluster] = plan.colors
        sinr[users] = _sinr_from_power(cpu, bpu, bbu, colors, scn.noise_w)
    return sinr


def _crlb_row(scn, k, u, scheme, n, st, sat_ids, index_of, rel, snap, sinr_u, sinr_db_u,
              elev_u, measurable_u, rsrp_dbm_u, capture=None):
    cfg = scn.cfg
    uid = int(scn.ue_ids[u])
    serving = format_sat(st.serving_sat)
    srv = index_of[st.serving_sat]
    idx = np.flatnonzero(measurable_u)
    key = sinr_db_u if cfg.selection_rule == "sinr" else elev_u
    # shortlist: best n by the selection key (ties by sat_id), plus the serving satellite
    order = idx[np.lexsort((rel[idx], -key[idx]))]
    short = [i for i in order[: n + 1] if i != srv][: n - 1] + [srv]
    candidates = {sat_ids[i]: (float(sinr_db_u[i]), float(elev_u[i])) for i in short}
    try:
        chosen = select_positioning_sats(st.serving_sat, candidates, n, cfg.selection_rule)
    except InsufficientSatellitesError:
        return ResultRow(k, uid, scheme, n, math.nan, math.nan, serving, len(idx),
                         STATUS_INSUFFICIENT), None
    sel = [index_of[s] for s in chosen]
    sigma_tau = np.sqrt(toa_variance(sinr_u[sel], cfg.signal))
    positions = snap.positions[rel[sel]]
    results = {}
    for mode in (MODE_3D, MODE_2D):
        try:
            results[mode] = tdoa_crlb(scn.ue_ecef[u], positions, sigma_tau, mode, ue_id=uid,
                                      snapshot_index=k, scheme=scheme, sat_set=chosen)
        except SingularFimError:
            results[mode] = None
    main = results[cfg.crlb_mode]
    if capture is not None:
        capture[(k, uid, scheme, n)] = {
            "results": results, "selected": chosen, "sinr_db": sinr_db_u[sel].copy(),
            "sigma_tau": sigma_tau, "elevation": elev_u[sel].copy(),
            "num_measurable": len(idx), "positions": positions}
    if main is None:
        return ResultRow(k, uid, scheme, n, math.nan, math.nan, serving, len(idx),
                         STATUS_SINGULAR), None
    row = ResultRow(k, uid, scheme, n, main.crlb_rmse, main.gdop, serving, len(idx), STATUS_OK,
                    results[MODE_3D].crlb_rmse if results[MODE_3D] else math.nan,
                    results[MODE_2D].crlb_rmse if results[MODE_2D] else math.nan)
    link = {
        "snapshot": k, "ue_id": uid, "scheme": scheme, "num_sats": n,
        "serving_rsrp_dbm": round(float(rsrp_dbm_u[srv]), 6),
        "serving_sinr_db": round(float(sinr_db_u[srv]), 6),
        "median_selected_sinr_db": round(float(np.median(sinr_db_u[sel])), 6),
        "min_selected_sinr_db": round(float(np.min(sinr_db_u[sel])), 6),
    }
    return row, link


# ---------------------------------------------------------------- inspection helpers

def sample_geometries(cfg: ScenarioConfig, count: int, seed: int = 0, scheme: str = TMCB,
                      n: int = 6, max_gdop: float = 100.0, max_draws: int = 1000):
    """Draw located UE geometries from the simulator.

    Each draw picks a random UE and snapshot, camps from scratch and keeps
    the case when an ``n``-satellite fix succeeds with GDOP below
    ``max_gdop``. Returns dicts with ``ue_ecef``, ``positions``,
    ``sigma_tau`` and the :class:`CrlbResult` under ``crlb``.
    """
    cfg = cfg.replace(schemes=(scheme,), num_sats_list=(n,))
    rng = np.random.default_rng(seed)
    scn_full = Scenario.build(cfg)
    cases = []
    for _ in range(max_draws):
        if len(cases) == count:
            break
        ue = int(rng.integers(cfg.ue_count))
        k = int(rng.integers(cfg.num_snapshots))
        capture: dict = {}
        run_scenario(cfg, threads=1, ue_ids=[ue], first_snapshot=k, last_snapshot=k,
                     capture=capture)
        got = capture.get((k, ue, scheme, n))
        if got is None or got["results"][MODE_3D] is None:
            continue
        res = got["results"][MODE_3D]
        if not res.gdop < max_gdop:
            continue
        cases.append({"ue_id": ue, "snapshot": k, "ue_ecef": scn_full.ue_ecef[ue],
                      "positions": got["positions"], "sigma_tau": got["sigma_tau"],
                      "crlb": res, "selected": got["selected"]})
    if len(cases) < count:
        raise RuntimeError(f"only {len(cases)} usable geometries in {max_draws} draws")
    return cases


GEOMETRY_COLUMNS = ("sat_id", "beam_index", "lat", "lon", "color", "role", "active")


def beam_geometry(cfg: ScenarioConfig, snapshot: int = 0, scheme: str = BH, n: int = 8,
                  serving: str | None = None) -> list[tuple]:
    """Ground points of the PRSB-phase beams of one cluster.

    The serving satellite defaults to the one highest above the centre of
    the UE region. Beams that miss the Earth get NaN coordinates.
    """
    scn = Scenario.build(cfg)
    snap = propagate_arrays(scn.elements, scn.epoch(snapshot))
    lon0, lon1, lat0, lat1 = cfg.ue_region
    centre = geodetic_to_ecef(0.5 * (lat0 + lat1), 0.5 * (lon0 + lon1))
    elev = elevations(centre[None], snap.positions)[0]
    rel = np.flatnonzero(elev >= 0.0)
    sat_states = [snap.state(int(i)) for i in rel]
    labels = [format_sat(s.sat_id) for s in sat_states]
    if serving is None:
        srv = int(np.argmax(elev[rel]))
    elif serving in labels:
        srv = labels.index(serving)
    else:
        raise KeyError(f"satellite {serving} is not above the region horizon")
    assist = select_assisting(scn, snap, rel, srv, n - 1)
    cluster = [srv] + assist
    states = [sat_states[i] for i in cluster]
    if scheme == BH:
        plan = build_beam_plan(BH, PRSB, states[0].sat_id, [s.sat_id for s in states[1:]],
                               states, scn.layout, scn.colors, edge_shutoff=cfg.edge_shutoff)
    else:
        plan = build_beam_plan(TMCB, PRSB, states[0].sat_id, [s.sat_id for s in states[1:]],
                               states, scn.layout, scn.colors)
    dirs = plan.beam_directions()
    rows = []
    for s, st in enumerate(states):
        hits = ground_intersection(st.position, dirs[s])
        lat = np.degrees(np.arcsin(hits[:, 2] / np.linalg.norm(hits, axis=1)))
        lon = np.degrees(np.arctan2(hits[:, 1], hits[:, 0]))
        for b in range(dirs.shape[1]):
            rows.append((format_sat(st.sat_id), b, float(lat[b]), float(lon[b]),
                         int(plan.colors[s, b]),
                         "positioning" if plan.positioning[s, b] else "communication",
                         bool(plan.active[s, b])))
    return rows


# ---------------------------------------------------------------- summaries

def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile of a non-empty sequence."""
    data = sorted(values)
    if not data:
        raise EmptyResultsError("no values")
    rank = max(1, math.ceil(pct / 100.0 * len(data)))
    return data[rank - 1]


def series_label(scheme: str, n: int) -> str:
    return f"{scheme}-{n}"


def summarize(results: ResultsTable) -> dict:
    """Per-snapshot and run-level CRLB statistics per (scheme, n).

    Percentiles use the nearest-rank definition. ``ratio`` holds the
    per-snapshot BH/TMCB median ratio for every satellite count.
    """
    ok = [r for r in results.rows if r.status == STATUS_OK and not math.isnan(r.crlb_m)]
    if not ok:
        raise EmptyResultsError("no successful CRLB rows to summarise")
    groups: dict[tuple[str, int], dict[int, list[float]]] = {}
    for r in ok:
        groups.setdefault((r.scheme, r.num_sats), {}).setdefault(r.snapshot, []).append(r.crlb_m)
    series, run_median = {}, {}
    for (scheme, n), per_snap in sorted(groups.items()):
        label = series_label(scheme, n)
        series[label] = [
            {"snapshot": s, "count": len(v), "median": nearest_rank(v, 50),
             "p10": nearest_rank(v, 10), "p90": nearest_rank(v, 90)}
            for s, v in sorted(per_snap.items())
        ]
        run_median[label] = nearest_rank([x for v in per_snap.values() for x in v], 50)
    ratio = {}
    for n in sorted({n for _, n in groups}):
        bh, tm = groups.get((BH, n)), groups.get((TMCB, n))
        if not bh or not tm:
            continue
        ratio[str(n)] = [
            {"snapshot": s, "ratio": nearest_rank(bh[s], 50) / nearest_rank(tm[s], 50)}
            for s in sorted(set(bh) & set(tm))
        ]
    return {"series": series, "run_median": run_median, "ratio": ratio,
            "fingerprint": results.fingerprint}


# ---------------------------------------------------------------- emission

def to_csv(results: ResultsTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results.rows:
        writer.writerow(r.csv_fields())
    return buf.getvalue()


def to_json(results: ResultsTable) -> str:
    doc = {
        "fingerprint": {"config_hash": results.fingerprint, "tool_version": results.version},
        "config": results.config,
        "epochs": results.epochs,
        "rows": [r.to_json() for r in results.rows],
        "link": results.link_rows,
        "actions": [dict(zip(ACTION_COLUMNS, a)) for a in results.actions],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


_SVG_COLORS = {"BH-6": "#1f77b4", "BH-8": "#2ca02c", "TMCB-6": "#d62728", "TMCB-8": "#ff7f0e"}


def to_svg(results: ResultsTable, width: int = 720, height: int = 420) -> str:
    """Median CRLB against snapshot index, one polyline per (scheme, n)."""
    summary = summarize(results)
    series = summary["series"]
    left, right, top, bottom = 70, 130, 30, 50
    snaps = [p["snapshot"] for s in series.values() for p in s]
    vals = [p["median"] for s in series.values() for p in s]
    x0, x1 = min(snaps), max(max(snaps), min(snaps) + 1)
    lo, hi = math.log10(min(vals)), math.log10(max(vals))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    lo, hi = math.floor(lo), math.ceil(hi)

    def sx(s):
        return left + (s - x0) / (x1 - x0) * (width - left - right)

    def sy(v):
        return top + (hi - math.log10(v)) / (hi - lo) * (height - top - bottom)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
           f'y2="{height - bottom}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>']
    for d in range(lo, hi + 1):
        y = sy(10.0**d)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{width - right}" y2="{y:.2f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" '
                   f'text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{(left + width - right) / 2:.1f}" y="{height - 12}" font-size="12" '
               f'text-anchor="middle">snapshot</text>')
    out.append(f'<text x="16" y="{(top + height - bottom) / 2:.1f}" font-size="12" '
               f'transform="rotate(-90 16 {(top + height - bottom) / 2:.1f})" '
               f'text-anchor="middle">median CRLB (m)</text>')
    for i, (label, pts) in enumerate(sorted(series.items())):
        color = _SVG_COLORS.get(label, "#555555")
        coords = " ".join(f"{sx(p['snapshot']):.2f},{sy(p['median']):.2f}" for p in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{coords}"><title>{label}</title></polyline>')
        ly = top + 18 * i + 10
        out.append(f'<line x1="{width - right + 10}" y1="{ly}" x2="{width - right + 30}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 36}" y="{ly + 4}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(results: ResultsTable, fmt: str, path) -> None:
    writers = {"csv": to_csv, "json": to_json, "svg": to_svg}
    if fmt not in writers:
        raise ValueError(f"unknown format {fmt!r}")
    text = writers[fmt](results)
    Path(path).write_text(text)


def _parse_float(text: str) -> float:
    return math.nan if text in ("", "nan", "None") else float(text)


def load_results(path) -> ResultsTable:
    """Read results written by :func:`emit` in CSV or JSON form."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = [ResultRow(
            r["snapshot"], r["ue_id"], r["scheme"], r["num_sats"],
            math.nan if r["crlb_m"] is None else r["crlb_m"],
            math.nan if r["gdop"] is None else r["gdop"],
            r["serving_sat"], r["num_measurable"], r["status"],
            math.nan if r.get("crlb_3d_m") is None else r["crlb_3d_m"],
            math.nan if r.get("crlb_2d_m") is None else r["crlb_2d_m"],
        ) for r in doc["rows"]]
        return ResultsTable(
            rows=rows, link_rows=doc.get("link", []),
            actions=[tuple(a[c] for c in ACTION_COLUMNS) for a in doc.get("actions", [])],
            fingerprint=doc["fingerprint"]["config_hash"],
            version=doc["fingerprint"]["tool_version"], config=doc.get("config", {}),
            epochs=doc.get("epochs", []))
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = [ResultRow(int(r["snapshot"]), int(r["ue_id"]), r["scheme"], int(r["num_sats"]),
                      _parse_float(r["crlb_m"]), _parse_float(r["gdop"]), r["serving_sat"],
                      int(r["num_measurable"]), r["status"]) for r in reader]
    return ResultsTable(rows=rows)
