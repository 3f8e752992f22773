"""ISB timing (CRSB/PRSB windows) and the per-UE physical-layer control
procedure: search, camp/reselect, position, report."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Mapping

from .constellation import SatId

WINDOW_CRSB = "CRSB"
WINDOW_PRSB = "PRSB"
WINDOW_QUIET = "quiet"

UNIFORM = "uniform"
SEPARATE = "separate"


class Phase(enum.IntEnum):
    SEARCHING = 0
    CAMPED = 1
    POSITIONING = 2
    LOCATED = 3


class Action(str, enum.Enum):
    SEARCH = "search"
    CAMP = "camp"
    RESELECT = "reselect"
    LOST = "lost"
    REQUEST_PRSB = "request_prsb"
    MEASURE = "measure"
    INSUFFICIENT = "insufficient_satellites"
    REPORT = "report_location"


@dataclass(frozen=True)
class IsbSchedule:
    """``t_crsb`` then ``t_prsb`` at the start of every ``t_per`` period.

    With the ``separate`` layout the PRSB window is placed at the middle
    of the period instead of directly after the CRSB window.
    """

    t_per: float = 20e-3
    t_crsb: float = 5e-3
    t_prsb: float = 5e-3
    layout: str = UNIFORM

    def __post_init__(self):
        if min(self.t_per, self.t_crsb, self.t_prsb) <= 0:
            raise ValueError("ISB durations must be positive")
        if self.t_crsb + self.t_prsb > self.t_per:
            raise ValueError("t_crsb + t_prsb exceeds t_per")
        if self.layout not in (UNIFORM, SEPARATE):
            raise ValueError(f"unknown ISB layout {self.layout!r}")
        if self.layout == SEPARATE and self.t_crsb > self.t_per / 2:
            raise ValueError("separate layout needs t_crsb <= t_per / 2")

    @property
    def prsb_start(self) -> float:
        return self.t_crsb if self.layout == UNIFORM else self.t_per / 2


@dataclass(frozen=True)
class Window:
    label: str
    start: float
    end: float


def schedule_windows(s: IsbSchedule, epoch: float) -> Window:
    """Window containing ``epoch`` (seconds); boundaries are absolute."""
    k = math.floor(epoch / s.t_per)
    base = k * s.t_per
    t = epoch - base
    if t < 0:  # float guard near period boundaries
        t = 0.0
    edges = [(WINDOW_CRSB, 0.0, s.t_crsb), (WINDOW_PRSB, s.prsb_start, s.prsb_start + s.t_prsb)]
    for label, lo, hi in edges:
        if lo <= t < hi:
            return Window(label, base + lo, base + hi)
    # quiet gap: between the two windows or after PRSB
    if t < s.prsb_start:
        return Window(WINDOW_QUIET, base + s.t_crsb, base + s.prsb_start)
    return Window(WINDOW_QUIET, base + s.prsb_start + s.t_prsb, base + s.t_per)


@dataclass(frozen=True)
class Thresholds:
    access_rsrp_dbm: float = -110.0
    hysteresis_db: float = 3.0
    required_sats: int = 6


@dataclass(frozen=True)
class RadioSnapshot:
    """CRSB RSRP per satellite and which satellites' PRSBs are measurable."""

    rsrp_dbm: Mapping[SatId, float]
    prsb_measurable: Mapping[SatId, bool] | None = None

    def best(self) -> tuple[SatId | None, float]:
        if not self.rsrp_dbm:
            return None, -math.inf
        sid = min(self.rsrp_dbm, key=lambda k: (-self.rsrp_dbm[k], k))
        return sid, self.rsrp_dbm[sid]


@dataclass(frozen=True)
class UEProcState:
    phase: Phase = Phase.SEARCHING
    serving_sat: SatId | None = None
    prsb_config_known: bool = False
    last_fix: tuple | None = None


def _camp_or_reselect(state: UEProcState, radio: RadioSnapshot, th: Thresholds, actions):
    best, best_rsrp = radio.best()
    serving_rsrp = radio.rsrp_dbm.get(state.serving_sat, -math.inf)
    if best is None or (best_rsrp < th.access_rsrp_dbm and serving_rsrp < th.access_rsrp_dbm):
        actions.append(Action.LOST)
        return UEProcState()
    if best != state.serving_sat and best_rsrp > serving_rsrp + th.hysteresis_db:
        actions.append(Action.RESELECT)
        # SI of the new serving cell carries the neighbour PRSB configuration
        return replace(state, serving_sat=best, prsb_config_known=True)
    return state


def step(state: UEProcState, radio: RadioSnapshot, thresholds: Thresholds = Thresholds(),
         positioning_requested: bool = False, fix=None) -> tuple[UEProcState, list[Action]]:
    """Advance the control procedure by one decision.

    SEARCHING camps on the strongest CRSB at or above the access
    threshold. CAMPED and POSITIONING reselect when a challenger beats the
    serving RSRP by the hysteresis. A camped UE with a positioning request
    moves to POSITIONING; POSITIONING moves to LOCATED once
    ``required_sats`` PRSBs are measurable; LOCATED reports the fix (if
    given) and returns to CAMPED.
    """
    actions: list[Action] = []
    if state.phase == Phase.SEARCHING:
        best, best_rsrp = radio.best()
        if best is not None and best_rsrp >= thresholds.access_rsrp_dbm:
            actions.append(Action.CAMP)
            return UEProcState(Phase.CAMPED, best, True, state.last_fix), actions
        actions.append(Action.SEARCH)
        return state, actions

    if state.phase == Phase.LOCATED:
        actions.append(Action.REPORT)
        return replace(state, phase=Phase.CAMPED,
                       last_fix=fix if fix is not None else state.last_fix), actions

    state = _camp_or_reselect(state, radio, thresholds, actions)
    if state.phase == Phase.SEARCHING:
        return state, actions

    if state.phase == Phase.CAMPED:
        if positioning_requested and state.prsb_config_known:
            actions.append(Action.REQUEST_PRSB)
            return replace(state, phase=Phase.POSITIONING), actions
        return state, actions

    # POSITIONING
    if radio.prsb_measurable is None:
        return state, actions
    count = sum(1 for ok in radio.prsb_measurable.values() if ok)
    if count >= thresholds.required_sats and radio.prsb_measurable.get(state.serving_sat):
        actions.append(Action.MEASURE)
        return replace(state, phase=Phase.LOCATED), actions
    actions.append(Action.INSUFFICIENT)
    return state, actions
