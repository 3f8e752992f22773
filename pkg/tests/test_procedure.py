import math

import pytest
from hypothesis import given, settings, strategies as st

from icansim.procedure import (SEPARATE, WINDOW_CRSB, WINDOW_PRSB, WINDOW_QUIET, Action,
                               IsbSchedule, Phase, RadioSnapshot, Thresholds, UEProcState,
                               schedule_windows, step)

S = IsbSchedule()


@pytest.mark.parametrize("epoch, label, bounds", [
    (2e-3, WINDOW_CRSB, (0.0, 5e-3)),
    (7e-3, WINDOW_PRSB, (5e-3, 10e-3)),
    (15e-3, WINDOW_QUIET, (10e-3, 20e-3)),
    (42e-3, WINDOW_CRSB, (40e-3, 45e-3)),
])
def test_windows(epoch, label, bounds):
    w = schedule_windows(S, epoch)
    assert w.label == label
    assert (w.start, w.end) == pytest.approx(bounds)


def test_separate_layout():
    s = IsbSchedule(layout=SEPARATE)
    assert schedule_windows(s, 7e-3).label == WINDOW_QUIET
    assert schedule_windows(s, 12e-3).label == WINDOW_PRSB


@pytest.mark.parametrize("kwargs", [
    {"t_per": 0}, {"t_crsb": 15e-3, "t_prsb": 10e-3}, {"layout": "other"},
    {"layout": SEPARATE, "t_crsb": 12e-3, "t_prsb": 1e-3},
])
def test_invalid_schedule(kwargs):
    with pytest.raises(ValueError):
        IsbSchedule(**kwargs)


@settings(max_examples=200)
@given(st.floats(0, 10.0), st.floats(1e-3, 9e-3), st.floats(1e-3, 9e-3))
def test_windows_partition(epoch, t_crsb, t_prsb):
    s = IsbSchedule(20e-3, t_crsb, t_prsb)
    w = schedule_windows(s, epoch)
    assert w.start - 1e-12 <= epoch < w.end + 1e-12
    # the three windows of one period tile it exactly
    k = math.floor(epoch / s.t_per) * s.t_per
    total = sum(schedule_windows(s, k + m).end - schedule_windows(s, k + m).start
                for m in (0.5 * t_crsb, t_crsb + 0.5 * t_prsb))
    quiet = s.t_per - t_crsb - t_prsb
    assert total + quiet == pytest.approx(s.t_per)


def test_search_below_threshold():
    st_, acts = step(UEProcState(), RadioSnapshot({(0, 1): -120.0, (0, 2): -115.0}))
    assert st_.phase == Phase.SEARCHING and acts == [Action.SEARCH]
    st_, acts = step(UEProcState(), RadioSnapshot({}))
    assert st_.phase == Phase.SEARCHING


def test_camp_on_best_with_tie_break():
    st_, acts = step(UEProcState(), RadioSnapshot({(3, 1): -90.0, (1, 7): -90.0, (0, 0): -95.0}))
    assert st_.phase == Phase.CAMPED and st_.serving_sat == (1, 7)
    assert acts == [Action.CAMP] and st_.prsb_config_known


def test_reselection_with_hysteresis():
    camped = UEProcState(Phase.CAMPED, (0, 0), True)
    st_, acts = step(camped, RadioSnapshot({(0, 0): -100.0, (0, 1): -98.0}))
    assert st_.serving_sat == (0, 0) and acts == []
    st_, acts = step(camped, RadioSnapshot({(0, 0): -100.0, (0, 1): -96.0}))
    assert st_.serving_sat == (0, 1) and acts == [Action.RESELECT]


def test_lost_coverage():
    camped = UEProcState(Phase.CAMPED, (0, 0), True)
    st_, acts = step(camped, RadioSnapshot({(0, 0): -130.0}))
    assert st_.phase == Phase.SEARCHING and acts == [Action.LOST]


def test_full_positioning_cycle():
    th = Thresholds(required_sats=6)
    rsrp = {(0, i): -90.0 - i for i in range(8)}
    state, _ = step(UEProcState(), RadioSnapshot(rsrp), th)
    state, acts = step(state, RadioSnapshot(rsrp), th, positioning_requested=True)
    assert state.phase == Phase.POSITIONING and acts == [Action.REQUEST_PRSB]
    four = {(0, i): i < 4 for i in range(8)}
    state, acts = step(state, RadioSnapshot(rsrp, four), th)
    assert state.phase == Phase.POSITIONING and acts == [Action.INSUFFICIENT]
    six = {(0, i): i < 6 for i in range(8)}
    state, acts = step(state, RadioSnapshot(rsrp, six), th)
    assert state.phase == Phase.LOCATED and acts == [Action.MEASURE]
    state, acts = step(state, RadioSnapshot(rsrp), th, fix=("pos", 3))
    assert state.phase == Phase.CAMPED and acts == [Action.REPORT]
    assert state.last_fix == ("pos", 3)


def test_serving_must_be_measurable():
    state = UEProcState(Phase.POSITIONING, (0, 0), True)
    rsrp = {(0, i): -90.0 for i in range(8)}
    meas = {(0, i): i > 0 for i in range(8)}
    state, acts = step(state, RadioSnapshot(rsrp, meas), Thresholds(required_sats=6))
    assert acts == [Action.INSUFFICIENT]


def test_no_request_stays_camped():
    camped = UEProcState(Phase.CAMPED, (0, 0), True)
    state, acts = step(camped, RadioSnapshot({(0, 0): -90.0}))
    assert state == camped and acts == []


_rsrp = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                        st.floats(-140, -60), max_size=8)


@settings(max_examples=300)
@given(st.lists(st.tuples(_rsrp, st.booleans()), min_size=1, max_size=12))
def test_machine_invariants(trace):
    th = Thresholds()
    state = UEProcState()
    for rsrp, request in trace:
        radio = RadioSnapshot(rsrp, {k: True for k in rsrp})
        before = state
        new, acts = step(state, radio, th, positioning_requested=request)
        assert step(state, radio, th, positioning_requested=request) == (new, acts)
        if before.phase == Phase.SEARCHING:
            assert new.phase in (Phase.SEARCHING, Phase.CAMPED)
        if new.phase != Phase.SEARCHING:
            assert new.serving_sat is not None and new.prsb_config_known
            if before.phase != Phase.LOCATED and rsrp:
                best = max(rsrp.values())
                assert rsrp.get(new.serving_sat, -math.inf) >= best - th.hysteresis_db
        state = new
