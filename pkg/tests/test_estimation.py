import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skillflow import (
    Degenerate,
    DiscreteSimConfig,
    DomainError,
    EmptyData,
    ModelParams,
    PhaseState,
    SessionRecord,
    current_state,
    estimate_delta,
    estimate_eta,
    estimate_kappa,
    estimate_params,
    estimate_theta_a,
    parse_sessions,
    predict_outcome,
    read_sessions,
    saddle_point,
    simulate_discrete,
)
from skillflow.estimation import format_sessions, manual_sets, sessions_from_trajectory

from conftest import WORKED_TABLE


def manual(t, ell, p=0.5, ell_a=0.04):
    return SessionRecord(t, 0, ell, ell_a, p)


def delegated(t, p=0.5, ell_a=0.04):
    return SessionRecord(t, 1, None, ell_a, p)


@pytest.fixture
def records():
    return parse_sessions(WORKED_TABLE)


def test_parse_worked_table(records):
    assert [r.x for r in records] == [0, 0, 1, 1, 0]
    assert records[2].ell is None and records[2].theta is None
    assert records[4].theta == 0.45
    assert manual_sets(records) == ([1, 2, 5], [1], [2])


def test_parse_round_trip(records):
    assert parse_sessions(format_sessions(records)) == records


@pytest.mark.parametrize(
    "row",
    ["1,Manual,0,---,0.04,0.2", "1,Delegate,1,0.3,0.04,0.2", "1,Manual,0,1.3,0.04,0.2", "1,Manual,2,0.3,0.04,0.2"],
)
def test_parse_rejects_inconsistent_rows(row):
    with pytest.raises(DomainError):
        parse_sessions("t,decision,x,ell,ell_a,p\n" + row + "\n")


def test_parse_requires_columns():
    with pytest.raises(DomainError):
        parse_sessions("t,x,ell\n1,0,0.3\n")


def test_parse_empty_loss_cells():
    r = parse_sessions("t,decision,x,ell,ell_a,p\n1,Delegate,1,,0.04,0.2\n")
    assert r[0].ell is None


def test_theta_a_examples():
    assert estimate_theta_a([manual(1, 0.3, ell_a=0.04)] * 3) == pytest.approx(0.8)
    assert estimate_theta_a([manual(1, 0.3, ell_a=0.0)]) == 1.0
    recs = [manual(1, 0.3, ell_a=0.0), manual(2, 0.3, ell_a=0.16)]
    assert estimate_theta_a(recs) == pytest.approx(1 - np.sqrt(0.08), abs=1e-12)
    assert estimate_theta_a(recs, literal=True) == pytest.approx(1 - np.sqrt((1 + 0.84**2) / 2))
    with pytest.raises(EmptyData):
        estimate_theta_a([manual(1, 0.3, ell_a=None)])


def test_eta_examples(records):
    assert estimate_eta(records) == pytest.approx(0.10 / 0.144, rel=1e-12)
    assert estimate_eta([manual(1, 0.25), manual(2, 0.25)]) == 0.0
    with pytest.raises(EmptyData):
        estimate_eta([manual(1, 0.25), delegated(2), manual(3, 0.2)])
    with pytest.raises(Degenerate):
        estimate_eta([manual(1, 1.0), manual(2, 0.5)])


def test_kappa_examples(records):
    eta = estimate_eta(records)
    assert estimate_kappa(records, eta) == pytest.approx(0.05 / (eta * 0.2 * 0.8 * 0.32), rel=1e-12)
    assert estimate_kappa([manual(1, 0.25), manual(2, 0.2)], 0.5) == 0.0
    # equal losses and saturated delegation are excluded and counted
    recs = [
        manual(1, 0.3, p=0.3, ell_a=0.3),
        manual(2, 0.25, p=0.0),
        manual(3, 0.2, p=0.4),
        manual(4, 0.15, p=0.45),
        delegated(5),
        manual(6, 0.16, p=0.5),
    ]
    est = estimate_params(recs)
    assert est.excluded_steps["kappa"] == [1, 2]
    assert est.sample_counts["kappa"] == 1
    with pytest.raises(EmptyData):
        estimate_kappa(recs[:3], 0.5)
    with pytest.raises(DomainError):
        estimate_kappa(records, 0.0)


def test_delta_examples(records):
    eta = estimate_eta(records)
    # reported skill 0.45 at the last session
    want = (eta * 0.5 * 0.25 - (0.45 - 0.5)) / (eta * 0.5 * 0.5 * 2 * 0.5)
    assert estimate_delta(records, eta) == pytest.approx(want, rel=1e-12)
    assert estimate_delta(records, eta) == pytest.approx(0.79, abs=0.01)
    # growth exactly as predicted means no decay
    th0, eta = 0.5, 0.3
    th1 = th0 + eta * th0 * (1 - th0) ** 2
    recs = [manual(1, (1 - th0) ** 2), delegated(2), manual(3, (1 - th1) ** 2)]
    assert estimate_delta(recs, eta) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(EmptyData):
        estimate_delta([manual(1, 0.3), manual(2, 0.2)], 0.5)


def test_delta_from_losses_only(records):
    # without the reported skill column the last skill is 1 - sqrt(0.30) = 0.4523
    stripped = [SessionRecord(r.t, r.x, r.ell, r.ell_a, r.p) for r in records]
    est = estimate_params(stripped)
    assert est.delta == pytest.approx(0.7749, abs=1e-4)


def test_worked_pipeline(records):
    est = estimate_params(records)
    assert est.theta_a == pytest.approx(0.80, abs=1e-12)
    assert est.eta == pytest.approx(0.694, abs=0.01)
    assert est.kappa == pytest.approx(1.41, abs=0.01)
    assert est.delta == pytest.approx(0.79, abs=0.01)
    assert saddle_point(est.model_params()).p == pytest.approx(0.2404, abs=0.001)
    cur = current_state(records)
    assert cur == PhaseState(0.45, 0.40)
    pred = predict_outcome(est, cur)
    assert pred.label == "Low"
    assert pred.threshold == pytest.approx(0.11, abs=0.01)
    assert pred.margin == pytest.approx(0.40 - pred.threshold)
    d = est.to_dict()
    assert set(d) == {"estimates", "sample_counts", "excluded_steps", "index_sets"}
    assert all(v > 0 for v in d["sample_counts"].values())


def test_prediction_edges(records):
    est = estimate_params(records)
    assert predict_outcome(est, PhaseState(0.3, 0.0)).label == "High"
    s = saddle_point(est.model_params())
    pred = predict_outcome(est, s)
    assert pred.label == "Boundary" and pred.margin == 0.0


def test_current_state_needs_manual_session():
    with pytest.raises(EmptyData):
        current_state([delegated(1)])


def test_order_of_rows_does_not_matter_but_time_does(records):
    shuffled = records[:]
    random.Random(0).shuffle(shuffled)
    assert estimate_params(shuffled).to_dict() == estimate_params(records).to_dict()
    relabelled = [SessionRecord(6 - r.t, r.x, r.ell, r.ell_a, r.p, reported_theta=r.reported_theta) for r in records]
    assert estimate_eta(relabelled) != estimate_eta(records)


@pytest.mark.parametrize("init", [(0.4, 0.3), (0.5, 0.5)])
def test_round_trip_on_simulated_logs(init):
    truth = ModelParams(0.5, 3.0, 2.0)
    eta = 0.01
    tr = simulate_discrete(truth, PhaseState(*init), DiscreteSimConfig(eta, 300, seed=7))
    est = estimate_params(sessions_from_trajectory(tr, truth))
    assert est.theta_a == pytest.approx(0.5, abs=1e-12)
    # one session moves skill by 2 eta times the drift, and the estimator
    # reports that per-session factor
    assert est.eta == pytest.approx(2 * eta, rel=0.10)
    assert est.kappa == pytest.approx(3.0, rel=0.15)
    assert est.delta == pytest.approx(2.0, rel=0.20)


def test_sessions_need_decisions():
    from skillflow import integrate_ode

    with pytest.raises(DomainError):
        sessions_from_trajectory(integrate_ode(ModelParams(0.5, 3, 2), PhaseState(0.4, 0.3), 1.0), ModelParams(0.5, 3, 2))


def test_read_sessions(worked_table, records):
    assert read_sessions(worked_table) == records


@settings(max_examples=30)
@given(st.lists(st.tuples(st.booleans(), st.floats(0.01, 0.8), st.floats(0.05, 0.95)), min_size=2, max_size=12))
def test_estimates_finite_on_random_logs(rows):
    recs = [SessionRecord(t + 1, int(d), None if d else ell, 0.04, p) for t, (d, ell, p) in enumerate(rows)]
    try:
        est = estimate_params(recs)
    except (EmptyData, Degenerate, DomainError):
        # e.g. skill falling between manual sessions gives a negative rate
        return
    assert all(np.isfinite(v) for v in (est.theta_a, est.eta, est.kappa, est.delta))
