import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from skillflow import (
    Asymmetric,
    DetectionPenalty,
    JaggedAI,
    MisperceivedAI,
    ModelParams,
    NoAI,
    PhaseState,
    SkillDistribution,
    effective_skill,
    eval_drift,
    loss,
)

import oracles
from strategies import params, states, unit

P = ModelParams(0.5, 3, 2)


def test_drift_vanishes_at_saddle():
    v = eval_drift(P, PhaseState(0.5, 1 / 3))
    assert v.d_theta == 0.0 and v.d_p == 0.0


def test_drift_no_delegation_example():
    v = eval_drift(P, PhaseState(0.4, 0.0))
    assert v.d_theta == pytest.approx(0.144, abs=1e-15)
    assert v.d_p == 0.0


@pytest.mark.parametrize("corner", [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)])
@pytest.mark.parametrize(
    "variant",
    [None, NoAI(), MisperceivedAI(0.3), Asymmetric(2.0), DetectionPenalty(0.5),
     JaggedAI(SkillDistribution((0.1, 0.9), (0.5, 0.5)))],
    ids=lambda v: getattr(v, "tag", "Simplified"),
)
def test_corners_are_stationary(corner, variant):
    p = P if variant is None else P.replace(variant=variant)
    v = eval_drift(p, PhaseState(*corner))
    if variant is not None and variant.tag == "NoAI" and corner[0] == 0.0:
        assert v.d_theta == 0.0
    else:
        assert (v.d_theta, v.d_p) == (0.0, 0.0)


def test_asymmetric_downward_example():
    p = ModelParams(0.5, 3, 2, variant=Asymmetric(2.0))
    v = eval_drift(p, PhaseState(0.9, 0.5))
    assert v.d_p == pytest.approx(-0.36, abs=1e-14)


VARIANTS = [
    None,
    NoAI(),
    MisperceivedAI(0.7),
    Asymmetric(0.5),
    Asymmetric(3.0),
    DetectionPenalty(0.4),
    JaggedAI(SkillDistribution((0.2, 0.7, 1.0), (0.2, 0.5, 0.3))),
]


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: getattr(v, "tag", "Simplified"))
@given(pr=params(theta_d=False), s=states())
def test_drift_matches_equations(variant, pr, s):
    if variant is not None:
        pr = pr.replace(variant=variant)
    got = eval_drift(pr, PhaseState(*s))
    want = oracles.drift(pr, *s)
    assert got.d_theta == pytest.approx(want[0], abs=1e-13)
    assert got.d_p == pytest.approx(want[1], abs=1e-13)


@given(pr=params(theta_d=True), s=states())
def test_general_drift_matches_equations(pr, s):
    got = eval_drift(pr, PhaseState(*s))
    want = oracles.drift(pr, *s)
    assert got.d_theta == pytest.approx(want[0], abs=1e-13)
    assert got.d_p == pytest.approx(want[1], abs=1e-13)


@given(pr=params(), th=unit)
def test_no_ai_equals_zero_delegation(pr, th):
    a = eval_drift(pr.replace(variant=NoAI()), PhaseState(th, 0.7))
    b = eval_drift(pr, PhaseState(th, 0.0))
    assert a.d_theta == b.d_theta and a.d_p == 0.0


@given(pr=params(), s=states(), support=st.lists(unit, min_size=1, max_size=4), raw=st.lists(st.floats(0.01, 1), min_size=4, max_size=4))
def test_jagged_equals_effective_skill(pr, s, support, raw):
    w = np.array(raw[: len(support)])
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    assume(w[-1] >= 0.0)
    try:
        dist = SkillDistribution(tuple(support), tuple(w))
    except ValueError:
        assume(False)
    jag = eval_drift(pr.replace(variant=JaggedAI(dist)), PhaseState(*s))
    det = eval_drift(pr.replace(theta_a=effective_skill(dist)), PhaseState(*s))
    assert jag.d_theta == det.d_theta
    assert jag.d_p == pytest.approx(det.d_p, abs=1e-12)


@given(pr=params(), s=states())
def test_neutral_variants_equal_simplified(pr, s):
    st_ = PhaseState(*s)
    base = eval_drift(pr, st_)
    for v in (Asymmetric(1.0), DetectionPenalty(0.0), MisperceivedAI(pr.theta_a)):
        assert eval_drift(pr.replace(variant=v), st_) == base


@given(pr=params(), th=st.floats(0.001, 0.999))
def test_full_delegation_decays_skill(pr, th):
    assert eval_drift(pr, PhaseState(th, 1.0)).d_theta < 0.0


@given(pr=params(theta_d=True), s=states())
def test_boundaries_are_invariant(pr, s):
    th, p = s
    assert eval_drift(pr, PhaseState(0.0, p)).d_theta == 0.0
    assert eval_drift(pr, PhaseState(1.0, p)).d_theta == 0.0
    assert eval_drift(pr, PhaseState(th, 0.0)).d_p == 0.0
    assert eval_drift(pr, PhaseState(th, 1.0)).d_p == 0.0


def test_equal_losses_mean_no_update():
    assert eval_drift(P, PhaseState(0.5, 0.4)).d_p == 0.0


def test_loss_examples():
    assert loss(0.4, 0.3, P) == pytest.approx(0.327, abs=1e-15)
    assert loss(0.3, 0.0, P) == pytest.approx(0.49)
    for p in (0.0, 0.3, 1.0):
        assert loss(0.5, p, P) == pytest.approx(0.25)


@given(pr=params(), th=unit, p=unit)
def test_loss_is_affine_and_minimised_at_an_end(pr, th, p):
    l0, l1 = loss(th, 0.0, pr), loss(th, 1.0, pr)
    assert loss(th, p, pr) == pytest.approx((1 - p) * l0 + p * l1, abs=1e-14)
    assert (l1 <= l0) == ((1 - th) ** 2 >= (1 - pr.theta_a) ** 2)


def test_effective_skill_examples():
    assert effective_skill(SkillDistribution.point_mass(0.37)) == pytest.approx(0.37, abs=1e-15)
    assert effective_skill(SkillDistribution((1.0, 0.0), (0.96, 0.04))) == pytest.approx(0.8)


@given(support=st.lists(unit, min_size=2, max_size=5, unique=True))
def test_randomness_lowers_effective_skill(support):
    w = (1.0 / len(support),) * len(support)
    w = w[:-1] + (1.0 - math.fsum(w[:-1]),)
    dist = SkillDistribution(tuple(support), w)
    assert effective_skill(dist) <= dist.mean() + 1e-12
    assert 0.0 <= effective_skill(dist) <= 1.0
