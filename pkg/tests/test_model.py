import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skillflow import (
    Asymmetric,
    DetectionPenalty,
    General,
    JaggedAI,
    MisperceivedAI,
    ModelParams,
    NoAI,
    PhaseState,
    Simplified,
    SkillDistribution,
    Velocity,
    validate_params,
)
from skillflow.model import params_from_mapping, params_to_mapping, parse_keyvalue, variant_from_dict, variant_to_dict

from strategies import unit


def test_defaults_validate_ok():
    rep = validate_params(ModelParams(0.5, 3, 2))
    assert rep.ok and not rep.issues


@pytest.mark.parametrize("theta_a", [0.0, 1.0])
def test_boundary_ai_skill_is_a_warning(theta_a):
    rep = validate_params(ModelParams(theta_a, 3, 2))
    assert rep.ok
    assert "boundary-degenerate" in rep.kinds()


@pytest.mark.parametrize(
    "params, field",
    [
        (ModelParams(0.5, -1, 2), "kappa"),
        (ModelParams(0.5, 3, -0.1), "delta"),
        (ModelParams(1.2, 3, 2), "theta_a"),
        (ModelParams(0.5, 3, 2, 0.2), "theta_d"),  # Simplified pins theta_d = 0
        (ModelParams(0.5, 3, 2, 1.5, General()), "theta_d"),
        (ModelParams(0.5, 3, 2, variant=MisperceivedAI(2.0)), "theta_tilde_a"),
        (ModelParams(0.5, 3, 2, variant=Asymmetric(-1.0)), "alpha"),
        (ModelParams(0.5, 3, 2, variant=DetectionPenalty(1.5)), "q"),
        (ModelParams(float("nan"), 3, 2), "theta_a"),
    ],
)
def test_range_violations(params, field):
    rep = validate_params(params)
    assert not rep.ok
    assert field in {i.field for i in rep.errors}


def test_regime_warning_when_default_skill_exceeds_ai():
    rep = validate_params(ModelParams(0.3, 3, 2, 0.5, General()))
    assert rep.ok and "regime" in rep.kinds()


@pytest.mark.parametrize(
    "support, weights",
    [((), ()), ((0.5,), (0.5,)), ((1.5,), (1.0,)), ((0.2, 0.4), (1.2, -0.2)), ((0.1,), (1.0, 0.0))],
)
def test_skill_distribution_rejects_bad_input(support, weights):
    with pytest.raises(ValueError):
        SkillDistribution(support, weights)


def test_skill_distribution_moments():
    d = SkillDistribution((1.0, 0.0), (0.96, 0.04))
    assert d.expected_sq_error() == pytest.approx(0.04, abs=1e-15)
    assert d.mean() == pytest.approx(0.96)
    assert SkillDistribution.point_mass(0.3).expected_sq_error() == pytest.approx(0.49)


VARIANT_CASES = [
    Simplified(),
    General(),
    NoAI(),
    JaggedAI(SkillDistribution((0.2, 0.9), (0.25, 0.75))),
    MisperceivedAI(0.65),
    Asymmetric(2.0),
    DetectionPenalty(0.3),
]


@pytest.mark.parametrize("variant", VARIANT_CASES, ids=lambda v: v.tag)
def test_variant_round_trip(variant):
    assert variant_from_dict(json.loads(json.dumps(variant_to_dict(variant)))) == variant
    p = ModelParams(0.5, 3, 2, 0.1 if variant.tag == "General" else 0.0, variant)
    assert ModelParams.from_json(p.to_json()) == p


@given(unit, st.floats(0, 10), st.floats(0, 10), unit, st.sampled_from(VARIANT_CASES))
def test_params_json_round_trip_is_bit_exact(theta_a, kappa, delta, theta_d, variant):
    p = ModelParams(theta_a, kappa, delta, theta_d, variant)
    q = ModelParams.from_json(p.to_json())
    assert q == p
    assert q.to_json() == p.to_json()


def test_unknown_variant_tag():
    with pytest.raises(ValueError):
        variant_from_dict({"tag": "Oracle"})


def test_json_field_names():
    d = ModelParams(0.5, 3, 2).to_dict()
    assert set(d) == {"theta_a", "kappa", "delta", "theta_d", "variant"}
    assert PhaseState(0.1, 0.2).to_dict() == {"theta": 0.1, "p": 0.2}
    assert Velocity(1.0, -1.0).to_dict() == {"d_theta": 1.0, "d_p": -1.0}
    assert PhaseState.from_dict({"theta": 0.1, "p": 0.2}) == PhaseState(0.1, 0.2)


def test_keyvalue_file():
    text = """
    # defaults
    theta_a = 0.7
    kappa: 2
    theta-d = 0.1
    """
    m = parse_keyvalue(text)
    p = params_from_mapping({**m, "delta": "1"})
    assert p == ModelParams(0.7, 2.0, 1.0, 0.1, General())


def test_keyvalue_variants():
    p = params_from_mapping(
        {"theta_a": "0.5", "kappa": "3", "delta": "2", "variant": "JaggedAI", "support": "1, 0", "weights": "0.96,0.04"}
    )
    assert p.variant.ai_loss == pytest.approx(0.04)
    back = params_from_mapping(params_to_mapping(p))
    assert back == p


def test_ai_loss_by_variant():
    assert ModelParams(0.8, 1, 1).ai_loss == pytest.approx(0.04)
    assert ModelParams(0.8, 1, 1, variant=DetectionPenalty(1.0)).ai_loss == pytest.approx(0.2)
    jag = ModelParams(0.0, 1, 1, variant=JaggedAI(SkillDistribution((1.0, 0.0), (0.96, 0.04))))
    assert jag.effective_theta_a == pytest.approx(0.8)
