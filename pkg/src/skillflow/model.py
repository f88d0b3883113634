"""Domain types shared by every module: parameters, model variants, phase states.

All types are frozen value objects. ``to_dict``/``from_dict`` give the JSON
form (field names as listed on each class) and :func:`parse_keyvalue` reads the
flat ``key = value`` parameter files used by the CLI.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from typing import ClassVar, Union


@dataclass(frozen=True)
class SkillDistribution:
    """Finite distribution of per-instance AI skill (a "jagged" AI)."""

    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(s) for s in self.support)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        if not support or len(support) != len(weights):
            raise ValueError("support and weights must be non-empty and of equal length")
        if any(not 0.0 <= s <= 1.0 for s in support):
            raise ValueError("support values must lie in [0, 1]")
        if any(w < 0.0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def point_mass(cls, s: float) -> "SkillDistribution":
        return cls((s,), (1.0,))

    def expected_sq_error(self) -> float:
        """E[(1 - s)^2] under the distribution."""
        return math.fsum(w * (1.0 - s) * (1.0 - s) for s, w in zip(self.support, self.weights))

    def mean(self) -> float:
        return math.fsum(w * s for s, w in zip(self.support, self.weights))


# -- model variants ---------------------------------------------------------


@dataclass(frozen=True)
class Simplified:
    tag: ClassVar[str] = "Simplified"


@dataclass(frozen=True)
class General:
    tag: ClassVar[str] = "General"


@dataclass(frozen=True)
class NoAI:
    tag: ClassVar[str] = "NoAI"


@dataclass(frozen=True)
class JaggedAI:
    dist: SkillDistribution
    tag: ClassVar[str] = "JaggedAI"
    # E[(1-s)^2] is time-invariant, so it is computed once here
    ai_loss: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ai_loss", self.dist.expected_sq_error())


@dataclass(frozen=True)
class MisperceivedAI:
    theta_tilde_a: float
    tag: ClassVar[str] = "MisperceivedAI"


@dataclass(frozen=True)
class Asymmetric:
    alpha: float
    tag: ClassVar[str] = "Asymmetric"


@dataclass(frozen=True)
class DetectionPenalty:
    q: float
    tag: ClassVar[str] = "DetectionPenalty"


ModelVariant = Union[Simplified, General, NoAI, JaggedAI, MisperceivedAI, Asymmetric, DetectionPenalty]

VARIANTS: dict[str, type] = {
    cls.tag: cls
    for cls in (Simplified, General, NoAI, JaggedAI, MisperceivedAI, Asymmetric, DetectionPenalty)
}


def variant_to_dict(variant: ModelVariant) -> dict:
    d: dict = {"tag": variant.tag}
    if isinstance(variant, JaggedAI):
        d["support"] = list(variant.dist.support)
        d["weights"] = list(variant.dist.weights)
    elif isinstance(variant, MisperceivedAI):
        d["theta_tilde_a"] = variant.theta_tilde_a
    elif isinstance(variant, Asymmetric):
        d["alpha"] = variant.alpha
    elif isinstance(variant, DetectionPenalty):
        d["q"] = variant.q
    return d


def variant_from_dict(d: dict) -> ModelVariant:
    tag = d["tag"]
    if tag not in VARIANTS:
        raise ValueError(f"unknown variant {tag!r}; expected one of {sorted(VARIANTS)}")
    if tag == "JaggedAI":
        return JaggedAI(SkillDistribution(tuple(d["support"]), tuple(d["weights"])))
    if tag == "MisperceivedAI":
        return MisperceivedAI(float(d["theta_tilde_a"]))
    if tag == "Asymmetric":
        return Asymmetric(float(d["alpha"]))
    if tag == "DetectionPenalty":
        return DetectionPenalty(float(d["q"]))
    return VARIANTS[tag]()


# -- parameters and states --------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of one model variant.

    ``theta_a`` is the AI skill, ``kappa`` the delegation rate, ``delta`` the
    decay rate and ``theta_d`` the default skill skill decays toward.
    """

    theta_a: float
    kappa: float
    delta: float
    theta_d: float = 0.0
    variant: ModelVariant = field(default_factory=Simplified)

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)

    @property
    def ai_loss(self) -> float:
        """Expected squared error of a delegated round, as seen by the delegation update."""
        v = self.variant
        if isinstance(v, JaggedAI):
            return v.ai_loss
        g = (1.0 - self.theta_a) * (1.0 - self.theta_a)
        if isinstance(v, DetectionPenalty):
            return (1.0 - v.q) * g + v.q * abs(1.0 - self.theta_a)
        return g

    @property
    def effective_theta_a(self) -> float:
        """Deterministic AI skill with the same delegated loss as :attr:`ai_loss`."""
        if isinstance(self.variant, (JaggedAI, DetectionPenalty)):
            return 1.0 - math.sqrt(self.ai_loss)
        return self.theta_a

    def to_dict(self) -> dict:
        return {
            "theta_a": self.theta_a,
            "kappa": self.kappa,
            "delta": self.delta,
            "theta_d": self.theta_d,
            "variant": variant_to_dict(self.variant),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        variant = d.get("variant", {"tag": "Simplified"})
        if isinstance(variant, str):
            variant = {"tag": variant}
        return cls(
            theta_a=float(d["theta_a"]),
            kappa=float(d["kappa"]),
            delta=float(d["delta"]),
            theta_d=float(d.get("theta_d", 0.0)),
            variant=variant_from_dict(variant),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


DEFAULT_PARAMS = ModelParams(theta_a=0.5, kappa=3.0, delta=2.0)


@dataclass(frozen=True)
class PhaseState:
    theta: float
    p: float

    def to_dict(self) -> dict:
        return {"theta": self.theta, "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseState":
        return cls(float(d["theta"]), float(d["p"]))

    def __iter__(self):
        yield self.theta
        yield self.p


@dataclass(frozen=True)
class Velocity:
    d_theta: float
    d_p: float

    def to_dict(self) -> dict:
        return {"d_theta": self.d_theta, "d_p": self.d_p}

    @classmethod
    def from_dict(cls, d: dict) -> "Velocity":
        return cls(float(d["d_theta"]), float(d["d_p"]))

    def __iter__(self):
        yield self.d_theta
        yield self.d_p


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    kind: str  # "range" | "boundary-degenerate" | "regime"
    field: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.kind == "range"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.is_error]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if not i.is_error]

    def kinds(self) -> set[str]:
        return {i.kind for i in self.issues}


def _unit(x: float) -> bool:
    return math.isfinite(x) and 0.0 <= x <= 1.0


def validate_params(params: ModelParams) -> ValidationReport:
    """Report range violations and degenerate regimes without raising."""
    issues: list[Issue] = []
    for name in ("theta_a", "theta_d"):
        if not _unit(getattr(params, name)):
            issues.append(Issue("range", name, f"{name} must lie in [0, 1]"))
    for name in ("kappa", "delta"):
        v = getattr(params, name)
        if not (math.isfinite(v) and v >= 0.0):
            issues.append(Issue("range", name, f"{name} must be a finite nonnegative number"))

    v = params.variant
    if isinstance(v, MisperceivedAI) and not _unit(v.theta_tilde_a):
        issues.append(Issue("range", "theta_tilde_a", "theta_tilde_a must lie in [0, 1]"))
    if isinstance(v, Asymmetric) and not (math.isfinite(v.alpha) and v.alpha >= 0.0):
        issues.append(Issue("range", "alpha", "alpha must be nonnegative"))
    if isinstance(v, DetectionPenalty) and not _unit(v.q):
        issues.append(Issue("range", "q", "q must lie in [0, 1]"))
    if isinstance(v, Simplified) and params.theta_d != 0.0:
        issues.append(Issue("range", "theta_d", "Simplified fixes theta_d = 0; use the General variant"))

    if _unit(params.theta_a) and params.theta_a in (0.0, 1.0):
        issues.append(
            Issue("boundary-degenerate", "theta_a", "theta_a in {0, 1}: interior saddle undefined or degenerate")
        )
    if _unit(params.theta_a) and _unit(params.theta_d) and params.theta_d > params.theta_a:
        issues.append(Issue("regime", "theta_d", "interior analysis requires theta_d <= theta_a"))
    return ValidationReport(tuple(issues))


# -- flat key-value parameter files -----------------------------------------

_VARIANT_KEYS = {"theta_tilde_a", "alpha", "q", "support", "weights"}


def parse_keyvalue(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines (``#`` comments allowed) into a dict of strings."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), delimiters=("=", ":"))
    cp.optionxform = str  # keep key case
    cp.read_string("[params]\n" + text)
    return {k.strip().replace("-", "_"): v.strip() for k, v in cp["params"].items()}


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def params_from_mapping(m: dict) -> ModelParams:
    """Build :class:`ModelParams` from a flat mapping of strings or numbers."""
    tag = str(m.get("variant", "Simplified"))
    theta_d = float(m.get("theta_d", 0.0))
    if tag == "Simplified" and theta_d != 0.0 and "variant" not in m:
        tag = "General"
    vd: dict = {"tag": tag}
    for k in _VARIANT_KEYS & set(m):
        val = m[k]
        vd[k] = _floats(val) if k in ("support", "weights") and isinstance(val, str) else val
    return ModelParams(
        theta_a=float(m["theta_a"]),
        kappa=float(m["kappa"]),
        delta=float(m["delta"]),
        theta_d=theta_d,
        variant=variant_from_dict(vd),
    )


def params_to_mapping(params: ModelParams) -> dict:
    d = params.to_dict()
    v = d.pop("variant")
    d["variant"] = v.pop("tag")
    d.update(v)
    return d
