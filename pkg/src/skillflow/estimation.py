"""Recover model parameters from a log of learning sessions and predict the learner's basin.

Skill is read off a manual session's loss as ``theta(t) = 1 - sqrt(ell_t)``,
unless the log also reports the skill directly in an optional ``theta`` column.
With ``A`` the manual sessions and ``B`` those followed by another manual
session:

* learning rate: mean over ``B`` of ``(theta(t+1) - theta(t)) / (theta(1-theta)^2)``,
* delegation rate: mean over ``B`` of ``(p(t+1) - p(t)) / (eta p(1-p)(ell_t - ell_a_t))``,
* decay rate: mean over manual sessions followed by a delegation block of the
  first-order solve for ``delta`` across the block.

The learning-rate estimate is the per-session skill-gain coefficient, which
is ``2 eta`` in the discrete simulator's parametrisation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import Degenerate, DomainError, EmptyData
from .model import ModelParams, PhaseState
from .separatrix import PiecewiseSeparatrix, psi_approx
from .simulate import Trajectory

ABSENT = "---"
CSV_HEADER = ("t", "decision", "x", "ell", "ell_a", "p")
OPTIONAL_COLUMNS = ("theta",)
EXCLUDE_TOL = 1e-9


@dataclass(frozen=True)
class SessionRecord:
    """One session: delegation indicator, learner loss (manual only), AI loss, delegation level."""

    t: int
    x: int
    ell: float | None
    ell_a: float | None
    p: float | None
    decision: str | None = None
    reported_theta: float | None = None

    def __post_init__(self):
        if self.x not in (0, 1):
            raise DomainError(f"session {self.t}: x must be 0 or 1")
        if (self.ell is not None) == (self.x == 1):
            raise DomainError(f"session {self.t}: ell must be present exactly on manual sessions")
        if self.reported_theta is not None and self.x == 1:
            raise DomainError(f"session {self.t}: skill can only be reported on manual sessions")
        for name in ("ell", "ell_a", "p", "reported_theta"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise DomainError(f"session {self.t}: {name} = {v} outside [0, 1]")

    @property
    def theta(self) -> float | None:
        """Reported skill if present, else the skill implied by the manual loss."""
        if self.reported_theta is not None:
            return self.reported_theta
        return None if self.ell is None else 1.0 - math.sqrt(self.ell)

    def to_row(self) -> dict:
        def fmt(v):
            return ABSENT if v is None else repr(float(v))

        decision = self.decision or ("Delegate" if self.x else "Manual")
        row = {"t": self.t, "decision": decision, "x": self.x, "ell": fmt(self.ell), "ell_a": fmt(self.ell_a), "p": fmt(self.p)}
        if self.reported_theta is not None:
            row["theta"] = fmt(self.reported_theta)
        return row


def _opt(s: str | None) -> float | None:
    s = (s or "").strip()
    return None if s in ("", ABSENT, "-", "--") else float(s)


def parse_sessions(text: str) -> list[SessionRecord]:
    """Parse session CSV text with header ``t,decision,x,ell,ell_a,p`` (plus optional ``theta``)."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"t", "x", "ell", "ell_a", "p"} - set(reader.fieldnames or ())
    if missing:
        raise DomainError(f"session CSV lacks columns {sorted(missing)}")
    out = []
    for row in reader:
        if not any((v or "").strip() for v in row.values()):
            continue
        out.append(
            SessionRecord(
                t=int(row["t"]),
                x=int(row["x"]),
                ell=_opt(row["ell"]),
                ell_a=_opt(row["ell_a"]),
                p=_opt(row["p"]),
                decision=(row.get("decision") or "").strip() or None,
                reported_theta=_opt(row.get("theta")),
            )
        )
    return sorted(out, key=lambda r: r.t)


def read_sessions(path) -> list[SessionRecord]:
    return parse_sessions(Path(path).read_text())


def format_sessions(records: list[SessionRecord]) -> str:
    buf = io.StringIO()
    extra = OPTIONAL_COLUMNS if any(r.reported_theta is not None for r in records) else ()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER + extra, restval=ABSENT, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.to_row())
    return buf.getvalue()


def sessions_from_trajectory(traj: Trajectory, params: ModelParams) -> list[SessionRecord]:
    """Session log of a discrete-simulator run: session ``k + 1`` is round ``k``.

    Manual rounds report the learner's loss ``(1-theta)^2``; every round
    reports the expected AI loss and the delegation level before the update.
    """
    if traj.decisions is None:
        raise DomainError("trajectory carries no delegation decisions")
    out = []
    for k, x in enumerate(traj.decisions):
        th = float(traj.theta[k])
        ell = None if x else (1.0 - th) * (1.0 - th)
        out.append(SessionRecord(k + 1, int(x), ell, params.ai_loss, float(traj.p[k])))
    return out


# -- index sets -------------------------------------------------------------


def _by_time(records) -> dict[int, SessionRecord]:
    table = {}
    for r in records:
        if r.t in table:
            raise DomainError(f"duplicate session index {r.t}")
        table[r.t] = r
    return table


def manual_sets(records) -> tuple[list[int], list[int], list[int]]:
    """``(A, B, D)``: manual sessions, those followed by a manual session, and
    those followed by a delegation block before the next manual session."""
    a = sorted(r.t for r in records if r.x == 0)
    aset = set(a)
    b = [t for t in a if t + 1 in aset]
    bset = set(b)
    d = [t for t in a[:-1] if t not in bset]
    return a, b, d


# -- estimators -------------------------------------------------------------


def estimate_theta_a(records, *, literal: bool = False) -> float:
    """AI skill as ``1 - sqrt(mean ell_a)``.

    With ``literal=True`` the mean of ``(1 - ell_a)^2`` is used instead.

    Raises
    ------
    EmptyData
        If no session reports an AI loss.
    """
    losses = np.array([r.ell_a for r in records if r.ell_a is not None], dtype=np.float64)
    if losses.size == 0:
        raise EmptyData("no AI losses recorded")
    inner = np.mean((1.0 - losses) ** 2) if literal else np.mean(losses)
    return float(1.0 - math.sqrt(inner))


def _eta_terms(records):
    table = _by_time(records)
    _, b, _ = manual_sets(records)
    if not b:
        raise EmptyData("no two consecutive manual sessions")
    terms, skipped = [], []
    for t in b:
        th, th1 = table[t].theta, table[t + 1].theta
        den = th * (1.0 - th) ** 2
        if den == 0.0:
            skipped.append(t)
            continue
        terms.append((t, (th1 - th) / den))
    if not terms:
        raise Degenerate("every consecutive manual pair starts at skill 0 or 1")
    return terms, skipped


def estimate_eta(records) -> float:
    """Per-session learning rate from consecutive manual sessions."""
    terms, _ = _eta_terms(records)
    return float(np.mean([v for _, v in terms]))


def _kappa_terms(records, eta):
    if not (eta > 0.0 and math.isfinite(eta)):
        raise DomainError(f"eta must be positive, got {eta}")
    table = _by_time(records)
    _, b, _ = manual_sets(records)
    if not b:
        raise EmptyData("no two consecutive manual sessions")
    terms, skipped = [], []
    for t in b:
        r, r1 = table[t], table[t + 1]
        if r.p is None or r1.p is None or r.ell_a is None:
            skipped.append(t)
            continue
        gap = r.ell - r.ell_a
        spread = r.p * (1.0 - r.p)
        if abs(gap) < EXCLUDE_TOL or spread < EXCLUDE_TOL:
            skipped.append(t)
            continue
        terms.append((t, (r1.p - r.p) / (eta * spread * gap)))
    if not terms:
        raise EmptyData(f"all {len(b)} candidate steps were excluded")
    return terms, skipped


def estimate_kappa(records, eta: float) -> float:
    """Delegation rate from the delegation changes across consecutive manual sessions."""
    terms, _ = _kappa_terms(records, eta)
    return float(np.mean([v for _, v in terms]))


def _delta_terms(records, eta):
    if not (eta > 0.0 and math.isfinite(eta)):
        raise DomainError(f"eta must be positive, got {eta}")
    table = _by_time(records)
    a, _, d = manual_sets(records)
    if not d:
        raise EmptyData("no manual session is followed by a delegation block")
    nxt = {t: a[i + 1] for i, t in enumerate(a[:-1])}
    terms, skipped = [], []
    for t in d:
        th, th1 = table[t].theta, table[nxt[t]].theta
        k = nxt[t] - t - 1
        den = eta * th * (1.0 - th) * k * th
        if den == 0.0:
            skipped.append(t)
            continue
        terms.append((t, (eta * th * (1.0 - th) ** 2 - (th1 - th)) / den))
    if not terms:
        raise Degenerate("every delegation block starts at skill 0 or 1")
    return terms, skipped


def estimate_delta(records, eta: float) -> float:
    """Decay rate from the skill lost across delegation blocks."""
    terms, _ = _delta_terms(records, eta)
    return float(np.mean([v for _, v in terms]))


@dataclass(frozen=True)
class EstimatedParams:
    theta_a: float
    eta: float
    kappa: float
    delta: float
    sample_counts: dict = field(default_factory=dict)
    excluded_steps: dict = field(default_factory=dict)
    index_sets: dict = field(default_factory=dict)

    def model_params(self) -> ModelParams:
        return ModelParams(self.theta_a, self.kappa, self.delta)

    def to_dict(self) -> dict:
        return {
            "estimates": {"theta_a": self.theta_a, "eta": self.eta, "kappa": self.kappa, "delta": self.delta},
            "sample_counts": dict(self.sample_counts),
            "excluded_steps": {k: list(v) for k, v in self.excluded_steps.items()},
            "index_sets": {k: list(v) for k, v in self.index_sets.items()},
        }


def estimate_params(records, *, literal_theta_a: bool = False) -> EstimatedParams:
    """Run every estimator and keep the bookkeeping."""
    records = sorted(records, key=lambda r: r.t)
    theta_a = estimate_theta_a(records, literal=literal_theta_a)
    eta_terms, eta_skip = _eta_terms(records)
    eta = float(np.mean([v for _, v in eta_terms]))
    k_terms, k_skip = _kappa_terms(records, eta)
    d_terms, d_skip = _delta_terms(records, eta)
    a, b, d = manual_sets(records)
    return EstimatedParams(
        theta_a=theta_a,
        eta=eta,
        kappa=float(np.mean([v for _, v in k_terms])),
        delta=float(np.mean([v for _, v in d_terms])),
        sample_counts={
            "theta_a": sum(r.ell_a is not None for r in records),
            "eta": len(eta_terms),
            "kappa": len(k_terms),
            "delta": len(d_terms),
        },
        excluded_steps={"eta": eta_skip, "kappa": k_skip, "delta": d_skip},
        index_sets={"A": a, "B": b, "D": d},
    )


@dataclass(frozen=True)
class Prediction:
    label: str  # "High" | "Low" | "Boundary"
    threshold: float
    margin: float
    approximation: PiecewiseSeparatrix

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "threshold": self.threshold,
            "margin": self.margin,
            "approximation": self.approximation.to_dict(),
        }


def predict_outcome(est: EstimatedParams | ModelParams, current: PhaseState) -> Prediction:
    """Compare the current delegation level with the approximate basin boundary at the current skill."""
    params = est.model_params() if isinstance(est, EstimatedParams) else est
    approx = psi_approx(params)
    threshold = float(approx(current.theta))
    margin = float(current.p) - threshold
    label = "Low" if margin > 0.0 else "High" if margin < 0.0 else "Boundary"
    return Prediction(label, threshold, margin, approx)


def current_state(records) -> PhaseState:
    """Latest manual skill paired with the delegation level of that session."""
    for r in sorted(records, key=lambda r: r.t, reverse=True):
        if r.x == 0 and r.p is not None:
            return PhaseState(r.theta, r.p)
    raise EmptyData("no manual session with a delegation level")
