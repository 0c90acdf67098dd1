"""Robust-bound certification for binary QCNN classifiers.

For a pure input whose measured qubit gives ``(p0, p1)``, the classifier's
decision depends only on the Z coefficient ``v2`` of the output Bloch vector.
Every unit Bloch vector whose angle to the center is smaller than the angle to
the decision layer ``x2 = +-t`` keeps the label, which turns into a fidelity
radius ``delta`` around the input state.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .classifier import (
    ClassificationPolicy,
    EncodedSample,
    Label,
    QcnnArchitecture,
    classify,
    classify_batch,
    forward,
    forward_batch,
)
from .quantum import PureState, QuantumError

REPORT_COLUMNS = ("index", "p0", "p1", "v2", "cos_theta_min", "delta", "class")


class UnclassifiableError(ValueError):
    """The state sits inside the Unknown band, so no certificate exists."""


@dataclass(frozen=True)
class VerifierConfig:
    epsilon: float
    n: int

    def __post_init__(self):
        if self.epsilon < 0 or self.n < 1:
            raise ValueError("epsilon must be >= 0 and n >= 1")
        if not 0 <= self.t < 1:
            raise ValueError(f"layer height {self.t} must lie in [0, 1)")

    @property
    def t(self) -> float:
        return self.epsilon / math.sqrt(2**self.n - 1)

    @property
    def policy(self) -> ClassificationPolicy:
        return ClassificationPolicy(self.epsilon)


@dataclass(frozen=True)
class VerificationResult:
    p0: float
    p1: float
    v2: float
    cos_theta_min: Optional[float]
    delta: Optional[float]
    label: Label

    @property
    def classified(self) -> bool:
        return self.label is not Label.UNKNOWN


def v2_from_p0(p0: float, n: int) -> float:
    if not 0 <= p0 <= 1:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    return (2 * p0 - 1) / math.sqrt(2**n - 1)


def _cos_theta_min(v2: float, t: float) -> float:
    return abs(v2) * t + math.sqrt(max(0.0, 1 - v2 * v2) * (1 - t * t))


def cos_theta_min(v2: float, epsilon: float, n: int) -> float:
    """Cosine of the smallest angle between the center and the decision layer.

    The layer sits on the side of the center's label, so the ``v2 * t`` term
    enters with ``|v2|`` for both classes.
    """
    t = epsilon / math.sqrt(2**n - 1)
    if abs(v2) <= t:
        raise UnclassifiableError(f"|v2|={abs(v2)} does not exceed the layer height {t}")
    return _cos_theta_min(v2, t)


def robust_bound(cos_theta_min: float, n: int) -> float:
    if not -1 <= cos_theta_min <= 1:
        raise ValueError(f"cos_theta_min must lie in [-1, 1], got {cos_theta_min}")
    d = 2**n
    return (d - 1) * (1 - cos_theta_min) / d


def verify_probs(p0: float, config: VerifierConfig) -> VerificationResult:
    """Certify from the measured outcome-0 probability alone."""
    p1 = 1.0 - p0
    v2 = v2_from_p0(p0, config.n)
    label = classify(p0, p1, config.policy)
    if label is Label.UNKNOWN:
        return VerificationResult(p0, p1, v2, None, None, label)
    cos = _cos_theta_min(v2, config.t)
    return VerificationResult(p0, p1, v2, cos, robust_bound(cos, config.n), label)


def verify_state(state: PureState, arch: QcnnArchitecture, theta, config: VerifierConfig) -> VerificationResult:
    if state.n != arch.n or config.n != arch.n:
        raise QuantumError("classifier, state and verifier config disagree on the qubit count")
    p0, _ = forward(arch, theta, state)
    return verify_probs(p0, config)


@dataclass
class VerificationReport:
    epsilon: float
    n: int
    results: list[VerificationResult]
    labels: Optional[list[int]] = None  # ground truth, when known
    counts: dict[str, int] = field(init=False)
    min_delta: Optional[float] = field(init=False)

    def __post_init__(self):
        self.counts = {str(lab): 0 for lab in Label}
        for r in self.results:
            self.counts[str(r.label)] += 1
        deltas = [r.delta for r in self.results if r.classified]
        self.min_delta = min(deltas) if deltas else None

    @property
    def unclassifiable(self) -> int:
        return self.counts[str(Label.UNKNOWN)]

    def rows(self, full_precision: bool = False) -> list[dict[str, str]]:
        fmt = (lambda x: f"{x:.17g}") if full_precision else (lambda x: f"{x:.6g}")
        out = []
        for i, r in enumerate(self.results):
            out.append({
                "index": str(i + 1),
                "p0": fmt(r.p0),
                "p1": fmt(r.p1),
                "v2": fmt(r.v2),
                "cos_theta_min": "" if r.cos_theta_min is None else fmt(r.cos_theta_min),
                "delta": "" if r.delta is None else fmt(r.delta),
                "class": str(r.label),
            })
        return out

    def to_csv(self, full_precision: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows(full_precision))
        return buf.getvalue()

    def to_dict(self) -> dict:
        rows = []
        for i, r in enumerate(self.results):
            d = asdict(r)
            d["label"] = str(r.label)
            rows.append({"index": i + 1, **d})
        return {
            "epsilon": self.epsilon,
            "n": self.n,
            "rows": rows,
            "summary": {
                "samples": len(self.results),
                "min_delta": self.min_delta,
                "counts": self.counts,
                "unclassifiable": self.unclassifiable,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary_line(self) -> str:
        md = "n/a" if self.min_delta is None else f"{self.min_delta:.6g}"
        return (
            f"samples={len(self.results)} zero={self.counts['0']} one={self.counts['1']} "
            f"unclassifiable={self.unclassifiable} min_delta={md}"
        )


def verify_p0_list(p0s: Iterable[float], config: VerifierConfig) -> VerificationReport:
    results = [verify_probs(float(p), config) for p in p0s]
    if not results:
        raise ValueError("nothing to verify")
    return VerificationReport(config.epsilon, config.n, results)


def verify_dataset(
    samples: Sequence[EncodedSample], arch: QcnnArchitecture, theta, config: VerifierConfig
) -> VerificationReport:
    if not samples:
        raise ValueError("cannot verify an empty dataset")
    if config.n != arch.n:
        raise QuantumError("classifier and verifier config disagree on the qubit count")
    amps = np.array([s.features for s in samples], dtype=complex)
    p0s = forward_batch(arch, theta, amps)
    results = [verify_probs(float(p), config) for p in p0s]
    return VerificationReport(config.epsilon, config.n, results, [s.label for s in samples])


def sample_fidelity_ball(psi: np.ndarray, radius: float, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Random pure states with fidelity >= 1 - radius to ``psi``.

    Gaussian amplitude noise picks a direction; the state is then moved along
    the great circle through ``psi`` to a fidelity drawn from [1 - radius, 1].
    Half of the draws land exactly on the outer shell.
    """
    d = psi.size
    noise = rng.normal(size=(samples, d)) + 1j * rng.normal(size=(samples, d))
    # orthogonal component relative to psi
    perp = noise - np.outer(noise @ psi.conj(), psi)
    perp /= np.linalg.norm(perp, axis=1, keepdims=True)
    fid = 1 - radius * rng.uniform(0, 1, size=samples)
    fid[: samples // 2] = 1 - radius
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, size=samples))
    out = (np.sqrt(fid) * phase)[:, None] * psi[None, :] + np.sqrt(1 - fid)[:, None] * perp
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def adversarial_probe(
    state: PureState,
    arch: QcnnArchitecture,
    theta,
    config: VerifierConfig,
    result: VerificationResult,
    samples: int = 1000,
    seed: int = 0,
    radius: Optional[float] = None,
) -> Optional[PureState]:
    """Look for a nearby pure state that the classifier labels differently.

    ``radius`` defaults to the certified bound; pass a larger value to probe
    outside the certificate.  Returns the first counterexample or None.
    """
    if not result.classified:
        raise UnclassifiableError("cannot probe around an unclassifiable state")
    if samples <= 0:
        return None
    rng = np.random.default_rng(seed)
    radius = result.delta if radius is None else radius
    cands = sample_fidelity_ball(state.amplitudes, radius, samples, rng)
    labels = classify_batch(forward_batch(arch, theta, cands), config.policy)
    bad = np.flatnonzero(labels != result.label.value)
    if bad.size == 0:
        return None
    return PureState(state.n, cands[bad[0]])


def boundary_direction(v: np.ndarray, z_index: int, t: float, label: Label) -> np.ndarray:
    """Unit Bloch vector on the decision layer closest to the unit vector ``v``.

    The layer is ``x[z_index] = t`` for label ZERO and ``-t`` for ONE; the
    maximizer keeps the off-axis part of ``v`` and rescales it to fill the unit
    norm (the equality case of Cauchy-Schwarz).
    """
    v = np.asarray(v, dtype=float)
    s = t if label is Label.ZERO else -t
    rest = v.copy()
    rest[z_index] = 0.0
    norm = np.linalg.norm(rest)
    if norm == 0:
        raise ValueError("center lies on the measurement axis; boundary direction is not unique")
    out = rest * (math.sqrt(1 - t * t) / norm)
    out[z_index] = s
    return out
