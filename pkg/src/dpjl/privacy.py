"""Noise calibration, mechanism selection, and private sketch production.

The mechanism choice follows the crossover rule: with sensitivities
(Delta_1, Delta_2) of the applied map, Laplace noise Lap(Delta_1 / eps) wins
over Gaussian noise N(0, sigma^2), sigma = Delta_2 sqrt(2 ln(1.25/delta)) / eps,
exactly when delta <= exp(-Delta_1^2 / Delta_2^2), i.e. when Delta_1 is the
argmin of {Delta_1, Delta_2 sqrt(ln(1/delta))}.  delta = 0 forces Laplace
(pure DP is only reachable that way), and a tie picks Laplace since pure DP
is the stronger guarantee.

Sketches are one-shot: re-privatizing the same input with fresh noise spends
privacy budget again.  That discipline is documented, not enforced.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    GaussianNeedsDelta,
    InvalidPrivacy,
    InvalidScale,
    PrivacyRegimeWarning,
    SchemeMismatch,
)
from .rng import Rng, sample_gaussian, sample_laplace
from .transforms import (
    FjltTransform,
    IidGaussianTransform,
    SjltTransform,
    canonical_json,
    column_sensitivity,
    transform_fingerprint,
)

__all__ = [
    "PrivacyParams",
    "NoiseSpec",
    "SensitivityPair",
    "PrivateSketch",
    "select_mechanism",
    "calibrate_laplace",
    "calibrate_gaussian",
    "calibrate",
    "gaussian_scale_floor",
    "privatize",
    "privatize_input_fjlt",
    "sketch_to_json",
    "sketch_from_json",
    "save_sketch",
    "load_sketch",
]

SKETCH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PrivacyParams:
    """(epsilon, delta) target; delta = 0 means pure DP."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidPrivacy(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidPrivacy(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class NoiseSpec:
    """Which continuous mechanism to use and at what scale.

    ``scale`` is the Laplace b or the Gaussian sigma.  scale = 0 denotes the
    degenerate no-noise case (zero sensitivity, or debugging)!  The (epsilon,
    delta) the spec was calibrated at are carried along for bookkeeping and
    for sketch pairing; they are None for hand-built specs.
    """

    kind: str  # "laplace" | "gaussian"
    scale: float
    epsilon: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in ("laplace", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise InvalidScale(f"noise scale must be >= 0, got {self.scale}")


@dataclass(frozen=True)
class SensitivityPair:
    """l1/l2 sensitivities of a map plus the mechanism-choice statistic.

    ``m`` caches min(Delta_1, Delta_2 sqrt(ln(1/delta))) when delta is known;
    it is Delta_1 for delta = 0 (the Gaussian option is unavailable there).
    """

    delta1: float
    delta2: float
    m: float | None = None

    def __post_init__(self):
        if self.delta1 < 0 or self.delta2 < 0:
            raise ValueError("sensitivities must be nonnegative")

    @classmethod
    def of(cls, transform, delta: float | None = None) -> "SensitivityPair":
        d1 = column_sensitivity(transform, 1)
        d2 = column_sensitivity(transform, 2)
        m = None
        if delta is not None:
            m = d1 if delta == 0 else min(d1, d2 * math.sqrt(math.log(1.0 / delta)))
        return cls(delta1=d1, delta2=d2, m=m)


def select_mechanism(sens: SensitivityPair, pp: PrivacyParams) -> str:
    """"laplace" or "gaussian" by the crossover rule; ties go to Laplace."""
    if pp.delta == 0:
        return "laplace"
    if sens.delta2 == 0:
        return "laplace"
    if sens.delta1 <= sens.delta2 * math.sqrt(math.log(1.0 / pp.delta)):
        return "laplace"
    return "gaussian"


def calibrate_laplace(delta1: float, epsilon: float) -> NoiseSpec:
    """b = Delta_1 / epsilon; b = 0 (zero-sensitivity map) means no noise."""
    if not epsilon > 0:
        raise InvalidPrivacy(f"epsilon must be positive, got {epsilon}")
    if delta1 < 0:
        raise InvalidScale(f"delta1 must be >= 0, got {delta1}")
    return NoiseSpec(kind="laplace", scale=delta1 / epsilon, epsilon=epsilon, delta=0.0)


def gaussian_scale_floor(delta2: float, epsilon: float, delta: float) -> float:
    return delta2 * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def calibrate_gaussian(delta2: float, epsilon: float, delta: float) -> NoiseSpec:
    """sigma = Delta_2 sqrt(2 ln(1.25/delta)) / epsilon.

    The cited analysis is standard for epsilon < 1; larger epsilon is allowed
    for utility benchmarking but flagged with a PrivacyRegimeWarning.
    """
    if not epsilon > 0:
        raise InvalidPrivacy(f"epsilon must be positive, got {epsilon}")
    if delta == 0:
        raise GaussianNeedsDelta("the Gaussian mechanism is undefined at delta = 0")
    if not 0.0 < delta < 1.0:
        raise InvalidPrivacy(f"delta must lie in (0, 1), got {delta}")
    if delta2 < 0:
        raise InvalidScale(f"delta2 must be >= 0, got {delta2}")
    if epsilon >= 1:
        warnings.warn(
            f"Gaussian calibration with epsilon = {epsilon} >= 1 is outside the "
            "standard analysis regime; treat the guarantee as heuristic",
            PrivacyRegimeWarning,
            stacklevel=2,
        )
    return NoiseSpec(
        kind="gaussian",
        scale=gaussian_scale_floor(delta2, epsilon, delta),
        epsilon=epsilon,
        delta=delta,
    )


def calibrate(transform, pp: PrivacyParams, mechanism: str | None = None) -> NoiseSpec:
    """Select a mechanism for the transform's exact sensitivities and calibrate it."""
    sens = SensitivityPair.of(transform, pp.delta)
    kind = mechanism or select_mechanism(sens, pp)
    if kind == "laplace":
        return calibrate_laplace(sens.delta1, pp.epsilon)
    if kind == "gaussian":
        if pp.delta == 0:
            raise GaussianNeedsDelta("the Gaussian mechanism is undefined at delta = 0")
        return calibrate_gaussian(sens.delta2, pp.epsilon, pp.delta)
    raise ValueError(f"unknown mechanism {kind!r}")


_OUTPUT_SCHEME = {
    SjltTransform: "sjlt_out",
    FjltTransform: "fjlt_out",
    IidGaussianTransform: "iid_out",
}


@dataclass(eq=False)
class PrivateSketch:
    """k noisy coordinates plus the metadata needed to pair and bias-correct.

    Two sketches are combinable iff transform_fingerprint, noise, site and
    normalization all match.  ``input_dim`` and ``sparsity`` are bookkeeping
    for the estimator report (the input-perturbed bias term needs d).
    """

    values: np.ndarray
    transform_fingerprint: str
    noise: NoiseSpec
    site: str  # "output" | "input"
    scheme: str  # sjlt_out | fjlt_out | fjlt_in | iid_out
    input_dim: int
    sparsity: int | None = None
    normalization: str = "lpp"

    @property
    def k(self) -> int:
        return int(self.values.shape[0])

    def mismatch_with(self, other: "PrivateSketch") -> str | None:
        """Name of the first pairing field that differs, or None if combinable."""
        if self.transform_fingerprint != other.transform_fingerprint:
            return "transform_fingerprint"
        if self.noise != other.noise:
            return "noise"
        if self.site != other.site:
            return "site"
        if self.normalization != other.normalization:
            return "normalization"
        if self.scheme != other.scheme:
            return "scheme"
        if self.k != other.k:
            return "k"
        return None


def _sample_noise(spec: NoiseSpec, rng: Rng, size) -> np.ndarray:
    if spec.kind == "laplace":
        return sample_laplace(spec.scale, rng, size)
    return sample_gaussian(spec.scale, rng, size)


def privatize(transform, x, spec: NoiseSpec, rng: Rng) -> PrivateSketch:
    """Output perturbation: apply the transform, then add i.i.d. noise per coordinate.

    The caller is responsible for having calibrated ``spec`` against the
    transform's sensitivities (see ``calibrate``); noise is drawn fresh from
    the supplied stream, so each call is a separate privacy release.
    """
    scheme = _OUTPUT_SCHEME.get(type(transform))
    if scheme is None:
        raise TypeError(f"unknown transform type {type(transform).__name__}")
    values = transform.apply(x)
    if spec.scale > 0:
        values = values + _sample_noise(spec, rng, values.shape[0])
    return PrivateSketch(
        values=values,
        transform_fingerprint=transform_fingerprint(transform),
        noise=spec,
        site="output",
        scheme=scheme,
        input_dim=transform.d,
        sparsity=transform.s if isinstance(transform, SjltTransform) else None,
    )


def privatize_input_fjlt(transform: FjltTransform, x, spec: NoiseSpec, rng: Rng) -> PrivateSketch:
    """Input perturbation for the FJLT: sketch (1/sqrt(k)) Phi (x + eta).

    Noise is Gaussian in the original d coordinates (added before padding);
    the sensitivity of the perturbed quantity is 1 by construction, so the
    calibration floor is sigma >= sqrt(2 ln(1.25/delta)) / epsilon.  A spec
    whose recorded (epsilon, delta) imply a higher floor than its scale is
    rejected; specs without recorded parameters (e.g. a zero-noise debug
    spec) skip the check.
    """
    if not isinstance(transform, FjltTransform):
        raise SchemeMismatch("input perturbation is defined for the FJLT only")
    if spec.kind != "gaussian":
        raise SchemeMismatch("input perturbation uses Gaussian noise")
    if spec.epsilon is not None and spec.delta is not None and spec.delta > 0:
        floor = gaussian_scale_floor(1.0, spec.epsilon, spec.delta)
        if spec.scale < floor * (1.0 - 1e-12):
            raise InvalidScale(
                f"sigma = {spec.scale} below the calibration floor {floor} "
                f"for epsilon={spec.epsilon}, delta={spec.delta}"
            )
    x = np.asarray(x, dtype=np.float64)
    if spec.scale > 0:
        x = x + sample_gaussian(spec.scale, rng, transform.d)
    return PrivateSketch(
        values=transform.apply(x),
        transform_fingerprint=transform_fingerprint(transform),
        noise=spec,
        site="input",
        scheme="fjlt_in",
        input_dim=transform.d,
        sparsity=None,
    )


# ---------------------------------------------------------------------------
# Sketch files: a JSON header followed by the k values.  Values round-trip
# exactly (shortest-repr decimal encoding).
# ---------------------------------------------------------------------------

def sketch_to_json(sk: PrivateSketch) -> dict:
    return {
        "version": SKETCH_FORMAT_VERSION,
        "transform_fingerprint": sk.transform_fingerprint,
        "kind": sk.noise.kind,
        "scale": sk.noise.scale,
        "site": sk.site,
        "epsilon": sk.noise.epsilon,
        "delta": sk.noise.delta,
        "k": sk.k,
        "scheme": sk.scheme,
        "d": sk.input_dim,
        "s": sk.sparsity,
        "normalization": sk.normalization,
        "values": [float(v) for v in sk.values],
    }


def sketch_from_json(obj: dict) -> PrivateSketch:
    if obj.get("version") != SKETCH_FORMAT_VERSION:
        raise ValueError(f"unsupported sketch format version {obj.get('version')!r}")
    noise = NoiseSpec(
        kind=obj["kind"], scale=obj["scale"], epsilon=obj["epsilon"], delta=obj["delta"]
    )
    values = np.asarray(obj["values"], dtype=np.float64)
    if values.shape[0] != obj["k"]:
        raise ValueError(f"sketch claims k={obj['k']} but carries {values.shape[0]} values")
    return PrivateSketch(
        values=values,
        transform_fingerprint=obj["transform_fingerprint"],
        noise=noise,
        site=obj["site"],
        scheme=obj["scheme"],
        input_dim=obj["d"],
        sparsity=obj["s"],
        normalization=obj.get("normalization", "lpp"),
    )


def save_sketch(sk: PrivateSketch, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(sketch_to_json(sk)))
        fh.write("\n")


def load_sketch(path) -> PrivateSketch:
    with open(path, "r", encoding="utf-8") as fh:
        return sketch_from_json(json.load(fh))
