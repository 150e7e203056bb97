"""Domain types: premium/claim laws, Bonus-Malus systems and transition matrices."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InadmissibleClaimLaw,
    InvalidWeights,
    ModelError,
    NonStochasticMatrix,
    NonUniqueStationary,
)

WEIGHT_TOL = 1e-12

DISCRETE_KINDS = frozenset({"point_mass", "discrete_mixture"})
CONTINUOUS_KINDS = frozenset(
    {"exponential", "gamma_integer_shape", "half_normal", "maxwell_chi", "uniform"}
)
KINDS = DISCRETE_KINDS | CONTINUOUS_KINDS

# Laws whose Laplace transform is not meromorphic in the whole plane.
_INADMISSIBLE = {
    "cauchy": "the moment function does not exist",
    "pareto": "the Laplace transform has a branch point at the origin",
    "lognormal": "the Laplace transform has an essential singularity at infinity",
    "weibull": "the Laplace transform has a branch point",
    "gamma": "non-integer shape gives a branch point",
}


def _positive(name: str, value: Any) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ModelError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class DistributionSpec:
    """A catalog law for premiums or claims.

    ``kind`` is one of :data:`KINDS`; ``params`` holds the named parameters:

    ===================== ==========================================
    point_mass            ``value``
    discrete_mixture      ``atoms``: sequence of ``(value, weight)``
    exponential           ``rate``
    gamma_integer_shape   ``shape`` (positive integer), ``rate``
    half_normal           ``sigma``; density ``sqrt(2/pi)/sigma exp(-x^2/(2 sigma^2))``
    maxwell_chi           ``sigma``; density ``sqrt(2/pi) x^2/sigma^3 exp(-x^2/(2 sigma^2))``
    uniform               ``a``, ``b`` with ``0 <= a < b``
    ===================== ==========================================

    Mixture atoms are canonicalized on construction: sorted, duplicates
    merged, zero-weight atoms dropped.
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        kind = str(self.kind).lower()
        if kind in _INADMISSIBLE or (kind == "gamma_integer_shape" and not _is_int(self.params.get("shape"))):
            reason = _INADMISSIBLE.get(kind, _INADMISSIBLE["gamma"])
            raise InadmissibleClaimLaw(
                f"{self.kind!r} {dict(self.params)} is not admissible: {reason}; "
                "the claim Laplace transform must not have a branch point or essential singularity"
            )
        if kind not in KINDS:
            raise ModelError(f"unknown distribution kind {self.kind!r}; expected one of {sorted(KINDS)}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", MappingProxyType(_check_params(kind, dict(self.params))))

    # convenience constructors
    @classmethod
    def point_mass(cls, value: float) -> "DistributionSpec":
        return cls("point_mass", {"value": value})

    @classmethod
    def mixture(cls, values: Sequence[float], weights: Sequence[float]) -> "DistributionSpec":
        if len(values) != len(weights):
            raise InvalidWeights("premium and weight vectors differ in length")
        return cls("discrete_mixture", {"atoms": list(zip(values, weights))})

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls("exponential", {"rate": rate})

    @classmethod
    def gamma(cls, shape: int, rate: float) -> "DistributionSpec":
        return cls("gamma_integer_shape", {"shape": shape, "rate": rate})

    @classmethod
    def half_normal(cls, sigma: float = 1.0) -> "DistributionSpec":
        return cls("half_normal", {"sigma": sigma})

    @classmethod
    def maxwell(cls, sigma: float = 1.0) -> "DistributionSpec":
        return cls("maxwell_chi", {"sigma": sigma})

    @classmethod
    def uniform(cls, a: float, b: float) -> "DistributionSpec":
        return cls("uniform", {"a": a, "b": b})

    @property
    def is_discrete(self) -> bool:
        return self.kind in DISCRETE_KINDS

    @property
    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and weights of a discrete law."""
        if self.kind == "point_mass":
            return np.array([self.params["value"]]), np.array([1.0])
        if self.kind == "discrete_mixture":
            vals, wts = zip(*self.params["atoms"])
            return np.array(vals, dtype=float), np.array(wts, dtype=float)
        raise ModelError(f"{self.kind} has no atoms")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k, v in self.params.items():
            d[k] = [list(a) for a in v] if k == "atoms" else v
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DistributionSpec":
        d = dict(d)
        try:
            kind = d.pop("kind")
        except KeyError:
            raise ModelError("distribution spec needs a 'kind' key") from None
        return cls(kind, d)


def _is_int(x: Any) -> bool:
    try:
        return float(x) == int(x) and int(x) >= 1
    except (TypeError, ValueError):
        return False


def _check_params(kind: str, p: dict) -> dict:
    required = {
        "point_mass": ("value",),
        "discrete_mixture": ("atoms",),
        "exponential": ("rate",),
        "gamma_integer_shape": ("shape", "rate"),
        "half_normal": ("sigma",),
        "maxwell_chi": ("sigma",),
        "uniform": ("a", "b"),
    }[kind]
    missing = [k for k in required if k not in p]
    extra = [k for k in p if k not in required]
    if missing or extra:
        raise ModelError(f"{kind}: missing parameters {missing}, unexpected {extra}")

    if kind == "point_mass":
        v = float(p["value"])
        if not math.isfinite(v) or v < 0:
            raise ModelError(f"point mass location must be >= 0, got {v}")
        return {"value": v}
    if kind == "discrete_mixture":
        return {"atoms": _canonical_atoms(p["atoms"])}
    if kind == "exponential":
        return {"rate": _positive("rate", p["rate"])}
    if kind == "gamma_integer_shape":
        return {"shape": int(p["shape"]), "rate": _positive("rate", p["rate"])}
    if kind in ("half_normal", "maxwell_chi"):
        return {"sigma": _positive("sigma", p["sigma"])}
    a, b = float(p["a"]), float(p["b"])
    if not (0 <= a < b and math.isfinite(b)):
        raise ModelError(f"uniform endpoints need 0 <= a < b, got a={a}, b={b}")
    return {"a": a, "b": b}


def _canonical_atoms(atoms: Iterable[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    merged: dict[float, float] = {}
    for item in atoms:
        v, w = (float(x) for x in item)
        if not math.isfinite(v) or v < 0:
            raise ModelError(f"mixture support point must be >= 0, got {v}")
        if not math.isfinite(w) or w < 0:
            raise InvalidWeights(f"mixture weight must be >= 0, got {w}")
        merged[v] = merged.get(v, 0.0) + w
    total = math.fsum(merged.values())
    if not merged or abs(total - 1.0) > WEIGHT_TOL:
        raise InvalidWeights(f"mixture weights must sum to 1 within {WEIGHT_TOL:g}, got {total!r}")
    return tuple((v, w) for v, w in sorted(merged.items()) if w > 0)


def geometric_weights(levels: int, ratio: float) -> np.ndarray:
    """Weights proportional to ``ratio**n`` for n = 1..levels, normalized to sum to 1."""
    w = float(ratio) ** np.arange(1, levels + 1)
    return w / w.sum()


def mean(spec: DistributionSpec) -> float:
    """Expectation of the law."""
    p = spec.params
    k = spec.kind
    if k == "point_mass":
        return p["value"]
    if k == "discrete_mixture":
        return math.fsum(v * w for v, w in p["atoms"])
    if k == "exponential":
        return 1.0 / p["rate"]
    if k == "gamma_integer_shape":
        return p["shape"] / p["rate"]
    if k == "half_normal":
        return p["sigma"] * math.sqrt(2.0 / math.pi)
    if k == "maxwell_chi":
        return 2.0 * p["sigma"] * math.sqrt(2.0 / math.pi)
    return 0.5 * (p["a"] + p["b"])


# ---------------------------------------------------------------------------
# Transition matrices and the steady state


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise NonStochasticMatrix(f"transition matrix must be square and non-empty, got shape {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise NonStochasticMatrix("transition probabilities must be finite and non-negative")
        dev = np.max(np.abs(P.sum(axis=1) - 1.0))
        if dev > 1e-9:
            raise NonStochasticMatrix(f"row sums deviate from 1 by {dev:.3g}")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def K(self) -> int:
        return self.entries.shape[0]


def steady_state(P, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix.

    Solves ``(P^T - I) pi = 0`` with a normalization row appended. If the
    least-squares answer misses the balance equations by more than ``tol``,
    falls back to Cesaro-averaged power iteration.

    Raises NonUniqueStationary when ``P^T - I`` has a null space of
    dimension greater than one.
    """
    if not isinstance(P, TransitionMatrix):
        P = TransitionMatrix(P)
    M = P.entries
    K = P.K
    A = M.T - np.eye(K)
    sv = np.linalg.svd(A, compute_uv=False)
    nullity = int(np.sum(sv <= 1e-10 * max(1.0, sv[0])))
    if nullity > 1:
        raise NonUniqueStationary(f"chain has {nullity} independent stationary distributions")

    lhs = np.vstack([A, np.ones(K)])
    rhs = np.zeros(K + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ M - pi)) > tol:
        pi = _power_iteration(M, tol)
    return pi


def _power_iteration(M: np.ndarray, tol: float, max_iter: int = 100_000) -> np.ndarray:
    K = M.shape[0]
    x = np.full(K, 1.0 / K)
    avg = x.copy()
    for n in range(1, max_iter + 1):
        x = x @ M
        avg += (x - avg) / (n + 1)  # Cesaro mean handles periodic chains
        if n % 16 == 0 and np.max(np.abs(avg @ M - avg)) <= tol:
            break
    avg = np.clip(avg, 0.0, None)
    return avg / avg.sum()


# ---------------------------------------------------------------------------
# The surplus model


@dataclass(frozen=True)
class BonusMalusSystem:
    """Premium law, claim law and the two Poisson intensities.

    A discrete premium (mixture or point mass) gives the steady-state
    Bonus-Malus model; a continuous premium gives the doubly stochastic
    compound Poisson model.
    """

    premium: DistributionSpec
    claim: DistributionSpec
    lambda1: float
    lambda2: float

    def __post_init__(self) -> None:
        if not isinstance(self.premium, DistributionSpec) or not isinstance(self.claim, DistributionSpec):
            raise ModelError("premium and claim must be DistributionSpec instances")
        if self.claim.is_discrete:
            raise InadmissibleClaimLaw(f"claim law must be continuous, got {self.claim.kind}")
        if self.premium.kind == "discrete_mixture":
            vals, _ = self.premium.atoms
            if np.any(vals <= 0):
                raise ModelError("premium levels must be strictly positive")
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not (math.isfinite(l1) and l1 > 0):
            raise ModelError(f"lambda1 must be > 0, got {self.lambda1!r}")
        if not (math.isfinite(l2) and l2 >= 0):
            raise ModelError(f"lambda2 must be >= 0, got {self.lambda2!r}")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @property
    def discrete(self) -> bool:
        return self.premium.is_discrete

    @property
    def total_rate(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def drift(self) -> float:
        """Net expected surplus growth per unit time."""
        return self.lambda1 * mean(self.premium) - self.lambda2 * mean(self.claim)

    @classmethod
    def from_weights(cls, premiums, weights, claim, lambda1, lambda2) -> "BonusMalusSystem":
        return cls(DistributionSpec.mixture(premiums, weights), claim, lambda1, lambda2)

    @classmethod
    def from_transition_matrix(cls, P, premiums, claim, lambda1, lambda2) -> "BonusMalusSystem":
        pi = steady_state(P)
        if len(premiums) != len(pi):
            raise ModelError(f"{len(premiums)} premiums for a {len(pi)}-level chain")
        return cls.from_weights(premiums, pi, claim, lambda1, lambda2)


@dataclass
class ValidationReport:
    actions: list[str]
    drift: float
    warnings: list[str]

    @property
    def drift_sign(self) -> int:
        return int(np.sign(self.drift))


def validate(system: BonusMalusSystem, raw_atoms: Sequence[Sequence[float]] | None = None) -> ValidationReport:
    """Check a system and describe what canonicalization did to it.

    ``raw_atoms`` are the premium ``(value, weight)`` pairs as originally
    supplied; when given, merges and drops relative to the canonical form are
    listed in the report.
    """
    actions: list[str] = []
    notes: list[str] = []
    if raw_atoms is not None:
        vals = [float(v) for v, _ in raw_atoms]
        if len(set(vals)) < len(vals):
            actions.append(f"merged {len(vals) - len(set(vals))} duplicate premium level(s)")
        if any(float(w) == 0 for _, w in raw_atoms):
            actions.append("dropped zero-weight premium level(s)")
        if vals != sorted(vals):
            actions.append("sorted premium levels")
    if system.claim.is_discrete:
        raise InadmissibleClaimLaw("claim law must be continuous")
    drift = system.drift
    if drift <= 0:
        msg = (f"non-positive drift lambda1*E[C] - lambda2*E[X] = {drift:.6g}: "
               "ruin probability need not vanish as u grows")
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return ValidationReport(actions=actions, drift=drift, warnings=notes)
