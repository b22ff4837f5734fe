"""Finitely generated deviation measures via risk-envelope vertex sets.

A deviation measure is represented by the extreme generators Q of its risk
envelope: D(X) = E[X] + max_Q E[-XQ], with E[Q] = 1 for every generator.
Builders cover MAD, CVaR and the mixture/max/scaling combinators; the
provenance tag is kept so closed-form selectors can dispatch on it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import geometry
from .errors import (
    DimensionMismatch,
    GuardExceeded,
    InternalCheckError,
    SpaceMismatch,
    TooManyScenarios,
    Unsupported,
    ValidationError,
)
from .probspace import FiniteProbSpace, RandomVariable

MEAN_TOL = 1e-10
GEN_DEDUP_TOL = 1e-10
ACTIVITY_TOL = 1e-9
MAD_SCENARIO_GUARD = 20
CVAR_CANDIDATE_GUARD = 10**6


@dataclass(frozen=True)
class RiskEnvelope:
    """Extreme risk generators of a finitely generated deviation measure."""

    generators: np.ndarray  # one generator per row
    space: FiniteProbSpace
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.generators, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        if g.shape[0] == 0:
            raise ValidationError("envelope needs at least one generator")
        if g.shape[1] != self.space.n_scenarios:
            raise DimensionMismatch("generator length must match the scenario count")
        means = g @ self.space.weights
        if np.max(np.abs(means - 1.0)) > MEAN_TOL * 10:
            raise ValidationError("every generator must have expectation 1")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)

    @property
    def n_generators(self) -> int:
        return self.generators.shape[0]

    def polytope(self) -> geometry.VPolytope:
        return geometry.VPolytope(self.generators)


@dataclass(frozen=True)
class RiskIdentifierSet:
    """Argmax face of the envelope for a particular X."""

    polytope: geometry.VPolytope
    x: np.ndarray
    value: float
    active_indices: tuple[int, ...]


def _require_same_space(space: FiniteProbSpace, x) -> np.ndarray:
    values = x.values if isinstance(x, RandomVariable) else np.asarray(x, dtype=float)
    if values.shape != (space.n_scenarios,):
        raise DimensionMismatch("variable does not match the scenario count")
    return values


def build_mad(space: FiniteProbSpace) -> RiskEnvelope:
    """Mean-absolute-deviation envelope: Q = 1 + E[Z] - Z over sign vectors.

    Z ranges over {-1,+1}^N with a non-empty proper positive set, giving
    2^N - 2 candidate generators.
    """
    n = space.n_scenarios
    if n > MAD_SCENARIO_GUARD:
        raise TooManyScenarios(
            f"MAD envelope needs 2^{n}-2 generators; guard is N <= {MAD_SCENARIO_GUARD}"
        )
    gens = []
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        z = np.asarray(signs)
        if np.all(z > 0) or np.all(z < 0):
            continue  # improper positive set collapses to the constant 1
        gens.append(1.0 + float(space.expectation(z)) - z)
    gens = np.asarray(gens)
    if not space.is_uniform:
        gens = geometry.extreme_filter(gens, GEN_DEDUP_TOL).vertices
    return RiskEnvelope(gens, space, kind="mad")


def _cvar_vertices(space: FiniteProbSpace, alpha: float) -> np.ndarray:
    """Vertices of {0 <= Q <= 1/alpha, E[Q] = 1}.

    Each vertex has at most one coordinate strictly between the bounds, so
    candidates are: a subset at the upper bound, one optional fractional
    coordinate, zeros elsewhere.
    """
    w = space.weights
    n = space.n_scenarios
    ub = 1.0 / alpha
    if space.is_uniform:
        # alpha = k/N puts exactly k coordinates at N/k.
        k = alpha * n
        if abs(k - round(k)) <= 1e-9 and round(k) >= 1:
            k = int(round(k))
            if comb(n, k) > CVAR_CANDIDATE_GUARD:
                raise GuardExceeded(
                    f"CVaR vertex count C({n},{k}) exceeds {CVAR_CANDIDATE_GUARD}"
                )
            out = []
            for subset in itertools.combinations(range(n), k):
                q = np.zeros(n)
                q[list(subset)] = n / k
                out.append(q)
            return np.asarray(out)
    if (2**n) * (n + 1) > CVAR_CANDIDATE_GUARD:
        raise GuardExceeded(
            f"CVaR candidate enumeration for N={n} exceeds {CVAR_CANDIDATE_GUARD}"
        )
    out = []
    for subset in itertools.product((0, 1), repeat=n):
        mask = np.asarray(subset, dtype=bool)
        mass = float(w[mask].sum()) * ub
        rem = 1.0 - mass
        if rem < -1e-12:
            continue
        if rem <= 1e-12:
            q = np.zeros(n)
            q[mask] = ub
            out.append(q)
            continue
        for f in np.flatnonzero(~mask):
            qf = rem / w[f]
            if qf <= ub + 1e-12:
                q = np.zeros(n)
                q[mask] = ub
                q[f] = min(qf, ub)
                out.append(q)
    if not out:
        raise InternalCheckError("CVaR envelope produced no vertices")
    return geometry._dedup(np.asarray(out), GEN_DEDUP_TOL)


def build_cvar(space: FiniteProbSpace, alpha: float) -> RiskEnvelope:
    """CVaR deviation envelope {Q : E[Q]=1, 0 <= Q <= 1/alpha}."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0,1), got {alpha}")
    gens = _cvar_vertices(space, alpha)
    return RiskEnvelope(gens, space, kind="cvar", meta={"alpha": float(alpha)})


def _minkowski_generators(parts, lambdas) -> np.ndarray:
    """Extreme points of sum(lambda_i * Q_i), built pairwise."""
    acc = geometry.VPolytope(lambdas[0] * parts[0])
    for lam, gens in zip(lambdas[1:], parts[1:]):
        acc = geometry.minkowski_sum(acc, geometry.VPolytope(lam * gens))
    return acc.vertices


def build_mixed_cvar(space: FiniteProbSpace, alphas, lambdas) -> RiskEnvelope:
    """Mixture sum(lambda_i * CVaR(alpha_i)) as a Minkowski combination."""
    alphas = [float(a) for a in alphas]
    lambdas = [float(l) for l in lambdas]
    if len(alphas) != len(lambdas) or not alphas:
        raise ValidationError("need matching non-empty alpha and lambda lists")
    if any(l <= 0 for l in lambdas):
        raise ValidationError("mixture weights must be positive")
    if abs(sum(lambdas) - 1.0) > 1e-10:
        raise ValidationError("mixture weights must sum to 1")
    parts = [_cvar_vertices(space, a) for a in alphas]
    gens = _minkowski_generators(parts, lambdas)
    gens = geometry.extreme_filter(gens, GEN_DEDUP_TOL).vertices
    return RiskEnvelope(
        gens, space, kind="mixed_cvar", meta={"alphas": alphas, "lambdas": lambdas}
    )


def _shared_space(envelopes) -> FiniteProbSpace:
    if not envelopes:
        raise ValidationError("need at least one envelope")
    space = envelopes[0].space
    for e in envelopes[1:]:
        if not e.space.same_as(space):
            raise SpaceMismatch("envelopes live on different probability spaces")
    return space


def mix(envelopes, lambdas) -> RiskEnvelope:
    """Envelope of sum(lambda_i * D_i) for positive weights.

    When the weights do not sum to 1 the generators pick up the constant
    shift (1 - sum lambda) so that E[Q] = 1 still holds.
    """
    space = _shared_space(envelopes)
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) != len(envelopes):
        raise ValidationError("one weight per envelope required")
    if any(l <= 0 for l in lambdas):
        raise ValidationError("mixture weights must be positive")
    shift = 1.0 - sum(lambdas)
    gens = _minkowski_generators([e.generators for e in envelopes], lambdas) + shift
    gens = geometry.extreme_filter(gens, GEN_DEDUP_TOL).vertices
    return RiskEnvelope(
        gens, space, kind="mix",
        meta={"lambdas": lambdas, "parts": tuple(envelopes)},
    )


def max_combine(envelopes) -> RiskEnvelope:
    """Envelope of max_i D_i: hull of the union of the envelopes."""
    space = _shared_space(envelopes)
    stacked = np.vstack([e.generators for e in envelopes])
    gens = geometry.extreme_filter(stacked, GEN_DEDUP_TOL).vertices
    return RiskEnvelope(
        gens, space, kind="max", meta={"parts": tuple(envelopes)}
    )


def scale(env: RiskEnvelope, lam: float) -> RiskEnvelope:
    """Envelope of lambda * D: generators (1 - lambda) + lambda * Q."""
    lam = float(lam)
    if lam <= 0:
        raise ValidationError("scale factor must be positive")
    gens = (1.0 - lam) + lam * env.generators
    return RiskEnvelope(
        gens, env.space, kind="scale", meta={"lambda": lam, "inner": env}
    )


def build_custom(space: FiniteProbSpace, generators) -> RiskEnvelope:
    """User-supplied generator list; filtered to its extreme points.

    Dropped points are reported in the meta under "filtered_out" so the
    silent change is visible in diagnostics.
    """
    raw = np.asarray(generators, dtype=float)
    poly = geometry.extreme_filter(raw, GEN_DEDUP_TOL)
    dropped = raw.shape[0] - poly.n_vertices
    return RiskEnvelope(
        poly.vertices, space, kind="custom", meta={"filtered_out": int(dropped)}
    )


def reject_non_finitely_generated(kind: str) -> None:
    """Standard deviation has no finite generator set: refuse it outright."""
    if kind in ("stddev", "std", "standard_deviation", "sigma"):
        raise Unsupported(
            "standard deviation is not finitely generated; its risk envelope "
            "is a ball, not a polytope, so this library cannot represent it"
        )


def evaluate(env: RiskEnvelope, x) -> float:
    """D(X) = E[X] + max over generators of E[-XQ]."""
    values = _require_same_space(env.space, x)
    weighted = env.space.weights * values
    mean = float(weighted.sum())
    return mean + float(np.max(-(env.generators @ weighted)))


def risk_identifiers(
    env: RiskEnvelope, x, tol: float = ACTIVITY_TOL
) -> RiskIdentifierSet:
    """Generators attaining the max in D(X), as the argmax face."""
    values = _require_same_space(env.space, x)
    weighted = env.space.weights * values
    scores = -(env.generators @ weighted)
    best = float(scores.max())
    active = scores >= best - tol * (1.0 + abs(best))
    idx = tuple(int(i) for i in np.flatnonzero(active))
    return RiskIdentifierSet(
        polytope=geometry.VPolytope(env.generators[active]),
        x=values,
        value=float(weighted.sum()) + best,
        active_indices=idx,
    )
