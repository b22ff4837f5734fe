"""Vertex-represented polytopes and Steiner-point machinery.

Everything here works on finite vertex lists in R^d. Degenerate
(lower-dimensional) polytopes are ordinary citizens: the Steiner point is
computed inside the affine hull, where it is exact for hull dimension
0, 1 and 2 and Monte-Carlo estimated above that.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import (
    DimensionGuard,
    DimensionMismatch,
    EmptyIntersection,
    GuardExceeded,
    UnboundedFace,
    ValidationError,
)

DEDUP_TOL = 1e-10
FACE_DEDUP_TOL = 1e-8
ACTIVITY_TOL = 1e-9
TIE_TOL = 1e-12
HULL_RANK_TOL = 1e-9
INTERSECT_DIM_GUARD = 8
SUBSET_GUARD = 500_000
DEFAULT_SAMPLES = 65_536


@dataclass(frozen=True)
class SteinerConfig:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    method: str = "auto"  # "auto" (exact for hull dim <= 2) or "montecarlo"


@dataclass(frozen=True)
class VPolytope:
    """Convex polytope given by its (extreme) vertices, one per row."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.size == 0:
            raise ValidationError("polytope needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertices must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def translate(self, q) -> "VPolytope":
        return VPolytope(self.vertices + np.asarray(q, dtype=float))


def _dedup(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Drop near-duplicate rows (sup-norm tolerance), keeping first seen."""
    kept: list[np.ndarray] = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in kept):
            kept.append(p)
    return np.asarray(kept)


def contains(poly: VPolytope, point, tol: float = 1e-9) -> bool:
    """Membership via an LP over convex-combination weights."""
    v = poly.vertices
    point = np.asarray(point, dtype=float)
    if point.shape != (poly.dim,):
        raise DimensionMismatch("point dimension mismatch")
    m = v.shape[0]
    a_eq = np.vstack([v.T, np.ones(m)])
    b_eq = np.concatenate([point, [1.0]])
    # Slack the equalities by tol so borderline points count as inside.
    a_ub = np.vstack([-np.eye(m), a_eq, -a_eq])
    b_ub = np.concatenate([np.zeros(m), b_eq + tol, -(b_eq - tol)])
    return lp.feasible(a_ub=a_ub, b_ub=b_ub, n_vars=m)


def extreme_filter(points, tol: float = DEDUP_TOL) -> VPolytope:
    """Keep exactly the points that are extreme in the hull of the list.

    A point is dropped when it is a convex combination of the others
    (LP feasibility test).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    if points.size == 0:
        raise ValidationError("empty point list")
    points = _dedup(points, tol)
    m = points.shape[0]
    if m == 1:
        return VPolytope(points)
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        others = points[keep & (np.arange(m) != i)]
        if others.shape[0] == 0:
            continue
        rest = VPolytope(others)
        if contains(rest, points[i], tol=1e-9):
            keep[i] = False
    return VPolytope(points[keep])


def minkowski_sum(p1: VPolytope, p2: VPolytope) -> VPolytope:
    if p1.dim != p2.dim:
        raise DimensionMismatch("summands have different dimensions")
    sums = (p1.vertices[:, None, :] + p2.vertices[None, :, :]).reshape(-1, p1.dim)
    return extreme_filter(sums)


def _independent_rows(a: np.ndarray, b: np.ndarray) -> list[int]:
    """Indices of a maximal independent row set of A; checks [A|b] consistency."""
    m, n = a.shape
    work = np.hstack([a, b[:, None]]).astype(float)
    norm = max(np.abs(work).max(), 1.0)
    perm = list(range(m))
    rank = 0
    for col in range(n):
        if rank == m:
            break
        piv = rank + int(np.argmax(np.abs(work[rank:, col])))
        if abs(work[piv, col]) <= 1e-10 * norm:
            continue
        work[[rank, piv]] = work[[piv, rank]]
        perm[rank], perm[piv] = perm[piv], perm[rank]
        factors = work[rank + 1 :, col] / work[rank, col]
        work[rank + 1 :] -= np.outer(factors, work[rank])
        rank += 1
    # Dependent rows must have vanished entirely, including the b column.
    if rank < m and np.max(np.abs(work[rank:])) > 1e-8 * norm:
        raise EmptyIntersection("inconsistent equality system")
    return sorted(perm[:rank])


def _basic_feasible_solutions(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vertices of {z >= 0 : A z = b} by basic-solution enumeration."""
    m, n = a.shape
    norm = max(np.abs(a).max(), np.abs(b).max(initial=0.0), 1.0)
    rows = _independent_rows(a, b)
    a_red = a[rows]
    b_red = b[rows]
    r = a_red.shape[0]
    from math import comb

    if comb(n, r) > SUBSET_GUARD:
        raise GuardExceeded(
            f"basic-solution enumeration needs {comb(n, r)} bases (cap {SUBSET_GUARD})"
        )
    combos = np.array(list(itertools.combinations(range(n), r)))
    mats = a_red[:, combos].transpose(1, 0, 2)  # (n_combo, r, r)
    dets = np.abs(np.linalg.det(mats))
    ok = dets > 1e-12 * max(np.abs(a_red).max(), 1.0) ** r
    sols = []
    if np.any(ok):
        rhs = np.broadcast_to(b_red[:, None], (int(ok.sum()), r, 1)).copy()
        zb = np.linalg.solve(mats[ok], rhs)[:, :, 0]
        for combo, z in zip(combos[ok], zb):
            if z.min(initial=0.0) < -1e-9:
                continue
            full = np.zeros(n)
            full[combo] = np.maximum(z, 0.0)
            if np.max(np.abs(a @ full - b)) <= 1e-8 * norm:
                sols.append(full)
    if not sols:
        raise EmptyIntersection("no basic feasible solution")
    return _dedup(np.asarray(sols), FACE_DEDUP_TOL)


def intersect(p1: VPolytope, p2: VPolytope) -> VPolytope:
    """Vertices of conv(P1) ∩ conv(P2).

    Works in the product of the two weight simplices: the intersection is
    the image of {(λ,ν) >= 0 : V1'λ = V2'ν, Σλ = Σν = 1} under λ ↦ V1'λ,
    whose vertices are among the images of the basic feasible solutions.
    """
    if p1.dim != p2.dim:
        raise DimensionMismatch("operands have different dimensions")
    if p1.dim > INTERSECT_DIM_GUARD:
        raise DimensionGuard(
            f"intersection supported up to dimension {INTERSECT_DIM_GUARD}"
        )
    m1, m2 = p1.n_vertices, p2.n_vertices
    a = np.zeros((p1.dim + 2, m1 + m2))
    a[: p1.dim, :m1] = p1.vertices.T
    a[: p1.dim, m1:] = -p2.vertices.T
    a[p1.dim, :m1] = 1.0
    a[p1.dim + 1, m1:] = 1.0
    b = np.concatenate([np.zeros(p1.dim), [1.0, 1.0]])
    try:
        basics = _basic_feasible_solutions(a, b)
    except EmptyIntersection:
        raise EmptyIntersection("the polytopes do not intersect") from None
    points = basics[:, :m1] @ p1.vertices
    return extreme_filter(points, FACE_DEDUP_TOL)


def support(poly: VPolytope, direction) -> tuple[float, VPolytope]:
    """Support value max_v d.v and the face of vertices attaining it."""
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (poly.dim,):
        raise DimensionMismatch("direction dimension mismatch")
    if np.max(np.abs(direction)) == 0.0:
        raise ValidationError("direction must be non-zero")
    values = poly.vertices @ direction
    best = float(values.max())
    face = poly.vertices[values >= best - ACTIVITY_TOL * (1.0 + abs(best))]
    return best, VPolytope(face)


def _affine_hull(vertices: np.ndarray):
    """Orthonormal basis of the affine hull; returns (origin, basis (d,k))."""
    origin = vertices[0]
    diff = vertices - origin
    if diff.shape[0] == 1:
        return origin, np.zeros((vertices.shape[1], 0))
    u, s, vt = np.linalg.svd(diff, full_matrices=False)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    k = int(np.sum(s > HULL_RANK_TOL * scale))
    return origin, vt[:k].T


def _polygon_steiner(points2: np.ndarray) -> np.ndarray:
    """Exact Steiner point of a 2-d polygon with extreme vertices.

    Each vertex is weighted by its normal-cone angle over 2π, which equals
    the exterior turning angle.
    """
    center = points2.mean(axis=0)
    order = np.argsort(np.arctan2(points2[:, 1] - center[1], points2[:, 0] - center[0]))
    pts = points2[order]
    m = pts.shape[0]
    weights = np.zeros(m)
    for i in range(m):
        prev_edge = pts[i] - pts[i - 1]
        next_edge = pts[(i + 1) % m] - pts[i]
        cross = prev_edge[0] * next_edge[1] - prev_edge[1] * next_edge[0]
        dot = prev_edge @ next_edge
        weights[i] = np.arctan2(cross, dot)
    weights = np.abs(weights) / (2.0 * np.pi)
    return weights @ pts


def _mc_steiner(coords: np.ndarray, config: SteinerConfig):
    """Monte-Carlo Eq.-(5) estimate in hull coordinates.

    Directions are uniform on the sphere; each sample contributes the
    argmax vertex; ties are resolved by resampling the direction.
    """
    n_samples = config.samples
    m, k = coords.shape
    rng = np.random.default_rng(config.seed)
    picks = np.empty(n_samples, dtype=np.intp)
    pending = np.arange(n_samples)
    for _round in range(200):
        dirs = rng.standard_normal((pending.size, k))
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        dirs /= norms
        scores = dirs @ coords.T
        best = scores.max(axis=1)
        tie_counts = np.sum(
            scores >= best[:, None] - TIE_TOL * (1.0 + np.abs(best))[:, None], axis=1
        )
        clean = tie_counts == 1
        picks[pending[clean]] = np.argmax(scores[clean], axis=1)
        pending = pending[~clean]
        if pending.size == 0:
            break
    else:
        # Ties persisting after many rounds sit on a measure-zero set; any
        # attaining vertex is acceptable for the remaining samples.
        dirs = rng.standard_normal((pending.size, k))
        picks[pending] = np.argmax(dirs @ coords.T, axis=1)
    chosen = coords[picks]
    mean = chosen.mean(axis=0)
    stderr = chosen.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return mean, stderr


def steiner_point(
    poly: VPolytope, config: SteinerConfig | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Steiner point with a per-coordinate standard-error estimate.

    Exact (zero error) for hull dimension <= 2: singleton, segment
    midpoint, polygon normal-cone-angle average. Higher dimensions use a
    seeded Monte-Carlo average of support argmax vertices. The point is
    intrinsic to the hull, so everything runs in affine-hull coordinates.
    """
    config = config or SteinerConfig()
    verts = _dedup(poly.vertices, DEDUP_TOL)
    d = verts.shape[1]
    if verts.shape[0] == 1:
        return verts[0].copy(), np.zeros(d)
    origin, basis = _affine_hull(verts)
    k = basis.shape[1]
    coords = (verts - origin) @ basis
    if k == 0:
        return verts[0].copy(), np.zeros(d)
    exact = config.method != "montecarlo"
    if k == 1 and exact:
        t = coords[:, 0]
        mid = 0.5 * (t.min() + t.max())
        return origin + mid * basis[:, 0], np.zeros(d)
    if k == 2 and exact:
        hull2 = extreme_filter(coords).vertices
        s2 = _polygon_steiner(hull2)
        return origin + basis @ s2, np.zeros(d)
    hull_coords = extreme_filter(coords).vertices
    mean_k, err_k = _mc_steiner(hull_coords, config)
    point = origin + basis @ mean_k
    err = np.abs(basis) @ err_k
    return point, err


@dataclass(frozen=True)
class PwlConvexFunction:
    """Max-affine convex function f(Y) = max_i (g_i . Y + b_i)."""

    gradients: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gradients, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if g.shape[0] != b.size:
            raise DimensionMismatch("one intercept per gradient required")
        if g.shape[0] == 0:
            raise ValidationError("need at least one affine piece")
        g = g.copy()
        g.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "gradients", g)
        object.__setattr__(self, "intercepts", b)

    @property
    def dim(self) -> int:
        return self.gradients.shape[1]

    def value(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(np.max(self.gradients @ y + self.intercepts))

    def subdifferential(self, y) -> VPolytope:
        """Convex hull of the gradients of the active pieces at y."""
        y = np.asarray(y, dtype=float)
        vals = self.gradients @ y + self.intercepts
        best = vals.max()
        active = vals >= best - ACTIVITY_TOL * (1.0 + abs(best))
        return extreme_filter(self.gradients[active])


def extended_gradient(
    f: PwlConvexFunction, y, config: SteinerConfig | None = None
) -> np.ndarray:
    """Steiner point of the subdifferential at y."""
    point, _err = steiner_point(f.subdifferential(y), config)
    return point


def _project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, w.size + 1)
    cond = u - css / idx > 0
    rho = int(idx[cond][-1])
    theta = css[rho - 1] / rho
    return np.maximum(w - theta, 0.0)


def _dist_to_hull(point: np.ndarray, vertices: np.ndarray) -> float:
    """min_{λ in simplex} ||V'λ - p|| by projected gradient."""
    m = vertices.shape[0]
    if m == 1:
        return float(np.linalg.norm(vertices[0] - point))
    w = np.zeros(m)
    w[int(np.argmin(np.linalg.norm(vertices - point, axis=1)))] = 1.0
    gram = vertices @ vertices.T
    lin = vertices @ point
    lipschitz = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    step = 1.0 / max(lipschitz, 1e-300)
    prev = np.inf
    for _ in range(10_000):
        grad = 2.0 * (gram @ w - lin)
        w = _project_simplex(w - step * grad)
        val = float(w @ gram @ w - 2.0 * lin @ w + point @ point)
        if prev - val <= 1e-10 * (1.0 + abs(val)):
            break
        prev = val
    return float(np.sqrt(max(val, 0.0)))


def hausdorff(p1: VPolytope, p2: VPolytope) -> float:
    """Hausdorff distance between the two hulls."""
    if p1.dim != p2.dim:
        raise DimensionMismatch("operands have different dimensions")
    d12 = max(_dist_to_hull(v, p2.vertices) for v in p1.vertices)
    d21 = max(_dist_to_hull(v, p1.vertices) for v in p2.vertices)
    return max(d12, d21)


def enumerate_face_vertices(
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    dim_guard: int = 8,
) -> VPolytope:
    """Vertices of the H-polytope {x : A_ub x <= b_ub, A_eq x = b_eq}.

    Intended for small optimal faces. Unboundedness is detected per
    coordinate and reported with a ray certificate.
    """
    a_ub = np.asarray(a_ub, dtype=float)
    b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
    a_eq = np.asarray(a_eq, dtype=float)
    b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
    n = a_ub.shape[1] if a_ub.size else a_eq.shape[1]
    if n > dim_guard:
        raise DimensionGuard(f"face enumeration supported up to dimension {dim_guard}")
    for sign in (1.0, -1.0):
        for j in range(n):
            c = np.zeros(n)
            c[j] = sign
            probe = lp.solve(lp.LinearProgram.build(c, a_ub, b_ub, a_eq, b_eq))
            if probe.status == "Infeasible":
                raise EmptyIntersection("face system is infeasible")
            if probe.status == "Unbounded":
                raise UnboundedFace(
                    "optimal face is unbounded", ray=probe.ray
                )
    # Keep an independent equality subsystem; vertices add enough active
    # inequality rows to reach a square nonsingular system.
    if a_eq.size:
        eq_rows = _independent_rows(a_eq, b_eq)
        a_eq_red = a_eq[eq_rows]
        b_eq_red = b_eq[eq_rows]
    else:
        a_eq_red = np.zeros((0, n))
        b_eq_red = np.zeros(0)
    r0 = a_eq_red.shape[0]
    need = max(n - r0, 0)
    m = b_ub.size
    from math import comb

    if comb(m, need) > SUBSET_GUARD:
        raise GuardExceeded(
            f"face enumeration needs {comb(m, need)} subsets (cap {SUBSET_GUARD})"
        )
    bscale = 1.0 + max(np.abs(b_ub).max(initial=0.0), np.abs(b_eq).max(initial=0.0))
    if need == 0:
        combos = np.zeros((1, 0), dtype=int)
    else:
        combos = np.asarray(list(itertools.combinations(range(m), need)), dtype=int)
        if combos.size == 0:
            raise EmptyIntersection("not enough inequality rows for a vertex")
    mats = np.broadcast_to(a_eq_red, (combos.shape[0], r0, n)).copy()
    mats = np.concatenate([mats, a_ub[combos]], axis=1)  # (batch, n, n)
    rhs = np.concatenate(
        [np.broadcast_to(b_eq_red, (combos.shape[0], r0)), b_ub[combos]], axis=1
    )
    ascale = max(np.abs(mats).max(initial=0.0), 1.0)
    dets = np.abs(np.linalg.det(mats / ascale))
    ok = dets > 1e-12
    candidates = np.zeros((0, n))
    if np.any(ok):
        sols = np.linalg.solve(mats[ok], rhs[ok][:, :, None])[:, :, 0]
        feas = np.ones(sols.shape[0], dtype=bool)
        if m:
            feas &= np.max(sols @ a_ub.T - b_ub, axis=1) <= 1e-8 * bscale
        if r0:
            feas &= (
                np.max(np.abs(sols @ a_eq_red.T - b_eq_red), axis=1) <= 1e-8 * bscale
            )
        candidates = sols[feas]
    if candidates.shape[0] == 0:
        raise EmptyIntersection("no vertex satisfies the face system")
    # Feasible basic solutions are exactly the vertices; dedup handles
    # degenerate bases hitting the same point.
    return VPolytope(_dedup(candidates, FACE_DEDUP_TOL))
