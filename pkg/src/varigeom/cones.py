"""Tangent cones of sets at points, in three computable forms.

The affine cones are limits of the blow-ups x + lam*(A - x).  For a unit
direction u and scale lam, the membership residual of the point x + u
against the blow-up family collapses to

    d(x + u, x + lam*(A - x)) = lam * d(x + u/lam, A),

so the whole computation runs on the distance oracle of A itself.  A
direction belongs to the upper cone when the tail of its residual trace
dips below tolerance (liminf rule), and to the lower cone when the whole
tail stays below (lim rule) — the same finite surrogates used for set
limits.  Surviving directions are clustered within an angular tolerance;
cluster centers are the reported generators.

H-polyhedra additionally get an exact path: the active rows at x define
the cone by inequalities, and extreme rays are enumerated in dim <= 3.
Unions of polyhedra recurse into per-member cones (the cone of a union is
the union of the cones).

The vector cone form keeps the apex at the origin and is computed from
harvested near-points (projections of probes onto A) rather than residual
traces, so the affine/vector agreement check compares two genuinely
different routes.  Half-line directions come from the same harvest via
the convergent-selection rule and coincide with the nonzero vector-cone
directions by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, Vector
from .report import FAIL, INCONCLUSIVE, PASS, Report
from .sets import (Ball, EmptySet, HPolyhedron, ParamPatch, PointCloud,
                   SetRep, UnionSet, _as_array, _cone_generators)
from . import exprs
from .errors import NondifferentiableError, EvalDomainError

__all__ = [
    "BlowUpParams", "Cone", "ContingentResult",
    "upper_tangent_cone", "lower_tangent_cone", "federer_cone",
    "contingent_directions", "cone_member", "cone_to_setrep",
    "cone_property_suite", "exact_sampled_agreement", "generators_match",
    "default_blowup_schedule",
]


def default_blowup_schedule(lo_exp: float = 3.0, hi_exp: float = 20.0,
                            per_octave: int = 2) -> np.ndarray:
    """Geometric scale grid 2**lo_exp .. 2**hi_exp.

    Two scales per octave by default: with purely dyadic scales the
    lim/liminf distinction is blind on dyadic geometric sets, because
    every scale then lands exactly on a member point.
    """
    count = int(round((hi_exp - lo_exp) * per_octave)) + 1
    exps = np.linspace(lo_exp, hi_exp, count)
    return 2.0 ** exps


@dataclass
class BlowUpParams:
    """Finite surrogate for lam -> +infinity in the blow-up limits."""

    schedule: np.ndarray = field(default_factory=default_blowup_schedule)
    samples_per_scale: int = 160
    angular_tol: float = 1e-2   # radians; cluster radius and match budget
    distance_tol: float = 9e-3  # residual threshold, kept inside the angular budget
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.schedule, dtype=float)
        if s.ndim != 1 or s.shape[0] < 8 or np.any(np.diff(s) <= 0) or np.any(s <= 0):
            raise ValueError("schedule must be increasing, positive, length >= 8")
        self.schedule = s
        if not (0.0 < self.angular_tol < math.pi / 4):
            raise ValueError("angular_tol must lie in (0, pi/4)")


@dataclass
class Cone:
    """Affine cone with apex plus a finite description.

    ``ineqs`` (unit normals n with <n, v> <= 0) is present on exact cones;
    an exact cone with an *empty* ineqs list is the whole space.  ``gens``
    are unit directions: extreme rays plus a +-basis of the lineality
    space on exact cones, direction-cluster centers on sampled ones.
    ``empty`` distinguishes the empty cone from the apex-only cone {x}.
    """

    apex: Point
    gens: list = field(default_factory=list)          # list[Vector], unit
    ineqs: list | None = None                         # list[Vector], unit normals
    exact: bool = False
    angular_res: float = 1e-2
    empty: bool = False
    inconclusive: bool = False
    parts: list | None = None                         # list[Cone] for unions
    gen_scales: list | None = None                    # [(first_lam, last_lam)]

    @property
    def dim(self) -> int:
        return self.apex.dim

    def gen_matrix(self) -> np.ndarray:
        if not self.gens:
            return np.zeros((0, self.dim))
        return np.array([g.comps for g in self.gens])

    def all_gens(self) -> list:
        if self.parts:
            out = []
            for p in self.parts:
                out.extend(p.all_gens())
            return out
        return list(self.gens)

    def is_full_space(self) -> bool:
        if self.parts:
            return any(p.is_full_space() for p in self.parts)
        return self.exact and self.ineqs is not None and len(self.ineqs) == 0


@dataclass
class ContingentResult:
    """Unit tangent half-line directions, or the reason there are none."""

    directions: list                 # list[Vector]
    accumulation_point: bool
    note: str = ""


# ---------------------------------------------------------------------------
# Candidate directions and residual traces
# ---------------------------------------------------------------------------

def _uniform_directions(dim: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    U = rng.standard_normal((count, dim))
    norms = np.linalg.norm(U, axis=1)
    U = U[norms > 1e-12] / norms[norms > 1e-12][:, None]
    return U


def _dedupe_directions(stacks: list[np.ndarray], tol: float = 1e-9) -> np.ndarray:
    out: list[np.ndarray] = []
    for stack in stacks:
        for u in stack:
            n = np.linalg.norm(u)
            if n < 1e-12:
                continue
            u = u / n
            if all(np.dot(u, v) < 1.0 - tol for v in out):
                out.append(u)
    return np.array(out) if out else np.zeros((0, 0))


def _patch_tangent_hints(A: ParamPatch, xv: np.ndarray) -> list[np.ndarray]:
    d, bound = A.distance_info(xv)
    if d > 10.0 * bound + 1e-7:
        return []
    t0 = A.nearest_params(xv[None, :])[0]
    hints = []
    for axis in range(A.k):
        try:
            deriv = []
            for m in A.maps:
                g = exprs.grad(m, t0 if A.k > 1 else [t0[0]])
                deriv.append(g[axis])
            v = np.array(deriv)
            if np.linalg.norm(v) > 1e-12:
                hints.extend([v, -v])
        except (NondifferentiableError, EvalDomainError):
            continue
    return hints


def _structural_hints(A: SetRep, xv: np.ndarray) -> list[np.ndarray]:
    hints: list[np.ndarray] = []
    n = xv.shape[0]
    hints.extend(np.eye(n))
    hints.extend(-np.eye(n))
    if isinstance(A, PointCloud):
        diff = A.points - xv
        dist = np.linalg.norm(diff, axis=1)
        order = np.argsort(dist)
        for i in order[:256]:
            if dist[i] > 1e-14:
                hints.append(diff[i] / dist[i])
    elif isinstance(A, HPolyhedron) and A.dim <= 3:
        act = np.abs(A.A @ xv - A.b) <= 1e-9 * (1.0 + np.abs(A.b))
        rays, lines = _cone_generators(A.A[act]) if act.any() else ([], list(np.eye(n)))
        hints.extend(rays)
        for l in lines:
            hints.extend([l, -l])
        for v in A.vertices():
            d = np.linalg.norm(v - xv)
            if d > 1e-12:
                hints.append((v - xv) / d)
    elif isinstance(A, Ball):
        c = A.center - xv
        if np.linalg.norm(c) > 1e-12:
            u = c / np.linalg.norm(c)
            hints.extend([u, -u])
    elif isinstance(A, ParamPatch):
        hints.extend(_patch_tangent_hints(A, xv))
    elif isinstance(A, UnionSet):
        for m in A.members:
            hints.extend(_structural_hints(m, xv))
    return hints


def _harvest_hints(A: SetRep, xv: np.ndarray, probes: np.ndarray,
                   radii: np.ndarray) -> list[np.ndarray]:
    # project ring probes onto A; directions of genuine near-points
    hints = []
    for t in radii:
        Q, _ = A.nearest_batch(xv + t * probes)
        diff = Q - xv
        dist = np.linalg.norm(diff, axis=1)
        good = (dist > 1e-14) & np.isfinite(dist)
        hints.extend(diff[good] / dist[good][:, None])
    return hints


def _candidate_directions(A: SetRep, xv: np.ndarray, p: BlowUpParams) -> np.ndarray:
    n = xv.shape[0]
    uniform = _uniform_directions(n, p.samples_per_scale, p.seed)
    hints = _structural_hints(A, xv)
    probe_subset = uniform[: max(16, min(64, len(uniform)))]
    radii = 1.0 / p.schedule[::4]
    hints.extend(_harvest_hints(A, xv, probe_subset, radii))
    H = np.array(hints) if hints else np.zeros((0, n))
    return _dedupe_directions([H, uniform])


def _residual_matrix(A: SetRep, xv: np.ndarray, dirs: np.ndarray,
                     schedule: np.ndarray):
    S, N = schedule.shape[0], dirs.shape[0]
    pts = (xv[None, None, :] + dirs[None, :, :] / schedule[:, None, None])
    d, bound = A.distance_batch(pts.reshape(S * N, -1))
    R = d.reshape(S, N) * schedule[:, None]
    B = bound.reshape(S, N) * schedule[:, None]
    return R, B


def _cluster(dirs: np.ndarray, order: np.ndarray, angular_tol: float,
             score: np.ndarray | None = None):
    """Greedy farthest-first clustering; returns (center indices, assignment).

    ``order`` ranks candidates (first passing scale, then insertion index);
    the first-ranked survivor seeds the first cluster, then the farthest
    survivor is promoted until everything sits within angular_tol of a
    seed.  Each cluster is then recentered on its best-``score`` member
    (ties broken by order), so exactly-validated directions win over
    marginal ones.  Deterministic by construction.
    """
    m = dirs.shape[0]
    if m == 0:
        return [], np.zeros(0, dtype=int)
    ranked = np.argsort(order, kind="stable")
    seeds = [ranked[0]]
    cosd = dirs @ dirs[ranked[0]]
    min_ang = np.arccos(np.clip(cosd, -1.0, 1.0))
    cap = min(m, 4096)
    while len(seeds) < cap:
        far = float(min_ang.max())
        if far <= angular_tol:
            break
        # earliest-ranked candidate among those attaining the max
        att = np.flatnonzero(min_ang >= far - 1e-15)
        pick = att[np.argmin(order[att])]
        seeds.append(int(pick))
        ang = np.arccos(np.clip(dirs @ dirs[pick], -1.0, 1.0))
        min_ang = np.minimum(min_ang, ang)
    SM = dirs @ dirs[seeds].T
    assign = np.argmax(SM, axis=1)
    if score is None:
        return seeds, assign
    centers = []
    for si in range(len(seeds)):
        members = np.flatnonzero(assign == si)
        key = np.lexsort((order[members], score[members]))
        centers.append(int(members[key[0]]))
    return centers, assign


def _coverage_res(dim: int, n_dirs: int, angular_tol: float) -> float:
    if dim <= 1 or n_dirs < 2:
        return angular_tol
    if dim == 2:
        est = 2.0 * math.pi / n_dirs * 2.0
    else:
        est = 2.0 * math.sqrt(4.0 * math.pi / n_dirs)
    return max(angular_tol, est)


def _closure_tol(A: SetRep, xv: np.ndarray, bound: float) -> float:
    return max(1e-7 * (1.0 + float(np.linalg.norm(xv))), 3.0 * bound + 1e-12)


def _sampled_cone(A: SetRep, xv: np.ndarray, p: BlowUpParams, rule: str) -> Cone:
    d0, b0 = A.distance_info(xv)
    if d0 > _closure_tol(A, xv, b0):
        return Cone(apex=Point(xv), empty=True, exact=False,
                    angular_res=p.angular_tol)
    dirs = _candidate_directions(A, xv, p)
    if dirs.shape[0] == 0:
        return Cone(apex=Point(xv), exact=False, angular_res=p.angular_tol)
    R, B = _residual_matrix(A, xv, dirs, p.schedule)
    S = p.schedule.shape[0]
    tail = slice(S - max(1, math.ceil(S / 4)), S)
    if rule == "liminf":
        ok = R[tail].min(axis=0) <= p.distance_tol
    else:
        ok = R[tail].max(axis=0) <= p.distance_tol
    inconclusive = bool(B[tail].max() > p.distance_tol / 2.0)
    survivors = np.flatnonzero(ok)
    res = _coverage_res(xv.shape[0], dirs.shape[0], p.angular_tol)
    if survivors.size == 0:
        return Cone(apex=Point(xv), exact=False, angular_res=res,
                    inconclusive=inconclusive)
    passing = R[:, survivors] <= p.distance_tol
    first_idx = passing.argmax(axis=0)
    last_idx = S - 1 - passing[::-1].argmax(axis=0)
    order = first_idx.astype(float) * dirs.shape[0] + np.arange(survivors.size)
    if rule == "liminf":
        score = R[tail, :][:, survivors].min(axis=0)
    else:
        score = R[tail, :][:, survivors].max(axis=0)
    centers, assign = _cluster(dirs[survivors], order, p.angular_tol, score)
    gens, scales = [], []
    for si, s in enumerate(centers):
        members = np.flatnonzero(assign == si)
        gens.append(Vector(dirs[survivors[s]]))
        scales.append((float(p.schedule[first_idx[members].min()]),
                       float(p.schedule[last_idx[members].max()])))
    return Cone(apex=Point(xv), gens=gens, exact=False, angular_res=res,
                inconclusive=inconclusive, gen_scales=scales)


def _exact_poly_cone(A: HPolyhedron, xv: np.ndarray, p: BlowUpParams) -> Cone:
    d0, _ = A.distance_info(xv)
    if d0 > _closure_tol(A, xv, 0.0):
        return Cone(apex=Point(xv), empty=True, exact=True, angular_res=0.0)
    act = np.abs(A.A @ xv - A.b) <= 1e-9 * (1.0 + np.abs(A.b))
    n = xv.shape[0]
    if not act.any():
        gens = [Vector(e) for e in np.vstack([np.eye(n), -np.eye(n)])]
        return Cone(apex=Point(xv), gens=gens, ineqs=[], exact=True,
                    angular_res=0.0)
    N = A.A[act]
    N = N / np.linalg.norm(N, axis=1, keepdims=True)
    rays, lines = _cone_generators(N)
    gens = [Vector(r) for r in rays]
    for l in lines:
        gens.extend([Vector(l), Vector(-l)])
    ineqs = [Vector(row) for row in N]
    return Cone(apex=Point(xv), gens=gens, ineqs=ineqs, exact=True,
                angular_res=0.0)


def _union_cone(A: UnionSet, xv: np.ndarray, p: BlowUpParams, rule: str) -> Cone:
    parts = []
    for m in A.members:
        d, b = m.distance_info(xv)
        if d <= _closure_tol(m, xv, b):
            parts.append(_tangent_cone(m, xv, p, rule, force_sampled=False))
    if not parts:
        return Cone(apex=Point(xv), empty=True, exact=True, angular_res=0.0)
    if len(parts) == 1:
        return parts[0]
    gens = []
    seen = []
    for c in parts:
        for g in c.all_gens():
            if all(np.dot(g.comps, s) < 1.0 - 1e-12 for s in seen):
                seen.append(g.comps)
                gens.append(g)
    return Cone(apex=Point(xv), gens=gens, exact=all(c.exact for c in parts),
                angular_res=max(c.angular_res for c in parts),
                inconclusive=any(c.inconclusive for c in parts), parts=parts)


def _tangent_cone(A: SetRep, xv, p: BlowUpParams, rule: str,
                  force_sampled: bool) -> Cone:
    xv = _as_array(xv, A.dim)
    if isinstance(A, EmptySet):
        return Cone(apex=Point(xv), empty=True, exact=True, angular_res=0.0)
    if not force_sampled:
        if isinstance(A, HPolyhedron) and A.dim <= 3:
            # convex: blow-ups are nested, so lim and liminf agree
            return _exact_poly_cone(A, xv, p)
        if isinstance(A, UnionSet) and all(
                isinstance(m, HPolyhedron) and m.dim <= 3 for m in A.members):
            return _union_cone(A, xv, p, rule)
    return _sampled_cone(A, xv, p, rule)


def upper_tangent_cone(A: SetRep, x, p: BlowUpParams | None = None,
                       force_sampled: bool = False) -> Cone:
    """Blow-up limit cone under the liminf rule (directions that recur
    at arbitrarily large scales).  Empty when x is outside the closure."""
    return _tangent_cone(A, x, p or BlowUpParams(), "liminf", force_sampled)


def lower_tangent_cone(A: SetRep, x, p: BlowUpParams | None = None,
                       force_sampled: bool = False) -> Cone:
    """Blow-up limit cone under the lim rule (directions present at every
    tail scale).  Always contained in the upper cone."""
    return _tangent_cone(A, x, p or BlowUpParams(), "lim", force_sampled)


# ---------------------------------------------------------------------------
# Vector cone (apex at origin) and half-line directions
# ---------------------------------------------------------------------------

def _harvest_near_points(A: SetRep, xv: np.ndarray, p: BlowUpParams):
    radii = 1.0 / p.schedule  # decreasing epsilon grid
    dirs = _candidate_directions(A, xv, p)
    recs_r, recs_u = [], []
    for t in radii:
        Q, _ = A.nearest_batch(xv + t * dirs)
        diff = Q - xv
        dist = np.linalg.norm(diff, axis=1)
        good = (dist > 1e-15) & np.isfinite(dist)
        recs_r.append(dist[good])
        recs_u.append(diff[good] / dist[good][:, None])
    rr = np.concatenate(recs_r) if recs_r else np.zeros(0)
    uu = np.vstack(recs_u) if recs_u else np.zeros((0, xv.shape[0]))
    return dirs, rr, uu


def federer_cone(A: SetRep, x, p: BlowUpParams | None = None) -> Cone:
    """Vector cone at the origin: directions u such that points of A
    arbitrarily close to x make angles with u shrinking below every
    epsilon of the grid.  Contains the zero vector by convention."""
    p = p or BlowUpParams()
    xv = _as_array(x, A.dim)
    d0, b0 = A.distance_info(xv)
    if d0 > _closure_tol(A, xv, b0):
        return Cone(apex=Point(np.zeros_like(xv)), empty=True, exact=False,
                    angular_res=p.angular_tol)
    dirs, rr, uu = _harvest_near_points(A, xv, p)
    origin = Point(np.zeros_like(xv))
    res = _coverage_res(xv.shape[0], dirs.shape[0], p.angular_tol)
    if dirs.shape[0] == 0 or rr.size == 0:
        return Cone(apex=origin, exact=False, angular_res=res)
    radii = 1.0 / p.schedule
    tail = radii[-max(1, math.ceil(len(radii) / 4)):]
    cos_mat = dirs @ uu.T  # candidates x harvested
    ok = np.ones(dirs.shape[0], dtype=bool)
    worst_ang = np.zeros(dirs.shape[0])
    for eps in tail:
        close = rr <= eps * (1.0 + 1e-6)  # probe ring points sit exactly at eps
        if not close.any():
            ok[:] = False
            break
        ang = np.arccos(np.clip(cos_mat[:, close].max(axis=1), -1.0, 1.0))
        ok &= ang <= max(p.angular_tol, eps)
        worst_ang = np.maximum(worst_ang, ang)
    survivors = np.flatnonzero(ok)
    if survivors.size == 0:
        return Cone(apex=origin, exact=False, angular_res=res)
    order = np.arange(survivors.size, dtype=float)
    centers, assign = _cluster(dirs[survivors], order, p.angular_tol,
                               worst_ang[survivors])
    gens = [Vector(dirs[survivors[s]]) for s in centers]
    return Cone(apex=origin, gens=gens, exact=False, angular_res=res)


def contingent_directions(A: SetRep, x, p: BlowUpParams | None = None) -> ContingentResult:
    """Unit directions of tangent half-lines at an accumulation point.

    Selection rule: a half-line qualifies when near-points can be chosen
    within every tail radius whose directions converge to it; this is the
    same survival predicate as the vector cone, so the direction sets
    coincide by construction.
    """
    p = p or BlowUpParams()
    xv = _as_array(x, A.dim)
    _, rr, _ = _harvest_near_points(A, xv, p)
    radii = 1.0 / p.schedule
    eps_small = radii[-max(1, math.ceil(len(radii) / 4))]
    if rr.size == 0 or rr.min() > eps_small:
        return ContingentResult([], accumulation_point=False,
                                note="no points of A accumulate at x within "
                                     f"radius {eps_small:g}")
    cone = federer_cone(A, x, p)
    return ContingentResult(list(cone.gens), accumulation_point=True)


# ---------------------------------------------------------------------------
# Membership, realization, comparison
# ---------------------------------------------------------------------------

def cone_member(c: Cone, y, tol_ang: float = 1e-2) -> bool:
    """Is y in the cone, up to an angular tolerance?

    Exact cones test their inequalities; sampled cones test the angle to
    the nearest generator cluster, which is sound for ray-generated cones
    and approximate (resolution angular_res) for cones with flat faces.
    """
    if c.empty:
        return False
    yv = _as_array(y, c.dim)
    v = yv - c.apex.coords
    nv = np.linalg.norm(v)
    if nv <= 1e-12 * (1.0 + np.linalg.norm(c.apex.coords)):
        return True
    vhat = v / nv
    if c.parts:
        return any(cone_member(part, y, tol_ang) for part in c.parts)
    if c.ineqs is not None:
        slack = math.sin(min(tol_ang, math.pi / 2)) + 1e-12
        return all(float(np.dot(n.comps, vhat)) <= slack for n in c.ineqs)
    G = c.gen_matrix()
    if G.shape[0] == 0:
        return False
    cosv = np.clip(G @ vhat, -1.0, 1.0)
    return bool(np.arccos(cosv.max()) <= tol_ang)


def cone_to_setrep(c: Cone, radii: np.ndarray | None = None) -> SetRep:
    """Realize a cone as a set, so cone computations can be iterated.

    Exact inequality cones become polyhedra anchored at the apex (unions
    recurse); sampled cones become ray point-clouds sampled at blow-up
    reciprocal radii so every schedule scale sees on-ray points.
    """
    xv = c.apex.coords
    if c.empty:
        return EmptySet(c.dim)
    if c.parts:
        return UnionSet([cone_to_setrep(p, radii) for p in c.parts])
    if c.exact and c.ineqs is not None:
        if len(c.ineqs) == 0:
            return Ball(xv, 1e6)  # stand-in for the whole space
        N = np.array([n.comps for n in c.ineqs])
        return HPolyhedron(N, N @ xv)
    if radii is None:
        radii = np.concatenate([1.0 / default_blowup_schedule(), [0.5, 1.0, 2.0]])
    G = c.gen_matrix()
    if G.shape[0] == 0:
        return PointCloud(xv[None, :])
    pts = (xv[None, None, :] + radii[:, None, None] * G[None, :, :]).reshape(-1, c.dim)
    return PointCloud(np.vstack([xv[None, :], pts]))


def generators_match(c1: Cone, c2: Cone, tol_ang: float) -> tuple[bool, float]:
    """Two-sided nearest-generator match; returns (ok, worst angle)."""
    G1 = np.array([g.comps for g in c1.all_gens()]) if c1.all_gens() else np.zeros((0, c1.dim))
    G2 = np.array([g.comps for g in c2.all_gens()]) if c2.all_gens() else np.zeros((0, c2.dim))
    if G1.shape[0] == 0 and G2.shape[0] == 0:
        return True, 0.0
    if G1.shape[0] == 0 or G2.shape[0] == 0:
        return False, math.pi
    C = np.clip(G1 @ G2.T, -1.0, 1.0)
    worst = max(float(np.arccos(C.max(axis=1)).max()),
                float(np.arccos(C.max(axis=0)).max()))
    return worst <= tol_ang, worst


def exact_sampled_agreement(exact: Cone, sampled: Cone, tol_ang: float) -> tuple[bool, dict]:
    """Exact and sampled cones agree when (a) every sampled generator is
    a member of the exact cone and (b) every exact generator has a
    sampled generator within the angular tolerance."""
    detail: dict = {}
    if exact.empty or sampled.empty:
        ok = exact.empty == sampled.empty
        detail["both_empty"] = ok
        return ok, detail
    worst_in = 0.0
    for g in sampled.all_gens():
        if not cone_member(exact, exact.apex + g, tol_ang):
            worst_in = max(worst_in, _angle_to_cone(exact, g.comps))
    detail["sampled_inside_worst"] = worst_in
    GS = np.array([g.comps for g in sampled.all_gens()]) if sampled.all_gens() else np.zeros((0, exact.dim))
    worst_cover = 0.0
    for g in exact.all_gens():
        if GS.shape[0] == 0:
            worst_cover = math.pi
            break
        cosv = np.clip(GS @ g.comps, -1.0, 1.0)
        worst_cover = max(worst_cover, float(np.arccos(cosv.max())))
    detail["exact_covered_worst"] = worst_cover
    ok = worst_in <= tol_ang and worst_cover <= tol_ang
    return ok, detail


def _angle_to_cone(c: Cone, u: np.ndarray) -> float:
    if c.ineqs is not None:
        if len(c.ineqs) == 0:
            return 0.0
        worst = max(float(np.dot(n.comps, u)) for n in c.ineqs)
        return math.asin(min(1.0, max(0.0, worst)))
    G = c.gen_matrix()
    if G.shape[0] == 0:
        return math.pi
    return float(np.arccos(np.clip(G @ u, -1.0, 1.0).min()))


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------

def _diameter_hint(A: SetRep, xv: np.ndarray) -> float:
    try:
        if A.is_empty():
            return 1.0
        S = A.sample_array(64, 3)
        return float(np.linalg.norm(S - xv, axis=1).max()) + 1.0
    except Exception:
        return 10.0


def _interior_point(A: SetRep) -> np.ndarray | None:
    if isinstance(A, Ball) and A.radius > 0:
        return A.center.copy()
    if isinstance(A, HPolyhedron) and A.dim <= 3:
        V = A.vertices()
        if V.shape[0] >= A.dim + 1:
            c = V.mean(axis=0)
            margin = A.b - A.A @ c
            if np.all(margin > 1e-6 * (1.0 + np.abs(A.b))):
                return c
    if isinstance(A, UnionSet):
        for m in A.members:
            q = _interior_point(m)
            if q is not None:
                return q
    return None


def _sub(name, ok, witness=None, note=None, inconclusive=False) -> Report:
    verdict = INCONCLUSIVE if inconclusive else (PASS if ok else FAIL)
    r = Report(name, verdict)
    if witness:
        r.witness = witness
    if note:
        r.details["note"] = note
    return r


def cone_property_suite(A: SetRep, x, B: SetRep | None = None,
                        p: BlowUpParams | None = None) -> Report:
    """Check the eight structural properties of the upper cone around
    one (A, x) configuration, synthesizing auxiliary sets where the
    property needs one (far point, isolated point, superset, union)."""
    p = p or BlowUpParams()
    xv = _as_array(x, A.dim)
    n = xv.shape[0]
    diam = _diameter_hint(A, xv)
    subs: list[Report] = []
    cone_x = upper_tangent_cone(A, xv, p)
    match_tol = max(p.angular_tol, cone_x.angular_res) * 1.5

    # (1) points outside the closure get the empty cone
    far = xv + (diam + 5.0) * np.eye(n)[0]
    d_far, _ = A.distance_info(far)
    c1 = upper_tangent_cone(A, far, p)
    subs.append(_sub("outside_closure_empty", d_far > 0.5 and c1.empty,
                     witness=None if c1.empty else {"point": far.tolist()}))

    # (2) isolated points get the apex-only cone
    q = xv + (diam + 9.0) * np.eye(n)[-1]
    A_iso = UnionSet([A, PointCloud(q[None, :])]) if not A.is_empty() else PointCloud(q[None, :])
    c2 = upper_tangent_cone(A_iso, q, p, force_sampled=True)
    ok2 = (not c2.empty) and len(c2.all_gens()) == 0
    subs.append(_sub("isolated_apex_only", ok2,
                     witness=None if ok2 else {"gens": len(c2.all_gens())}))

    # (3) accumulation points get a nonempty cone with a direction
    acc = contingent_directions(A, xv, p)
    if acc.accumulation_point:
        ok3 = (not cone_x.empty) and len(cone_x.all_gens()) >= 1
        subs.append(_sub("accumulation_nonempty", ok3))
    else:
        subs.append(_sub("accumulation_nonempty", True,
                         note="x is not an accumulation point; vacuous"))

    # (4) interior points see the whole space
    xi = _interior_point(A)
    if xi is not None:
        c4 = upper_tangent_cone(A, xi, p)
        if c4.is_full_space():
            ok4, wit4 = True, None
        else:
            probe = _uniform_directions(n, 64, p.seed + 5)
            tol4 = max(p.angular_tol, c4.angular_res) * 1.5
            bad = [u for u in probe if not cone_member(c4, Point(xi + u), tol4)]
            ok4, wit4 = (len(bad) == 0), ({"direction": bad[0].tolist()} if bad else None)
        subs.append(_sub("interior_full_space", ok4, witness=wit4))
    else:
        subs.append(_sub("interior_full_space", True,
                         note="no interior point available; vacuous"))

    # (5) rays through cone points stay in the cone
    ok5, wit5 = True, None
    for g in cone_x.all_gens()[:8]:
        for t in (0.25, 4.0, 64.0):
            if not cone_member(cone_x, cone_x.apex + t * g, match_tol):
                ok5, wit5 = False, {"direction": list(g.comps), "t": t}
                break
    subs.append(_sub("ray_closedness", ok5, witness=wit5))

    # (6) monotone in the set argument
    Bsup = B if (B is not None) else Ball(xv, 4.0 * diam)
    cB = upper_tangent_cone(Bsup, xv, p)
    tol6 = max(match_tol, cB.angular_res * 1.5)
    bad6 = [g for g in cone_x.all_gens()
            if not cone_member(cB, cone_x.apex + g, tol6)]
    subs.append(_sub("monotone_inclusion", len(bad6) == 0,
                     witness={"direction": list(bad6[0].comps)} if bad6 else None))

    # (7) additivity over unions
    if isinstance(A, HPolyhedron):
        B2 = HPolyhedron(-A.A, A.b - 2.0 * (A.A @ xv))  # reflection through x
    else:
        B2 = Ball(xv + np.eye(n)[0] * diam, diam)
    AU = UnionSet([A, B2])
    cu = upper_tangent_cone(AU, xv, p, force_sampled=True)
    ca = cone_x
    cb = upper_tangent_cone(B2, xv, p)
    tol7 = max(match_tol, cu.angular_res, cb.angular_res) * 1.5
    ok7, wit7 = True, None
    for g in cu.all_gens():
        if not (cone_member(ca, cu.apex + g, tol7) or cone_member(cb, cu.apex + g, tol7)):
            ok7, wit7 = False, {"direction": list(g.comps), "side": "union not covered"}
            break
    if ok7:
        GU = cu.gen_matrix()
        for g in list(ca.all_gens()) + list(cb.all_gens()):
            if GU.shape[0] == 0:
                ok7, wit7 = False, {"side": "union cone has no directions"}
                break
            ang = float(np.arccos(np.clip(GU @ g.comps, -1.0, 1.0)).min())
            if ang > tol7:
                ok7, wit7 = False, {"direction": list(g.comps), "side": "member cone missing"}
                break
    subs.append(_sub("union_additivity", ok7, witness=wit7))

    # (8) idempotence: the cone of the cone is the cone
    realized = cone_to_setrep(cone_x, radii=np.concatenate(
        [1.0 / p.schedule, [0.5, 1.0, 2.0]]))
    c8 = upper_tangent_cone(realized, xv, p)
    tol8 = max(match_tol, c8.angular_res * 1.5)
    if cone_x.exact and c8.exact:
        ok8, detail8 = generators_match(cone_x, c8, 1e-6)
    elif cone_x.exact:
        ok8, detail8 = exact_sampled_agreement(cone_x, c8, tol8)
    else:
        ok8, detail8 = generators_match(cone_x, c8, tol8)
    subs.append(_sub("idempotence", bool(ok8),
                     witness=None if ok8 else {"detail": detail8}))

    names = ["outside_closure_empty", "isolated_apex_only", "accumulation_nonempty",
             "interior_full_space", "ray_closedness", "monotone_inclusion",
             "union_additivity", "idempotence"]
    any_inc = any(s.verdict == INCONCLUSIVE for s in subs) or cone_x.inconclusive
    all_pass = all(s.verdict == PASS for s in subs)
    verdict = PASS if all_pass else (INCONCLUSIVE if any_inc and not any(
        s.verdict == FAIL for s in subs) else FAIL)
    rep = Report("cone_property_suite", verdict,
                 tolerances={"angular_tol": p.angular_tol,
                             "distance_tol": p.distance_tol},
                 details={"checks": {nm: s for nm, s in zip(names, subs)}})
    return rep
