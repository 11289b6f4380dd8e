"""Subsets of Euclidean space with distance oracles and samplers.

Every representation answers three questions:

- ``distance_info(y)``: distance from y to the set, plus an accuracy bound
  (0.0 for the exact variants: clouds, balls, polyhedra and their unions);
- ``sample(count, seed)``: deterministic pseudo-random member points;
- ``homothety(x, lam)``: the rescaled set x + lam*(A - x), represented
  natively in the same variant.

The distance oracle is the single source of truth for membership: a point
belongs to the closure iff its distance is zero (up to the oracle bound).
Approximate variants (parametric patches, sublevel sets) report a
refinement-based bound so downstream tolerances can compose.

Sublevel sets are truncated to their declared search box; the box is part
of the representation, which keeps them bounded and samplable.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import exprs
from .errors import DimensionMismatch, EmptySetError, SamplingError
from .geometry import Point

__all__ = [
    "SetRep", "EmptySet", "PointCloud", "HPolyhedron", "Ball",
    "ParamPatch", "Sublevel", "UnionSet",
    "distance_to_set", "sample", "homothety",
    "set_from_dict", "set_to_dict",
]

_FEAS_TOL = 1e-9


def _as_array(x, dim=None):
    a = x.coords if isinstance(x, Point) else np.asarray(x, dtype=float)
    a = np.atleast_1d(a.astype(float))
    if dim is not None and a.shape[-1] != dim:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[-1]} vs {dim}")
    return a


class SetRep:
    """Base class; concrete variants implement the oracle triple."""

    dim: int

    # -- distance oracle --------------------------------------------------
    def distance_info(self, y) -> tuple[float, float]:
        d, b = self.distance_batch(_as_array(y, self.dim)[None, :])
        return float(d[0]), float(b[0])

    def distance_batch(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def nearest_batch(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest member point per query (approximate variants: best found)."""
        raise NotImplementedError

    # -- generation --------------------------------------------------------
    def sample_array(self, count: int, seed: int) -> np.ndarray:
        raise NotImplementedError

    def homothety(self, x, lam: float) -> "SetRep":
        raise NotImplementedError

    def is_bounded(self) -> bool:
        raise NotImplementedError

    def is_exact(self) -> bool:
        """True when the distance oracle carries no discretization error."""
        return True

    def is_empty(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError("homothety factor must be positive")
    return lam


# ---------------------------------------------------------------------------
# Empty set
# ---------------------------------------------------------------------------

class EmptySet(SetRep):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        n = Y.shape[0]
        return np.full(n, np.inf), np.zeros(n)

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        return np.full_like(Y, np.nan), np.zeros(Y.shape[0])

    def sample_array(self, count, seed):
        raise EmptySetError("cannot sample the empty set")

    def homothety(self, x, lam):
        _check_lambda(lam)
        return self

    def is_bounded(self):
        return True

    def is_empty(self):
        return True

    def to_dict(self):
        return {"type": "empty", "dim": self.dim}

    def __repr__(self):
        return f"EmptySet(dim={self.dim})"


# ---------------------------------------------------------------------------
# Point cloud
# ---------------------------------------------------------------------------

class PointCloud(SetRep):
    def __init__(self, points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.size == 0:
            raise EmptySetError("point cloud must be non-empty; use EmptySet")
        if not np.all(np.isfinite(P)):
            raise ValueError("cloud points must be finite")
        self.points = P
        self.dim = P.shape[1]

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        D = _pairwise_dist(Y, self.points)
        return D.min(axis=1), np.zeros(Y.shape[0])

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        D = _pairwise_dist(Y, self.points)
        idx = D.argmin(axis=1)
        return self.points[idx], np.zeros(Y.shape[0])

    def sample_array(self, count, seed):
        m = self.points.shape[0]
        if count == m:
            return self.points.copy()
        rng = np.random.default_rng(seed)
        if count < m:
            idx = rng.choice(m, size=count, replace=False)
        else:
            idx = np.concatenate([np.arange(m), rng.choice(m, size=count - m)])
        return self.points[idx]

    def homothety(self, x, lam):
        lam = _check_lambda(lam)
        xv = _as_array(x, self.dim)
        return PointCloud(xv + lam * (self.points - xv))

    def is_bounded(self):
        return True

    def to_dict(self):
        return {"type": "cloud", "points": self.points.tolist()}

    def __repr__(self):
        return f"PointCloud({self.points.shape[0]} points, dim={self.dim})"


def _pairwise_dist(Y, P):
    # (N, m) Euclidean distances without forming huge intermediates
    d2 = np.maximum(
        np.einsum("ij,ij->i", Y, Y)[:, None]
        - 2.0 * Y @ P.T
        + np.einsum("ij,ij->i", P, P)[None, :],
        0.0,
    )
    return np.sqrt(d2)


# ---------------------------------------------------------------------------
# H-polyhedron  {x : A x <= b}
# ---------------------------------------------------------------------------

class HPolyhedron(SetRep):
    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("row count mismatch between normals and offsets")
        row_norms = np.linalg.norm(A, axis=1)
        if np.any(row_norms == 0.0):
            raise ValueError("polyhedron rows must have nonzero normal vectors")
        self.A = A
        self.b = b
        self.dim = A.shape[1]
        self._faces = None
        self._verts = None

    # subsets of linearly independent rows, sizes 1..dim, with the
    # projector onto their intersection hyperplane precomputed
    def _face_projectors(self):
        if self._faces is None:
            faces = []
            m, n = self.A.shape
            for k in range(1, n + 1):
                for idx in itertools.combinations(range(m), k):
                    AS = self.A[list(idx)]
                    if np.linalg.matrix_rank(AS, tol=1e-12) < k:
                        continue
                    try:
                        P = AS.T @ np.linalg.inv(AS @ AS.T)
                    except np.linalg.LinAlgError:
                        continue
                    faces.append((np.array(idx), AS, self.b[list(idx)], P))
            self._faces = faces
        return self._faces

    def contains_batch(self, Y, tol=None):
        tol = _FEAS_TOL * (1.0 + np.abs(self.b)) if tol is None else tol
        return np.all(Y @ self.A.T <= self.b + tol, axis=1)

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        if self.dim <= 3:
            return self._nearest_exact(Y), np.zeros(Y.shape[0])
        return self._nearest_dykstra(Y)

    def _nearest_exact(self, Y):
        n = Y.shape[0]
        best = np.full(n, np.inf)
        bestQ = np.full_like(Y, np.nan)
        inside = self.contains_batch(Y)
        best[inside] = 0.0
        bestQ[inside] = Y[inside]
        for _, AS, bS, P in self._face_projectors():
            Q = Y - (Y @ AS.T - bS) @ P.T
            feas = self.contains_batch(Q)
            d = np.linalg.norm(Q - Y, axis=1)
            take = feas & (d < best)
            best[take] = d[take]
            bestQ[take] = Q[take]
        return bestQ

    def _nearest_dykstra(self, Y, iters=400):
        # cyclic projections with Dykstra corrections; bound from the
        # final feasibility violation
        X = Y.copy()
        m = self.A.shape[0]
        corr = np.zeros((m,) + Y.shape)
        for _ in range(iters):
            for i in range(m):
                Z = X + corr[i]
                viol = Z @ self.A[i] - self.b[i]
                scale = np.dot(self.A[i], self.A[i])
                step = np.clip(viol, 0.0, None)[:, None] * (self.A[i] / scale)
                Xn = Z - step
                corr[i] = Z - Xn
                X = Xn
        viol = np.clip(X @ self.A.T - self.b, 0.0, None).max(axis=1)
        return X, viol

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        Q, bound = self.nearest_batch(Y)
        d = np.where(np.isnan(Q).any(axis=1), np.inf,
                     np.linalg.norm(np.nan_to_num(Q - Y), axis=1))
        return d, bound

    def vertices(self) -> np.ndarray:
        """Vertex enumeration by active-row subsets (dim <= 3)."""
        if self._verts is not None:
            return self._verts
        m, n = self.A.shape
        out = []
        for idx in itertools.combinations(range(m), n):
            AS = self.A[list(idx)]
            if abs(np.linalg.det(AS)) < 1e-12:
                continue
            v = np.linalg.solve(AS, self.b[list(idx)])
            if self.contains_batch(v[None, :])[0]:
                out.append(v)
        if out:
            V = np.array(out)
            keep = []
            for i, v in enumerate(V):
                if all(np.linalg.norm(v - V[j]) > 1e-9 for j in keep):
                    keep.append(i)
            self._verts = V[keep]
        else:
            self._verts = np.zeros((0, n))
        return self._verts

    def recession_rays(self):
        from .geometry import Point  # noqa: F401  (no cycle; doc anchor)
        return _cone_generators(self.A)

    def is_bounded(self):
        rays, lines = self.recession_rays()
        return len(rays) == 0 and len(lines) == 0

    def _anchor(self) -> np.ndarray:
        # some feasible point: project the origin, then the vertex mean
        V = self.vertices() if self.dim <= 3 else np.zeros((0, self.dim))
        if V.shape[0] > 0:
            c = V.mean(axis=0)
            if self.contains_batch(c[None, :])[0]:
                return c
            return V[0]
        Q, _ = self.nearest_batch(np.zeros((1, self.dim)))
        if np.isnan(Q).any():
            raise EmptySetError("polyhedron is empty")
        return Q[0]

    def sample_array(self, count, seed):
        rng = np.random.default_rng(seed)
        pieces = []
        V = self.vertices() if self.dim <= 3 else np.zeros((0, self.dim))
        if V.shape[0] > 0:
            pieces.append(V)
        need = count - sum(len(p) for p in pieces)
        if need > 0 and V.shape[0] >= 2:
            # convex combinations favouring low-dimensional faces
            W = -np.log(rng.random((need, V.shape[0])))
            mask = rng.random((need, V.shape[0])) < 0.6
            W = W * mask + 1e-12
            W /= W.sum(axis=1, keepdims=True)
            pts = W @ V
            if not self.is_bounded():
                rays, lines = self.recession_rays()
                dirs = list(rays) + [d for l in lines for d in (l, -l)]
                if dirs:
                    D = np.array(dirs)
                    t = rng.exponential(1.0, size=need)
                    pts = pts + t[:, None] * D[rng.integers(0, len(D), size=need)]
            pieces.append(pts)
        elif need > 0:
            anchor = self._anchor()
            probes = anchor + rng.standard_normal((need, self.dim)) * (
                1.0 + np.linalg.norm(anchor))
            Q, _ = self.nearest_batch(probes)
            pieces.append(Q)
        out = np.vstack(pieces)
        return out[:count] if out.shape[0] >= count else np.vstack(
            [out, out[np.zeros(count - out.shape[0], dtype=int)]])

    def homothety(self, x, lam):
        lam = _check_lambda(lam)
        xv = _as_array(x, self.dim)
        b2 = lam * self.b + (1.0 - lam) * (self.A @ xv)
        return HPolyhedron(self.A.copy(), b2)

    def to_dict(self):
        rows = [list(a) + [float(bi)] for a, bi in zip(self.A, self.b)]
        return {"type": "polyhedron", "rows": rows}

    def __repr__(self):
        return f"HPolyhedron({self.A.shape[0]} rows, dim={self.dim})"


def _cone_generators(N: np.ndarray, tol: float = 1e-12):
    """Generators of {v : N v <= 0} in dim <= 3.

    Returns (rays, lines): unit extreme-ray directions of the pointed part
    and a unit basis of the lineality space.  For N with no rows the cone
    is the whole space (empty rays, full basis as lines).
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    n = N.shape[1]
    if N.shape[0] == 0 or N.size == 0:
        return [], [np.eye(n)[i] for i in range(n)]
    if n > 3:
        raise ValueError("ray enumeration supports dim <= 3 only")
    # lineality: null space of N
    _, s, Vt = np.linalg.svd(N)
    rank = int((s > tol * max(1.0, s[0])).sum()) if s.size else 0
    lines = [Vt[i] for i in range(rank, n)]
    L = np.array(lines) if lines else np.zeros((0, n))
    # pointed part lives in the row space; enumerate boundary intersections
    cands = []
    m = N.shape[0]
    if n == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
    elif n == 2:
        for i in range(m):
            a = N[i]
            p = np.array([-a[1], a[0]])
            cands.extend([p, -p, -a])
    else:
        for i, j in itertools.combinations(range(m), 2):
            c = np.cross(N[i], N[j])
            if np.linalg.norm(c) > tol:
                cands.extend([c, -c])
        for i in range(m):
            a = N[i]
            cands.append(-a)
            # boundary directions inside each facet plane; needed when the
            # effective rank is below full and pair crosses degenerate
            for l in lines:
                c = np.cross(a, l)
                if np.linalg.norm(c) > tol:
                    cands.extend([c, -c])
            for e in np.eye(3):
                p = e - np.dot(e, a) / np.dot(a, a) * a
                if np.linalg.norm(p) > tol:
                    cands.extend([p, -p])
    rays = []
    feas_tol = 1e-10
    for c in cands:
        nc = np.linalg.norm(c)
        if nc < tol:
            continue
        u = c / nc
        if np.any(N @ u > feas_tol):
            continue
        # remove lineality component; keep the pointed-part direction
        if L.shape[0] > 0:
            u = u - L.T @ (L @ u)
            nu = np.linalg.norm(u)
            if nu < 1e-9:
                continue
            u = u / nu
            if np.any(N @ u > feas_tol):
                continue
        if all(np.linalg.norm(u - r) > 1e-9 for r in rays):
            rays.append(u)
    # prune non-extreme rays: r is extreme iff it is not a positive
    # combination of the others (within the pointed part)
    if len(rays) > 2:
        from .geometry import nonneg_lstsq
        pruned = []
        for i, r in enumerate(rays):
            others = [q for j, q in enumerate(rays) if j != i]
            _, res = nonneg_lstsq(np.array(others).T, r)
            if res > 1e-8:
                pruned.append(r)
        if pruned:
            rays = pruned
    return rays, lines


# ---------------------------------------------------------------------------
# Ball
# ---------------------------------------------------------------------------

class Ball(SetRep):
    def __init__(self, center, radius: float, closed: bool = True):
        self.center = _as_array(center)
        self.radius = float(radius)
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")
        self.closed = bool(closed)
        self.dim = self.center.shape[0]

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        d = np.maximum(np.linalg.norm(Y - self.center, axis=1) - self.radius, 0.0)
        return d, np.zeros(Y.shape[0])

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        diff = Y - self.center
        r = np.linalg.norm(diff, axis=1)
        out = Y.copy()
        outside = r > self.radius
        if np.any(outside):
            out[outside] = self.center + diff[outside] * (
                self.radius / r[outside])[:, None]
        return out, np.zeros(Y.shape[0])

    def sample_array(self, count, seed):
        rng = np.random.default_rng(seed)
        U = rng.standard_normal((count, self.dim))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        rr = self.radius * rng.random(count) ** (1.0 / self.dim)
        if not self.closed:
            rr = np.minimum(rr, self.radius * (1.0 - 1e-9))
        return self.center + U * rr[:, None]

    def homothety(self, x, lam):
        lam = _check_lambda(lam)
        xv = _as_array(x, self.dim)
        return Ball(xv + lam * (self.center - xv), lam * self.radius, self.closed)

    def is_bounded(self):
        return True

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(),
                "radius": self.radius, "closed": self.closed}

    def __repr__(self):
        kind = "closed" if self.closed else "open"
        return f"Ball({kind}, center={list(self.center)}, r={self.radius})"


# ---------------------------------------------------------------------------
# Parametric patch  {f(t) : t in box}
# ---------------------------------------------------------------------------

class ParamPatch(SetRep):
    def __init__(self, maps, domain, grid: int = 256):
        self.maps = tuple(maps)
        self.domain = np.atleast_2d(np.asarray(domain, dtype=float))
        if np.any(self.domain[:, 1] <= self.domain[:, 0]):
            raise ValueError("patch domain box is degenerate")
        self.k = self.domain.shape[0]
        if self.k > 2:
            raise ValueError("patches support at most 2 parameters")
        self.grid = int(grid)
        self.dim = len(self.maps)
        self._cache = None

    def map_points(self, T: np.ndarray) -> np.ndarray:
        T = np.atleast_2d(T)
        cols = [exprs.eval_batch(m, T) for m in self.maps]
        return np.stack(cols, axis=1)

    def _base(self):
        if self._cache is None:
            if self.k == 1:
                T = np.linspace(self.domain[0, 0], self.domain[0, 1],
                                self.grid)[:, None]
            else:
                g = max(8, int(math.isqrt(self.grid)))
                u = np.linspace(self.domain[0, 0], self.domain[0, 1], g)
                v = np.linspace(self.domain[1, 0], self.domain[1, 1], g)
                U, V = np.meshgrid(u, v, indexing="ij")
                T = np.stack([U.ravel(), V.ravel()], axis=1)
            self._cache = (T, self.map_points(T))
        return self._cache

    def distance_batch(self, Y):
        Q, bound, _ = self._refine(np.atleast_2d(Y))
        return np.linalg.norm(Q - np.atleast_2d(Y), axis=1), bound

    def nearest_batch(self, Y):
        Q, bound, _ = self._refine(np.atleast_2d(Y))
        return Q, bound

    def _refine(self, Y, levels: int = 12, local: int = 9):
        T, F = self._base()
        n = Y.shape[0]
        best_t = np.empty((n, self.k))
        chunk = 2048
        for s in range(0, n, chunk):
            D = _pairwise_dist(Y[s:s + chunk], F)
            best_t[s:s + chunk] = T[D.argmin(axis=1)]
        widths = (self.domain[:, 1] - self.domain[:, 0]) / max(
            2, (self.grid if self.k == 1 else max(8, int(math.isqrt(self.grid)))))
        w = np.array(widths, dtype=float)
        for _ in range(levels):
            offs = np.linspace(-1.0, 1.0, local)
            if self.k == 1:
                cand = best_t[:, None, :] + (offs * w[0])[None, :, None]
            else:
                OU, OV = np.meshgrid(offs * w[0], offs * w[1], indexing="ij")
                O = np.stack([OU.ravel(), OV.ravel()], axis=1)
                cand = best_t[:, None, :] + O[None, :, :]
            cand = np.clip(cand, self.domain[:, 0], self.domain[:, 1])
            flat = cand.reshape(-1, self.k)
            img = self.map_points(flat).reshape(n, -1, self.dim)
            d = np.linalg.norm(img - Y[:, None, :], axis=2)
            pick = d.argmin(axis=1)
            best_t = cand[np.arange(n), pick]
            w = w * 0.45
        Q = self.map_points(best_t)
        # accuracy bound: local image spread at the final cell width
        probe_hi = np.clip(best_t + w, self.domain[:, 0], self.domain[:, 1])
        probe_lo = np.clip(best_t - w, self.domain[:, 0], self.domain[:, 1])
        bound = np.maximum(
            np.linalg.norm(self.map_points(probe_hi) - Q, axis=1),
            np.linalg.norm(self.map_points(probe_lo) - Q, axis=1)) + 1e-12
        return Q, bound, best_t

    def nearest_params(self, Y):
        _, _, t = self._refine(np.atleast_2d(Y))
        return t

    def sample_array(self, count, seed):
        rng = np.random.default_rng(seed)
        T, F = self._base()
        if count <= F.shape[0]:
            idx = np.linspace(0, F.shape[0] - 1, count).round().astype(int)
            return F[idx]
        extra = self.domain[:, 0] + rng.random((count - F.shape[0], self.k)) * (
            self.domain[:, 1] - self.domain[:, 0])
        return np.vstack([F, self.map_points(extra)])

    def homothety(self, x, lam):
        lam = _check_lambda(lam)
        xv = _as_array(x, self.dim)
        new_maps = []
        for xi, m in zip(xv, self.maps):
            # x_i + lam*(m - x_i), folded into the expression tree
            shifted = exprs.BinOp(
                "+", exprs.Num(float(xi)),
                exprs.BinOp("*", exprs.Num(lam),
                            exprs.BinOp("-", m, exprs.Num(float(xi)))))
            new_maps.append(shifted)
        return ParamPatch(new_maps, self.domain.copy(), self.grid)

    def is_bounded(self):
        return True

    def is_exact(self):
        return False

    def to_dict(self):
        return {"type": "patch", "map": [exprs.to_text(m) for m in self.maps],
                "domain": self.domain.tolist(), "grid": self.grid}

    def __repr__(self):
        return f"ParamPatch(k={self.k}, dim={self.dim}, grid={self.grid})"


# ---------------------------------------------------------------------------
# Sublevel set  {x in box : f(x) <= level}
# ---------------------------------------------------------------------------

class Sublevel(SetRep):
    def __init__(self, field: exprs.Expr, level: float, box, grid: int = 48):
        self.field = field
        self.level = float(level)
        self.box = np.atleast_2d(np.asarray(box, dtype=float))
        if np.any(self.box[:, 1] <= self.box[:, 0]):
            raise ValueError("sublevel search box is degenerate")
        self.dim = self.box.shape[0]
        self.grid = int(grid)
        self._members_cache = None

    def _axes(self):
        g = max(6, int(round(self.grid ** (1.0 / self.dim))))
        return [np.linspace(lo, hi, g) for lo, hi in self.box], g

    def _members(self):
        if self._members_cache is None:
            axes, g = self._axes()
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            vals = exprs.eval_batch(self.field, pts)
            inside = pts[np.nan_to_num(vals, nan=np.inf) <= self.level]
            surface = self._bisect_surface(pts, vals, axes)
            members = np.vstack([inside, surface]) if surface.size else inside
            cell = np.array([a[1] - a[0] for a in axes])
            self._members_cache = (members, float(np.linalg.norm(cell)))
        return self._members_cache

    def _bisect_surface(self, pts, vals, axes):
        # refine sign changes along each axis down to the boundary
        g = len(axes[0])
        shape = tuple(len(a) for a in axes)
        V = vals.reshape(shape)
        P = pts.reshape(shape + (self.dim,))
        lo_list, hi_list = [], []
        for ax in range(self.dim):
            sl_a = [slice(None)] * self.dim
            sl_b = [slice(None)] * self.dim
            sl_a[ax] = slice(0, -1)
            sl_b[ax] = slice(1, None)
            A = V[tuple(sl_a)]
            B = V[tuple(sl_b)]
            cross = ((A <= self.level) & (B > self.level)) | (
                (A > self.level) & (B <= self.level))
            if not np.any(cross):
                continue
            Pa = P[tuple(sl_a)][cross]
            Pb = P[tuple(sl_b)][cross]
            Va = A[cross]
            inside_a = Va <= self.level
            lo_list.append(np.where(inside_a[:, None], Pa, Pb))
            hi_list.append(np.where(inside_a[:, None], Pb, Pa))
        if not lo_list:
            return np.zeros((0, self.dim))
        lo = np.vstack(lo_list)
        hi = np.vstack(hi_list)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            v = exprs.eval_batch(self.field, mid)
            ok = np.nan_to_num(v, nan=np.inf) <= self.level
            lo = np.where(ok[:, None], mid, lo)
            hi = np.where(ok[:, None], hi, mid)
        return lo

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        vals = exprs.eval_batch(self.field, Y)
        in_box = np.all((Y >= self.box[:, 0]) & (Y <= self.box[:, 1]), axis=1)
        member = in_box & (np.nan_to_num(vals, nan=np.inf) <= self.level)
        members, cell = self._members()
        if members.shape[0] == 0:
            d = np.full(Y.shape[0], np.inf)
            d[member] = 0.0
            return d, np.zeros(Y.shape[0])
        D = _pairwise_dist(Y, members).min(axis=1)
        D[member] = 0.0
        bound = np.where(member, 0.0, cell)
        return D, bound

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        members, cell = self._members()
        if members.shape[0] == 0:
            return np.full_like(Y, np.nan), np.zeros(Y.shape[0])
        vals = exprs.eval_batch(self.field, Y)
        in_box = np.all((Y >= self.box[:, 0]) & (Y <= self.box[:, 1]), axis=1)
        member = in_box & (np.nan_to_num(vals, nan=np.inf) <= self.level)
        idx = _pairwise_dist(Y, members).argmin(axis=1)
        out = members[idx]
        out[member] = Y[member]
        bound = np.where(member, 0.0, cell)
        return out, bound

    def sample_array(self, count, seed, cap: int = 200):
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(cap):
            probes = self.box[:, 0] + rng.random((max(count * 4, 64), self.dim)) * (
                self.box[:, 1] - self.box[:, 0])
            vals = exprs.eval_batch(self.field, probes)
            good = probes[np.nan_to_num(vals, nan=np.inf) <= self.level]
            if good.size:
                out.append(good)
            if sum(len(o) for o in out) >= count:
                break
        else:
            raise SamplingError(
                "rejection sampling exceeded its cap; tighten the box hint")
        if not out:
            raise SamplingError(
                "rejection sampling found no members; tighten the box hint")
        return np.vstack(out)[:count]

    def homothety(self, x, lam):
        lam = _check_lambda(lam)
        xv = _as_array(x, self.dim)
        # g(y) = f(x + (y - x)/lam), box mapped forward
        mapping = {}
        for i in range(self.dim):
            mapping[i] = exprs.BinOp(
                "+", exprs.Num(float(xv[i])),
                exprs.BinOp("/", exprs.BinOp("-", exprs.Var(i),
                                             exprs.Num(float(xv[i]))),
                            exprs.Num(lam)))
        new_field = exprs.substitute(self.field, mapping)
        new_box = np.stack([xv + lam * (self.box[:, 0] - xv),
                            xv + lam * (self.box[:, 1] - xv)], axis=1)
        return Sublevel(new_field, self.level, new_box, self.grid)

    def is_bounded(self):
        return True

    def is_exact(self):
        return False

    def to_dict(self):
        return {"type": "sublevel", "map": exprs.to_text(self.field),
                "level": self.level, "domain": self.box.tolist(),
                "grid": self.grid}

    def __repr__(self):
        return f"Sublevel(level={self.level}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Finite union
# ---------------------------------------------------------------------------

class UnionSet(SetRep):
    def __init__(self, members):
        members = [m for m in members]
        if not members:
            raise EmptySetError("union must have at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise DimensionMismatch(f"union members disagree on dimension: {dims}")
        self.members = members
        self.dim = members[0].dim

    def distance_batch(self, Y):
        Y = np.atleast_2d(Y)
        ds, bs = zip(*(m.distance_batch(Y) for m in self.members))
        D = np.stack(ds)
        B = np.stack(bs)
        idx = D.argmin(axis=0)
        rows = np.arange(Y.shape[0])
        return D[idx, rows], B[idx, rows]

    def nearest_batch(self, Y):
        Y = np.atleast_2d(Y)
        ds = [m.distance_batch(Y)[0] for m in self.members]
        idx = np.stack(ds).argmin(axis=0)
        out = np.empty_like(Y)
        bound = np.empty(Y.shape[0])
        for i, m in enumerate(self.members):
            mask = idx == i
            if np.any(mask):
                q, b = m.nearest_batch(Y[mask])
                out[mask] = q
                bound[mask] = b
        return out, bound

    def sample_array(self, count, seed):
        live = [m for m in self.members if not m.is_empty()]
        if not live:
            raise EmptySetError("cannot sample a union of empty sets")
        per = [count // len(live)] * len(live)
        for i in range(count - sum(per)):
            per[i] += 1
        parts = [m.sample_array(c, seed + 17 * i)
                 for i, (m, c) in enumerate(zip(live, per)) if c > 0]
        return np.vstack(parts)

    def homothety(self, x, lam):
        return UnionSet([m.homothety(x, lam) for m in self.members])

    def is_bounded(self):
        return all(m.is_bounded() for m in self.members)

    def is_exact(self):
        return all(m.is_exact() for m in self.members)

    def is_empty(self):
        return all(m.is_empty() for m in self.members)

    def to_dict(self):
        return {"type": "union", "members": [m.to_dict() for m in self.members]}

    def __repr__(self):
        return f"UnionSet({len(self.members)} members, dim={self.dim})"


# ---------------------------------------------------------------------------
# Public wrappers and serialization
# ---------------------------------------------------------------------------

def distance_to_set(y, A: SetRep) -> float:
    """d(y, A); +inf for the empty set."""
    return A.distance_info(y)[0]


def sample(A: SetRep, count: int, seed: int) -> list[Point]:
    """Deterministic member points; same seed, same output."""
    if count < 1:
        raise ValueError("count must be positive")
    if A.is_empty():
        raise EmptySetError("cannot sample the empty set")
    return [Point(row) for row in A.sample_array(int(count), int(seed))]


def homothety(A: SetRep, x, lam: float) -> SetRep:
    """The blow-up x + lam*(A - x), represented natively."""
    return A.homothety(x, lam)


def set_from_dict(d: dict, dim: int | None = None) -> SetRep:
    """Build a SetRep from its JSON-compatible description."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError("set description must be a dict with a 'type' key")
    t = d["type"]
    known = {
        "empty": {"dim"},
        "cloud": {"points"},
        "polyhedron": {"rows"},
        "ball": {"center", "radius", "closed"},
        "patch": {"map", "domain", "grid"},
        "sublevel": {"map", "level", "domain", "grid"},
        "union": {"members"},
    }
    if t not in known:
        raise ValueError(f"unknown set type {t!r}")
    extra = set(d) - known[t] - {"type"}
    if extra:
        raise ValueError(f"unknown keys for set type {t!r}: {sorted(extra)}")
    if t == "empty":
        return EmptySet(int(d.get("dim", dim or 1)))
    if t == "cloud":
        return PointCloud(d["points"])
    if t == "polyhedron":
        rows = np.atleast_2d(np.asarray(d["rows"], dtype=float))
        return HPolyhedron(rows[:, :-1], rows[:, -1])
    if t == "ball":
        return Ball(d["center"], d["radius"], d.get("closed", True))
    if t == "patch":
        domain = np.atleast_2d(np.asarray(d["domain"], dtype=float))
        k = domain.shape[0]
        maps = [exprs.parse(s, k) for s in d["map"]]
        return ParamPatch(maps, domain, d.get("grid", 256))
    if t == "sublevel":
        domain = np.atleast_2d(np.asarray(d["domain"], dtype=float))
        n = domain.shape[0]
        return Sublevel(exprs.parse(d["map"], n), d["level"], domain,
                        d.get("grid", 48))
    return UnionSet([set_from_dict(m, dim) for m in d["members"]])


def set_to_dict(A: SetRep) -> dict:
    return A.to_dict()
