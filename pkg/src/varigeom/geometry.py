"""Euclidean primitives: points, vectors, inner products, hull membership.

Points and vectors are deliberately distinct types.  The only mixed
arithmetic is Point - Point -> Vector and Point + Vector -> Point; anything
else raises.  This catches a whole class of unit errors in the limit and
cone computations downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "Point",
    "Vector",
    "dot",
    "norm",
    "angle_between",
    "in_convex_hull",
    "HullCertificate",
    "min_norm_point",
    "nonneg_lstsq",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != 1:
        raise ValueError("coordinates must be a flat sequence")
    if not np.all(np.isfinite(a)):
        raise ValueError("coordinates must be finite")
    a.setflags(write=False)
    return a


class Point:
    """A point of n-dimensional Euclidean affine space."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        self.coords = _freeze(coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __sub__(self, other):
        if isinstance(other, Point):
            _check_dims(self.dim, other.dim)
            return Vector(self.coords - other.coords)
        if isinstance(other, Vector):
            _check_dims(self.dim, other.dim)
            return Point(self.coords - other.comps)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Vector):
            _check_dims(self.dim, other.dim)
            return Point(self.coords + other.comps)
        return NotImplemented  # Point + Point is meaningless here

    def __eq__(self, other):
        return isinstance(other, Point) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(("Point", self.coords.tobytes()))

    def __repr__(self):
        return f"Point({list(self.coords)})"


class Vector:
    """An element of the vector space attached to the affine space."""

    __slots__ = ("comps",)

    def __init__(self, comps):
        self.comps = _freeze(comps)

    @property
    def dim(self) -> int:
        return self.comps.shape[0]

    def __add__(self, other):
        if isinstance(other, Vector):
            _check_dims(self.dim, other.dim)
            return Vector(self.comps + other.comps)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Vector):
            _check_dims(self.dim, other.dim)
            return Vector(self.comps - other.comps)
        return NotImplemented

    def __neg__(self):
        return Vector(-self.comps)

    def __mul__(self, t):
        if isinstance(t, (int, float)):
            return Vector(self.comps * float(t))
        return NotImplemented

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.comps))

    def unit(self) -> "Vector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Vector(self.comps / n)

    def __eq__(self, other):
        return isinstance(other, Vector) and np.array_equal(self.comps, other.comps)

    def __hash__(self):
        return hash(("Vector", self.comps.tobytes()))

    def __repr__(self):
        return f"Vector({list(self.comps)})"


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} vs {b}")


def dot(u: Vector, v: Vector) -> float:
    """Euclidean inner product of two vectors."""
    _check_dims(u.dim, v.dim)
    return float(np.dot(u.comps, v.comps))


def norm(v: Vector) -> float:
    return v.norm()


def angle_between(u, v) -> float:
    """Angle in radians between two nonzero vectors (or raw arrays)."""
    a = u.comps if isinstance(u, Vector) else np.asarray(u, float)
    b = v.comps if isinstance(v, Vector) else np.asarray(v, float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("angle undefined for the zero vector")
    c = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.arccos(c))


# ---------------------------------------------------------------------------
# Convex hull membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullCertificate:
    """Optimal simplex weights for the nearest convex combination."""

    member: bool
    weights: np.ndarray      # lambda >= 0, sum = 1
    residual: float          # || sum_i lambda_i g_i - p ||
    nearest: np.ndarray      # the projection sum_i lambda_i g_i


def min_norm_point(V: np.ndarray, max_iter: int = 10_000, tol: float = 1e-13):
    """Nearest point of conv{rows of V} to the origin (active-set method).

    Returns (x, weights).  Maintains an affinely independent working set;
    each major cycle adds the vertex most aligned with the descent
    direction, each minor cycle restores nonnegativity of the affine
    weights.  Terminates in finitely many steps up to roundoff.
    """
    V = np.asarray(V, dtype=float)
    m = V.shape[0]
    if m == 0:
        raise ValueError("empty generator list")
    norms2 = np.einsum("ij,ij->i", V, V)
    j0 = int(np.argmin(norms2))
    S = [j0]
    lam_S = np.array([1.0])
    x = V[j0].copy()
    scale = 1.0 + float(np.sqrt(norms2.max()))

    for _ in range(max_iter):
        # optimality: no vertex improves on the current support
        g = V @ x
        jstar = int(np.argmin(g))
        if g[jstar] >= float(np.dot(x, x)) - tol * scale:
            break
        if jstar in S:
            break  # numerically stalled
        S.append(jstar)
        lam_S = np.append(lam_S, 0.0)

        # minor cycles: affine minimization over S, clipping to the simplex
        for _ in range(m + 2):
            VS = V[S]
            k = len(S)
            K = np.empty((k + 1, k + 1))
            K[:k, :k] = VS @ VS.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            K[k, k] = 0.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            alpha = sol[:k]
            if np.all(alpha >= -1e-14):
                lam_S = np.clip(alpha, 0.0, None)
                lam_S /= lam_S.sum()
                x = VS.T @ lam_S
                break
            # step toward alpha while staying nonnegative, drop zeros
            neg = alpha < lam_S
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, lam_S / (lam_S - alpha), np.inf)
            theta = float(min(1.0, ratios.min()))
            lam_S = (1.0 - theta) * lam_S + theta * alpha
            lam_S[lam_S < 1e-15] = 0.0
            keep = lam_S > 0.0
            if not np.any(keep):
                keep[int(np.argmax(alpha))] = True
                lam_S[keep] = 1.0
            S = [s for s, k_ in zip(S, keep) if k_]
            lam_S = lam_S[keep]
            lam_S /= lam_S.sum()
            x = V[S].T @ lam_S

    weights = np.zeros(m)
    for s, l in zip(S, lam_S):
        weights[s] += l
    return x, weights


def in_convex_hull(p, gens, tol: float) -> HullCertificate:
    """Decide whether p lies within tol of the convex hull of gens.

    The nearest convex combination is found exactly (up to roundoff) by
    the min-norm-point routine applied to the shifted generators.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(p, Vector):
        p = p.comps
    p = np.asarray(p, dtype=float)
    G = np.array([g.comps if isinstance(g, Vector) else g for g in gens], dtype=float)
    if G.size == 0:
        raise ValueError("empty generator list")
    if G.shape[1] != p.shape[0]:
        raise DimensionMismatch(f"dimension mismatch: {G.shape[1]} vs {p.shape[0]}")
    x, weights = min_norm_point(G - p[None, :])
    residual = float(np.linalg.norm(x))
    nearest = p + x
    return HullCertificate(member=residual <= tol, weights=weights,
                           residual=residual, nearest=nearest)


def hull_distance_bruteforce(p, gens) -> float:
    """Exhaustive facet-check oracle for hull distance, dim <= 3.

    Enumerates supports of size <= dim+1 and solves the affine
    least-squares problem on each; any point of the hull is a combination
    of at most dim+1 generators, so the minimum over nonnegative
    solutions is the exact distance.  Intended as a test oracle.
    """
    if isinstance(p, Vector):
        p = p.comps
    p = np.asarray(p, dtype=float)
    G = np.array([g.comps if isinstance(g, Vector) else g for g in gens], dtype=float)
    m, n = G.shape
    if n > 3:
        raise ValueError("oracle supports dim <= 3 only")
    best = np.inf
    for k in range(1, min(m, n + 1) + 1):
        for idx in itertools.combinations(range(m), k):
            VS = G[list(idx)]
            K = np.empty((k + 1, k + 1))
            K[:k, :k] = VS @ VS.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            K[k, k] = 0.0
            rhs = np.append(VS @ p, 1.0)
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            alpha = sol[:k]
            if np.any(alpha < -1e-10):
                continue
            cand = VS.T @ np.clip(alpha, 0.0, None)
            d = float(np.linalg.norm(cand - p))
            best = min(best, d)
    return best


def nonneg_lstsq(A: np.ndarray, b: np.ndarray, max_iter: int = 1000):
    """Minimize ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).

    Small dense problems only; used to certify conic-hull membership.
    Returns (x, residual_norm).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    x = np.zeros(n)
    passive: list[int] = []
    w = A.T @ (b - A @ x)
    tol = 1e-12 * (1.0 + float(np.abs(A).max(initial=0.0))) * (1.0 + float(np.linalg.norm(b)))
    for _ in range(max_iter):
        candidates = [j for j in range(n) if j not in passive]
        if not candidates:
            break
        j = max(candidates, key=lambda c: w[c])
        if w[j] <= tol:
            break
        passive.append(j)
        while True:
            AP = A[:, passive]
            z, *_ = np.linalg.lstsq(AP, b, rcond=None)
            if np.all(z > 0):
                x = np.zeros(n)
                x[passive] = z
                break
            xi = x[passive]
            mask = z <= 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask, xi / (xi - z), np.inf)
            alpha = float(ratios.min())
            x[passive] = xi + alpha * (z - xi)
            passive = [pj for pj in passive if x[pj] > 1e-14]
        w = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(A @ x - b))
