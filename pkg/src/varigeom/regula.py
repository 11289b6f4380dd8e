"""First-order necessary conditions for constrained extrema.

At a constrained maximizer x of f over A, every direction v of the upper
tangent cone satisfies <Df(x), v> <= 0 (>= 0 at minimizers).  The checker
computes the gradient, validates differentiability, builds the cone, and
evaluates the pairing on the cone's generators: for polyhedral cones this
is sufficient by positive homogeneity and linearity, for sampled cones
the certificate carries the angular resolution of the direction clusters.

A SATISFIED verdict never claims optimality: the condition is necessary,
not sufficient, so non-optimal points may also satisfy it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import ScalarField, check_frechet, estimate_gradient
from .cones import BlowUpParams, Cone, upper_tangent_cone
from .errors import ConvergenceError, EmptySetError
from .geometry import Point, Vector
from .report import FAIL, INCONCLUSIVE, PASS, Report
from .sets import HPolyhedron, SetRep, _as_array

__all__ = [
    "RegulaCertificate", "check_regula", "directional_variation",
    "certify_against_bruteforce",
    "SATISFIED", "VIOLATED",
]

SATISFIED = "SATISFIED"
VIOLATED = "VIOLATED"


@dataclass
class RegulaCertificate:
    mode: str
    point: Point
    gradient: Vector
    cone: Cone
    worst_direction: Vector | None
    worst_value: float
    verdict: str
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.verdict == SATISFIED

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "point": self.point.coords.tolist(),
            "gradient": self.gradient.comps.tolist(),
            "cone_generators": [g.comps.tolist() for g in self.cone.all_gens()],
            "cone_exact": self.cone.exact,
            "cone_angular_res": self.cone.angular_res,
            "worst_direction": (None if self.worst_direction is None
                                else self.worst_direction.comps.tolist()),
            "worst_value": self.worst_value,
            "verdict": self.verdict,
            "tolerances": {"slack_tol": self.tol},
        }


def check_regula(f: ScalarField, A: SetRep, x, mode: str = "max",
                 p: BlowUpParams | None = None,
                 tol: float | None = None) -> RegulaCertificate:
    """Certify the first-order necessary condition at x over A.

    mode="max": SATISFIED iff max over cone directions of <Df, v> <= tol;
    mode="min" flips the inequality.  The default tolerance scales with
    the gradient, 1e-6 * (1 + |Df|), so rescaling f cannot flip verdicts.
    Returns INCONCLUSIVE when the differentiability check fails or the
    cone carries an inconclusive flag.
    """
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    p = p or BlowUpParams()
    xv = _as_array(x, A.dim)
    d0, b0 = A.distance_info(xv)
    if d0 > max(1e-6 * (1.0 + float(np.linalg.norm(xv))), 3.0 * b0):
        raise ValueError(f"x is not in the closure of A (distance {d0:.3g})")
    Df = estimate_gradient(f, xv)
    gnorm = float(np.linalg.norm(Df))
    tol = tol if tol is not None else 1e-6 * (1.0 + gnorm)
    frech = check_frechet(f, Df, xv)
    cone = upper_tangent_cone(A, xv, p)
    if cone.empty:
        raise RuntimeError("internal inconsistency: x adheres to A but the "
                           "tangent cone is empty")
    details = {"frechet": frech.verdict,
               "frechet_final_residual": frech.residual_curve[-1][1],
               "cone_generator_count": len(cone.all_gens())}
    if cone.is_full_space():
        # sup over the whole space is attained along the gradient itself
        if gnorm == 0.0:
            worst_value, worst_dir = 0.0, None
        elif mode == "max":
            worst_value, worst_dir = gnorm, Vector(Df / gnorm)
        else:
            worst_value, worst_dir = -gnorm, Vector(-Df / gnorm)
    else:
        gens = cone.all_gens()
        if not gens:
            worst_value, worst_dir = 0.0, None  # apex-only cone
        else:
            vals = np.array([float(np.dot(Df, g.comps)) for g in gens])
            i = int(np.argmax(vals)) if mode == "max" else int(np.argmin(vals))
            worst_value, worst_dir = float(vals[i]), gens[i]
    if mode == "max":
        ok = worst_value <= tol
    else:
        ok = worst_value >= -tol
    verdict = SATISFIED if ok else VIOLATED
    if frech.verdict != PASS or cone.inconclusive:
        verdict = INCONCLUSIVE
    return RegulaCertificate(mode=mode, point=Point(xv), gradient=Vector(Df),
                             cone=cone, worst_direction=worst_dir,
                             worst_value=worst_value, verdict=verdict,
                             tol=tol, details=details)


def directional_variation(f: ScalarField, xbar, seq, tol: float = 1e-6) -> Report:
    """Sign of <Df(xbar), p> predicts the sign of f(x_n) - f(xbar) along a
    sequence with limit direction p.

    The sequence must approach xbar with a Cauchy unit direction, and the
    gradient must be nonzero (both are preconditions, not verdicts).  The
    comparison value is f at the limit point itself.  INCONCLUSIVE when
    the pairing is within tol of zero, where the statement is silent.
    """
    xv = _as_array(xbar)
    pts = [_as_array(q, xv.shape[0]) for q in seq]
    if len(pts) < 8:
        raise ValueError("sequence too short (need at least 8 points)")
    diffs = [q - xv for q in pts]
    norms = [float(np.linalg.norm(d)) for d in diffs]
    if min(norms) == 0.0:
        raise ValueError("sequence points must differ from xbar")
    units = [d / n for d, n in zip(diffs, norms)]
    k = max(2, math.ceil(len(pts) / 4))
    tail_units = units[-k:]
    # direction Cauchy test at the sequence's own resolution
    dir_budget = max(math.sqrt(tol), 0.05)
    pbar = tail_units[-1]
    worst_ang = max(float(np.arccos(np.clip(np.dot(u, pbar), -1.0, 1.0)))
                    for u in tail_units)
    if worst_ang > dir_budget:
        raise ConvergenceError(
            f"sequence direction is not Cauchy (spread {worst_ang:.3g} rad)")
    if norms[-1] > norms[0]:
        raise ValueError("sequence does not approach xbar")
    Df = estimate_gradient(f, xv)
    gnorm = float(np.linalg.norm(Df))
    if gnorm <= tol:
        raise ValueError("directional variation requires a nonzero gradient")
    s = float(np.dot(Df, pbar))
    tols = {"tol": tol, "direction_budget": dir_budget}
    if abs(s) <= tol * (1.0 + gnorm):
        return Report("directional_variation", INCONCLUSIVE,
                      tolerances=tols,
                      details={"pairing": s, "direction": pbar.tolist()})
    fbar = f.value(xv)
    tail_pts = pts[-k:]
    for q in tail_pts:
        df = f.value(q) - fbar
        if (s > 0 and df <= 0) or (s < 0 and df >= 0):
            return Report("directional_variation", FAIL, slack=float(abs(df)),
                          witness={"point": q.tolist(), "delta_f": float(df),
                                   "pairing": s},
                          tolerances=tols)
    return Report("directional_variation", PASS, slack=float(abs(s)),
                  tolerances=tols,
                  details={"pairing": s, "direction": pbar.tolist(),
                           "tail_checked": k})


# ---------------------------------------------------------------------------
# Brute-force harness
# ---------------------------------------------------------------------------

def _face_samples(A: HPolyhedron, grid: int) -> np.ndarray:
    """Vertices, face grids, and an interior grid of a bounded polyhedron."""
    V = A.vertices()
    if V.shape[0] == 0:
        raise EmptySetError("polyhedron has no vertices; is it bounded?")
    n = A.dim
    parts = [V]
    act_tol = 1e-9 * (1.0 + np.abs(A.b))
    for i in range(A.A.shape[0]):
        on_face = np.abs(V @ A.A[i] - A.b[i]) <= act_tol[i]
        FV = V[on_face]
        if FV.shape[0] < 2:
            continue
        if n == 2:
            d2 = ((FV[:, None, :] - FV[None, :, :]) ** 2).sum(-1)
            i0, i1 = np.unravel_index(np.argmax(d2), d2.shape)
            ts = np.linspace(0.0, 1.0, grid)[:, None]
            parts.append(FV[i0] * (1 - ts) + FV[i1] * ts)
        else:
            # orthonormal chart of the face plane, grid over its bbox
            c = FV.mean(axis=0)
            nrm = A.A[i] / np.linalg.norm(A.A[i])
            basis = [v for v in np.eye(n) if abs(np.dot(v, nrm)) < 0.9]
            e1 = basis[0] - np.dot(basis[0], nrm) * nrm
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(nrm, e1)
            UV = (FV - c) @ np.stack([e1, e2], axis=1)
            g = max(8, int(math.isqrt(grid * grid // max(1, A.A.shape[0]))))
            us = np.linspace(UV[:, 0].min(), UV[:, 0].max(), g)
            vs = np.linspace(UV[:, 1].min(), UV[:, 1].max(), g)
            UU, VV = np.meshgrid(us, vs, indexing="ij")
            pts = c + UU.ravel()[:, None] * e1 + VV.ravel()[:, None] * e2
            parts.append(pts[A.contains_batch(pts)])
    lo = V.min(axis=0)
    hi = V.max(axis=0)
    g_in = grid if n == 2 else max(12, min(grid, 40))
    axes = [np.linspace(lo[j], hi[j], g_in) for j in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    box = np.stack([m.ravel() for m in mesh], axis=1)
    parts.append(box[A.contains_batch(box)])
    return np.vstack(parts)


def certify_against_bruteforce(f: ScalarField, A: SetRep,
                               p: BlowUpParams | None = None,
                               grid: int = 200, seed: int = 0,
                               mode: str = "max") -> Report:
    """Locate the best point by dense search, then check the necessary
    condition there; also probe non-optimal points and record how often
    the condition refutes them (refutation is not guaranteed)."""
    p = p or BlowUpParams()
    if not A.is_bounded():
        raise ValueError("brute-force certification requires a bounded set")
    if isinstance(A, HPolyhedron) and A.dim <= 3:
        S = _face_samples(A, grid)
    else:
        S = A.sample_array(grid * grid, seed)
    vals = f.batch(S)
    best_i = int(np.argmax(vals)) if mode == "max" else int(np.argmin(vals))
    xstar = S[best_i]
    cert = check_regula(f, A, xstar, mode=mode, p=p)
    rng = np.random.default_rng(seed + 1)
    probes = rng.choice(S.shape[0], size=min(12, S.shape[0]), replace=False)
    refuted = 0
    satisfied_nonopt = 0
    for j in probes:
        if j == best_i:
            continue
        c = check_regula(f, A, S[j], mode=mode, p=p)
        if c.verdict == VIOLATED:
            refuted += 1
        elif c.verdict == SATISFIED:
            satisfied_nonopt += 1
    ok = cert.verdict == SATISFIED
    return Report("certify_against_bruteforce", PASS if ok else FAIL,
                  slack=cert.tol - max(0.0, cert.worst_value if mode == "max"
                                       else -cert.worst_value),
                  witness={} if ok else {"point": xstar.tolist(),
                                         "verdict": cert.verdict,
                                         "worst_value": cert.worst_value},
                  tolerances={"grid": grid, "slack_tol": cert.tol},
                  details={"best_point": xstar.tolist(),
                           "best_value": float(vals[best_i]),
                           "samples": int(S.shape[0]),
                           "refuted_probes": refuted,
                           "satisfied_nonoptimal_probes": satisfied_nonopt,
                           "certificate": cert.to_dict()})
