"""Limits of families of sets: membership tests, Hausdorff distance,
and the sandwich convergence check.

A family is a map lambda -> set over a finite increasing schedule standing
in for lambda -> +infinity.  Membership of a point y is decided from the
residual trace d(y, A_lambda): the "lim -> 0" rule requires the whole tail
quarter of the trace below tolerance, the "liminf -> 0" rule only its
minimum.  Oscillating families are therefore handled by the liminf rule,
never averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch
from .geometry import Point
from .report import FAIL, INCONCLUSIVE, PASS, Report
from .sets import EmptySet, PointCloud, SetRep, _as_array

__all__ = [
    "SetFamily", "LimitVerdict", "default_schedule",
    "lower_limit_member", "upper_limit_member",
    "ls_countable", "hausdorff_distance", "convergence_check",
]

RULE_LIM = "lim->0"
RULE_LIMINF = "liminf->0"


def default_schedule(base: float = 8.0, ratio: float = 2.0,
                     length: int = 24) -> np.ndarray:
    """Geometric schedule lambda_j = base * ratio**j, j = 0..length-1.

    The default runs to 2**26 so that residuals decaying like 1/lambda
    clear the default membership tolerance of 1e-6 over the tail quarter.
    """
    if length < 8:
        raise ValueError("schedule must have at least 8 entries")
    return base * ratio ** np.arange(length, dtype=float)


@dataclass
class SetFamily:
    """Indexed family lambda -> A_lambda over a finite schedule."""

    generator: Callable[[float], SetRep]
    schedule: np.ndarray = field(default_factory=default_schedule)

    def __post_init__(self):
        s = np.asarray(self.schedule, dtype=float)
        if s.ndim != 1 or s.shape[0] < 8:
            raise ValueError("schedule must be a flat sequence, length >= 8")
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ValueError("schedule must be strictly increasing and positive")
        self.schedule = s

    def members(self) -> list[SetRep]:
        return [self.generator(lam) for lam in self.schedule]


@dataclass
class LimitVerdict:
    """Membership evidence for one point against one family."""

    member: bool
    residual_trace: list  # [(lambda, d(y, A_lambda)), ...]
    rule: str
    inconclusive: bool = False
    oracle_bound: float = 0.0

    def tail(self, frac: float = 0.25) -> list:
        k = max(1, math.ceil(len(self.residual_trace) * frac))
        return self.residual_trace[-k:]


def _trace(y, fam: SetFamily) -> tuple[list, float]:
    yv = _as_array(y)
    trace = []
    worst_bound = 0.0
    for lam, A in zip(fam.schedule, fam.members()):
        if A.dim != yv.shape[0]:
            raise DimensionMismatch(f"family member dim {A.dim} vs point {yv.shape[0]}")
        d, bound = A.distance_info(yv)
        trace.append((float(lam), float(d)))
        worst_bound = max(worst_bound, float(bound))
    return trace, worst_bound


def _tail_values(trace: list) -> np.ndarray:
    k = max(1, math.ceil(len(trace) / 4))
    return np.array([d for _, d in trace[-k:]])


def lower_limit_member(y, F: SetFamily, tol: float = 1e-6) -> LimitVerdict:
    """Is lim d(y, A_lambda) = 0?  Tail-quarter maximum below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    trace, bound = _trace(y, F)
    tail = _tail_values(trace)
    inconclusive = bound > tol
    return LimitVerdict(member=bool(tail.max() <= tol), residual_trace=trace,
                        rule=RULE_LIM, inconclusive=inconclusive,
                        oracle_bound=bound)


def upper_limit_member(y, F: SetFamily, tol: float = 1e-6) -> LimitVerdict:
    """Is liminf d(y, A_lambda) = 0?  Tail-quarter minimum below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    trace, bound = _trace(y, F)
    tail = _tail_values(trace)
    inconclusive = bound > tol
    return LimitVerdict(member=bool(tail.min() <= tol), residual_trace=trace,
                        rule=RULE_LIMINF, inconclusive=inconclusive,
                        oracle_bound=bound)


def ls_countable(seq: list[SetRep], tol: float = 1e-6,
                 per_set: int = 64, seed: int = 0) -> SetRep:
    """Sampled approximation of the upper limit of a finite sequence.

    Candidates come from the union of the later half of the sequence;
    a candidate survives when the minimum of its distances to the tail
    quarter falls below tol (points that keep recurring).  The result is
    a point-cloud approximation at the sampling density used.
    """
    n = len(seq)
    if n < 8:
        raise ValueError("sequence must have at least 8 sets")
    start = n // 2
    tail_start = n - max(1, math.ceil(n / 4))
    cands = []
    for i in range(start, n):
        A = seq[i]
        if A.is_empty():
            continue
        cands.append(A.sample_array(per_set, seed + i))
    if not cands:
        return EmptySet(seq[0].dim)
    C = np.vstack(cands)
    tail_sets = seq[tail_start:]
    D = np.stack([A.distance_batch(C)[0] for A in tail_sets])
    keep = D.min(axis=0) <= tol
    if not np.any(keep):
        return EmptySet(seq[0].dim)
    pts = C[keep]
    # thin near-duplicates so the cloud stays manageable
    order = np.lexsort(pts.T)
    pts = pts[order]
    kept = [pts[0]]
    thin = max(tol * 0.5, 1e-12)
    for p in pts[1:]:
        if np.linalg.norm(p - kept[-1]) > thin:
            kept.append(p)
    return PointCloud(np.array(kept))


def hausdorff_distance(A: SetRep, B: SetRep, density: int = 512,
                       seed: int = 0) -> float:
    """max(sup_a d(a,B), sup_b d(b,A)) over samples of each side.

    The directed sups use the exact distance oracle of the *other* set, so
    only one side of each term carries sampling error.  Exact when both
    sides are point clouds (their samples are the clouds themselves).
    """
    if density < 100 and not (isinstance(A, PointCloud) and isinstance(B, PointCloud)):
        raise ValueError("density must be at least 100")
    for S, name in ((A, "A"), (B, "B")):
        if not S.is_bounded():
            raise ValueError(f"hausdorff_distance requires bounded sets ({name} is not)")
    if A.is_empty() or B.is_empty():
        raise ValueError("hausdorff_distance of an empty set is undefined")
    if isinstance(A, PointCloud):
        SA = A.points
    else:
        SA = A.sample_array(density, seed)
    if isinstance(B, PointCloud):
        SB = B.points
    else:
        SB = B.sample_array(density, seed + 1)
    dA = B.distance_batch(SA)[0].max()
    dB = A.distance_batch(SB)[0].max()
    return float(max(dA, dB))


def convergence_check(F: SetFamily, A: SetRep, tol: float = 1e-2,
                      density: int = 256, seed: int = 0) -> Report:
    """Sandwich test: Ls of the family inside A, and A inside the Li.

    PASS requires (a) every sampled upper-limit point lies within tol of
    A and (b) every sampled point of A is a lower-limit member at tol.
    FAIL carries a witness point and the inclusion that broke.
    """
    members = F.members()
    tols = {"tol": tol, "density": density}
    ls_cloud = ls_countable(members, tol=tol, per_set=max(32, density // 8),
                            seed=seed)
    worst_bound = 0.0
    if not ls_cloud.is_empty():
        d, bound = A.distance_batch(ls_cloud.points)
        worst_bound = max(worst_bound, float(np.max(bound)))
        i = int(np.argmax(d))
        if d[i] > tol:
            if worst_bound > tol:
                return Report("convergence_check", INCONCLUSIVE,
                              tolerances=tols,
                              details={"oracle_bound": worst_bound})
            return Report("convergence_check", FAIL, slack=float(tol - d[i]),
                          witness={"point": ls_cloud.points[i].tolist(),
                                   "broke": "Ls subset of A"},
                          tolerances=tols)
    pts = A.sample_array(density, seed + 2)
    for p in pts:
        v = lower_limit_member(p, F, tol=tol)
        if v.inconclusive:
            return Report("convergence_check", INCONCLUSIVE, tolerances=tols,
                          details={"oracle_bound": v.oracle_bound})
        if not v.member:
            worst = max(d for _, d in v.tail())
            return Report("convergence_check", FAIL, slack=float(tol - worst),
                          witness={"point": list(map(float, p)),
                                   "broke": "A subset of Li"},
                          tolerances=tols)
    return Report("convergence_check", PASS, slack=float(tol),
                  tolerances=tols,
                  details={"ls_sample_size": 0 if ls_cloud.is_empty()
                           else int(ls_cloud.points.shape[0])})


def limit_trace_rows(y, F: SetFamily) -> list[tuple[float, float]]:
    """Residual trace (lambda, distance) for CSV emission."""
    trace, _ = _trace(y, F)
    return trace
