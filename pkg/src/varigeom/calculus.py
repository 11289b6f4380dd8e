"""Derivative notions for scalar and vector fields.

Covers gradient estimation (dual arithmetic with a finite-difference
fallback), the normalized-residual differentiability check, two-sided
directional differentials, best-polynomial derivatives of order n, the
strict (two-point) derivative test, linearity checks for sampled maps,
and the mean-value hull certificate for vector-valued curves.

Fields are parsed expressions or registered built-ins; the built-ins
cover the handful of functions that expression syntax cannot state
(piecewise values at a removable singularity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprs
from .errors import ConvergenceError, EvalDomainError, NondifferentiableError
from .geometry import Vector, in_convex_hull
from .report import FAIL, INCONCLUSIVE, PASS, Report

__all__ = [
    "ScalarField", "VectorField", "DiffReport", "DirectionalValue",
    "estimate_gradient", "check_frechet", "directional_differential",
    "chain_rule_counterexample", "peano_derivative",
    "strict_derivative_check", "check_linear", "mean_value_certificate",
    "scalar_builtin_names", "vector_builtin_names",
]

_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Evaluatable real function of n variables.

    Built from a parsed expression (analytic gradients via dual
    arithmetic) or a registered built-in (finite differences only).
    """

    def __init__(self, dim: int, expr: exprs.Expr | None = None,
                 fn=None, batch_fn=None, name: str = ""):
        if expr is None and fn is None:
            raise ValueError("field needs an expression or a callable")
        self.dim = int(dim)
        self.expr = expr
        self.fn = fn
        self.batch_fn = batch_fn
        self.name = name or (exprs.to_text(expr) if expr is not None else "builtin")
        self.grad_mode = "analytic" if expr is not None else "finite-difference"

    @classmethod
    def from_text(cls, text: str, dim: int) -> "ScalarField":
        return cls(dim, expr=exprs.parse(text, dim), name=text)

    @classmethod
    def builtin(cls, name: str) -> "ScalarField":
        if name not in _SCALAR_BUILTINS:
            raise KeyError(f"unknown built-in field {name!r}; "
                           f"known: {sorted(_SCALAR_BUILTINS)}")
        return _SCALAR_BUILTINS[name]()

    def value(self, x) -> float:
        xv = np.asarray(x, dtype=float).ravel()
        if self.expr is not None:
            return exprs.eval_expr(self.expr, xv)
        return float(self.fn(*xv))

    def batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.batch_fn is not None:
            return self.batch_fn(X)
        if self.expr is not None:
            return exprs.eval_batch(self.expr, X)
        return np.array([self.fn(*row) for row in X])

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient when available; raises at kinks."""
        if self.expr is None:
            raise NondifferentiableError(
                f"built-in field {self.name!r} has no analytic gradient")
        return exprs.grad(self.expr, x)

    def __repr__(self):
        return f"ScalarField({self.name!r}, dim={self.dim}, {self.grad_mode})"


class VectorField:
    """Vector-valued field; componentwise scalar fields of equal dim."""

    def __init__(self, components, name: str = ""):
        comps = list(components)
        if not comps:
            raise ValueError("vector field needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise ValueError("components disagree on dimension")
        self.components = comps
        self.dim = comps[0].dim
        self.codim = len(comps)
        self.name = name or "(" + ", ".join(c.name for c in comps) + ")"

    @classmethod
    def from_texts(cls, texts, dim: int, name: str = "") -> "VectorField":
        return cls([ScalarField.from_text(t, dim) for t in texts], name=name)

    @classmethod
    def builtin(cls, name: str) -> "VectorField":
        if name not in _VECTOR_BUILTINS:
            raise KeyError(f"unknown built-in vector field {name!r}; "
                           f"known: {sorted(_VECTOR_BUILTINS)}")
        return _VECTOR_BUILTINS[name]()

    def value(self, x) -> np.ndarray:
        return np.array([c.value(x) for c in self.components])

    def derivative(self, t: float, order: int) -> np.ndarray:
        """order-th derivative of a curve R -> R^m via jet arithmetic."""
        if self.dim != 1:
            raise ValueError("higher derivatives are for univariate fields")
        out = []
        for c in self.components:
            if c.expr is None:
                raise NondifferentiableError(
                    f"component {c.name!r} lacks an expression; analytic "
                    "derivatives unavailable")
            out.append(exprs.eval_jet(c.expr, t, order).derivative(order))
        return np.array(out)

    def derivative_batch(self, ts: np.ndarray, order: int) -> np.ndarray:
        return np.array([self.derivative(float(t), order) for t in ts])

    def __repr__(self):
        return f"VectorField({self.name!r}, R^{self.dim}->R^{self.codim})"


# -- built-ins ---------------------------------------------------------------

def _cubic_ratio():
    # x^3*y/(x^4+y^2) extended by 0 at the origin
    def fn(x, y):
        if x == 0.0 and y == 0.0:
            return 0.0
        return x ** 3 * y / (x ** 4 + y ** 2)

    def batch(X):
        x, y = X[:, 0], X[:, 1]
        den = x ** 4 + y ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(den > 0.0, x ** 3 * y / np.where(den > 0, den, 1.0), 0.0)
        return v

    return ScalarField(2, fn=fn, batch_fn=batch, name="cubic_ratio")


def _cubic_ratio_lifted():
    # the previous field composed with (x, y^2): x^3*y^2/(x^4+y^4), 0 at 0
    def fn(x, y):
        if x == 0.0 and y == 0.0:
            return 0.0
        return x ** 3 * y ** 2 / (x ** 4 + y ** 4)

    def batch(X):
        x, y = X[:, 0], X[:, 1]
        den = x ** 4 + y ** 4
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0.0, x ** 3 * y ** 2 / np.where(den > 0, den, 1.0), 0.0)

    return ScalarField(2, fn=fn, batch_fn=batch, name="cubic_ratio_lifted")


def _osc_square():
    # h^2 sin(1/h) extended by 0; differentiable but not strictly at 0
    def fn(h):
        if h == 0.0:
            return 0.0
        return h * h * math.sin(1.0 / h)

    def batch(X):
        h = X[:, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(h == 0.0, 0.0, h * h * np.sin(1.0 / np.where(h == 0, 1.0, h)))

    return ScalarField(1, fn=fn, batch_fn=batch, name="osc_square")


_SCALAR_BUILTINS = {
    "cubic_ratio": _cubic_ratio,
    "cubic_ratio_lifted": _cubic_ratio_lifted,
    "osc_square": _osc_square,
}

_VECTOR_BUILTINS = {
    "circle": lambda: VectorField.from_texts(["cos(x1)", "sin(x1)"], 1, "circle"),
    "twist_curve": lambda: VectorField.from_texts(["x1^2", "x1^3"], 1, "twist_curve"),
    "wave_pair": lambda: VectorField.from_texts(["sin(x1)", "cos(2*x1)"], 1, "wave_pair"),
    "poly_mix": lambda: VectorField.from_texts(["x1 + x1^3", "x1^2"], 1, "poly_mix"),
    "soft_exp": lambda: VectorField.from_texts(["exp(x1/2)", "x1"], 1, "soft_exp"),
    "helix": lambda: VectorField.from_texts(["cos(x1)", "sin(x1)", "x1/2"], 1, "helix"),
    "parabola_lift": lambda: VectorField.from_texts(["x1", "x2^2"], 2, "parabola_lift"),
}


def scalar_builtin_names():
    return sorted(_SCALAR_BUILTINS)


def vector_builtin_names():
    return sorted(_VECTOR_BUILTINS)


# ---------------------------------------------------------------------------
# Gradient estimation
# ---------------------------------------------------------------------------

def _fd_gradient(f: ScalarField, x: np.ndarray) -> np.ndarray:
    """Central differences with one Richardson level."""
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        h = _EPS ** (1.0 / 3.0) * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = 1.0

        def diff(step):
            return (f.value(x + step * e) - f.value(x - step * e)) / (2.0 * step)

        d1 = diff(h)
        d2 = diff(h / 2.0)
        g[i] = (4.0 * d2 - d1) / 3.0
    return g


def estimate_gradient(f: ScalarField, x) -> np.ndarray:
    """Analytic gradient when the expression allows it; otherwise
    Richardson-extrapolated central differences."""
    xv = np.asarray(x, dtype=float).ravel()
    if f.expr is not None:
        try:
            return exprs.grad(f.expr, xv)
        except NondifferentiableError:
            pass
    return _fd_gradient(f, xv)


# ---------------------------------------------------------------------------
# Differentiability check (normalized first-order residual)
# ---------------------------------------------------------------------------

@dataclass
class DiffReport:
    verdict: str
    gradient: Vector
    residual_curve: list          # [(radius, max normalized residual)]
    witness: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    order_coeffs: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


def _sphere_dirs(dim: int, count: int, seed: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((count, dim))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def check_frechet(f: ScalarField, Df, x, radii=None, tol: float = 1e-4,
                  directions: int = 64, seed: int = 0) -> DiffReport:
    """Does the normalized residual |f(y)-f(x)-<Df,y-x>| / |y-x| vanish?

    Samples spheres of decreasing radius around x; PASS when the residual
    has dropped below tol by the smallest radii.  The residual curve is
    always returned.
    """
    xv = np.asarray(x, dtype=float).ravel()
    Dfv = Df.comps if isinstance(Df, Vector) else np.asarray(Df, dtype=float)
    if radii is None:
        radii = [10.0 ** (-k) for k in range(2, 9)]
    radii = [float(r) for r in radii]
    if len(radii) < 6 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("need at least 6 strictly decreasing radii")
    dirs = _sphere_dirs(xv.shape[0], max(64, directions), seed)
    fx = f.value(xv)
    curve = []
    worst = {}
    for r in radii:
        Y = xv + r * dirs
        vals = f.batch(Y)
        lin = fx + r * (dirs @ Dfv)
        resid = np.abs(vals - lin) / r
        i = int(np.argmax(resid))
        curve.append((r, float(resid[i])))
        worst[r] = dirs[i]
    final_r, final_res = curve[-1]
    ok = final_res <= tol and curve[-2][1] <= 10.0 * tol
    # flag residuals that grow back as radii shrink
    bad_idx = None
    half = len(curve) // 2
    for j in range(half, len(curve) - 1):
        if curve[j + 1][1] > max(4.0 * curve[j][1], tol):
            ok = False
            bad_idx = j + 1
            break
    witness = {}
    if not ok:
        r_bad, res_bad = curve[bad_idx] if bad_idx is not None else (final_r, final_res)
        witness = {"radius": r_bad, "residual": res_bad,
                   "direction": worst[r_bad].tolist()}
    return DiffReport(verdict=PASS if ok else FAIL, gradient=Vector(Dfv),
                      residual_curve=curve, witness=witness,
                      tolerances={"tol": tol, "radii": radii})


# ---------------------------------------------------------------------------
# Directional differential
# ---------------------------------------------------------------------------

@dataclass
class DirectionalValue:
    """Two-sided directional differential; sides reported separately
    when they disagree."""

    value: float | None
    plus: float
    minus: float
    agree: bool
    trace: list

    def require(self) -> float:
        if not self.agree:
            raise ConvergenceError(
                f"one-sided differentials disagree: {self.plus} vs {self.minus}",
                trace=self.trace)
        return float(self.value)


def directional_differential(f, x, v, kmin: int = 4, kmax: int = 24,
                             tol: float = 1e-5):
    """lim (f(x+qv)-f(x))/q over q = +-2^-k, with a convergence test.

    Vector fields are handled componentwise (returns an array).
    """
    if isinstance(f, VectorField):
        vals = [directional_differential(c, x, v, kmin, kmax, tol)
                for c in f.components]
        return np.array([dv.require() for dv in vals])
    xv = np.asarray(x, dtype=float).ravel()
    vv = v.comps if isinstance(v, Vector) else np.asarray(v, dtype=float).ravel()
    fx = f.value(xv)
    hs = 2.0 ** -np.arange(kmin, kmax + 1)
    qp = np.array([(f.value(xv + h * vv) - fx) / h for h in hs])
    qm = np.array([(fx - f.value(xv - h * vv)) / h for h in hs])
    trace = list(zip(hs.tolist(), qp.tolist(), qm.tolist()))

    def settle(q):
        last = q[-3:]
        spread = float(np.max(last) - np.min(last))
        return float(q[-1]), spread <= tol * (1.0 + abs(float(q[-1])))

    plus, okp = settle(qp)
    minus, okm = settle(qm)
    if not (okp and okm):
        raise ConvergenceError("directional quotient did not converge",
                               trace=trace)
    agree = abs(plus - minus) <= 50.0 * tol * (1.0 + abs(plus))
    value = 0.5 * (plus + minus) if agree else None
    return DirectionalValue(value=value, plus=plus, minus=minus, agree=agree,
                            trace=trace)


# ---------------------------------------------------------------------------
# Chain-rule counterexample
# ---------------------------------------------------------------------------

def chain_rule_counterexample() -> Report:
    """Directional differentials do not obey the chain rule.

    With g(x,y) = (x, y^2) and the cubic-ratio field f, the composite has
    differential 1/2 along v = (1,1) at the origin, while the chain-rule
    prediction df(g(0))(dg(0)(v)) is 0.  Both axis directions agree on 0.
    PASS means the diagonal discrepancy exceeds 0.4.
    """
    f = ScalarField.builtin("cubic_ratio")
    fg = ScalarField.builtin("cubic_ratio_lifted")
    g = VectorField.builtin("parabola_lift")
    origin = np.zeros(2)
    out = {}
    for label, v in (("diag", (1.0, 1.0)), ("e1", (1.0, 0.0)), ("e2", (0.0, 1.0))):
        composite = directional_differential(fg, origin, v).require()
        dgv = directional_differential(g, origin, v)
        chain = directional_differential(f, origin, dgv).require()
        out[label] = {"composite": composite, "chain_rule": chain,
                      "discrepancy": abs(composite - chain)}
    ok = out["diag"]["discrepancy"] > 0.4
    return Report("chain_rule_counterexample", PASS if ok else FAIL,
                  slack=out["diag"]["discrepancy"] - 0.4,
                  tolerances={"min_discrepancy": 0.4},
                  details=out)


# ---------------------------------------------------------------------------
# Best-polynomial (order-n) derivative
# ---------------------------------------------------------------------------

def peano_derivative(f: ScalarField, x: float, n: int, kmin: int = 4,
                     kmax: int = 20, reject_tol: float = 1e-3) -> float:
    """n! times the h^n coefficient of the best polynomial approximation.

    Least-squares fit of a_0 + ... + a_n h^n on the symmetric grid
    h = +-2^-k, weighted by |h|^-n so the fit controls the normalized
    residual |f(x+h) - P(h)| / |h|^n.  Scales too small to resolve n-th
    order behaviour above rounding noise are dropped; the fit is rejected
    when the normalized residual at the smallest retained scale exceeds
    reject_tol.
    """
    if n < 0 or n > 6:
        raise ValueError("order must be between 0 and 6")
    if f.dim != 1:
        raise ValueError("peano_derivative expects a univariate field")
    x = float(x)
    scale = 1.0 + abs(f.value([x]))
    ks = [k for k in range(kmin, kmax + 1)
          if (2.0 ** -k) ** n >= 512.0 * _EPS * scale]
    if len(ks) < 3:
        raise ConvergenceError(f"grid cannot resolve order {n} above noise")
    hs = np.concatenate([2.0 ** -np.array(ks, dtype=float),
                         -(2.0 ** -np.array(ks, dtype=float))])
    vals = np.array([f.value([x + h]) for h in hs])
    hmax = float(np.abs(hs).max())
    s = hs / hmax
    A = np.vander(s, n + 1, increasing=True)
    w = np.abs(hs) ** (-float(n))
    coef_s, *_ = np.linalg.lstsq(A * w[:, None], vals * w, rcond=None)
    coeffs = coef_s / hmax ** np.arange(n + 1)
    P = A @ coef_s
    resid = np.abs(vals - P) / np.abs(hs) ** n
    smallest = np.abs(hs) <= 2.0 ** -ks[-1] * 1.0000001
    a_n = float(coeffs[n])
    value = math.factorial(n) * a_n
    if resid[smallest].max() > reject_tol * (1.0 + abs(value)):
        raise ConvergenceError(
            f"no order-{n} derivative detected at tolerance {reject_tol:g} "
            f"(residual {resid[smallest].max():.3g})",
            trace=list(zip(hs.tolist(), resid.tolist())))
    return value


# ---------------------------------------------------------------------------
# Strict (two-point) derivative
# ---------------------------------------------------------------------------

def strict_derivative_check(f: ScalarField, x: float, tol: float = 1e-3,
                            kmin: int = 4, kmax: int = 16,
                            pairs_per_window: int = 240, seed: int = 0) -> Report:
    """Does (f(b)-f(a))/(b-a) converge as both a,b approach x?

    Samples pairs in shrinking two-sided windows and compares against the
    ordinary derivative at x.  Functions that are derivable but not
    strictly derivable (oscillating derivative) FAIL with a witness pair.
    """
    if f.dim != 1:
        raise ValueError("strict_derivative_check expects a univariate field")
    x = float(x)
    dv = directional_differential(f, [x], [1.0])
    fprime = dv.require()
    rng = np.random.default_rng(seed)
    windows = 2.0 ** -np.arange(kmin, kmax + 1)
    devs = []
    witness = {}
    per_sep = max(20, pairs_per_window // 8)
    for w in windows:
        worst, wit = 0.0, None
        # pair separations span window scale down to near roundoff, so
        # derivative oscillations on any sub-scale are exposed
        for sep in w * 10.0 ** -np.arange(0.0, 9.0):
            if sep < 64.0 * _EPS * (1.0 + abs(x)):
                break
            c = x + w * (2.0 * rng.random(per_sep) - 1.0)
            a = np.clip(c, x - w, x + w - sep)
            b = a + sep
            fa = np.array([f.value([t]) for t in a])
            fb = np.array([f.value([t]) for t in b])
            q = (fb - fa) / (b - a)
            dev = np.abs(q - fprime)
            i = int(np.argmax(dev))
            if dev[i] > worst:
                worst = float(dev[i])
                wit = {"a": float(a[i]), "b": float(b[i]),
                       "quotient": float(q[i]), "window": float(w)}
        devs.append(worst)
        if not witness or worst >= max(devs):
            witness = wit or witness
    budget = tol * (1.0 + abs(fprime))
    ok = max(devs[-3:]) <= budget
    return Report("strict_derivative_check", PASS if ok else FAIL,
                  slack=budget - max(devs[-3:]),
                  witness={} if ok else witness,
                  tolerances={"tol": tol},
                  details={"derivative": fprime, "window_deviations": devs})


# ---------------------------------------------------------------------------
# Linearity (additive + homogeneous + bounded)
# ---------------------------------------------------------------------------

def check_linear(m, dim_in: int, dim_out: int, tol: float = 1e-6,
                 samples: int = 80, seed: int = 0) -> Report:
    """Test additivity and homogeneity of a sampled map, and estimate its
    operator norm sup{|m(u)| : |u| < 1} (the map's module)."""
    rng = np.random.default_rng(seed)

    def ev(z):
        return np.asarray(m(np.asarray(z, dtype=float)), dtype=float).ravel()

    worst_add, wit_add = 0.0, None
    for _ in range(samples):
        xx = rng.standard_normal(dim_in)
        yy = rng.standard_normal(dim_in)
        r = np.linalg.norm(ev(xx + yy) - ev(xx) - ev(yy))
        scale = 1.0 + np.linalg.norm(ev(xx)) + np.linalg.norm(ev(yy))
        if r / scale > worst_add:
            worst_add, wit_add = r / scale, {"x": xx.tolist(), "y": yy.tolist()}
    worst_hom, wit_hom = 0.0, None
    for _ in range(samples):
        xx = rng.standard_normal(dim_in)
        for t in (-2.5, -1.0, 0.5, 3.0):
            r = np.linalg.norm(ev(t * xx) - t * ev(xx))
            scale = 1.0 + abs(t) * np.linalg.norm(ev(xx))
            if r / scale > worst_hom:
                worst_hom, wit_hom = r / scale, {"x": xx.tolist(), "t": t}
    U = _sphere_dirs(dim_in, max(256, samples), seed + 1)
    norms = [np.linalg.norm(ev(u * (1.0 - 1e-9))) for u in U]
    op_norm = float(np.max(norms))
    ok = worst_add <= tol and worst_hom <= tol
    witness = {}
    if worst_add > tol:
        witness = {"law": "additivity", **(wit_add or {})}
    elif worst_hom > tol:
        witness = {"law": "homogeneity", **(wit_hom or {})}
    return Report("check_linear", PASS if ok else FAIL,
                  slack=tol - max(worst_add, worst_hom),
                  witness=witness, tolerances={"tol": tol},
                  details={"operator_norm": op_norm,
                           "additivity_residual": worst_add,
                           "homogeneity_residual": worst_hom})


# ---------------------------------------------------------------------------
# Mean value certificate
# ---------------------------------------------------------------------------

def mean_value_certificate(f: VectorField, t: float, h: float, n: int,
                           samples: int = 600, tol: float | None = None) -> Report:
    """Certify that the Taylor remainder coefficient lies in the hull of
    the (n+1)-th derivative image over [t, t+h].

    k := (n+1)!/h^(n+1) * (f(t+h) - sum_{j<=n} h^j/j! f^(j)(t)) is checked
    for membership in conv{f^(n+1)(s) : s in [t, t+h]} sampled densely;
    the tolerance scales with the sampling gap unless given explicitly.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    t, h = float(t), float(h)
    taylor = np.zeros(f.codim)
    for j in range(n + 1):
        taylor += h ** j / math.factorial(j) * f.derivative(t, j)
    k = math.factorial(n + 1) / h ** (n + 1) * (f.value([t + h]) - taylor)
    ss = np.linspace(t, t + h, samples)
    G = f.derivative_batch(ss, n + 1)
    gaps = np.linalg.norm(np.diff(G, axis=0), axis=1)
    gap = float(gaps.max()) if gaps.size else 0.0
    tol_eff = tol if tol is not None else max(1e-9, 0.5 * gap)
    cert = in_convex_hull(k, list(G), tol_eff)
    support = int(np.sum(cert.weights > 1e-12))
    return Report("mean_value_certificate", PASS if cert.member else FAIL,
                  slack=tol_eff - cert.residual,
                  witness={} if cert.member else {"k": k.tolist(),
                                                  "residual": cert.residual},
                  tolerances={"tol": tol_eff, "samples": samples,
                              "sampling_gap": gap},
                  details={"k": k.tolist(), "residual": cert.residual,
                           "support_size": support})
