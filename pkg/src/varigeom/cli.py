"""Command-line front end.

Subcommands: cone, limit, hausdorff, deriv, regula, props, counterexample,
demo.  Problem files are JSON with keys {dim, function, set, point, family,
params}; unknown keys are rejected.  Inside a family's set description,
strings may use the variable ``lam`` and are evaluated per schedule value
(map expressions get a textual substitution instead, since their variables
are the patch parameters).

Exit codes: 0 PASS/SATISFIED, 1 FAIL/VIOLATED, 2 INCONCLUSIVE, 64 usage
error, 65 problem-file error.  Reports echo every effective tolerance; the
machine output (--out) is byte-deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import calculus, cones, exprs, regula, setlimits, sets
from .errors import ParseError, ProblemFileError
from .report import FAIL, INCONCLUSIVE, PASS

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_INPUT = 65

_PROBLEM_KEYS = {"dim", "function", "set", "point", "family", "params"}
_PARAM_KEYS = {"tol", "angular_tol", "distance_tol", "schedule_base",
               "schedule_ratio", "schedule_len", "samples", "seed", "density"}


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------

class Problem:
    def __init__(self, raw: dict, path: str):
        if not isinstance(raw, dict):
            raise ProblemFileError("problem file must hold a JSON object")
        unknown = set(raw) - _PROBLEM_KEYS
        if unknown:
            raise ProblemFileError(f"unknown problem keys {sorted(unknown)}",
                                   key=sorted(unknown)[0])
        if "dim" not in raw:
            raise ProblemFileError("problem file needs 'dim'", key="dim")
        self.path = path
        self.dim = int(raw["dim"])
        self.function = raw.get("function")
        self.set_desc = raw.get("set")
        self.point = raw.get("point")
        self.family = raw.get("family")
        self.params = raw.get("params", {})
        bad = set(self.params) - _PARAM_KEYS
        if bad:
            raise ProblemFileError(f"unknown params {sorted(bad)}",
                                   key=sorted(bad)[0])

    def require(self, *names):
        for name in names:
            if getattr(self, "set_desc" if name == "set" else name) is None:
                raise ProblemFileError(f"problem file needs {name!r}", key=name)

    def the_set(self) -> sets.SetRep:
        self.require("set")
        try:
            return sets.set_from_dict(self.set_desc, self.dim)
        except (ValueError, ParseError) as e:
            raise ProblemFileError(f"bad set description: {e}", key="set")

    def the_point(self) -> np.ndarray:
        self.require("point")
        pt = np.asarray(self.point, dtype=float).ravel()
        if pt.shape[0] != self.dim:
            raise ProblemFileError(
                f"point has dimension {pt.shape[0]}, expected {self.dim}",
                key="point")
        return pt

    def the_field(self) -> calculus.ScalarField:
        self.require("function")
        try:
            return calculus.ScalarField.from_text(self.function, self.dim)
        except ParseError as e:
            raise ProblemFileError(f"bad function: {e}", key="function")

    def the_family(self) -> setlimits.SetFamily:
        self.require("family")
        fam = self.family
        if not isinstance(fam, dict) or "set" not in fam:
            raise ProblemFileError("family needs a 'set' description", key="family")
        unknown = set(fam) - {"set", "schedule"}
        if unknown:
            raise ProblemFileError(f"unknown family keys {sorted(unknown)}",
                                   key=sorted(unknown)[0])
        schedule = _parse_schedule(fam.get("schedule"), self.params)
        template = fam["set"]
        dim = self.dim

        def gen(lam: float) -> sets.SetRep:
            try:
                return sets.set_from_dict(_instantiate(template, lam), dim)
            except (ValueError, ParseError) as e:
                raise ProblemFileError(f"bad family set at lam={lam}: {e}",
                                       key="family")

        return setlimits.SetFamily(gen, schedule)


def _parse_schedule(desc, params) -> np.ndarray:
    if isinstance(desc, list):
        return np.asarray(desc, dtype=float)
    base = float(params.get("schedule_base", 8.0))
    ratio = float(params.get("schedule_ratio", 2.0))
    length = int(params.get("schedule_len", 24))
    if isinstance(desc, dict):
        unknown = set(desc) - {"base", "ratio", "length"}
        if unknown:
            raise ProblemFileError(f"unknown schedule keys {sorted(unknown)}",
                                   key=sorted(unknown)[0])
        base = float(desc.get("base", base))
        ratio = float(desc.get("ratio", ratio))
        length = int(desc.get("length", length))
    elif desc is not None:
        raise ProblemFileError("schedule must be a list or an object",
                               key="schedule")
    return setlimits.default_schedule(base, ratio, length)


_LAM_TOKEN = re.compile(r"\blam\b")


def _instantiate(node, lam: float):
    """Evaluate lam-expressions inside a set description."""
    if isinstance(node, dict):
        out = {}
        for k, v in node.items():
            if k == "type":
                out[k] = v
            elif k == "map":
                if isinstance(v, list):
                    out[k] = [_subst_lam_text(s, lam) for s in v]
                else:
                    out[k] = _subst_lam_text(v, lam)
            else:
                out[k] = _instantiate(v, lam)
        return out
    if isinstance(node, list):
        return [_instantiate(v, lam) for v in node]
    if isinstance(node, str):
        e = exprs.parse(node, 1, var_names=("lam",))
        return exprs.eval_expr(e, [lam])
    return node


def _subst_lam_text(text: str, lam: float) -> str:
    return _LAM_TOKEN.sub(f"({lam!r})", text)


def load_problem(path: str) -> Problem:
    p = Path(path)
    if not p.exists():
        raise ProblemFileError(f"problem file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"invalid JSON in {path}: {e}")
    return Problem(raw, path)


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _emit(out_path: str | None, fmt: str, payload: dict, csv_rows=None,
          csv_header=None):
    if not out_path:
        return
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv" and csv_rows is not None:
        lines = [",".join(csv_header)] if csv_header else []
        lines += [",".join(_fmt(v) for v in row) for row in csv_rows]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "text":
        path.write_text(payload.get("_text", json.dumps(payload, sort_keys=True)))
    else:  # json-like
        path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                                   default=_json_default) + "\n")


def _json_default(o):
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _header(title: str, tolerances: dict) -> str:
    tol_line = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(tolerances.items()))
    return f"== {title} ==\n(effective settings: {tol_line})"


def _verdict_exit(verdict: str) -> int:
    return {PASS: EXIT_PASS, "SATISFIED": EXIT_PASS,
            FAIL: EXIT_FAIL, "VIOLATED": EXIT_FAIL,
            INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(verdict, EXIT_FAIL)


def _blowup_params(args, problem: Problem | None) -> cones.BlowUpParams:
    params = dict(problem.params) if problem else {}
    base = float(params.get("schedule_base", 8.0))
    length = int(params.get("schedule_len", 35))
    if args.schedule_base is not None:
        base = args.schedule_base
    if args.schedule_len is not None:
        length = args.schedule_len
    lo = np.log2(base)
    schedule = 2.0 ** np.linspace(lo, lo + (length - 1) * 0.5, length)
    kw = {}
    if args.angular_tol is not None:
        kw["angular_tol"] = args.angular_tol
    elif "angular_tol" in params:
        kw["angular_tol"] = float(params["angular_tol"])
    if "distance_tol" in params:
        kw["distance_tol"] = float(params["distance_tol"])
    samples = args.samples if args.samples is not None else int(
        params.get("samples", 160))
    seed = args.seed if args.seed is not None else int(params.get("seed", 0))
    return cones.BlowUpParams(schedule=schedule, samples_per_scale=samples,
                              seed=seed, **kw)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_cone(args) -> int:
    problem = load_problem(args.problem)
    A = problem.the_set()
    x = problem.the_point()
    p = _blowup_params(args, problem)
    fn = cones.lower_tangent_cone if args.rule == "lower" else cones.upper_tangent_cone
    c = fn(A, x, p)
    tols = {"angular_tol": p.angular_tol, "distance_tol": p.distance_tol,
            "schedule_lo": p.schedule[0], "schedule_hi": p.schedule[-1],
            "samples_per_scale": p.samples_per_scale, "seed": p.seed}
    print(_header(f"{args.rule} tangent cone", tols))
    print(f"apex: {c.apex.coords.tolist()}")
    print(f"empty: {c.empty}  exact: {c.exact}  generators: {len(c.all_gens())}"
          f"  angular_res: {_fmt(c.angular_res)}  inconclusive: {c.inconclusive}")
    rows = []
    gens = c.all_gens()
    scales = c.gen_scales or [(float("nan"), float("nan"))] * len(gens)
    for g, (lo, hi) in zip(gens, scales):
        rows.append(list(g.comps) + [lo, hi])
        print("  ray " + "  ".join(f"{v:+.6f}" for v in g.comps)
              + f"   scales [{_fmt(lo)}, {_fmt(hi)}]")
    header = [f"d{i+1}" for i in range(c.dim)] + ["first_scale", "last_scale"]
    payload = {"rule": args.rule, "apex": c.apex.coords.tolist(),
               "empty": c.empty, "exact": c.exact,
               "generators": [list(g.comps) for g in gens],
               "gen_scales": scales, "angular_res": c.angular_res,
               "inconclusive": c.inconclusive, "tolerances": tols}
    _emit(args.out, args.format, payload, rows, header)
    return EXIT_INCONCLUSIVE if c.inconclusive else EXIT_PASS


def _cmd_limit(args) -> int:
    problem = load_problem(args.problem)
    F = problem.the_family()
    y = problem.the_point()
    tol = args.tol if args.tol is not None else float(
        problem.params.get("tol", 1e-6))
    fn = (setlimits.lower_limit_member if args.rule == "lim"
          else setlimits.upper_limit_member)
    v = fn(y, F, tol)
    tols = {"tol": tol, "rule": v.rule,
            "schedule_lo": F.schedule[0], "schedule_hi": F.schedule[-1]}
    print(_header("set-limit membership", tols))
    print(f"point: {y.tolist()}  member: {v.member}  inconclusive: {v.inconclusive}")
    rows = [(lam, d) for lam, d in v.residual_trace]
    payload = {"point": y.tolist(), "member": v.member, "rule": v.rule,
               "inconclusive": v.inconclusive, "trace": rows,
               "tolerances": tols}
    _emit(args.out, args.format, payload, rows, ["lambda", "distance"])
    if v.inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS if v.member else EXIT_FAIL


def _cmd_hausdorff(args) -> int:
    problem = load_problem(args.problem)
    A = problem.the_set()
    if not isinstance(A, sets.UnionSet) or len(A.members) != 2:
        raise ProblemFileError("hausdorff needs 'set' to be a union of "
                               "exactly two members", key="set")
    density = args.samples if args.samples is not None else int(
        problem.params.get("density", 512))
    seed = args.seed if args.seed is not None else int(problem.params.get("seed", 0))
    d = setlimits.hausdorff_distance(A.members[0], A.members[1],
                                     density=density, seed=seed)
    tols = {"density": density, "seed": seed}
    print(_header("hausdorff distance", tols))
    print(f"distance: {_fmt(d)}")
    payload = {"distance": d, "tolerances": tols}
    _emit(args.out, args.format, payload, [[d]], ["distance"])
    return EXIT_PASS


def _cmd_deriv(args) -> int:
    problem = load_problem(args.problem)
    f = problem.the_field()
    x = problem.the_point()
    tol = args.tol if args.tol is not None else float(
        problem.params.get("tol", 1e-4))
    Df = calculus.estimate_gradient(f, x)
    rep = calculus.check_frechet(f, Df, x, tol=tol,
                                 seed=args.seed if args.seed is not None else 0)
    tols = dict(rep.tolerances)
    print(_header("differentiability check", tols))
    print(f"point: {x.tolist()}  gradient: {Df.tolist()}")
    print(f"verdict: {rep.verdict}")
    for r, res in rep.residual_curve:
        print(f"  radius {_fmt(r)}  residual {_fmt(res)}")
    payload = {"point": x.tolist(), "gradient": Df.tolist(),
               "verdict": rep.verdict, "curve": rep.residual_curve,
               "witness": rep.witness, "tolerances": tols}
    _emit(args.out, args.format, payload, rep.residual_curve,
          ["radius", "residual"])
    return _verdict_exit(rep.verdict)


def _cmd_regula(args) -> int:
    problem = load_problem(args.problem)
    f = problem.the_field()
    A = problem.the_set()
    x = problem.the_point()
    p = _blowup_params(args, problem)
    tol = args.tol if args.tol is not None else (
        float(problem.params["tol"]) if "tol" in problem.params else None)
    cert = regula.check_regula(f, A, x, mode=args.mode, p=p, tol=tol)
    tols = {"slack_tol": cert.tol, "angular_tol": p.angular_tol,
            "distance_tol": p.distance_tol, "seed": p.seed}
    print(_header(f"first-order condition ({args.mode})", tols))
    print(f"point: {cert.point.coords.tolist()}")
    print(f"gradient: {cert.gradient.comps.tolist()}")
    print(f"cone: {'exact' if cert.cone.exact else 'sampled'}, "
          f"{len(cert.cone.all_gens())} generators")
    wd = (None if cert.worst_direction is None
          else cert.worst_direction.comps.tolist())
    print(f"worst direction: {wd}")
    print(f"worst value: {_fmt(cert.worst_value)}")
    print(f"verdict: {cert.verdict}")
    payload = cert.to_dict()
    rows = [[cert.verdict, cert.worst_value] + (wd or [])]
    _emit(args.out, args.format, payload, rows,
          ["verdict", "worst_value"] + [f"wd{i+1}" for i in range(len(wd or []))])
    return _verdict_exit(cert.verdict)


def _cmd_props(args) -> int:
    problem = load_problem(args.problem)
    A = problem.the_set()
    x = problem.the_point()
    p = _blowup_params(args, problem)
    rep = cones.cone_property_suite(A, x, None, p)
    print(_header("cone property suite", rep.tolerances))
    rows = []
    for name, sub in rep.details["checks"].items():
        print(f"  {sub.verdict:12s} {name}")
        rows.append([name, sub.verdict])
    print(f"overall: {rep.verdict}")
    payload = rep.to_dict()
    _emit(args.out, args.format, payload, rows, ["property", "verdict"])
    return _verdict_exit(rep.verdict)


def _cmd_counterexample(args) -> int:
    rep = calculus.chain_rule_counterexample()
    print(_header("chain-rule counterexample", rep.tolerances))
    for label, vals in rep.details.items():
        print(f"  v={label}: composite {_fmt(vals['composite'])}, "
              f"chain-rule {_fmt(vals['chain_rule'])}, "
              f"discrepancy {_fmt(vals['discrepancy'])}")
    print(f"verdict: {rep.verdict}")
    rows = [[label, vals["composite"], vals["chain_rule"], vals["discrepancy"]]
            for label, vals in rep.details.items()]
    _emit(args.out, args.format, rep.to_dict(), rows,
          ["direction", "composite", "chain_rule", "discrepancy"])
    return _verdict_exit(rep.verdict)


# ---------------------------------------------------------------------------
# Demo bundle
# ---------------------------------------------------------------------------

def _demo_entries() -> dict:
    """Curated runs; every value is deterministic for the fixed seeds."""
    out: dict = {}
    p = cones.BlowUpParams()

    ball = sets.Ball([0.0, 0.0], 1.0)
    c = cones.upper_tangent_cone(ball, [1.0, 0.0], p)
    G = c.gen_matrix()
    angles = {}
    for label, target in (("inward", (-1.0, 0.0)), ("up", (0.0, 1.0)),
                          ("down", (0.0, -1.0))):
        cosv = np.clip(G @ np.array(target), -1.0, 1.0)
        angles[label] = float(np.arccos(cosv).min())
    out["ball_boundary_cone"] = {
        "generator_count": len(c.gens),
        "max_outward_component": float(G[:, 0].max()),
        "boundary_angles": angles,
        "halfspace_ok": bool(G[:, 0].max() <= p.distance_tol + 1e-12),
    }

    seg1 = sets.HPolyhedron([[1, -1], [-1, 1], [-1, 0], [1, 0]], [0, 0, 0, 1])
    seg2 = sets.HPolyhedron([[1, 1], [-1, -1], [1, 0], [-1, 0]], [0, 0, 0, 1])
    cusp = sets.UnionSet([seg1, seg2])
    cc = cones.upper_tangent_cone(cusp, [0.0, 0.0], p, force_sampled=True)
    Gc = cc.gen_matrix()
    s = 1.0 / np.sqrt(2.0)
    worst = 0.0
    for target in ((s, s), (-s, s)):
        cosv = np.clip(Gc @ np.array(target), -1.0, 1.0)
        worst = max(worst, float(np.arccos(cosv).min()))
    out["cusp_cone"] = {"generator_count": len(cc.gens),
                        "ray_match_worst_angle": worst,
                        "rays_ok": bool(worst <= p.angular_tol)}

    sched = setlimits.default_schedule(8.0, 2.0, 12)
    fam = setlimits.SetFamily(_sin_tail_patch, sched)
    member_in = setlimits.upper_limit_member([0.37], fam, tol=2e-2)
    member_out = setlimits.upper_limit_member([1.2], fam, tol=2e-2)
    ls = setlimits.ls_countable(fam.members(), tol=2e-2, per_set=512, seed=0)
    seg = sets.HPolyhedron([[1.0], [-1.0]], [1.0, 1.0])
    dh = setlimits.hausdorff_distance(ls, seg, density=512, seed=0)
    out["sin_adherence"] = {"in_member": bool(member_in.member),
                            "out_member": bool(member_out.member),
                            "hausdorff_to_interval": float(dh),
                            "interval_ok": bool(dh <= 0.01)}

    square = sets.HPolyhedron([[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 0, 1, 0])
    f = calculus.ScalarField.from_text("x1+x2", 2)
    cert_top = regula.check_regula(f, square, [1.0, 1.0], "max", p)
    cert_bot = regula.check_regula(f, square, [0.0, 0.0], "max", p)
    out["square_regula"] = {
        "at_maximizer": cert_top.verdict,
        "maximizer_worst": float(cert_top.worst_value),
        "at_minimizer": cert_bot.verdict,
        "minimizer_worst": float(cert_bot.worst_value),
    }

    fd = calculus.ScalarField.from_text("x1", 2)
    cert_disk = regula.check_regula(fd, ball, [1.0, 0.0], "max", p)
    out["disk_regula"] = {"verdict": cert_disk.verdict,
                          "worst_value": float(cert_disk.worst_value)}

    cex = calculus.chain_rule_counterexample()
    out["chain_rule"] = {
        "verdict": cex.verdict,
        "diag_discrepancy": float(cex.details["diag"]["discrepancy"]),
        "e1_discrepancy": float(cex.details["e1"]["discrepancy"]),
        "e2_discrepancy": float(cex.details["e2"]["discrepancy"]),
    }

    mv = calculus.mean_value_certificate(calculus.VectorField.builtin("circle"),
                                         0.0, 0.5, 0)
    out["mean_value"] = {"verdict": mv.verdict,
                         "residual": float(mv.details["residual"])}

    geo = sets.PointCloud([[2.0 ** -k] for k in range(0, 46)] + [[0.0]])
    up = cones.upper_tangent_cone(geo, [0.0], p)
    lo = cones.lower_tangent_cone(geo, [0.0], p)
    out["geometric_strict_inclusion"] = {
        "upper_has_ray": bool(any(g.comps[0] > 0.9 for g in up.gens)),
        "lower_gen_count": len(lo.gens),
        "strict": bool(any(g.comps[0] > 0.9 for g in up.gens) and not lo.gens),
    }
    return out


def _sin_tail_patch(lam: float) -> sets.SetRep:
    # {sin(1/x) : 0 < x < 1/lam}, truncated to two trailing periods
    lo = 1.0 / (lam + 4.0 * np.pi)
    hi = 1.0 / lam
    return sets.ParamPatch([exprs.parse("sin(1/x1)", 1)], [[lo, hi]], grid=4096)


_GOLDEN_TOL = {
    "ball_boundary_cone.max_outward_component": 5e-3,
    "ball_boundary_cone.boundary_angles.inward": 5e-3,
    "ball_boundary_cone.boundary_angles.up": 5e-3,
    "ball_boundary_cone.boundary_angles.down": 5e-3,
    "cusp_cone.ray_match_worst_angle": 5e-3,
    "sin_adherence.hausdorff_to_interval": 5e-3,
    "square_regula.maximizer_worst": 1e-9,
    "square_regula.minimizer_worst": 1e-9,
    "disk_regula.worst_value": 5e-3,
    "chain_rule.diag_discrepancy": 1e-6,
    "chain_rule.e1_discrepancy": 1e-6,
    "chain_rule.e2_discrepancy": 1e-6,
    "mean_value.residual": 1e-6,
}


def _flatten(prefix: str, node, out: dict):
    if isinstance(node, dict):
        for k, v in node.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    else:
        out[prefix] = node


def _cmd_demo(args) -> int:
    out_dir = Path(args.out) if args.out else Path("demo_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = _demo_entries()
    for name, values in entries.items():
        (out_dir / f"{name}.json").write_text(
            json.dumps(values, sort_keys=True, indent=2) + "\n")
    (out_dir / "summary.json").write_text(
        json.dumps(entries, sort_keys=True, indent=2) + "\n")
    if args.update_goldens:
        golden_path = Path(__file__).parent / "goldens" / "demo.json"
        golden_path.parent.mkdir(parents=True, exist_ok=True)
        golden_path.write_text(json.dumps(entries, sort_keys=True, indent=2) + "\n")
        print(f"goldens written to {golden_path}")
        return EXIT_PASS
    try:
        golden_text = (resources.files("varigeom") / "goldens" / "demo.json").read_text()
    except FileNotFoundError:
        print("no committed goldens found; run with --update-goldens first")
        return EXIT_INCONCLUSIVE
    golden = json.loads(golden_text)
    got_flat: dict = {}
    want_flat: dict = {}
    _flatten("", entries, got_flat)
    _flatten("", golden, want_flat)
    failures = []
    inconclusive = []
    for key, want in sorted(want_flat.items()):
        got = got_flat.get(key)
        if isinstance(want, (int, bool, str)) or got is None:
            if got != want:
                failures.append((key, want, got))
        else:
            tol = _GOLDEN_TOL.get(key, 1e-9)
            if not (abs(float(got) - float(want)) <= tol):
                failures.append((key, want, got))
    for name, values in entries.items():
        flat: dict = {}
        _flatten(name, values, flat)
        if any(v == INCONCLUSIVE for v in flat.values()):
            inconclusive.append(name)
    print(_header("demo suite", {"entries": len(entries),
                                 "out_dir": str(out_dir)}))
    for name in sorted(entries):
        status = PASS
        if any(k.startswith(name + ".") or k == name for k, _, _ in failures):
            status = FAIL
        elif name in inconclusive:
            status = INCONCLUSIVE
        print(f"  {status:12s} {name}")
    if failures:
        for key, want, got in failures:
            print(f"  diverged: {key}: expected {_fmt(want)}, got {_fmt(got)}")
        return EXIT_FAIL
    if inconclusive:
        return EXIT_INCONCLUSIVE
    print("all demo entries match the committed goldens")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="varigeom",
        description="tangent cones, set limits, and first-order optimality "
                    "certificates")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        if problem:
            sp.add_argument("--problem", required=True, help="problem JSON file")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--angular-tol", dest="angular_tol", type=float,
                        default=None)
        sp.add_argument("--schedule-base", dest="schedule_base", type=float,
                        default=None)
        sp.add_argument("--schedule-len", dest="schedule_len", type=int,
                        default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="machine output path")
        sp.add_argument("--format", choices=["text", "csv", "json-like"],
                        default="json-like")

    sp = sub.add_parser("cone", help="tangent cone at a point")
    sp.add_argument("--rule", choices=["upper", "lower"], default="upper")
    common(sp)
    sp.set_defaults(fn=_cmd_cone)

    sp = sub.add_parser("limit", help="set-limit membership of a point")
    sp.add_argument("--rule", choices=["lim", "liminf"], default="liminf")
    common(sp)
    sp.set_defaults(fn=_cmd_limit)

    sp = sub.add_parser("hausdorff", help="distance between two bounded sets")
    common(sp)
    sp.set_defaults(fn=_cmd_hausdorff)

    sp = sub.add_parser("deriv", help="differentiability check at a point")
    common(sp)
    sp.set_defaults(fn=_cmd_deriv)

    sp = sub.add_parser("regula", help="first-order optimality certificate")
    sp.add_argument("--mode", choices=["max", "min"], default="max")
    common(sp)
    sp.set_defaults(fn=_cmd_regula)

    sp = sub.add_parser("props", help="cone property suite")
    common(sp)
    sp.set_defaults(fn=_cmd_props)

    sp = sub.add_parser("counterexample", help="chain-rule counterexample")
    common(sp, problem=False)
    sp.set_defaults(fn=_cmd_counterexample)

    sp = sub.add_parser("demo", help="curated example suite vs goldens")
    common(sp, problem=False)
    sp.add_argument("--update-goldens", action="store_true")
    sp.set_defaults(fn=_cmd_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0,) else 0
    try:
        return args.fn(args)
    except ProblemFileError as e:
        print(f"problem-file error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
