"""Command-line entry point.

Every subcommand writes a JSON report (or CSV for enumerations and per-nu
tables) that embeds the configuration and seed it ran with.  Exit codes:
0 when the verdict passes, 2 when it fails, 1 on usage or IO errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import FormvarError

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
TESTS = ("one-convex", "one-affine", "quasi-ineq", "poly-support", "project")
EXPERIMENTS = ("wedge", "telescopic", "dichotomy", "counterexample")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """What a run needs to be reproduced: the command, its inputs and the seed."""

    command: str
    seed: int = 0
    inputs: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return data


def _check_keys(data: dict, allowed: set, where: str):
    extra = set(data) - allowed
    if extra:
        raise UsageError(f"unknown fields in {where}: {sorted(extra)}; allowed: {sorted(allowed)}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _output_path(out: str | None, default_name: str) -> Path | None:
    if out:
        return Path(out)
    base = os.environ.get("FORMVAR_OUT")
    return Path(base) / default_name if base else None


def _emit(text: str, out: str | None, default_name: str, stdout) -> None:
    path = _output_path(out, default_name)
    if path is None:
        stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _finish(cfg: ExperimentConfig, result: dict, passed: bool, out, stdout) -> int:
    report = {"config": cfg.to_dict(), "seed": cfg.seed, "verdict": "pass" if passed else "fail", "result": result}
    _emit(dumps(report), out, f"{cfg.command}.json", stdout)
    return EXIT_PASS if passed else EXIT_FAIL


# combinatorics -------------------------------------------------------------------


def cmd_enumerate(args, stdout) -> int:
    from .wedge_powers import enumerate_alphas

    lo, hi = 1, None
    if args.weights:
        try:
            a, b = args.weights.split("..")
            lo, hi = int(a), (int(b) if b else None)
        except ValueError as exc:
            raise UsageError("--weights expects a..b") from exc
    k = _ints(args.k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "order", "weight", "components"])
    for a in enumerate_alphas(args.n, k, (lo, hi)):
        w.writerow([str(a), a.order, a.weight(k), comb(args.n, a.weight(k))])
    _emit(buf.getvalue(), args.out, "enumerate.csv", stdout)
    return EXIT_PASS


def cmd_tau(args, stdout) -> int:
    from .wedge_powers import tau

    stdout.write(f"{tau(args.n, _ints(args.k))}\n")
    return EXIT_PASS


def cmd_bign(args, stdout) -> int:
    from .wedge_powers import big_n

    stdout.write(f"{big_n(args.n, _ints(args.k))}\n")
    return EXIT_PASS


# convexity -------------------------------------------------------------------------


def _quasi_ineq(spec, seed: int, samples: int, tol):
    from .algebra import FormTuple
    from .convexity import SamplerConfig, bump_fields, quasiconvexity_inequality_test
    from .dec import CubicalGrid

    res = {2: 16, 3: 8}.get(spec.n, 4)
    grid = CubicalGrid(spec.n, res)
    cfg = SamplerConfig(seed=seed, samples=samples)
    rng = cfg.rng(7)
    xi = FormTuple.random(spec.n, spec.k, cfg.rng(3))
    fields = bump_fields(grid, spec.k, rng, count=max(2, min(samples, 16)))
    return quasiconvexity_inequality_test(spec, xi, fields, "inequality", tol)


def cmd_convexity(args, stdout) -> int:
    from .convexity import (
        SamplerConfig,
        polyconvex_support_test,
        project_quasiaffine,
        test_ext_one_affinity,
        test_ext_one_convexity,
    )
    from .integrands import spec_from_dict

    data = _load_json(args.spec)
    try:
        spec = spec_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad integrand in {args.spec}: {exc}") from exc
    cfg = SamplerConfig(seed=args.seed, samples=args.samples)
    tol = args.tol
    conf = ExperimentConfig("convexity", args.seed, {"spec": data}, {"tol": tol},
                            params={"test": args.test, "samples": args.samples})
    if args.test == "project":
        proj = project_quasiaffine(spec, seed=args.seed)
        limit = 1e-8 if tol is None else tol
        return _finish(conf, proj.to_dict(), proj.residual <= limit, args.out, stdout)
    if args.test == "one-convex":
        rep = test_ext_one_convexity(spec, cfg, **({} if tol is None else {"tol": tol}))
    elif args.test == "one-affine":
        rep = test_ext_one_affinity(spec, cfg, **({} if tol is None else {"tol": tol}))
    elif args.test == "poly-support":
        rep = polyconvex_support_test(spec, cfg, **({} if tol is None else {"tol": tol}))
    else:
        rep = _quasi_ineq(spec, args.seed, args.samples, tol)
    return _finish(conf, rep.to_dict(), rep.passes, args.out, stdout)


# exponents ---------------------------------------------------------------------------


def cmd_exponents(args, stdout) -> int:
    from .exponents import analyze, parse_vector

    p = parse_vector(args.p)
    q = parse_vector(args.q) if args.q else None
    rep = analyze(args.n, _ints(args.k), _ints(args.alpha), p, q)
    d = rep.to_dict()
    checks = [d[key] for key in ("sobolev_admissible", "holder_admissible", "very_weak_admissible") if d[key] is not None]
    conf = ExperimentConfig("exponents", 0, params={"n": args.n, "k": args.k, "alpha": args.alpha, "p": args.p, "q": args.q})
    return _finish(conf, d, bool(checks) and all(checks), args.out, stdout)


# hodge ----------------------------------------------------------------------------------


def cmd_hodge(args, stdout) -> int:
    from .dec import Cochain, hodge_decompose

    data = _load_json(args.input)
    try:
        w = Cochain.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad cochain in {args.input}: {exc}") from exc
    split = hodge_decompose(w, args.bc)
    tol = 1e-9 if args.tol is None else args.tol
    checked = ("reconstruction", "exact_coexact", "exact_harmonic", "coexact_harmonic")
    ok = all(split.residuals[key] <= tol for key in checked)
    result = {"exact": split.exact.to_dict(), "coexact": split.coexact.to_dict(), "harmonic": split.harmonic.to_dict(),
              "residuals": split.residuals, "bc": args.bc}
    conf = ExperimentConfig("hodge", 0, {"in": args.input}, {"residual": tol},
                            grid={"n": w.grid.n, "res": w.grid.res, "k": w.k})
    return _finish(conf, result, ok, args.out, stdout)


# weak continuity ---------------------------------------------------------------------


def _table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _psi_weight(name):
    from .weakcont import div_curl_weight

    if name in (None, "one"):
        return None
    if name == "bump":
        return div_curl_weight
    raise UsageError(f"unknown weight {name!r}; expected 'one' or 'bump'")


def _weakcont_wedge(c: dict):
    from .weakcont import SequenceRecipe, bump_test_form, direct_wedge_eval, generate, slot_spread, weak_wedge_eval

    _check_keys(c, {"recipe", "alpha", "nus", "tol"}, "wedge config")
    recipe = SequenceRecipe.from_dict(c["recipe"])
    alpha = tuple(c.get("alpha", (1,) * len(recipe.k)))
    tol = float(c.get("tol", 1e-6))
    deg = sum(a * ki for a, ki in zip(alpha, recipe.k))
    psi = bump_test_form(recipe.grid, deg)
    rows = []
    for nu in c.get("nus", [1, 2, 4]):
        term = generate(recipe, nu)
        spread, _ = slot_spread(term.omegas, alpha, psi)
        rows.append({"nu": float(nu), "weak": weak_wedge_eval(term.omegas, alpha, psi),
                     "direct": direct_wedge_eval(term.omegas, alpha, psi), "slot_spread": spread})
    ok = all(r["slot_spread"] <= tol for r in rows)
    return {"table": rows}, ok, rows


def _weakcont_telescopic(c: dict, seed: int):
    from .acceptance import _pairs
    from .dec import CubicalGrid
    from .weakcont import bump_test_form, random_pair_recipes, telescopic_check

    _check_keys(c, {"n", "res", "k", "alpha", "p", "train", "held_out", "safety"}, "telescopic config")
    n, res = int(c.get("n", 2)), int(c.get("res", 32))
    k = tuple(c.get("k", (1, 1)))
    alpha = tuple(c.get("alpha", (1,) * len(k)))
    p = tuple(c.get("p", (2,) * len(k)))
    deg = sum(a * ki for a, ki in zip(alpha, k))
    psi = bump_test_form(CubicalGrid(n, res), deg)
    training = _pairs(random_pair_recipes(np.random.default_rng(seed), n, res, k, int(c.get("train", 30))))
    calib = telescopic_check(training[:1], alpha, psi, p, training=training, safety=float(c.get("safety", 1.5)))
    test = _pairs(random_pair_recipes(np.random.default_rng(seed + 1), n, res, k, int(c.get("held_out", 100))))
    rep = telescopic_check(test, alpha, psi, p, constant=calib.constant)
    rep.training_ratios = calib.training_ratios
    rows = [{"pair": j, "ratio": r} for j, r in enumerate(rep.ratios)]
    return rep.to_dict(), rep.verdict == "passes", rows


def _weakcont_dichotomy(c: dict):
    from .integrands import QuasiaffineCombo, spec_from_dict
    from .weakcont import SequenceRecipe, weak_continuity_experiment

    _check_keys(c, {"recipe", "integrand", "nus", "tol", "weight", "expect"}, "dichotomy config")
    recipe = SequenceRecipe.from_dict(c["recipe"])
    spec = spec_from_dict(c["integrand"])
    rep = weak_continuity_experiment(recipe, spec, _psi_weight(c.get("weight")), tuple(c.get("nus", (1, 2, 4, 8))),
                                     float(c.get("tol", 0.1)))
    expect = c.get("expect", "converges" if isinstance(spec, QuasiaffineCombo) else "does-not-converge")
    out = rep.to_dict()
    out["expected"] = expect
    return out, rep.verdict == expect, rep.table()


def _weakcont_counterexample(c: dict):
    from .weakcont import closed_nonconvergent_recipe, semicontinuity_counterexample

    _check_keys(c, {"p", "amplitude", "res", "nus", "k"}, "counterexample config")
    recipe = closed_nonconvergent_recipe(int(c.get("res", 64)), float(c.get("amplitude", 1.0)), 2, int(c.get("k", 2)))
    rep = semicontinuity_counterexample(float(c.get("p", 2.0)), recipe, tuple(c.get("nus", (1, 2, 4, 8))))
    rows = [{"nu": n, "energy": e} for n, e in zip(rep.nus, rep.energies)]
    return rep.to_dict(), rep.verdict == "fails-lsc", rows


def cmd_weakcont(args, stdout) -> int:
    data = _load_json(args.config) if args.config else {}
    seed = int(data.pop("seed", args.seed))
    try:
        if args.experiment == "wedge":
            result, ok, rows = _weakcont_wedge(data)
        elif args.experiment == "telescopic":
            result, ok, rows = _weakcont_telescopic(data, seed)
        elif args.experiment == "dichotomy":
            result, ok, rows = _weakcont_dichotomy(data)
        else:
            result, ok, rows = _weakcont_counterexample(data)
    except KeyError as exc:
        raise UsageError(f"missing config field {exc}") from exc
    if args.table:
        Path(args.table).write_text(_table_csv(rows))
    conf = ExperimentConfig("weakcont", seed, {"config": args.config}, params={"experiment": args.experiment, **data})
    return _finish(conf, result, ok, args.out, stdout)


# minimization --------------------------------------------------------------------------

PROBLEM_KEYS = {"n", "res", "integrand", "omega0", "g", "G", "zeroth_order", "constant", "pinning", "gauge",
                "gtol", "maxiter", "include_minimizer"}


def problem_from_dict(d: dict):
    """Build a VariationalProblem; boundary data and fields are component maps sampled on the grid."""
    from .dec import CubicalGrid, sample_form
    from .integrands import spec_from_dict
    from .minimization import VariationalProblem

    _check_keys(d, PROBLEM_KEYS, "problem")
    spec = spec_from_dict(d["integrand"])
    grid = CubicalGrid(int(d.get("n", spec.n)), int(d["res"]))

    def sampled(name, shift):
        if d.get(name) is None:
            return None
        vals = d[name]
        if len(vals) != len(spec.k):
            raise UsageError(f"{name} needs one entry per factor")
        return tuple(sample_form(grid, comps, ki - shift) for comps, ki in zip(vals, spec.k))

    return VariationalProblem(grid, spec, sampled("omega0", 1) or (), sampled("g", 1), None, sampled("G", 0),
                              float(d.get("zeroth_order", 0.0)), float(d.get("constant", 0.0)),
                              d.get("pinning", "tangential"))


def cmd_minimize(args, stdout) -> int:
    from .minimization import minimize

    data = _load_json(args.problem)
    try:
        pb = problem_from_dict(data)
    except KeyError as exc:
        raise UsageError(f"missing problem field {exc}") from exc
    rep = minimize(pb, args.method, gauge=bool(data.get("gauge", False)), gtol=float(data.get("gtol", 1e-8)),
                   maxiter=int(data.get("maxiter", 5000)))
    conf = ExperimentConfig("minimize", 0, {"problem": data}, {"gtol": float(data.get("gtol", 1e-8))},
                            grid={"n": pb.grid.n, "res": pb.grid.res}, params={"method": args.method})
    return _finish(conf, rep.to_dict(bool(data.get("include_minimizer", False))), rep.converged, args.out, stdout)


# acceptance ------------------------------------------------------------------------------


def cmd_verify_all(args, stdout) -> int:
    from .acceptance import run_all

    only = set(_ints(args.only)) if args.only else None
    results = run_all(only)
    for c in results:
        print(c.line(), file=sys.stderr)
    # timings vary run to run, so they stay out of the report
    rows = []
    for c in results:
        d = c.to_dict()
        d.pop("seconds")
        rows.append(d)
    conf = ExperimentConfig("verify-all", 0, params={"only": sorted(only) if only else None})
    return _finish(conf, {"criteria": rows}, all(c.passed for c in results), args.out, stdout)


# parser ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="formvar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def nk(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--k", required=True, help="degrees, e.g. 1,1")

    p = sub.add_parser("enumerate", help="nontrivial multiindices as CSV")
    nk(p)
    p.add_argument("--weights", help="range a..b of |k alpha|")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("tau", help="length of T(xi)")
    nk(p)
    p.set_defaults(func=cmd_tau)
    p = sub.add_parser("bign", help="largest nontrivial order")
    nk(p)
    p.set_defaults(func=cmd_bign)

    p = sub.add_parser("convexity", help="sampled convexity checks on an integrand JSON")
    p.add_argument("--spec", required=True)
    p.add_argument("--test", choices=TESTS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_convexity)

    p = sub.add_parser("exponents", help="exact exponent admissibility")
    nk(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--p", required=True, help="comma-separated, p/q and inf allowed")
    p.add_argument("--q")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("hodge", help="discrete Hodge decomposition of a cochain JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--bc", choices=("tangential-zero", "free"), default="tangential-zero")
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hodge)

    p = sub.add_parser("weakcont", help="weak continuity experiments")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", help="also write the per-nu table as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weakcont)

    p = sub.add_parser("minimize", help="direct-method minimization of a problem JSON")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=("linear", "descent"), default="descent")
    p.add_argument("--out")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("verify-all", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_all)
    ap.subcommands = sub.choices
    return ap


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args, stdout)
    except UsageError as exc:
        print(f"formvar {args.command}: {exc}", file=sys.stderr)
        parser.subcommands[args.command].print_help(sys.stderr)
        return EXIT_ERROR
    except (OSError, FormvarError, ValueError) as exc:
        print(f"formvar {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
