"""Command-line front end.

Exit codes: 0 success, 1 validation error (bad flags, literals or configs),
2 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import calibrate, dist, hermite, ngca, qfactor, rho, shape, spider


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x, key=str)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(obj):
    """Make floats JSON-safe (inf/nan as strings) before dumping."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def emit(args, payload: dict, text: str | None = None, rows: list[dict] | None = None):
    fmt = getattr(args, "format", "json")
    if fmt == "text" and text is not None:
        out = text if text.endswith("\n") else text + "\n"
    elif fmt == "csv":
        data = rows if rows is not None else [payload]
        buf = io.StringIO()
        keys = list(dict.fromkeys(k for r in data for k in r))
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for r in data:
            writer.writerow({k: json.dumps(_clean(v), default=_fmt) if isinstance(v, (list, dict)) else v
                             for k, v in r.items()})
        out = buf.getvalue()
    else:
        out = json.dumps(_clean(payload), default=_fmt, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)


def _load_structured(path_or_literal: str):
    p = Path(path_or_literal)
    text = p.read_text() if p.exists() else path_or_literal
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON {path_or_literal!r}: {exc}") from None


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    if p.suffix == ".toml":
        try:
            return tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"malformed TOML in {path}: {exc}") from None
    return _load_structured(path)


def _shape(args) -> shape.Shape:
    return shape.Shape.from_json(_load_structured(args.shape))


def _require_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required (all randomness flows from it)")
    return args.seed


# ---------------------------------------------------------------------------
# subcommands


def cmd_hermite(args):
    labels = args.labels
    series = hermite.linearize_product(labels)
    terms = " + ".join(f"h_{t}" if c == 1 else f"{c}*h_{t}" for t, c in series.items())
    payload = {"labels": labels, "series": {str(t): str(c) for t, c in series.items()},
               "bound": hermite.expansion_bound(labels)}
    if args.x is not None:
        payload["values"] = {str(t): hermite.eval_hermite(t, args.x) for t in labels}
    emit(args, payload, text=terms)


def cmd_profile(args):
    T = args.T if args.T is not None else max(2 * args.degree, 3 * (args.dtrunc or 0), 12)
    prof = dist.parse_profile(args.profile, T)
    la = dist.l_a(prof, args.degree)
    payload = {
        "family": prof.family,
        "l": [str(v) if isinstance(v, Fraction) else v for v in prof.l],
        "k_match": prof.k_match,
        "U_A": dist.u_a(prof, T),
        "L_A": la,
    }
    text = "\n".join(f"l{t} = {v}" for t, v in enumerate(prof.l))
    text += f"\nk = {prof.k_match}\nU_A({T}) = {payload['U_A']}\nL_A({args.degree}) = {la}"
    if args.dtrunc is not None:
        cu, cl = dist.cucl(prof, args.degree, args.dtrunc)
        payload.update(C_U=cu, C_L=cl)
        text += f"\nC_U = {cu}\nC_L = {cl}"
    emit(args, payload, text=text)


def cmd_separator(args):
    shp = _shape(args)
    size, left, right = shape.min_square_separator(shp)
    payload = {"size": size, "leftmost": left, "rightmost": right}
    text = f"size {size}\nleftmost {sorted(left, key=str)}\nrightmost {sorted(right, key=str)}"
    if args.n is not None and args.m is not None:
        res = shape.min_weight_separator(shp, args.n, args.m)
        payload["weight_separator"] = {"weight": float(res["weight"]), "leftmost": res["leftmost"],
                                       "rightmost": res["rightmost"]}
        text += f"\nmin weight {float(res['weight'])}"
    emit(args, payload, text=text)


def cmd_decompose(args):
    shp = _shape(args)
    parts = shape.canonical_decomposition(shp)
    payload = {name: p.to_json() for name, p in zip(("left", "middle", "right"), parts)}
    payload["classes"] = {name: shape.classify(p) for name, p in zip(("left", "middle", "right"), parts)}
    emit(args, payload, text=json.dumps({k: payload[k] for k in ("left", "middle", "right")}))


def cmd_spider(args):
    D = args.degree
    if args.mul:
        a, b = (spider.parse_spider(t, D) for t in args.mul)
        result = spider.star(a, b)
    elif args.inverse:
        result = spider.star_inverse(spider.parse_spider(args.inverse, D))
    elif args.transpose:
        result = spider.transpose(spider.parse_spider(args.transpose, D))
    else:
        raise UsageError("spider needs one of --mul, --inverse, --transpose")
    text = spider.format_spider(result)
    if args.format == "text" or args.format is None:
        args.format = "text"
    payload = {"result": text, "predicates": {k: (str(v) if isinstance(v, Fraction) else v)
                                              for k, v in spider.predicates(result, args.k).items()}}
    emit(args, payload, text=text)


def cmd_rho_check(args):
    rng = np.random.default_rng(_require_seed(args))
    D = args.degree
    failures = 0
    for _ in range(args.trials):
        a = spider.random_element(rng, D)
        b = spider.random_element(rng, D)
        if rho.rho(spider.star(a, b)) != rho.rho(a) @ rho.rho(b):
            failures += 1
        if rho.rho(spider.transpose(a)) != rho.rho(a).transpose_conjugated():
            failures += 1
    span = rho.span_dimension(D)
    payload = {"D": D, "pairs": args.trials, "failures": failures, "span_dimension": span,
               "expected_dimension": sum(i * i for i in range(1, D + 2))}
    emit(args, payload, text=f"pairs {args.trials} failures {failures} span {span}")
    return 0 if failures == 0 else 1


def cmd_qss(args):
    T = args.T if args.T is not None else max(3 * args.degree, 3 * (args.dtrunc or 0), 6)
    prof = dist.parse_profile(args.profile, T)
    fact = qfactor.solve_qss(prof, args.degree, args.k, args.dtrunc)
    payload = {"Q_SS": spider.format_spider(fact.Q_SS), "min_eig_rho0": fact.min_eig_rho0,
               "component_min_eigs": fact.component_min_eigs, "certified_bound": fact.certified_bound,
               "C_U": fact.C_U, "C_L": fact.C_L}
    if args.sqrt:
        qfactor.sqrt_alpha0(fact, args.k)
        payload["alpha0"] = spider.format_spider(fact.alpha0)
        payload["alpha0_exact"] = fact.alpha0_exact
    if T >= 6:
        payload["feasibility"] = qfactor.feasibility(prof)
    emit(args, payload, text=payload["Q_SS"])


def _calibration_params(args) -> dict:
    params = {}
    if args.config:
        params.update(_load_config(args.config))
    for key, flag in (("n", "n"), ("m", "m"), ("D", "degree"), ("Dtrunc", "dtrunc"), ("k", "k"),
                      ("profile", "profile")):
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    params["seed"] = _require_seed(args)
    missing = [k for k in ("n", "m", "D", "Dtrunc", "k") if k not in params]
    if missing:
        raise UsageError(f"missing parameters {missing}")
    params.setdefault("profile", "a_mix(0.3)")
    params.setdefault("checks", ["min_eig", "booleanity", "hermite", "expansion"])
    return params


def cmd_calibrate(args):
    p = _calibration_params(args)
    unknown = set(p) - {"n", "m", "D", "Dtrunc", "k", "profile", "seed", "checks"}
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    prof = dist.parse_profile(p["profile"], max(p["Dtrunc"], 2 * p["D"], p["k"]))
    data = ngca.sample_reference(p["n"], p["m"], p["seed"])
    cal = calibrate.Calibration(data, prof, p["Dtrunc"], p["k"])
    report: dict = {"config": p}
    mm = calibrate.moment_matrix(data, prof, p["D"], p["Dtrunc"], p["k"], calibration=cal)
    eigs = np.linalg.eigvalsh(mm.values)
    if "min_eig" in p["checks"]:
        report["min_eig"] = float(eigs[0])
    if "booleanity" in p["checks"]:
        report["booleanity"] = calibrate.booleanity_check(data, prof, p["D"], p["Dtrunc"], p["k"])
    if "hermite" in p["checks"]:
        report["hermite_residuals"] = [calibrate.hermite_test(data, prof, j, p["D"], p["Dtrunc"], p["k"], calibration=cal)
                                       for j in range(1, 2 * p["D"] + 1)]
    if "expansion" in p["checks"]:
        report["expansion_error"] = calibrate.expansion_check(data, prof, p["D"], p["Dtrunc"], p["k"])
    if args.eig_csv:
        Path(args.eig_csv).write_text("index,eigenvalue\n" + "".join(f"{i},{e!r}\n" for i, e in enumerate(eigs)))
    text = "\n".join(f"{k} {v}" for k, v in report.items() if k != "config")
    emit(args, report, text=text)


def cmd_realize(args):
    shp = _shape(args)
    data = ngca.sample_reference(args.n, args.m, _require_seed(args))
    block = calibrate.realize_block(shp, data)
    norm = calibrate.spectral_norm(block)
    anorm, bound = shape.anorm_and_bound(shp, args.n, args.m, args.c_univ)
    payload = {"norm": norm, "anorm": anorm, "theorem_bound": bound, "within_bound": norm <= bound,
               "rows": block.shape[0], "cols": block.shape[1]}
    if args.matrix:
        np.savetxt(args.matrix, block, delimiter=",")
    emit(args, payload, text=f"norm {norm}\nanorm {anorm}\nbound {bound}")


def cmd_experiment(args):
    params = _load_config(args.config) if args.config else {}
    for key, flag in (("n", "n"), ("m", "m"), ("D", "degree"), ("Dtrunc", "dtrunc"), ("k", "k"),
                      ("profile", "profile"), ("trials", "trials")):
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    params["seed"] = _require_seed(args)
    if args.timing:
        params["timing"] = True
    try:
        config = ngca.ExperimentConfig.from_dict(params)
    except TypeError as exc:
        raise UsageError(f"incomplete experiment config: {exc}") from None
    report = ngca.run_experiment(config, jobs=args.jobs)
    if args.format == "csv":
        out = ngca.report_csv(report)
        if args.out:
            Path(args.out).write_text(out)
        else:
            sys.stdout.write(out)
        return 0
    s = report["summary"]
    text = "\n".join(f"{k} {v}" for k, v in s.items())
    emit(args, report, text=text)


# ---------------------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="ngca-sos", description="Pseudo-calibration and spider-algebra toolkit for NGCA lower bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(p, fmt_default="json"):
        p.add_argument("--out", help="write the report to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv", "text"), default=fmt_default, help="output format")

    p = sub.add_parser("hermite", help="linearize a product of Hermite polynomials")
    p.add_argument("labels", nargs="+", type=int, help="degrees of the factors")
    p.add_argument("--x", type=float, help="also evaluate each factor at this point")
    common(p, "text")
    p.set_defaults(func=cmd_hermite)

    p = sub.add_parser("profile", help="Hermite moments and conditioning of a distribution")
    p.add_argument("--profile", required=True, help="profile literal, e.g. 'a_mix(0.3)' or JSON")
    p.add_argument("-D", "--degree", type=int, default=2, help="degree D for L_A(D)")
    p.add_argument("-T", type=int, help="highest Hermite degree to compute (default max(2D, 3*dtrunc, 12))")
    p.add_argument("--dtrunc", type=int, help="truncation degree for C_U and C_L")
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("separator", help="minimum square (and weight) separators of a shape")
    p.add_argument("--shape", required=True, help="shape JSON file or literal")
    p.add_argument("-n", type=int, help="dimension (with -m, also report the minimum weight separator)")
    p.add_argument("-m", type=int, help="sample count")
    common(p, "text")
    p.set_defaults(func=cmd_separator)

    p = sub.add_parser("decompose", help="square canonical decomposition of a shape")
    p.add_argument("--shape", required=True, help="shape JSON file or literal")
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("spider", help="simple spider algebra arithmetic")
    p.add_argument("--mul", nargs=2, metavar=("A", "B"), help="product A * B of two spider literals")
    p.add_argument("--inverse", metavar="A", help="inverse of a spider literal")
    p.add_argument("--transpose", metavar="A", help="transpose of a spider literal")
    p.add_argument("-D", "--degree", type=int, required=True, help="index bound D of the algebra")
    p.add_argument("-k", type=int, help="goodness threshold for the reported predicates")
    common(p, "text")
    p.set_defaults(func=cmd_spider)

    p = sub.add_parser("rho-check", help="check the matrix representation on random pairs")
    p.add_argument("-D", "--degree", type=int, required=True, help="index bound D")
    p.add_argument("--trials", type=int, default=100, help="number of random pairs")
    p.add_argument("--seed", type=int, help="random seed (required)")
    common(p)
    p.set_defaults(func=cmd_rho_check)

    p = sub.add_parser("qss", help="solve for the spider-level matrix Q_SS")
    p.add_argument("--profile", required=True, help="profile literal")
    p.add_argument("-D", "--degree", type=int, required=True, help="degree D")
    p.add_argument("-k", type=int, help="number of matched moments (for goodness checks)")
    p.add_argument("-T", type=int, help="profile degree (default max(3D, 3*dtrunc, 6))")
    p.add_argument("--dtrunc", type=int, help="truncation degree for the certified bound")
    p.add_argument("--sqrt", action="store_true", help="also extract the square root alpha0")
    common(p)
    p.set_defaults(func=cmd_qss)

    def calib_flags(p):
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("-n", type=int, help="dimension")
        p.add_argument("-m", type=int, help="sample count")
        p.add_argument("-D", "--degree", type=int, help="moment matrix degree D")
        p.add_argument("--dtrunc", type=int, help="truncation degree")
        p.add_argument("-k", type=int, help="number of matched moments")
        p.add_argument("--profile", help="profile literal")
        p.add_argument("--seed", type=int, help="random seed (required)")

    p = sub.add_parser("calibrate", help="moment matrix diagnostics on seeded reference data")
    calib_flags(p)
    p.add_argument("--eig-csv", help="write all moment-matrix eigenvalues to this CSV")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("realize", help="realize a graph matrix and compare with its norm bound")
    p.add_argument("--shape", required=True, help="shape JSON file or literal")
    p.add_argument("-n", type=int, required=True, help="dimension")
    p.add_argument("-m", type=int, required=True, help="sample count")
    p.add_argument("--seed", type=int, help="random seed (required)")
    p.add_argument("--c-univ", type=float, default=1.0, help="constant in the polylog factor")
    p.add_argument("--matrix", help="write the realized block to this CSV")
    common(p)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("experiment", help="seeded multi-trial experiment")
    calib_flags(p)
    p.add_argument("--trials", type=int, help="number of trials")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    p.add_argument("--timing", action="store_true", help="record wall-clock time per trial")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        code = args.func(args)
        return 0 if code is None else code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
