"""Benchmark runner: ``rqlp-bench {table,track,gen,verify-bounds}``.

Options can also come from a flat ``key = value`` file passed with
``--config``; command-line flags win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, testmat
from .linalg import ConfigError, ShapeError, singular_values, write_csv
from .qlp import SketchConfig, brqlp, erqlp, pivoted_qlp, rqlp

log = logging.getLogger("rqlp.bench")


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _matrix(args, n: int) -> np.ndarray:
    return testmat.make_matrix(args.family, n, t=args.t, s=args.s,
                               seed=args.matrix_seed, kappa=args.kappa)


def _true_sv(args, n: int, a: np.ndarray) -> np.ndarray:
    if args.family in testmat.DEFAULT_SPECTRUM:
        t0, s0 = testmat.DEFAULT_SPECTRUM[args.family]
        spec = testmat.SpectrumSpec(n, args.family, t0 if args.t is None else args.t,
                                    s0 if args.s is None else args.s, args.matrix_seed)
        return testmat.spectrum(spec)
    return singular_values(a)


def _seeds(args) -> list[int]:
    if args.seed_list is not None:
        return args.seed_list
    return list(range(1, args.trials + 1))


def _timed(fn, reps: int):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def _algorithms(args):
    """(label, seeded?, factory(seed)) for every requested algorithm."""
    algos = [("qlp", False, lambda a, seed: pivoted_qlp(a))]
    algos.append(("rqlp", True, lambda a, seed: rqlp(a, SketchConfig(args.k, args.p, seed=seed))))
    for d in args.d:
        algos.append((f"erqlp_d{d}", True,
                      lambda a, seed, d=d: erqlp(a, SketchConfig(args.k, args.p, d=d, seed=seed))))
    if args.b is not None:
        algos.append((f"brqlp_b{args.b}", True,
                      lambda a, seed: brqlp(a, SketchConfig(args.k, args.p, b=args.b, seed=seed))))
    return algos


def _fmt(x: float) -> str:
    return f"{x:.6e}"


def run_table(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"table_{args.family}.csv"
    rows = []
    for n in args.n:
        a = _matrix(args, n)
        sv = _true_sv(args, n, a)
        for label, seeded, make in _algorithms(args):
            errs, times = [], []
            for seed in _seeds(args) if seeded else [None]:
                f, t = _timed(lambda: make(a, seed), args.reps)
                e = analysis.err_metric(sv, f, args.k)
                errs.append(e)
                times.append(t)
                rows.append([n, label, "-" if seed is None else seed, _fmt(t), _fmt(e)])
                log.info("n=%d %s seed=%s time=%.3fs err=%.3e", n, label, seed, t, e)
            rows.append([n, label, "median", _fmt(statistics.median(times)),
                         _fmt(statistics.median(errs))])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "algorithm", "seed", "time_s", "err"])
        w.writerows(rows)
    return path


def run_tracking(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    summary = {}
    for n in args.n:
        a = _matrix(args, n)
        sv = _true_sv(args, n, a)
        for seed in _seeds(args):
            cfg = SketchConfig(args.k, args.p, d=args.d[0], seed=seed)
            rep = analysis.track_report(a, args.k, cfg=cfg, true_sv=sv)
            path = out / f"track_{args.family}_n{n}_s{seed}.csv"
            rep.write_csv(path)
            paths.append(path)
            summary[f"n{n}_s{seed}"] = rep.summary()
    (out / f"track_{args.family}.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths


def run_gen(args) -> None:
    params = {}
    for item in args.params:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key] = value
    known = {"t": int, "s": _real, "seed": int, "kappa": float}
    unknown = set(params) - set(known)
    if unknown:
        raise ConfigError(f"unknown parameter(s) {', '.join(sorted(unknown))}")
    kw = {key: known[key](v) for key, v in params.items()}
    a = testmat.make_matrix(args.family, args.size, **kw)
    if args.out in (None, "-"):
        np.savetxt(sys.stdout, a, fmt="%.17g", delimiter=",")
    else:
        write_csv(args.out, a)


def _real(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def run_verify_bounds(args) -> bool:
    """Monte-Carlo check of the expected Frobenius bound plus per-seed bound reports."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    report = {}
    for n in args.n:
        a = _matrix(args, n)
        sv = _true_sv(args, n, a)
        bound = analysis.frobenius_bound(sv, args.k, args.p)
        residuals, per_seed = [], []
        for seed in _seeds(args):
            f = rqlp(a, SketchConfig(args.k, args.p, seed=seed))
            residuals.append(f.residual(a))
            rb = analysis.rqlp_bound(sv, f.info["reduced"], f.l_factor, args.k, args.p)
            g = erqlp(a, SketchConfig(args.k, args.p, d=args.d[0], seed=seed))
            eb = analysis.erqlp_bound(sv, g.info["reduced"], g.info["r_factors"], args.k, args.d[0])
            per_seed.append({"seed": seed, "residual": residuals[-1],
                             "rqlp_bound": _jsonable(rb.to_dict()),
                             "erqlp_bound": _jsonable(eb.to_dict())})
        mean = float(np.mean(residuals))
        mean_ok = mean <= bound
        seed_ok = max(residuals) <= 3.0 * bound
        ok &= mean_ok and seed_ok
        print(f"{'PASS' if mean_ok else 'FAIL'} {args.family} n={n}: mean residual "
              f"{mean:.4e} <= bound {bound:.4e}")
        print(f"{'PASS' if seed_ok else 'FAIL'} {args.family} n={n}: max residual "
              f"{max(residuals):.4e} <= 3 x bound")
        report[f"n{n}"] = {"bound": bound, "mean_residual": mean, "pass": mean_ok and seed_ok,
                           "seeds": per_seed}
    (out / f"bounds_{args.family}.json").write_text(
        json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return ok


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    return obj


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=testmat.FAMILIES, default="pds")
    p.add_argument("--n", type=_int_list, default=[400], help="matrix size(s), comma separated")
    p.add_argument("--k", type=int, default=60, help="target rank")
    p.add_argument("--p", type=int, default=5, help="oversampling")
    p.add_argument("--d", type=_int_list, default=[2, 4], help="ERQLP inner iterations")
    p.add_argument("--b", type=int, default=None, help="BRQLP block size (adds a BRQLP column)")
    p.add_argument("--trials", type=int, default=20, help="seeds 1..trials unless --seed-list")
    p.add_argument("--seed-list", type=_int_list, default=None, help="e.g. 1,2,3 or 1..20")
    p.add_argument("--matrix-seed", type=int, default=0, help="seed for pds/eds factors")
    p.add_argument("--t", type=int, default=None, help="pds/eds plateau length")
    p.add_argument("--s", type=_real, default=None, help="pds/eds decay rate")
    p.add_argument("--kappa", type=float, default=1.0, help="heat diffusivity")
    p.add_argument("--reps", type=int, default=5, help="timing repetitions (median)")
    p.add_argument("--out", default="results", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqlp-bench", description=__doc__)
    parser.add_argument("--config", help="flat key = value file of defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="time and err per (n, algorithm, seed)")
    _add_experiment_flags(p)
    p = sub.add_parser("track", help="per-j singular values vs R-/L-values")
    _add_experiment_flags(p)
    p = sub.add_parser("verify-bounds", help="Monte-Carlo check of the expected Frobenius bound")
    _add_experiment_flags(p)

    p = sub.add_parser("gen", help="write a test matrix as CSV")
    p.add_argument("family", choices=testmat.FAMILIES)
    p.add_argument("size", type=int)
    p.add_argument("params", nargs="*", help="t=30 s=2 seed=0 kappa=1")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    subparsers = [sp for action in parser._subparsers._group_actions
                  for sp in action.choices.values()]
    dests = {sp: {a.dest for a in sp._actions} for sp in subparsers}
    bad = set(values) - set().union(*dests.values())
    if bad:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(bad))}")
    for sp in subparsers:
        sp.set_defaults(**{k: v for k, v in values.items() if k in dests[sp]})


def _check(args) -> None:
    if getattr(args, "trials", 1) < 1:
        raise ConfigError("--trials must be >= 1")
    if hasattr(args, "k"):
        for n in args.n:
            SketchConfig(args.k, args.p).check((n, n))
            if args.b is not None and (args.k + args.p) % args.b:
                raise ConfigError(f"--b {args.b} does not divide k + p = {args.k + args.p}")
            if args.family == "phillips" and n % 4:
                raise ConfigError(f"phillips needs n divisible by 4, got {n}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(message)s")
        _check(args)
        if args.command == "table":
            print(run_table(args))
        elif args.command == "track":
            for path in run_tracking(args):
                print(path)
        elif args.command == "gen":
            run_gen(args)
        elif args.command == "verify-bounds":
            return 0 if run_verify_bounds(args) else 1
    except (ConfigError, ShapeError, analysis.HypothesisError, OSError) as exc:
        print(f"rqlp-bench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
