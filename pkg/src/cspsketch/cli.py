"""Command-line entry point: ``cspsketch <subcommand> [flags]``.

Every subcommand prints (or writes with ``--out``) a JSON run report
{command, params, results, seed, runtime_ms}.  Exit codes: 0 success,
2 validation or usage error, 3 unsupported predicate, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import algorithms, alpha as alpha_mod, instance as inst_mod, padded
from .errors import InvalidWitnessError, OracleRefusal, UnsupportedPredicateError, ValidationError
from .predicates import SymmetricDist, make_predicate
from .sketch import L1Sketch

SEED_ENV = "CSPSKETCH_SEED"
EXIT_OK, EXIT_USAGE, EXIT_UNSUPPORTED, EXIT_IO = 0, 2, 3, 4


@dataclass
class RunReport:
    command: str
    params: dict
    results: dict
    seed: int
    runtime_ms: int = 0
    tables: dict = field(default_factory=dict)  # name -> list of row dicts, written as CSV

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "results": self.results,
                "seed": self.seed, "runtime_ms": self.runtime_ms}

    def to_json(self, timing: bool = True) -> str:
        d = self.to_dict()
        if not timing:
            d.pop("runtime_ms")
        return json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, SymmetricDist):
        return x.tolist()
    return x


def _strip_timing(x):
    # nested timings would break byte-identical reruns
    if isinstance(x, dict):
        return {k: _strip_timing(v) for k, v in x.items() if k != "runtime_ms"}
    if isinstance(x, list):
        return [_strip_timing(v) for v in x]
    return x


def _flatten_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            out[k] = " ".join(repr(float(a)) for a in v)
        else:
            out[k] = v
    return out


def write_report(report: RunReport, path: str, csv_path: Optional[str] = None,
                 timing: bool = True) -> list:
    """Write the JSON report to ``path`` and each side table as CSV; returns paths written."""
    written = []
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json(timing))
    written.append(path)
    for name, rows in report.tables.items():
        if not rows:
            continue
        if csv_path and len(report.tables) == 1:
            target = csv_path
        else:
            base = csv_path or os.path.splitext(path)[0]
            target = f"{os.path.splitext(base)[0]}.{name}.csv"
        write_csv(rows, target)
        written.append(target)
    return written


def write_csv(rows: list, path: str) -> None:
    flat = [_flatten_row(r) for r in rows]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(flat[0].keys()))
        w.writeheader()
        w.writerows(flat)


# ------------------------------------------------------------ arg helpers


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _spec(args):
    if args.S is None:
        raise ValidationError("--S is required")
    return make_predicate(args.k, args.S)


def _cert_p(spec, p_star):
    if p_star is not None:
        return p_star
    cf = alpha_mod.closed_form_alpha(spec)
    if cf is not None:
        return cf.p_star
    return alpha_mod.alpha_numeric(spec).witness_p


# ------------------------------------------------------------- commands


def cmd_alpha(args, seed):
    spec = _spec(args)
    cf = alpha_mod.closed_form_alpha(spec)
    tables = {}
    numeric = None
    if not args.no_numeric or cf is None:
        numeric = alpha_mod.alpha_numeric(spec, grid=args.grid, threads=args.threads)
        tables["scan"] = numeric.notes["scan"]
    if cf is not None:
        cert = alpha_mod.verify_max_min(spec, cf.dist, cf.p_star)
        res = cert.to_dict()
        res["alpha"] = cf.alpha
        res["method"] = "closed_form"
        res["family"] = cf.family
        res["certified_alpha"] = cert.alpha
    else:
        res = numeric.to_dict()
        res.pop("scan")
    res["grid"] = args.grid
    if numeric is not None:
        res["numeric"] = {"alpha": numeric.alpha, "mu_star": numeric.notes["mu_star"],
                          "witness": {"masses": numeric.witness_dist.tolist(), "p_star": numeric.witness_p},
                          "skipped_mu": numeric.notes["skipped_mu"]}
        if cf is not None:
            res["numeric"]["abs_diff"] = abs(numeric.alpha - cf.alpha)
    res["predicate"] = {"k": spec.k, "S": sorted(spec.S), "rho": spec.rho}
    return res, tables


def cmd_verify(args, seed):
    if args.family:
        spec = alpha_mod.family_spec(args.family, args.k)
    else:
        spec = _spec(args)
    cf = alpha_mod.closed_form_alpha(spec)
    if args.masses is not None:
        dist, p = args.masses, args.p_star
        if p is None:
            p = float(alpha_mod.beta(spec, dist)[1])
    elif cf is not None:
        dist, p = cf.dist, cf.p_star if args.p_star is None else args.p_star
    elif args.family == "ex-mid":
        # beyond the catalogued range: check the same witness shape anyway
        k = spec.k
        dist = [(k - 1) / (2 * k)] + [0.0] * (k - 1) + [(k + 1) / (2 * k)]
        p = alpha_mod.ex_mid_p(k) if args.p_star is None else args.p_star
    else:
        raise ValidationError("no catalogued witness; pass --masses (and optionally --p-star)")
    cert = alpha_mod.verify_max_min(spec, dist, p)
    res = cert.to_dict()
    res["predicate"] = {"k": spec.k, "S": sorted(spec.S), "rho": spec.rho}
    if cf is not None:
        res["closed_form_alpha"] = cf.alpha
    return res, {"vertices": res["vertex_report"]}


def cmd_support2(args, seed):
    spec = _spec(args)
    r = alpha_mod.support2_search(spec, resolution=args.resolution, dist=args.masses)
    return {"masses": r.dist.tolist(), "lower": r.lower, "upper": r.upper, "p_star": r.p_star,
            "verified": r.verified, "predicate": {"k": spec.k, "S": sorted(spec.S)}}, {}


def cmd_padded_search(args, seed):
    spec = _spec(args)
    r = padded.padded_search(spec, resolution=args.resolution)
    res = r.to_dict()
    res["predicate"] = {"k": spec.k, "S": sorted(spec.S)}
    return res, {}


def cmd_padded_check(args, seed):
    spec = _spec(args)
    dy, dn = SymmetricDist(args.dy), SymmetricDist(args.dn)
    dec = padded.padded_decompose(dy, dn)
    res = {"DY": dy.tolist(), "DN": dn.tolist(), "padded": dec is not None,
           "decomposition": dec.to_dict() if dec else None,
           "ratio": padded.pair_ratio(spec, dy, dn),
           "predicate": {"k": spec.k, "S": sorted(spec.S)}}
    return res, {}


def cmd_uniqueness(args, seed):
    return alpha_mod.uniqueness_scan_3and(grid=args.grid, ball=args.ball, threads=args.threads), {}


def cmd_gen(args, seed):
    dist = args.dist
    inst = inst_mod.generate_instance(args.kind, args.k, n=args.n, m=args.m, seed=seed,
                                      dist=dist, weighted=args.weighted)
    text = inst_mod.serialize_instance(inst)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    res = {"n": inst.n, "k": inst.k, "m": inst.m, "total_weight": inst.total_weight,
           "output": args.output}
    if not args.output:
        res["instance"] = text
    return res, {}


def cmd_solve(args, seed):
    spec = _spec(args)
    inst = inst_mod.read_instance(args.input)
    val, sigma = inst_mod.exact_value(inst, spec)
    diff, bias = inst_mod.diff_and_bias(inst)
    return {"value": val, "assignment": sigma.tolist(), "bias": bias,
            "sym_dist": inst_mod.sym_dist(inst).tolist(), "n": inst.n, "m": inst.m}, {}


def _stream_file(path):
    fh = open(path, encoding="utf-8")
    it = inst_mod.iter_constraints(fh)
    try:
        n, k, m = next(it)
    except Exception:
        fh.close()
        raise
    return fh, (n, k, m), it


def cmd_estimate(args, seed):
    spec = _spec(args)
    if not spec.is_threshold:
        raise UnsupportedPredicateError(f"{spec.label()} is not a threshold predicate")
    a = algorithms.predicate_alpha(spec)
    estimates = []
    for r in range(args.repeats):
        fh, (n, k, m), it = _stream_file(args.input)
        with fh:
            if k != spec.k:
                raise ValidationError(f"instance arity {k} does not match --k {spec.k}")
            estimates.append(algorithms.estimate_value(it, spec, args.epsilon, seed + r, n=n, alpha=a))
    vals = [e.value for e in estimates]
    first = estimates[0].to_dict()
    res = {"value": float(np.median(vals)), "runs": vals, "repeats": args.repeats,
           "alpha": a, "delta": first["delta"], "rows": first["rows"],
           "bias_estimates": [e.bias_estimate for e in estimates],
           "total_weight": first["total_weight"], "constraints": first["constraints"]}
    return res, {}


def cmd_round(args, seed):
    spec = _spec(args)
    if not spec.is_threshold:
        raise UnsupportedPredicateError(f"{spec.label()} is not a threshold predicate")
    inst = inst_mod.read_instance(args.input)
    p = _cert_p(spec, args.p_star)
    sigma = algorithms.round_assignment(inst, spec, p, seed)
    res = {"p_star": p, "assignment": sigma.tolist(),
           "value": inst_mod.eval_assignment(inst, spec, sigma),
           "expected_value": algorithms.rounding_expectation(inst, spec, p),
           "majority": inst_mod.majority(inst).tolist()}
    if args.samples > 0:
        rng = np.random.default_rng(seed)
        a = np.where(rng.random((args.samples, inst.n)) < p, 1, -1).astype(np.int8)
        vals = inst_mod.eval_many(inst, spec, a * inst_mod.majority(inst))
        res["mc_mean"] = float(vals.mean())
        res["mc_stderr"] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return res, {}


def _read_updates(path):
    ups = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"line {lineno}: expected '<index> <delta>'")
            try:
                ups.append((int(parts[0]), float(parts[1])))
            except ValueError:
                raise ValidationError(f"line {lineno}: expected '<index> <delta>'") from None
    return ups


def cmd_sketch(args, seed):
    if args.vector is not None:
        ups = [(i, v) for i, v in enumerate(args.vector) if v != 0]
        n = args.n or max(len(args.vector), 1)
    elif args.input:
        ups = _read_updates(args.input)
        n = args.n or (max((i for i, _ in ups), default=0) + 1)
    else:
        raise ValidationError("pass --vector or --input")
    shards = max(1, args.shards)
    parts = [L1Sketch(n, args.epsilon, seed) for _ in range(shards)]
    for t, (i, d) in enumerate(ups):
        parts[t * shards // max(len(ups), 1)].update(i, d)
    merged = parts[0]
    for s in parts[1:]:
        merged = merged.merge(s)
    x = np.zeros(n)
    for i, d in ups:
        x[i] += d
    return {"estimate": merged.estimate(), "l1_exact": float(np.abs(x).sum()), "rows": merged.rows,
            "n": n, "updates": len(ups), "shards": shards}, {}


def cmd_table(args, seed):
    rows = []
    ks = range(2, args.kmax + 1)
    for k in ks:
        try:
            spec = alpha_mod.family_spec(args.family, k)
        except ValidationError:
            continue
        cf = alpha_mod.closed_form_alpha(spec)
        if cf is None:
            continue
        two_rho = 2 * spec.rho
        rows.append({"k": k, "alpha": cf.alpha, "two_rho": two_rho, "ratio": cf.alpha / two_rho})
    if not rows:
        raise ValidationError(f"no catalogued entries for {args.family} up to k={args.kmax}")
    return {"family": args.family, "rows": rows}, {"table": rows}


# ---------------------------------------------------------------- parser


COMMANDS = {
    "alpha": (cmd_alpha, "Optimal sketching approximation ratio alpha(f_{S,k}) via closed forms and the "
                         "numeric beta_{S,k}/gamma_{S,k} minimisation."),
    "verify": (cmd_verify, "Max-min certification of a saddle-point witness (D_N*, p*) by checking every "
                           "vertex inequality of the piecewise-linear gamma regions."),
    "support2": (cmd_support2, "Search over witnesses supported on two Hamming weights; reports max-min "
                               "lower and upper bounds on alpha."),
    "padded-search": (cmd_padded_search, "Search padded one-wise pairs (D_Y, D_N) minimising "
                                         "beta_S(D_N)/gamma_S(D_Y), the streaming lower-bound ratio."),
    "padded-check": (cmd_padded_check, "Decompose a pair into a shared padding tau*D_0 plus zero-marginal "
                                       "residuals and report its ratio."),
    "uniqueness-3and": (cmd_uniqueness, "Lattice scan of the 3AND ratio over the simplex, confirming the "
                                        "unique minimiser (0,0,1,0) with value 2/9."),
    "gen": (cmd_gen, "Generate a Max-CSP instance (random_uniform, planted_dist or canonical)."),
    "solve": (cmd_solve, "Exhaustive oracle for val_Psi (n <= 24), plus bias and the symmetric "
                         "pattern distribution D^sym."),
    "estimate": (cmd_estimate, "Single-pass bias-based value estimate for threshold predicates using an "
                               "l1 sketch of the diff vector."),
    "round": (cmd_round, "Bias-based randomized rounding: majority assignment with each coordinate kept "
                         "with probability p*."),
    "sketch-l1": (cmd_sketch, "Mergeable Cauchy l1 sketch of a turnstile vector; optionally split into "
                              "shards and merged."),
    "table": (cmd_table, "CSV table of closed-form alpha against 2*rho for a predicate family."),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cspsketch", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--csv", help="path for the CSV side table")
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for grid scans (results do not depend on it)")
    common.add_argument("--no-timing", action="store_true", help="omit runtime_ms from the report")

    def add(name):
        fn, text = COMMANDS[name]
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        p.set_defaults(func=fn)
        return p

    def pred(p, required=True):
        p.add_argument("--k", type=int, required=required, help="arity")
        p.add_argument("--S", type=_int_list, required=False, help="accepted Hamming weights, e.g. 3,4")

    p = add("alpha")
    pred(p)
    p.add_argument("--grid", type=int, default=200, help="marginal grid size for the numeric path")
    p.add_argument("--no-numeric", action="store_true", help="skip the numeric cross-check")

    p = add("verify")
    pred(p)
    p.add_argument("--family", choices=["kand", "th-k-1", "ex-mid"])
    p.add_argument("--masses", type=_float_list, help="witness D_N* as k+1 masses")
    p.add_argument("--p-star", type=float, help="witness bias p*")

    p = add("support2")
    pred(p)
    p.add_argument("--resolution", type=int, default=400)
    p.add_argument("--masses", type=_float_list, help="evaluate this witness instead of searching")

    p = add("padded-search")
    pred(p)
    p.add_argument("--resolution", type=int, default=200)

    p = add("padded-check")
    pred(p)
    p.add_argument("--dy", type=_float_list, required=True, help="yes distribution masses")
    p.add_argument("--dn", type=_float_list, required=True, help="no distribution masses")

    p = add("uniqueness-3and")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--ball", type=float, default=0.05, help="l1 radius excluded around (0,0,1,0)")

    p = add("gen")
    p.add_argument("--kind", choices=["random_uniform", "planted_dist", "canonical"], default="random_uniform")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--dist", type=_float_list, help="pattern-weight distribution for planted/canonical")
    p.add_argument("--weighted", action="store_true", help="draw weights from U[0.5, 2]")
    p.add_argument("--output", help="instance file to write")

    p = add("solve")
    pred(p)
    p.add_argument("--input", required=True)

    p = add("estimate")
    pred(p)
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--repeats", type=int, default=1, help="median of this many independent seeds")

    p = add("round")
    pred(p)
    p.add_argument("--input", required=True)
    p.add_argument("--p-star", type=float, help="bias p* (default: certified witness for S)")
    p.add_argument("--samples", type=int, default=0, help="also report a Monte Carlo mean over this many draws")

    p = add("sketch-l1")
    p.add_argument("--vector", type=_float_list, help="dense vector, comma separated")
    p.add_argument("--input", help="file of '<index> <delta>' updates (0-based)")
    p.add_argument("--n", type=int, help="dimension (default: inferred)")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--shards", type=int, default=1, help="split the stream and merge the shard sketches")

    p = add("table")
    p.add_argument("--family", choices=["kand", "th-k-1", "ex-mid"], required=True)
    p.add_argument("--kmax", type=int, default=10)
    return ap


def _params(args) -> dict:
    skip = {"func", "out", "csv", "threads", "no_timing", "seed", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run_command(argv) -> RunReport:
    """Parse ``argv`` and execute; raises the package errors (see :func:`main` for exit codes)."""
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        raise ValidationError("--threads must be positive")
    seed = args.seed if args.seed is not None else _default_seed()
    t0 = time.perf_counter()
    results, tables = args.func(args, seed)
    ms = int((time.perf_counter() - t0) * 1000)
    report = RunReport(args.command, _params(args), _strip_timing(_jsonable(results)), seed, ms,
                       _jsonable(tables))
    report._args = args
    return report


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        report = run_command(argv)
        args = report._args
        if args.out:
            write_report(report, args.out, args.csv, timing=not args.no_timing)
        else:
            sys.stdout.write(report.to_json(timing=not args.no_timing))
            for name, rows in report.tables.items():
                if args.csv and rows:
                    write_csv(rows, args.csv)
    except SystemExit as e:  # argparse
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    except UnsupportedPredicateError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ValidationError, InvalidWitnessError, OracleRefusal) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
