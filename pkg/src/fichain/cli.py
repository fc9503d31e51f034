"""Command-line front end: ``fichain build | compute | verify | scan``.

Reports are JSON (sorted keys, no timings unless ``--timings``) so that the
same inputs and seed give byte-identical output.  Scans are CSV.

Exit codes: 0 success, 1 a verification or bound check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from fractions import Fraction
from typing import Any, Sequence

from .chain import ReversibleChain, sparsity
from .errors import FichainError
from .functional import (
    OptimizerConfig,
    estimate_tls,
    estimate_tmls,
    h_constant,
    poor_upper_bound,
    t_rel,
    theorem1_upper_bound,
    trivial_tls,
)
from .models import (
    GraphSpec,
    ZrpSpec,
    build_graph_walk,
    build_lamplighter,
    build_trivial,
    build_zrp,
    chain_from_spec,
    describe,
    explicit_spec,
    graph_spectral_gap,
    state_cap,
    zrp_ls_upper_bound,
)
from .regularization import default_r
from .verification import run_suite

log = logging.getLogger("fichain")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
CONSTANTS = ("rel", "mls", "ls")
BOUND_RTOL = 1e-6


class InputError(Exception):
    pass


def _read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config(args) -> OptimizerConfig:
    base = OptimizerConfig.from_dict(_read_json(args.config)) if args.config else OptimizerConfig()
    over = {
        "starts": args.starts,
        "max_iters": args.max_iters,
        "tol_opt": args.tol,
        "seed": args.seed,
    }
    d = base.to_dict()
    d.update({k: v for k, v in over.items() if v is not None})
    return OptimizerConfig.from_dict(d)


def _load_chain(path: str) -> ReversibleChain:
    return chain_from_spec(_read_json(path), state_cap())


def _or_none(fn, *a):
    try:
        return fn(*a)
    except FichainError as exc:
        log.info("%s", exc)
        return None


def compute_report(
    chain: ReversibleChain, constants: Sequence[str], config: OptimizerConfig
) -> dict[str, Any]:
    """Constants, bounds and the consistency checks between them."""
    p = sparsity(chain)
    r = _or_none(default_r, chain)
    rep: dict[str, Any] = {
        "chain": describe(chain),
        "config": config.to_dict(),
        "sparsity": p,
        "r": r,
        "H_r": None if r is None else h_constant(r),
        "poor_upper_bound": _or_none(poor_upper_bound, chain),
    }
    est = {}
    if "rel" in constants:
        est["rel"] = t_rel(chain)
    if "mls" in constants:
        est["mls"] = estimate_tmls(chain, config)
    if "ls" in constants:
        est["ls"] = estimate_tls(chain, config)
    for k, e in est.items():
        rep[f"t_{k}"] = e.to_dict()
        rep[f"t_{k}"]["converged"] = e.converged
    rep["theorem1_upper_bound"] = (
        _or_none(theorem1_upper_bound, chain, est["mls"].value) if "mls" in est else None
    )
    checks = {}
    if "ls" in est:
        ls = est["ls"].value
        for name in ("poor_upper_bound", "theorem1_upper_bound"):
            bound = rep[name]
            if bound is not None:
                checks[f"t_ls_le_{name}"] = ls <= bound * (1 + BOUND_RTOL)
        if "mls" in est:
            # t_LS >= t_MLS / 4, so the lower bounds must respect it up to the search
            checks["t_ls_ge_t_mls_over_4"] = ls * (1 + BOUND_RTOL) >= est["mls"].value / 4
    rep["checks"] = checks
    return rep


def cmd_build(args) -> int:
    chain = chain_from_spec(_read_json(args.spec), state_cap())
    _write(_dumps(explicit_spec(chain)), args.out)
    log.info("built %d states, %d edges", chain.n, chain.n_edges)
    return EXIT_OK


def cmd_compute(args) -> int:
    constants = [c.strip() for c in args.constants.split(",") if c.strip()]
    bad = sorted(set(constants) - set(CONSTANTS))
    if bad or not constants:
        raise InputError(f"--constants must be a subset of {','.join(CONSTANTS)}")
    chain = _load_chain(args.spec)
    t0 = time.perf_counter()
    rep = compute_report(chain, constants, _config(args))
    if args.timings:
        rep["timings"] = {"total": time.perf_counter() - t0}
    _write(_dumps(rep), args.out)
    return EXIT_OK if all(rep["checks"].values()) else EXIT_FAIL


def cmd_verify(args) -> int:
    chain = _load_chain(args.spec)
    samples = 500 if args.samples is None else args.samples
    if samples < 0:
        raise InputError("--samples must be >= 0")
    cfg = _config(args)
    try:
        rep = run_suite(chain, args.suite, samples, cfg.seed, cfg, timings=args.timings)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _write(rep.to_json() + "\n", args.out)
    for c in rep.checks:
        log.info("%-22s %s  min margin %s", c.name, "pass" if c.passed else "FAIL", c.min_margin)
    return EXIT_OK if rep.passed else EXIT_FAIL


# --- scans ---


def _values(text: str, kind=int) -> list:
    """``3:5`` (inclusive integer range) or a comma list; fractions allowed for floats."""
    text = text.strip()
    if ":" in text and kind is int:
        lo, hi = (int(t) for t in text.split(":"))
        return list(range(lo, hi + 1))
    out = []
    for t in text.split(","):
        t = t.strip()
        out.append(int(t) if kind is int else float(Fraction(t)))
    return out


SCAN_COLUMNS = (
    "family", "param", "n_states", "p", "gamma", "t_rel", "t_mls", "t_ls",
    "mls_converged", "ls_converged", "theorem1_bound", "poor_bound",
    "oracle_t_ls", "ratio", "zrp_bound", "error",
)


def _scan_instance(family: str, value, args):
    """Return (param label, chain, extra columns)."""
    extra: dict[str, Any] = {}
    if family in ("lamplighter", "graph_walk"):
        name = f"{args.graph}:{value}"
        chain = build_lamplighter(name, state_cap()) if family == "lamplighter" else build_graph_walk(name)
        extra["gamma"] = graph_spectral_gap(name)
        extra["_vertices"] = GraphSpec.named(name).vertices
        return name, chain, extra
    if family == "zrp":
        spec = ZrpSpec.mean_field(args.n, value, [args.slope * k for k in range(1, value + 1)])
        extra["zrp_bound"] = zrp_ls_upper_bound(spec)
        return f"n={args.n},m={value}", build_zrp(spec, state_cap()), extra
    if family == "trivial":
        pi = [value, 1.0 - value]
        extra["oracle_t_ls"] = trivial_tls(pi)
        return f"pi_star={value!r}", build_trivial(pi), extra
    raise InputError(f"unknown family {family!r}")


def scan_rows(family: str, values: Sequence, args, config: OptimizerConfig) -> list[dict]:
    rows = []
    for v in values:
        row: dict[str, Any] = {c: "" for c in SCAN_COLUMNS}
        row.update(family=family, param=str(v))
        try:
            label, chain, extra = _scan_instance(family, v, args)
            row["param"] = label
            rep = compute_report(chain, CONSTANTS, config)
            row.update(
                n_states=chain.n,
                p=rep["sparsity"],
                t_rel=rep["t_rel"]["value"],
                t_mls=rep["t_mls"]["value"],
                t_ls=rep["t_ls"]["value"],
                mls_converged=rep["t_mls"]["converged"],
                ls_converged=rep["t_ls"]["converged"],
                theorem1_bound=rep["theorem1_upper_bound"],
                poor_bound=rep["poor_upper_bound"],
            )
            n_vertices = extra.pop("_vertices", None)
            row.update(extra)
            if family == "lamplighter":
                row["ratio"] = rep["t_mls"]["value"] * extra["gamma"] / n_vertices
            if "oracle_t_ls" in extra:
                row["ratio"] = rep["t_ls"]["value"] / extra["oracle_t_ls"]
        except FichainError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append({k: ("" if v is None else v) for k, v in row.items()})
    return rows


def cmd_scan(args) -> int:
    kind = float if args.family == "trivial" else int
    try:
        values = _values(args.values, kind)
    except ValueError as exc:
        raise InputError(f"bad --values: {exc}") from None
    rows = scan_rows(args.family, values, args, _config(args))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(buf.getvalue(), args.out)
    return EXIT_FAIL if any(r["error"] for r in rows) else EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fichain", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def optimizer_flags(p):
        p.add_argument("--starts", type=int)
        p.add_argument("--max-iters", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="JSON file with OptimizerConfig fields")
        p.add_argument("--timings", action="store_true", help="add wall-clock timings")
        p.add_argument("--out")

    b = sub.add_parser("build", parents=[common], help="model spec -> explicit chain spec")
    b.add_argument("--spec", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("compute", parents=[common], help="estimate t_REL, t_MLS, t_LS and the bounds")
    c.add_argument("--spec", required=True)
    c.add_argument("--constants", default="rel,mls,ls")
    optimizer_flags(c)
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", parents=[common], help="sampled checks of the regularization inequalities")
    v.add_argument("--spec", required=True)
    v.add_argument("--suite", default="all")
    v.add_argument("--samples", type=int)
    optimizer_flags(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", parents=[common], help="one CSV row per model instance")
    s.add_argument("--family", required=True, choices=("lamplighter", "graph_walk", "zrp", "trivial"))
    s.add_argument("--values", required=True,
                   help="graph sizes, particle counts m (zrp) or pi_star (trivial); '3:5' or '3,4,5'")
    s.add_argument("--graph", default="cycle", help="graph kind for lamplighter/graph_walk")
    s.add_argument("--n", type=int, default=3, help="zrp sites")
    s.add_argument("--slope", type=float, default=1.0, help="zrp rates r(k) = slope*k")
    optimizer_flags(s)
    s.set_defaults(func=cmd_scan)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, FichainError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
