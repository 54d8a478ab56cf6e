"""Command-line front end.

Exit codes: 0 success, 1 a validation check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .environment import WalkParams, child_seeds, sample_environment
from .quenched import (
    LEDGER_COLUMNS,
    SpeedEstimate,
    TruncationPolicy,
    quenched_speed_mc,
    small_potential_reference,
    speed_from_lyapunov,
)

SWEEP_METHODS = ("quenched-mc", "lyapunov", "annealed-exact", "annealed-mc")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text: str) -> list[int]:
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# -- sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    p_grid: tuple[float, ...]
    M_grid: tuple[float, ...]
    y: int
    n: int
    methods: tuple[str, ...]
    seed: int
    out: str
    tolerance: float = 1e-4

    def __post_init__(self) -> None:
        if not self.p_grid or not self.M_grid:
            raise UsageError("grids must be nonempty")
        bad = [m for m in self.methods if m not in SWEEP_METHODS]
        if bad or not self.methods:
            raise UsageError(f"unknown methods {bad}; choose from {SWEEP_METHODS}")

    def cells(self) -> list[tuple]:
        """Canonically ordered cells, each with its own integer seed."""
        raw = [(m, p, M) for m in self.methods for p in self.p_grid for M in self.M_grid]
        seeds = child_seeds(self.seed, len(raw))
        return [
            (k, m, p, M, self.y, self.n, int(s.generate_state(1)[0]), self.tolerance)
            for k, ((m, p, M), s) in enumerate(zip(raw, seeds))
        ]


def run_cell(cell: tuple) -> tuple[int, dict]:
    """Evaluate one sweep cell; also used for single-cell reproduction."""
    k, method, p, M, y, n, seed, tol = cell
    params = WalkParams(p, M)
    if method == "quenched-mc":
        est = quenched_speed_mc(params, n, TruncationPolicy.for_params(params, tol), seed=seed)
    elif method == "lyapunov":
        est = speed_from_lyapunov(params, n, seed=seed)
    elif method == "annealed-exact":
        from .annealed import annealed_speed_exact

        est = annealed_speed_exact(params, [y])[0]
    else:
        from .annealed import annealed_speed_mc

        est = annealed_speed_mc(params, y, n, seed=seed)
    row = est.to_row()
    row["seed"] = seed
    if row["y"] == "":
        row["y"] = y if method.startswith("annealed") else ""
    return k, row


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _load_partial(path: str) -> dict[int, dict]:
    done = {}
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                done[int(rec["cell"])] = rec["row"]
    return done


def run_sweep(spec: SweepSpec, threads: int = 1, resume: bool = False) -> list[dict]:
    """Evaluate every cell and write the CSV (canonical order).

    Finished cells stream to ``<out>.partial`` so an interrupted sweep can be
    resumed; the marker is removed once the CSV is complete.
    """
    partial = spec.out + ".partial"
    done = _load_partial(partial) if resume else {}
    todo = [c for c in spec.cells() if c[0] not in done]
    try:
        fh = open(partial, "a" if resume else "w")
    except OSError as exc:
        raise UsageError(f"cannot write {partial}: {exc}") from exc
    with fh:
        def record(k: int, row: dict) -> None:
            done[k] = row
            fh.write(json.dumps({"cell": k, "row": row}) + "\n")
            fh.flush()

        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                for k, row in pool.map(run_cell, todo):
                    record(k, row)
        else:
            for cell in todo:
                record(*run_cell(cell))
    rows = [done[k] for k in sorted(done)]
    try:
        with open(spec.out, "w", newline="") as out:
            out.write(_rows_to_csv(rows))
    except OSError as exc:
        raise UsageError(f"cannot write {spec.out}: {exc}") from exc
    os.remove(partial)
    return rows


def plot_sweep(rows: list[dict], path: str) -> None:
    """SVG of speed against M for each p, with the sqrt(2pM) reference."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ps = sorted({float(r["p"]) for r in rows})
    for method in sorted({r["method"] for r in rows}):
        for p in ps:
            sel = sorted(
                (float(r["M"]), float(r["value"]), float(r["stderr"]) / float(r["inverse"]) ** 2)
                for r in rows
                if r["method"] == method and float(r["p"]) == p
            )
            if sel:
                Ms, vs, es = zip(*sel)
                ax.errorbar(Ms, vs, yerr=es, marker="o", ms=3, label=f"{method}, p={p:g}")
    for p in ps:
        Ms = sorted({float(r["M"]) for r in rows})
        grid = np.linspace(min(Ms), max(Ms), 200)
        ax.plot(grid, [min(1.0, small_potential_reference(p, m)) for m in grid], "k:",
                lw=1, label=f"sqrt(2pM), p={p:g}")
    ax.set_xscale("log")
    ax.set_xlabel("M")
    ax.set_ylabel("speed")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- single commands ----------------------------------------------------------

def _emit(records: list[dict], fmt: str, out: str | None) -> None:
    if fmt == "json":
        text = json.dumps(records, indent=2) + "\n"
    elif fmt == "csv":
        fields = list(records[0]) if records else []
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        text = buf.getvalue()
    else:
        raise UsageError(f"format {fmt!r} is only supported by sweep")
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _est_record(est: SpeedEstimate) -> dict:
    row = est.to_row()
    row["seed"] = est.seed if est.seed is not None else ""
    for key, val in est.diagnostics.items():
        if isinstance(val, (int, float, bool, str)):
            row[key] = val
    return row


def _one(values: list, name: str):
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value for this command")
    return values[0]


def cmd_validate(args) -> int:
    from .validation import SUITES, run_suite

    suites = sorted(SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)} or all")
    ok = True
    for name in suites:
        for res in run_suite(name):
            print(f"{name}: {res.line()}")
            ok &= res.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_quenched(args) -> int:
    params = WalkParams(_one(args.p, "p"), _one(args.M, "M"))
    policy = (
        TruncationPolicy(args.depth) if args.depth else TruncationPolicy.for_params(params, args.tolerance)
    )
    est = quenched_speed_mc(params, args.n, policy, seed=args.seed, mode=args.mode)
    _emit([_est_record(est)], args.format, args.out)
    return EXIT_OK


def cmd_annealed_exact(args) -> int:
    from .annealed import annealed_speed_exact, enumerate_annealed

    params = WalkParams(_one(args.p, "p"), _one(args.M, "M"))
    if args.table:
        table = enumerate_annealed(params, _one(args.y, "y"))
        text = table.to_csv()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    ests = annealed_speed_exact(params, args.y)
    _emit([_est_record(e) for e in ests], args.format, args.out)
    return EXIT_OK


def cmd_annealed_mc(args) -> int:
    from .annealed import annealed_speed_mc

    params = WalkParams(_one(args.p, "p"), _one(args.M, "M"))
    est = annealed_speed_mc(params, _one(args.y, "y"), args.n, seed=args.seed)
    _emit([_est_record(est)], args.format, args.out)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    params = WalkParams(_one(args.p, "p"), _one(args.M, "M"))
    est = speed_from_lyapunov(params, _one(args.y, "y"), seed=args.seed)
    rec = _est_record(est)
    rec.pop("quotients", None)
    _emit([rec], args.format, args.out)
    return EXIT_OK


def cmd_sample_paths(args) -> int:
    from .exact_walk import solve_crossing
    from .montecarlo import sample_conditioned_path

    params = WalkParams(_one(args.p, "p"), _one(args.M, "M"))
    y = _one(args.y, "y")
    seeds = child_seeds(args.seed, args.n + 1)
    env = sample_environment(params, (0, y), seeds[0])
    sol = solve_crossing(env, y)
    paths = [sample_conditioned_path(sol, env, s) for s in seeds[1:]]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(p.to_text() for p in paths))
    lengths = np.array([p.length for p in paths])
    se = float(lengths.std(ddof=1) / math.sqrt(len(lengths))) if len(lengths) > 1 else math.nan
    _emit(
        [{"env": env.to_line(), "t_cond": sol.t_cond, "mean_length": float(lengths.mean()),
          "stderr": se, "n": len(paths)}],
        "json" if args.format == "json" else "csv",
        None,
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.out and args.out.endswith(".svg"):
        args.format = "svg"
    if args.format == "svg" and not args.out:
        raise UsageError("--format svg needs --out")
    out = args.out or "sweep.csv"
    csv_path = out[:-4] + ".csv" if out.endswith(".svg") else out
    spec = SweepSpec(
        tuple(args.p), tuple(args.M), _one(args.y, "y"), args.n, methods, args.seed, csv_path,
        args.tolerance,
    )
    rows = run_sweep(spec, threads=args.threads, resume=args.resume)
    if args.format == "svg":
        plot_sweep(rows, out if out.endswith(".svg") else out + ".svg")
    elif args.format == "json":
        print(json.dumps(rows, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="killedwalk", description="Crossing speeds of killed random walks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, y_default="10", n_default=10_000):
        sp.add_argument("--p", type=_floats, default=_floats("0.5"), help="obstacle density (comma list for sweep)")
        sp.add_argument("--M", type=_floats, default=_floats("1.0"), help="obstacle height (comma list for sweep)")
        sp.add_argument("--y", type=_ints, default=_ints(y_default), help="crossing distance(s)")
        sp.add_argument("--n", type=int, default=n_default, help="sample count")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
        sp.add_argument("--config", default=None, help="key=value file; flags override it")

    subs = {}
    sp = sub.add_parser("sweep", help="parameter sweep to CSV (and SVG)")
    common(sp, y_default="12")
    sp.add_argument("--methods", default="quenched-mc,annealed-exact")
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--resume", action="store_true")
    sp.set_defaults(func=cmd_sweep)
    subs["sweep"] = sp

    sp = sub.add_parser("validate", help="run a validation suite")
    sp.add_argument("suite", help="closed-forms, recursion-oracle, sandwiches, annealed-formula, logseries, asymptotics or all")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config", default=None)
    sp.set_defaults(func=cmd_validate)
    subs["validate"] = sp

    sp = sub.add_parser("quenched", help="Monte Carlo quenched speed")
    common(sp)
    sp.add_argument("--mode", choices=("iid", "ergodic"), default="iid")
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.set_defaults(func=cmd_quenched)
    subs["quenched"] = sp

    sp = sub.add_parser("annealed-exact", help="exact annealed crossing time by enumeration")
    common(sp)
    sp.add_argument("--table", action="store_true", help="dump the configuration table as CSV")
    sp.set_defaults(func=cmd_annealed_exact)
    subs["annealed-exact"] = sp

    sp = sub.add_parser("annealed-mc", help="importance-sampled annealed crossing time")
    common(sp)
    sp.set_defaults(func=cmd_annealed_mc)
    subs["annealed-mc"] = sp

    sp = sub.add_parser("lyapunov", help="quenched speed from the Lyapunov exponent")
    common(sp, y_default="100000")
    sp.set_defaults(func=cmd_lyapunov)
    subs["lyapunov"] = sp

    sp = sub.add_parser("sample-paths", help="draw conditioned paths in one environment")
    common(sp, n_default=10)
    sp.set_defaults(func=cmd_sample_paths)
    subs["sample-paths"] = sp
    parser._killedwalk_subs = subs
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        sp = parser._killedwalk_subs[args.command]
        known = {a.dest: a for a in sp._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            raise UsageError(f"unknown config keys {unknown}")
        defaults = {}
        for key, value in cfg.items():
            action = known[key]
            if action.type is not None:
                defaults[key] = action.type(value)
            elif isinstance(action.default, bool) or action.const is True:
                defaults[key] = value.lower() in ("1", "true", "yes")
            else:
                defaults[key] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, argparse.ArgumentTypeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
