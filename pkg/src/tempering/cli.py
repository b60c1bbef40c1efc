"""Command-line interface: run experiments, generate data, verify, tabulate.

Exit codes: 0 ok, 1 config error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .estimators import RunSummary, aggregate_runs


def _cmd_run(args) -> int:
    from .report import emit_all
    from .runner import run_experiment

    cfg = load_config(args.config)
    outdir = Path(args.out or "results") / cfg.target
    bundle = run_experiment(cfg, threads=args.threads)
    made = emit_all(bundle, outdir, figures=not args.no_figures)
    for p in made:
        print(p)
    if bundle.rows:
        print((outdir / "table.txt").read_text())
    return 0


def _cmd_gen_data(args) -> int:
    from .targets import gen_data_elliptic, gen_data_wave1d, save_dataset

    gens = {"elliptic": gen_data_elliptic, "wave1d": gen_data_wave1d}
    if args.target not in gens:
        raise ConfigError(f"target: no synthetic data recipe for {args.target!r} "
                          f"(choose from {sorted(gens)})")
    ds = gens[args.target](args.seed)
    outdir = Path(args.out or "data")
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{args.target}_seed{args.seed}.csv"
    save_dataset(ds, path)
    print(path)
    print(path.with_suffix(".json"))
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_oracle_suite

    results = run_oracle_suite(seed=args.seed, cap=args.cap)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{r.name:<{width}}  {r.value: .3e} {r.cmp} {r.threshold: .1e}  {status}")
        failed += 0 if r.ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 2


def _cmd_table(args) -> int:
    from .report import emit_tables

    summaries: list[RunSummary] = []
    truth = None
    for bpath in args.bundles:
        doc = json.loads(Path(bpath).read_text())
        if truth is None:
            truth = doc.get("truth")
        for s in doc["summaries"]:
            s = dict(s)
            s["acceptance"] = tuple(s.get("acceptance", ()))
            summaries.append(RunSummary(**s))
    rows = aggregate_runs(summaries, truth, baseline=args.baseline)
    outdir = Path(args.out or ".")
    csv_path, txt_path = emit_tables(rows, outdir, baseline=args.baseline)
    print(csv_path)
    print(txt_path.read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sampler",
                                description="Generalized parallel tempering samplers")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (path or preset name)")
    run.add_argument("config")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--no-figures", action="store_true")
    run.set_defaults(fn=_cmd_run)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset as CSV + JSON sidecar")
    gen.add_argument("target")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", default=None)
    gen.set_defaults(fn=_cmd_gen_data)

    ver = sub.add_parser("verify", help="run the finite-state oracle suite")
    ver.add_argument("--cap", type=int, default=4096)
    ver.add_argument("--seed", type=int, default=2024)
    ver.set_defaults(fn=_cmd_verify)

    tab = sub.add_parser("table", help="aggregate bundle.json files into a comparison table")
    tab.add_argument("bundles", nargs="+")
    tab.add_argument("--baseline", default="rwm")
    tab.add_argument("--out", default=None)
    tab.set_defaults(fn=_cmd_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
