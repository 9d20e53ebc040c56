"""Command line entry point: ``mtbranch <subcommand> [options]``.

Subcommands
-----------
simulate   trajectories to CSV plus mean checks against exp(A t)
lt         empirical against analytic Laplace transforms on an s-grid
limits     renormalized population against its limit law
transient  two-type transient mean report
verify     the full acceptance suite (config optional)

The exit status is 0 iff every declared tolerance passes.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import acceptance
from .harness.config import ConfigError, ExperimentConfig, VARIANTS, load_config
from .harness.records import all_passed, emit_results
from .harness.runner import persist, resolve_out_dir, run_experiment

SUBCOMMANDS = {
    "simulate": "simulate",
    "lt": "lt",
    "limits": "limit",
    "transient": "transient",
    "verify": "acceptance",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtbranch", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=name != "verify",
                        help="YAML experiment file")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--replicates", type=int, help="override the replicate count")
        sp.add_argument("--out", type=Path, help="output directory (beats $MTBRANCH_OUT)")
        sp.add_argument("--workers", type=int, help="worker threads")
        sp.add_argument("--variant", choices=VARIANTS, help="transient evaluator")
        if name == "verify":
            sp.add_argument("--only", help="comma separated criterion ids, e.g. C1,C7")
    return p


def _config(args, experiment: str) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config)
        if cfg.experiment != experiment:
            cfg = cfg.replace(experiment=experiment)
    else:
        cfg = ExperimentConfig(experiment, acceptance.MASTER_SEED, 1, [0.0], {"catalogue": "critical"})
    return cfg.replace(seed=args.seed, replicates=args.replicates, workers=args.workers,
                       variant=args.variant)


def _verify(args, cfg: ExperimentConfig, out_dir: Path) -> int:
    only = None if not getattr(args, "only", None) else set(args.only.split(","))

    def progress(cid, recs):
        ok = all_passed(recs)
        print(f"{cid} {'PASS' if ok else 'FAIL'}: {acceptance.CRITERIA[cid].title}", flush=True)
        for r in recs:
            print("    " + r.summary())

    records, comps = acceptance.run_all(cfg.seed, cfg.workers, only=only, progress=progress)
    paths = emit_results(records, out_dir, "acceptance", comps)
    ok = all_passed(records)
    print(f"acceptance: {'PASS' if ok else 'FAIL'}; records in {paths['jsonl']}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    try:
        cfg = _config(args, experiment)
    except (ConfigError, OSError) as exc:
        print(f"mtbranch: {exc}", file=sys.stderr)
        return 2
    out_dir = resolve_out_dir(args.out, cfg if args.config is not None else None)
    if experiment == "acceptance":
        return _verify(args, cfg, out_dir)
    out = run_experiment(cfg)
    paths = persist(out, cfg, out_dir)
    for r in out.records:
        print(r.summary())
    print(f"{args.command}: {'PASS' if out.passed else 'FAIL'}; wrote {', '.join(str(p) for p in paths.values())}")
    return 0 if out.passed else 1


if __name__ == "__main__":
    sys.exit(main())
