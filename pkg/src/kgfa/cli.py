"""Command line: ``kgfa {run,gradcheck,synth,summarize}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .data import SCENARIOS, SyntheticSpec, generate_synthetic, save_dataset, save_kg
from .errors import ConfigurationError, FormatError
from .experiment import ExperimentConfig, run_experiment, summarize
from .gradcheck import run_gradcheck

OUT_ENV = "KGFA_OUT_DIR"
TRAIN_FLAGS = ("d_x", "d_e", "learning_rate", "patience", "max_epochs", "init_scale", "negatives_per_positive")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def build_config(args) -> ExperimentConfig:
    d = _read_json(args.config) if args.config else {}
    d.update(scenario=args.scenario, seed=args.seed, out_dir=args.out_dir)
    for key in ("tuple_proportions", "train_fractions", "n_trials", "dataset", "triples", "attribute_map"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if args.synthetic:
        d["synthetic"] = _read_json(args.synthetic)
    if args.save_history:
        d["save_history"] = True
    train = dict(d.get("train", {}))
    train.update({k: getattr(args, k) for k in TRAIN_FLAGS if getattr(args, k) is not None})
    d["train"] = train
    return ExperimentConfig(**d)


def cmd_run(args) -> int:
    results = run_experiment(build_config(args))
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} trials succeeded; results in {args.out_dir}")
    return 1 if failed else 0


def cmd_gradcheck(args) -> int:
    ok, _ = run_gradcheck(args.instances, args.seed)
    return 0 if ok else 1


def cmd_synth(args) -> int:
    spec = SyntheticSpec(**(_read_json(args.spec) if args.spec else {}))
    if args.seed is not None:
        spec = dataclasses.replace(spec, ground_truth_seed=args.seed)
    data, kg, truth = generate_synthetic(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(data, out / "data.csv")
    save_kg(kg, out / "triples.tsv", out / "attribute_map.tsv", data.attribute_names)
    np.savez(out / "truth.npz", **dataclasses.asdict(truth))
    print(f"{data.n} objects x {data.m} attributes, {kg.n_entities} entities, "
          f"{kg.n_relations} relations, {kg.n_tuples} tuples -> {out}")
    return 0


def cmd_summarize(args) -> int:
    results = summarize(args.out_dir)
    return 0 if all(r.ok for r in results) else 1


def make_parser() -> argparse.ArgumentParser:
    default_out = os.environ.get(OUT_ENV)
    p = argparse.ArgumentParser(prog="kgfa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a tuple-proportion x training-fraction sweep")
    r.add_argument("--seed", type=int, required=True, help="base seed; trial t uses seed + t")
    r.add_argument("--out-dir", required=True)
    r.add_argument("--scenario", choices=SCENARIOS, required=True)
    r.add_argument("--config", help="JSON file with ExperimentConfig fields")
    r.add_argument("--tuple-proportions", type=_floats, help="comma separated, e.g. 0,0.5,1")
    r.add_argument("--train-fractions", type=_floats)
    r.add_argument("--n-trials", type=int)
    r.add_argument("--dataset", help="CSV of observations")
    r.add_argument("--triples", help="TSV of head, relation, tail")
    r.add_argument("--attribute-map", help="TSV of attribute name, entity name")
    r.add_argument("--synthetic", help="JSON file of SyntheticSpec fields")
    r.add_argument("--save-history", action="store_true")
    for k in TRAIN_FLAGS:
        r.add_argument("--" + k.replace("_", "-"), type=float if k in ("learning_rate", "init_scale") else int)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    g.add_argument("--instances", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("synth", help="write a synthetic dataset and KG")
    s.add_argument("--out-dir", required=default_out is None, default=default_out)
    s.add_argument("--spec", help="JSON file of SyntheticSpec fields")
    s.add_argument("--seed", type=int, help="ground-truth seed (overrides the spec)")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("summarize", help="rebuild summary files from trials.csv")
    m.add_argument("--out-dir", required=default_out is None, default=default_out)
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FormatError, FileNotFoundError) as exc:
        print(f"kgfa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
