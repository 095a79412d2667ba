"""Sweeps over KG tuple proportion and training-data fraction.

Every (tuple proportion, training fraction) cell runs ``n_trials`` trials with
seeds ``seed + trial``. A trial's seed fixes the data partition and, through
independent child streams, the tuple subsample, the negative tuples and the
parameter initialisation, so cells sharing a trial index are paired.

Output directory layout::

    config.json                         resolved configuration
    trials.csv                          one row per trial
    summary_<scenario>_tuples_train<F>.txt   x = % KG tuples, one file per training fraction
    summary_<scenario>_train_tuples<P>.txt   x = % training data, one file per tuple proportion

Summary files have rows ``x mean std`` (population std over successful trials).
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bridge import fa_params
from .data import (PartitionSpec, SyntheticSpec, generate_synthetic, load_dataset, load_kg, partition,
                   subsample_tuples)
from .errors import ConfigurationError, NumericalError, SamplingError
from .fa import fa_marginal_nll
from .kg import KnowledgeGraph, corrupt_triples
from .optim import TrainConfig, train, write_history

log = logging.getLogger(__name__)

TRIAL_FIELDS = ("scenario", "tuple_proportion", "train_fraction", "trial", "seed", "status",
                "test_nll", "best_val_nll", "best_epoch", "epochs_run", "fingerprint")


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int
    out_dir: str
    tuple_proportions: list = field(default_factory=lambda: [1.0])
    train_fractions: list = field(default_factory=lambda: [0.8])
    n_trials: int = 10
    val_fraction: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: str = None
    triples: str = None
    attribute_map: str = None
    synthetic: SyntheticSpec = None
    save_history: bool = False

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if isinstance(self.synthetic, dict):
            self.synthetic = SyntheticSpec(**self.synthetic)
        self.tuple_proportions = [float(p) for p in self.tuple_proportions]
        self.train_fractions = [float(f) for f in self.train_fractions]
        if not self.tuple_proportions or not self.train_fractions:
            raise ConfigurationError("tuple_proportions and train_fractions must be non-empty")
        if self.n_trials < 1:
            raise ConfigurationError("n_trials must be >= 1")
        if (self.synthetic is None) == (self.dataset is None):
            raise ConfigurationError("give exactly one of a dataset path or a synthetic spec")
        PartitionSpec(self.scenario, 0.5, self.val_fraction)  # validates scenario

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**d)


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    tuple_proportion: float
    train_fraction: float
    trial: int
    seed: int
    status: str
    test_nll: float
    best_val_nll: float
    best_epoch: int
    epochs_run: int
    fingerprint: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def load_inputs(config: ExperimentConfig):
    """Return ``(dataset, kg)`` from files or the synthetic generator."""
    if config.synthetic is not None:
        data, kg, _ = generate_synthetic(config.synthetic)
        return data, kg
    data = load_dataset(config.dataset)
    if config.triples is None:
        kg = KnowledgeGraph([], [], [])
    else:
        kg = load_kg(config.triples, config.attribute_map, data.attribute_names)
    return data, kg


def run_trial(data, kg, config: ExperimentConfig, proportion, fraction, trial, history_path=None) -> TrialResult:
    seed = config.seed + trial
    tr, va, te = partition(data, PartitionSpec(config.scenario, fraction, config.val_fraction, seed))
    sub_rng, neg_rng, init_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    base = dict(scenario=config.scenario, tuple_proportion=proportion, train_fraction=fraction,
                trial=trial, seed=seed, fingerprint=config.fingerprint())
    try:
        sub = subsample_tuples(kg, proportion, sub_rng)
        neg = corrupt_triples(sub, sub.triples, config.train.negatives_per_positive, neg_rng)
        res = train(config.train, tr, va, sub, sub.triples, neg, init_rng)
        test_nll = fa_marginal_nll(te, fa_params(res.params, kg))
    except (NumericalError, SamplingError) as exc:
        log.warning("trial failed (p=%s, f=%s, trial=%d): %s", proportion, fraction, trial, exc)
        return TrialResult(status="failed", test_nll=math.nan, best_val_nll=math.nan,
                           best_epoch=0, epochs_run=len(getattr(exc, "history", [])), **base)
    if history_path is not None:
        write_history(res.history, history_path)
    return TrialResult(status="ok", test_nll=float(test_nll), best_val_nll=res.best_val_nll,
                       best_epoch=res.best_epoch, epochs_run=res.epochs_run, **base)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_trials(results, path) -> None:
    lines = [",".join(TRIAL_FIELDS)]
    lines += [",".join(_fmt(getattr(r, f)) for f in TRIAL_FIELDS) for r in results]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_trials(path) -> list[TrialResult]:
    casts = dict(tuple_proportion=float, train_fraction=float, trial=int, seed=int, test_nll=float,
                 best_val_nll=float, best_epoch=int, epochs_run=int)
    with open(path, newline="", encoding="utf-8") as fh:
        return [TrialResult(**{k: casts.get(k, str)(v) for k, v in row.items()}) for row in csv.DictReader(fh)]


def _pct(x: float) -> str:
    return f"{100 * x:g}"


def emit_summary(groups: dict, path) -> None:
    """Write ``x mean std`` rows, ascending in x. Empty groups are skipped."""
    rows = []
    for x in sorted(groups):
        vals = np.asarray(groups[x], dtype=float)
        if vals.size == 0:
            warnings.warn(f"{path}: no successful trials at x={x:g}; row omitted", stacklevel=2)
            continue
        rows.append(f"{x:g} {float(np.mean(vals))!r} {float(np.std(vals))!r}")
    _atomic_write(path, "".join(r + "\n" for r in rows))


def read_summary(path) -> list[tuple[float, float, float]]:
    with open(path, encoding="utf-8") as fh:
        return [tuple(float(v) for v in line.split()) for line in fh if line.strip()]


def write_summaries(results, out_dir, scenario) -> list[Path]:
    out_dir = Path(out_dir)
    ok = [r for r in results if r.scenario == scenario]
    props = sorted({r.tuple_proportion for r in ok})
    fracs = sorted({r.train_fraction for r in ok})
    paths = []
    for f in fracs:
        groups = {100 * p: [r.test_nll for r in ok if r.ok and r.train_fraction == f and r.tuple_proportion == p]
                  for p in props}
        paths.append(out_dir / f"summary_{scenario}_tuples_train{_pct(f)}.txt")
        emit_summary(groups, paths[-1])
    for p in props:
        groups = {100 * f: [r.test_nll for r in ok if r.ok and r.train_fraction == f and r.tuple_proportion == p]
                  for f in fracs}
        paths.append(out_dir / f"summary_{scenario}_train_tuples{_pct(p)}.txt")
        emit_summary(groups, paths[-1])
    return paths


def run_experiment(config: ExperimentConfig) -> list[TrialResult]:
    """Run the full grid and write all output files. Never modifies input files."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "config.json", json.dumps(config.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    data, kg = load_inputs(config)
    if kg.n_tuples and kg.untupled_attribute_entities():
        log.warning("%d attribute entities appear in no tuple", len(kg.untupled_attribute_entities()))
    results = []
    for p in config.tuple_proportions:
        for f in config.train_fractions:
            for t in range(config.n_trials):
                hist = None
                if config.save_history:
                    hist = out / f"history_{config.scenario}_tuples{_pct(p)}_train{_pct(f)}_trial{t}.csv"
                r = run_trial(data, kg, config, p, f, t, hist)
                log.info("p=%g f=%g trial=%d seed=%d %s test_nll=%s", p, f, t, r.seed, r.status, r.test_nll)
                results.append(r)
    write_trials(results, out / "trials.csv")
    write_summaries(results, out, config.scenario)
    return results


def summarize(out_dir) -> list[TrialResult]:
    """Rebuild the summary files of ``out_dir`` from its ``trials.csv``."""
    results = read_trials(Path(out_dir) / "trials.csv")
    for scenario in sorted({r.scenario for r in results}):
        write_summaries(results, out_dir, scenario)
    return results
