import io
import json
import warnings

import numpy as np
import pytest

from kgfa import gradcheck
from kgfa.cli import main
from kgfa.data import SyntheticSpec, load_dataset
from kgfa.errors import ConfigurationError
from kgfa.experiment import (ExperimentConfig, TrialResult, emit_summary, read_summary, read_trials,
                             run_experiment, summarize)
from kgfa.optim import TrainConfig

SMALL = SyntheticSpec(n_objects=60, m_attributes=6, m_tied=3, d_x=2, d_e=2, n_extra_entities=3,
                      tuples_per_entity=4)
FAST = TrainConfig(d_x=2, d_e=2, learning_rate=0.05, patience=5, max_epochs=60)


def small_config(out_dir, **kw):
    base = dict(scenario="random", seed=3, out_dir=str(out_dir), tuple_proportions=[0.0, 1.0],
                train_fractions=[0.5], n_trials=2, train=FAST, synthetic=SMALL)
    base.update(kw)
    return ExperimentConfig(**base)


def test_emit_summary_example(tmp_path):
    path = tmp_path / "s.txt"
    emit_summary({50.0: [1.0, 3.0]}, path)
    assert path.read_text(encoding="utf-8") == "50 2.0 1.0\n"


def test_emit_summary_sorts_and_single_trial_std_zero(tmp_path):
    path = tmp_path / "s.txt"
    emit_summary({100.0: [4.0], 0.0: [1.5], 25.0: [2.0]}, path)
    rows = read_summary(path)
    assert [r[0] for r in rows] == [0.0, 25.0, 100.0]
    assert all(r[2] == 0.0 for r in rows)


def test_emit_summary_omits_empty_group(tmp_path):
    path = tmp_path / "s.txt"
    with pytest.warns(UserWarning, match="omitted"):
        emit_summary({0.0: [], 10.0: [1.0]}, path)
    assert read_summary(path) == [(10.0, 1.0, 0.0)]


def test_summary_keeps_full_precision(tmp_path):
    vals = [0.1, 0.2, 0.7000000000000001]
    path = tmp_path / "s.txt"
    emit_summary({7.0: vals}, path)
    (x, mean, std), = read_summary(path)
    assert mean == float(np.mean(vals)) and std == float(np.std(vals))


def test_config_requires_one_input(tmp_path):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(scenario="random", seed=0, out_dir=str(tmp_path))
    with pytest.raises(ConfigurationError):
        small_config(tmp_path, scenario="sideways")
    with pytest.raises(ConfigurationError):
        small_config(tmp_path, tuple_proportions=[])


def test_config_from_dicts(tmp_path):
    cfg = small_config(tmp_path, train={"d_x": 2, "d_e": 2}, synthetic={"n_objects": 40, "m_attributes": 5,
                                                                          "m_tied": 2})
    assert isinstance(cfg.train, TrainConfig) and cfg.synthetic.n_objects == 40


def test_fingerprint_ignores_out_dir(tmp_path):
    assert small_config(tmp_path / "a").fingerprint() == small_config(tmp_path / "b").fingerprint()
    assert small_config(tmp_path).fingerprint() != small_config(tmp_path, seed=4).fingerprint()


def test_run_is_deterministic(tmp_path):
    files = {}
    for tag in ("a", "b"):
        out = tmp_path / tag
        run_experiment(small_config(out, n_trials=1))
        files[tag] = {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "config.json"}
    assert files["a"] == files["b"]
    assert any(name.startswith("summary_") for name in files["a"])


def test_trial_seeds_and_pairing(tmp_path):
    results = run_experiment(small_config(tmp_path))
    assert [r.seed for r in results] == [3, 4, 3, 4]
    assert all(r.ok and np.isfinite(r.test_nll) for r in results)
    assert len({r.fingerprint for r in results}) == 1


def test_sweep_five_rows(tmp_path):
    props = [0, 0.25, 0.5, 0.75, 1.0]
    run_experiment(small_config(tmp_path, tuple_proportions=props))
    rows = read_summary(tmp_path / "summary_random_tuples_train50.txt")
    assert [r[0] for r in rows] == [0, 25, 50, 75, 100]
    assert np.all(np.isfinite(rows))


def test_summaries_match_recomputation(tmp_path):
    run_experiment(small_config(tmp_path, n_trials=3))
    trials = read_trials(tmp_path / "trials.csv")
    for p in (0.0, 1.0):
        vals = [t.test_nll for t in trials if t.tuple_proportion == p]
        (x, mean, std), = read_summary(tmp_path / f"summary_random_train_tuples{100 * p:g}.txt")
        assert (x, mean, std) == (50.0, float(np.mean(vals)), float(np.std(vals)))


def test_summarize_reproduces_files(tmp_path):
    run_experiment(small_config(tmp_path))
    before = {p.name: p.read_bytes() for p in tmp_path.glob("summary_*")}
    for p in tmp_path.glob("summary_*"):
        p.unlink()
    summarize(tmp_path)
    assert {p.name: p.read_bytes() for p in tmp_path.glob("summary_*")} == before


def test_failed_trial_marks_cell(tmp_path, monkeypatch):
    from kgfa import experiment
    from kgfa.errors import NumericalError

    real = experiment.train

    def flaky(config, tr, va, kg, pos, neg, rng):
        if kg.n_tuples:
            raise NumericalError("boom")
        return real(config, tr, va, kg, pos, neg, rng)

    monkeypatch.setattr(experiment, "train", flaky)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = run_experiment(small_config(tmp_path))
    status = {(r.tuple_proportion, r.trial): r.status for r in results}
    assert status == {(0.0, 0): "ok", (0.0, 1): "ok", (1.0, 0): "failed", (1.0, 1): "failed"}
    rows = read_summary(tmp_path / "summary_random_tuples_train50.txt")
    assert [r[0] for r in rows] == [0.0]


def test_sweep_does_not_touch_inputs(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path / "in"), "--spec", _spec_file(tmp_path)]) == 0
    before = {p.name: p.read_bytes() for p in (tmp_path / "in").iterdir()}
    rc = main(["run", "--seed", "0", "--out-dir", str(tmp_path / "out"), "--scenario", "shift",
               "--dataset", str(tmp_path / "in" / "data.csv"), "--triples", str(tmp_path / "in" / "triples.tsv"),
               "--attribute-map", str(tmp_path / "in" / "attribute_map.tsv"), "--tuple-proportions", "0,0.5,1",
               "--train-fractions", "0.5", "--n-trials", "1", "--d-x", "2", "--d-e", "2", "--max-epochs", "30"])
    assert rc == 0
    assert {p.name: p.read_bytes() for p in (tmp_path / "in").iterdir()} == before
    assert len(read_summary(tmp_path / "out" / "summary_shift_tuples_train50.txt")) == 3


def _spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"n_objects": 60, "m_attributes": 6, "m_tied": 3, "d_x": 2, "d_e": 2,
                                "n_extra_entities": 3, "tuples_per_entity": 4}))
    return str(path)


def test_cli_synth_writes_loadable_files(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), "--spec", _spec_file(tmp_path), "--seed", "5"]) == 0
    assert load_dataset(tmp_path / "data.csv").values.shape == (60, 6)
    assert (tmp_path / "truth.npz").exists()


def test_cli_run_with_config_and_summarize(tmp_path):
    cfg = {"tuple_proportions": [0.0, 1.0], "train_fractions": [0.5], "n_trials": 1,
           "train": {"d_x": 2, "d_e": 2, "max_epochs": 40}, "synthetic": json.loads(open(_spec_file(tmp_path)).read())}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--seed", "1", "--out-dir", str(out),
                 "--scenario", "random", "--patience", "5"]) == 0
    assert json.loads((out / "config.json").read_text())["train"]["patience"] == 5
    assert main(["summarize", "--out-dir", str(out)]) == 0


def test_cli_run_requires_mandatory_flags(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--seed", "0", "--out-dir", str(tmp_path)])


def test_cli_bad_config_exit_code(tmp_path, capsys):
    rc = main(["run", "--seed", "0", "--out-dir", str(tmp_path), "--scenario", "random"])
    assert rc == 2 and "error" in capsys.readouterr().err


def test_gradcheck_reports_every_block():
    buf = io.StringIO()
    ok, report = gradcheck.run_gradcheck(n_instances=3, out=buf)
    assert ok
    text = buf.getvalue()
    for block in ("fa.mu", "fa.loadings", "fa.log_var", "kg.embeddings", "kg.relations", "joint.A",
                  "joint.b", "joint.embeddings", "joint.free_loadings"):
        assert block in report and block in text


def test_gradcheck_detects_corruption(monkeypatch):
    real = gradcheck.fa_marginal_nll_grad

    def broken(data, params):
        g_mu, g_W, g_lv = real(data, params)
        return g_mu, 1.01 * g_W, g_lv

    monkeypatch.setattr(gradcheck, "fa_marginal_nll_grad", broken)
    ok, report = gradcheck.run_gradcheck(n_instances=3, out=io.StringIO())
    assert not ok and report["fa.loadings"] > 1e-5
    assert main(["gradcheck", "--instances", "2"]) == 1


def test_trial_result_ok_flag():
    r = TrialResult("random", 1.0, 0.8, 0, 0, "failed", float("nan"), float("nan"), 0, 3, "x")
    assert not r.ok
