# %% [markdown]
# A small tuple-proportion sweep through the experiment runner, then the
# summary table it writes. The same thing from a shell:
#
#     python -m kgfa run --seed 0 --out-dir out --scenario random --config cfg.json

# %%
import tempfile
from pathlib import Path

from kgfa.data import SyntheticSpec
from kgfa.experiment import ExperimentConfig, read_summary, run_experiment
from kgfa.optim import TrainConfig

out = Path(tempfile.mkdtemp())
cfg = ExperimentConfig(
    scenario="random", seed=0, out_dir=str(out),
    tuple_proportions=[0.0, 0.5, 1.0], train_fractions=[60 / 560], val_fraction=0.5, n_trials=3,
    train=TrainConfig(d_x=3, d_e=3, learning_rate=0.03),
    synthetic=SyntheticSpec(n_objects=560, tuples_per_entity=1000, n_clusters=5, cluster_spread=0.0,
                            noise_std=2.0, data_scale=10.0),
)
results = run_experiment(cfg)
print(sorted(p.name for p in out.iterdir()))

# %%
for x, mean, std in read_summary(out / "summary_random_tuples_train10.7143.txt"):
    print(f"{x:>5g}% tuples: {mean:.3f} +- {std:.3f}")
