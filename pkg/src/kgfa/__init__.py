"""Factor analysis with loading rows tied to knowledge-graph embeddings."""
from .bridge import Dims, JointParams, affine_map, assemble_loadings, joint_objective, pack, unpack
from .data import (PartitionSpec, SyntheticSpec, generate_synthetic, load_dataset, load_kg,
                   partition, save_dataset, save_kg, subsample_tuples)
from .experiment import ExperimentConfig, TrialResult, emit_summary, read_summary, run_experiment, summarize
from .fa import Dataset, FaParams, build_covariance, fa_marginal_nll, fa_marginal_nll_grad
from .kg import (KnowledgeGraph, LabeledTuple, corrupt_triples, distmult_score, distmult_score_grad,
                 kg_objective, sample_negatives, tuple_log_likelihood)
from .gradcheck import run_gradcheck
from .optim import AdamState, TrainConfig, TrainResult, adam_step, fit_fa, init_params, train

__version__ = "0.1.0"
