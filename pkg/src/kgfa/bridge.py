"""Tie factor-loading rows to entity embeddings and assemble the joint objective.

Loading rows of attributes that have an entity in the knowledge graph are not
free parameters; they are produced by a shared affine map of that entity's
embedding. The remaining rows are estimated by plain maximum likelihood.

The objective being *maximised* is::

    -fa_marginal_nll(data) + mean log sigmoid(score(pos)) + mean log sigmoid(-score(neg))
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigurationError
from .fa import FaParams, fa_marginal_nll, fa_marginal_nll_grad
from .kg import KnowledgeGraph, kg_objective

BLOCKS = ("embeddings", "relations", "A", "b", "mu", "log_var", "free_loadings")


@dataclass(frozen=True)
class Dims:
    n_entities: int
    n_relations: int
    d_e: int
    d_x: int
    m: int
    n_tied: int

    def shapes(self) -> dict:
        return {
            "embeddings": (self.n_entities, self.d_e),
            "relations": (self.n_relations, self.d_e),
            "A": (self.d_x, self.d_e),
            "b": (self.d_x,),
            "mu": (self.m,),
            "log_var": (self.m,),
            "free_loadings": (self.m - self.n_tied, self.d_x),
        }

    @property
    def size(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())

    @classmethod
    def for_problem(cls, kg: KnowledgeGraph, m: int, d_x: int = 5, d_e: int = 5) -> "Dims":
        return cls(kg.n_entities, kg.n_relations, d_e, d_x, m, kg.n_tied)


@dataclass
class JointParams:
    embeddings: np.ndarray
    relations: np.ndarray
    A: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    log_var: np.ndarray
    free_loadings: np.ndarray

    @property
    def dims(self) -> Dims:
        E, d_e = self.embeddings.shape
        m = len(self.mu)
        return Dims(E, self.relations.shape[0], d_e, len(self.b), m, m - self.free_loadings.shape[0])

    def copy(self) -> "JointParams":
        return JointParams(*(getattr(self, f.name).copy() for f in fields(self)))

    def zeros_like(self) -> "JointParams":
        return JointParams(*(np.zeros_like(getattr(self, f.name)) for f in fields(self)))


def affine_map(A, b, e) -> np.ndarray:
    """``A @ e + b``; ``e`` may also be a stack of row vectors."""
    A, b, e = np.asarray(A, float), np.asarray(b, float), np.asarray(e, float)
    if A.shape[1] != e.shape[-1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A {A.shape}, b {b.shape}, e {e.shape}")
    return e @ A.T + b


def _split_rows(joint: JointParams, kg: KnowledgeGraph):
    m = len(joint.mu)
    tied_cols = np.fromiter(kg.attribute_entity.keys(), dtype=np.int64, count=kg.n_tied)
    tied_ents = np.fromiter(kg.attribute_entity.values(), dtype=np.int64, count=kg.n_tied)
    if tied_cols.size and tied_cols.max() >= m:
        raise ConfigurationError(f"attribute index {tied_cols.max()} out of range for m={m}")
    free_cols = np.setdiff1d(np.arange(m), tied_cols)
    if joint.free_loadings.shape[0] != len(free_cols):
        raise ConfigurationError(
            f"{joint.free_loadings.shape[0]} free loading rows but {len(free_cols)} untied attributes")
    if joint.embeddings.shape[0] != kg.n_entities:
        raise ConfigurationError("embedding table does not match the entity vocabulary")
    return tied_cols, tied_ents, free_cols


def assemble_loadings(joint: JointParams, kg: KnowledgeGraph) -> np.ndarray:
    """Full m x d_x loading matrix: affine rows for tied attributes, free rows elsewhere."""
    tied_cols, tied_ents, free_cols = _split_rows(joint, kg)
    W = np.empty((len(joint.mu), len(joint.b)))
    W[free_cols] = joint.free_loadings
    if tied_cols.size:
        W[tied_cols] = affine_map(joint.A, joint.b, joint.embeddings[tied_ents])
    return W


def fa_params(joint: JointParams, kg: KnowledgeGraph) -> FaParams:
    return FaParams(joint.mu, joint.log_var, assemble_loadings(joint, kg))


def joint_objective(joint: JointParams, data, positives, negatives, kg: KnowledgeGraph):
    """Value and gradient (as a :class:`JointParams`) of the joint objective."""
    tied_cols, tied_ents, free_cols = _split_rows(joint, kg)
    fa = fa_params(joint, kg)
    nll = fa_marginal_nll(data, fa)
    g_mu, g_W, g_lv = fa_marginal_nll_grad(data, fa)
    kg_val, g_emb, g_rel = kg_objective(joint.embeddings, joint.relations, positives, negatives)

    grad = joint.zeros_like()
    grad.mu = -g_mu
    grad.log_var = -g_lv
    grad.free_loadings = -g_W[free_cols]
    grad.relations = g_rel
    grad.embeddings = g_emb
    if tied_cols.size:
        gt = -g_W[tied_cols]  # d f / d w_i for tied rows
        grad.A = gt.T @ joint.embeddings[tied_ents]
        grad.b = gt.sum(axis=0)
        np.add.at(grad.embeddings, tied_ents, gt @ joint.A)
    return -nll + kg_val, grad


def pack(joint: JointParams) -> np.ndarray:
    """Flatten in the fixed order given by ``BLOCKS``."""
    return np.concatenate([np.ravel(getattr(joint, name)) for name in BLOCKS])


def unpack(vector, dims: Dims) -> JointParams:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (dims.size,):
        raise ValueError(f"expected a vector of length {dims.size}, got shape {vector.shape}")
    out, start = {}, 0
    for name, shape in dims.shapes().items():
        size = int(np.prod(shape))
        out[name] = vector[start:start + size].reshape(shape).copy()
        start += size
    return JointParams(**out)
