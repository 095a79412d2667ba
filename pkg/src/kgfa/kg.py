"""Knowledge graph container, DistMult scoring and negative sampling.

Tuples are stored as integer rows ``(head, relation, tail)`` indexing into the
entity and relation vocabularies. Entities are split into two classes: those
that stand for a data attribute (a column of the observation matrix) and all
others. Negative sampling never swaps an entity across classes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, SamplingError

POSITIVE = 1
NEGATIVE = 0


class LabeledTuple(NamedTuple):
    head: int
    relation: int
    tail: int
    label: int  # POSITIVE or NEGATIVE


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Immutable multi-relational graph.

    Parameters
    ----------
    entities, relations : sequence of str
        Vocabularies; position is the index used in ``triples``.
    triples : array_like of int, shape (l, 3)
        Positive tuples, no duplicates.
    attribute_entity : mapping int -> int
        Data column index -> entity index, injective. Entities in its image
        form the attribute-corresponding class.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: np.ndarray
    attribute_entity: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "entities", tuple(self.entities))
        set_(self, "relations", tuple(self.relations))
        triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        triples.setflags(write=False)
        set_(self, "triples", triples)
        set_(self, "attribute_entity", dict(sorted(self.attribute_entity.items())))

        E, R = len(self.entities), len(self.relations)
        if len(set(self.entities)) != E:
            raise ConfigurationError("duplicate entity names")
        if len(set(self.relations)) != R:
            raise ConfigurationError("duplicate relation names")
        if triples.size:
            if triples.min() < 0 or triples[:, [0, 2]].max() >= E or triples[:, 1].max() >= R:
                raise ConfigurationError("tuple index out of vocabulary bounds")
        keyset = set(map(tuple, triples.tolist()))
        if len(keyset) != len(triples):
            raise ConfigurationError("duplicate positive tuples")
        ents = list(self.attribute_entity.values())
        if len(set(ents)) != len(ents):
            raise ConfigurationError("attribute_entity map is not injective")
        if any(e < 0 or e >= E for e in ents) or any(a < 0 for a in self.attribute_entity):
            raise ConfigurationError("attribute_entity index out of range")

        is_attr = np.zeros(E, dtype=bool)
        is_attr[ents] = True
        is_attr.setflags(write=False)
        set_(self, "_keys", keyset)
        set_(self, "is_attribute_entity", is_attr)
        set_(self, "_pools", (np.flatnonzero(~is_attr), np.flatnonzero(is_attr)))

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_tuples(self) -> int:
        return len(self.triples)

    @property
    def n_tied(self) -> int:
        return len(self.attribute_entity)

    def __contains__(self, item) -> bool:
        return tuple(int(v) for v in item) in self._keys

    def class_members(self, entity: int) -> np.ndarray:
        """Entity indices sharing ``entity``'s class (itself included)."""
        return self._pools[int(self.is_attribute_entity[entity])]

    def untupled_attribute_entities(self) -> list[int]:
        """Attribute entities that occur in no positive tuple."""
        seen = set(self.triples[:, 0].tolist()) | set(self.triples[:, 2].tolist())
        return [e for e in self.attribute_entity.values() if e not in seen]

    def with_triples(self, triples) -> "KnowledgeGraph":
        """Same vocabularies and attribute map, different tuple set."""
        return KnowledgeGraph(self.entities, self.relations, triples, self.attribute_entity)


def distmult_score(e_h, e_t, m_r) -> float:
    e_h, e_t, m_r = (np.asarray(v, dtype=float) for v in (e_h, e_t, m_r))
    if not (e_h.shape == e_t.shape == m_r.shape) or e_h.ndim != 1:
        raise ValueError(f"dimension mismatch: {e_h.shape}, {e_t.shape}, {m_r.shape}")
    return float(np.sum(e_h * m_r * e_t))


def distmult_score_grad(e_h, e_t, m_r):
    """Return (d/de_h, d/de_t, d/dm_r) of the DistMult score."""
    e_h, e_t, m_r = (np.asarray(v, dtype=float) for v in (e_h, e_t, m_r))
    if not (e_h.shape == e_t.shape == m_r.shape) or e_h.ndim != 1:
        raise ValueError(f"dimension mismatch: {e_h.shape}, {e_t.shape}, {m_r.shape}")
    return m_r * e_t, m_r * e_h, e_h * e_t


def log_sigmoid(x):
    """log(1 / (1 + exp(-x))) without overflow for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = -np.log1p(np.exp(-x[pos]))
    out[~pos] = x[~pos] - np.log1p(np.exp(x[~pos]))
    return out if out.ndim else float(out)


def tuple_log_likelihood(score: float, label: int) -> float:
    if label == POSITIVE:
        return float(log_sigmoid(score))
    if label == NEGATIVE:
        return float(log_sigmoid(-score))
    raise ValueError(f"label must be POSITIVE or NEGATIVE, got {label!r}")


def score_triples(embeddings, relations, triples) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    h, r, t = triples.T
    return np.einsum("ij,ij,ij->i", embeddings[h], relations[r], embeddings[t])


def kg_objective(embeddings, relations, positives, negatives):
    """Averaged classification log-likelihood of positive and negative tuples.

    Returns ``(value, grad_embeddings, grad_relations)``. Either tuple list
    may be empty, in which case its term contributes nothing.
    """
    embeddings = np.asarray(embeddings, dtype=float)
    relations = np.asarray(relations, dtype=float)
    value = 0.0
    g_emb = np.zeros_like(embeddings)
    g_rel = np.zeros_like(relations)
    for triples, sign in ((positives, 1.0), (negatives, -1.0)):
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if len(triples) == 0:
            continue
        h, r, t = triples.T
        eh, mr, et = embeddings[h], relations[r], embeddings[t]
        s = np.einsum("ij,ij,ij->i", eh, mr, et)
        value += float(np.mean(log_sigmoid(sign * s)))
        # d/ds log sigmoid(sign*s) = sign * sigmoid(-sign*s)
        coef = (sign * expit(-sign * s) / len(triples))[:, None]
        np.add.at(g_emb, h, coef * mr * et)
        np.add.at(g_emb, t, coef * mr * eh)
        np.add.at(g_rel, r, coef * eh * et)
    return value, g_emb, g_rel


def _corrupt(kg: KnowledgeGraph, h: int, r: int, t: int, rng, max_tries: int):
    first = int(rng.integers(2))
    for slot in (first, 1 - first):
        pool = kg.class_members(h if slot == 0 else t)
        for _ in range(max_tries):
            new = int(pool[rng.integers(len(pool))])
            if new == h or new == t:
                continue
            cand = (new, r, t) if slot == 0 else (h, r, new)
            if cand not in kg._keys:
                return cand
        # rejection ran dry; fall back to the exact valid set for this slot
        valid = [
            int(e) for e in pool
            if e != h and e != t
            and ((int(e), r, t) if slot == 0 else (h, r, int(e))) not in kg._keys
        ]
        if valid:
            new = valid[int(rng.integers(len(valid)))]
            return (new, r, t) if slot == 0 else (h, r, new)
    raise SamplingError(f"no valid corruption exists for tuple {(h, r, t)}")


def sample_negatives(positive: Sequence[int], kg: KnowledgeGraph, k: int, rng,
                     max_tries: int = 100) -> list[LabeledTuple]:
    """Draw ``k`` negatives by replacing the head or the tail of ``positive``.

    The slot is chosen with probability 1/2. The replacement is uniform over
    entities of the same class, excluding both entities of the source tuple,
    and the result is rejected if it is itself a positive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    h, r, t = (int(v) for v in positive)
    return [LabeledTuple(*_corrupt(kg, h, r, t, rng, max_tries), NEGATIVE) for _ in range(k)]


def corrupt_triples(kg: KnowledgeGraph, triples, k: int, rng, max_tries: int = 100) -> np.ndarray:
    """``k`` negatives for every row of ``triples``, as an (l*k, 3) array.

    Collisions are checked against ``kg``'s positive set.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = np.empty((len(triples) * k, 3), dtype=np.int64)
    i = 0
    for h, r, t in triples.tolist():
        for _ in range(k):
            out[i] = _corrupt(kg, h, r, t, rng, max_tries)
            i += 1
    return out
