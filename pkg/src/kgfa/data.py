"""File formats, data partitioning, tuple subsampling and a synthetic benchmark."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bridge import JointParams, affine_map
from .errors import ConfigurationError, FormatError, GenerationError
from .fa import Dataset
from .kg import KnowledgeGraph

RANDOM = "random"
SHIFT = "shift"
SCENARIOS = (RANDOM, SHIFT)
_ID_HEADERS = ("", "id", "object_id")


# --------------------------------------------------------------------------- I/O

def load_dataset(path, has_ids=None) -> Dataset:
    """Read a CSV whose first row holds attribute names.

    A leading object-id column is recognised when its header cell is empty,
    ``id`` or ``object_id`` (override with ``has_ids``).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty file", path)
    header = rows[0]
    if has_ids is None:
        has_ids = header[0].strip().lower() in _ID_HEADERS
    names = header[1:] if has_ids else header
    values, ids = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        cells = row[1:] if has_ids else row
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise FormatError(f"non-numeric cell ({exc})", path, lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise FormatError("non-finite cell", path, lineno)
        values.append(vals)
        ids.append(row[0] if has_ids else str(len(ids)))
    if not values:
        raise FormatError("no data rows", path)
    return Dataset(np.array(values), names, ids)


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *dataset.attribute_names])
        for oid, row in zip(dataset.object_ids, dataset.values.tolist()):
            w.writerow([oid, *map(repr, row)])


def _tsv_rows(path, n_fields):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != n_fields or not all(p.strip() for p in parts):
                raise FormatError(f"expected {n_fields} tab-separated fields", path, lineno)
            yield lineno, [p.strip() for p in parts]


def load_kg(triples_path, map_path=None, attribute_names=None) -> KnowledgeGraph:
    """Read ``head<TAB>relation<TAB>tail`` lines and an optional attribute map.

    Vocabularies follow first appearance. Entities only named in the map are
    appended after those seen in the triples. Duplicate tuples are dropped
    with a warning.
    """
    ent_index, rel_index = {}, {}
    triples, seen = [], set()

    def ent(name):
        return ent_index.setdefault(name, len(ent_index))

    for lineno, (h, r, t) in _tsv_rows(triples_path, 3):
        key = (ent(h), rel_index.setdefault(r, len(rel_index)), ent(t))
        if key in seen:
            warnings.warn(f"{triples_path}:{lineno}: duplicate tuple {(h, r, t)} ignored", stacklevel=2)
            continue
        seen.add(key)
        triples.append(key)

    attr_map = {}
    if map_path is not None:
        if attribute_names is None:
            raise ConfigurationError("attribute_names are required to resolve an attribute map")
        col = {name: i for i, name in enumerate(attribute_names)}
        for lineno, (attr, entity) in _tsv_rows(map_path, 2):
            if attr not in col:
                raise FormatError(f"unknown attribute {attr!r}", map_path, lineno)
            if col[attr] in attr_map:
                raise FormatError(f"attribute {attr!r} mapped twice", map_path, lineno)
            attr_map[col[attr]] = ent(entity)

    return KnowledgeGraph(list(ent_index), list(rel_index), triples, attr_map)


def save_kg(kg: KnowledgeGraph, triples_path, map_path=None, attribute_names=None) -> None:
    with open(triples_path, "w", encoding="utf-8") as fh:
        for h, r, t in kg.triples.tolist():
            fh.write(f"{kg.entities[h]}\t{kg.relations[r]}\t{kg.entities[t]}\n")
    if map_path is not None:
        if attribute_names is None:
            raise ConfigurationError("attribute_names are required to write an attribute map")
        with open(map_path, "w", encoding="utf-8") as fh:
            for col, e in kg.attribute_entity.items():
                fh.write(f"{attribute_names[col]}\t{kg.entities[e]}\n")


# --------------------------------------------------------------------- splitting

@dataclass(frozen=True)
class PartitionSpec:
    scenario: str = RANDOM
    train_val_fraction: float = 0.8
    val_fraction_within: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 0.0 < self.train_val_fraction <= 1.0:
            raise ConfigurationError("train_val_fraction must lie in (0, 1]")
        if not 0.0 < self.val_fraction_within < 1.0:
            raise ConfigurationError("val_fraction_within must lie in (0, 1)")


def split_sizes(n: int, spec: PartitionSpec):
    """(n_train, n_val, n_test): ceiling for train+val, floor for validation."""
    n_tv = math.ceil(round(spec.train_val_fraction * n, 9))
    n_val = math.floor(round(spec.val_fraction_within * n_tv, 9))
    return n_tv - n_val, n_val, n - n_tv


def partition(dataset: Dataset, spec: PartitionSpec):
    """Split into (train, val, test).

    ``random`` permutes objects before cutting off the test suffix; ``shift``
    keeps the original order, so the test set is the last block of objects.
    Train/validation are always a seeded random split of the remainder.
    """
    n_train, n_val, n_test = split_sizes(dataset.n, spec)
    if min(n_train, n_val, n_test) < 1:
        raise ConfigurationError(
            f"empty split for n={dataset.n}: train={n_train}, val={n_val}, test={n_test}")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(dataset.n) if spec.scenario == RANDOM else np.arange(dataset.n)
    tv, test = order[:n_train + n_val], order[n_train + n_val:]
    pick = rng.permutation(len(tv))
    train_idx, val_idx = tv[pick[:n_train]], tv[pick[n_train:]]
    if spec.scenario == SHIFT:
        train_idx, val_idx = np.sort(train_idx), np.sort(val_idx)
    return dataset.take(train_idx), dataset.take(val_idx), dataset.take(test)


def subsample_tuples(kg: KnowledgeGraph, proportion: float, rng) -> KnowledgeGraph:
    """Keep a uniformly random ``floor(proportion * l)`` of the positive tuples."""
    if not 0.0 <= proportion <= 1.0:
        raise ConfigurationError("proportion must lie in [0, 1]")
    keep = math.floor(round(proportion * kg.n_tuples, 9))
    if keep == kg.n_tuples:
        return kg
    idx = np.sort(rng.choice(kg.n_tuples, size=keep, replace=False))
    return kg.with_triples(kg.triples[idx])


# --------------------------------------------------------------------- synthetic

@dataclass(frozen=True)
class SyntheticSpec:
    """Ground truth for a tied FA model plus a KG consistent with its embeddings.

    Attribute columns ``0..m_tied-1`` are tied to entities ``0..m_tied-1``.
    A tuple is eligible as positive when its ground-truth DistMult score exceeds
    ``score_margin``; each head keeps at most ``tuples_per_entity`` of them.
    ``score_temperature > 0`` adds logistic noise of that scale to each score
    before thresholding, so a tuple is eligible with probability
    ``sigmoid((score - margin) / temperature)``.

    ``data_scale`` expresses the observations in other units: the data and
    every data-side ground-truth parameter are multiplied by it.

    With ``n_clusters > 0`` entities are scattered around that many unit
    prototypes (``cluster_spread`` is the per-coordinate scatter), so entities
    of one cluster share their tuple pattern and, through the affine map,
    their loading rows. ``n_clusters = 0`` draws embeddings iid standard normal.
    """

    n_objects: int = 500
    m_attributes: int = 40
    m_tied: int = 30
    d_x: int = 3
    d_e: int = 3
    n_extra_entities: int = 10
    n_relations: int = 2
    tuples_per_entity: int = 20
    noise_std: float = 1.0
    data_scale: float = 1.0
    ground_truth_seed: int = 0
    score_margin: float = 0.0
    score_temperature: float = 0.0
    n_clusters: int = 0
    cluster_spread: float = 0.1
    max_retries: int = 20

    def __post_init__(self):
        if not 0 <= self.m_tied <= self.m_attributes:
            raise ConfigurationError("m_tied must lie in [0, m_attributes]")
        for name in ("n_objects", "m_attributes", "d_x", "d_e", "n_relations", "tuples_per_entity"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if min(self.noise_std, self.cluster_spread, self.score_temperature) < 0:
            raise ConfigurationError("noise_std, cluster_spread and score_temperature must be non-negative")
        if self.data_scale <= 0:
            raise ConfigurationError("data_scale must be positive")
        if self.n_clusters < 0:
            raise ConfigurationError("n_clusters must be >= 0")


def _draw_tuples(emb, rel, spec, rng):
    E = len(emb)
    # score[r, h, t]
    scores = np.einsum("hk,rk,tk->rht", emb, rel, emb)
    if spec.score_temperature > 0:
        scores = scores + spec.score_temperature * rng.logistic(size=scores.shape)
    triples = set()
    for h in range(E):
        r_idx, t_idx = np.nonzero(scores[:, h, :] > spec.score_margin)
        ok = t_idx != h
        r_idx, t_idx = r_idx[ok], t_idx[ok]
        if len(r_idx) == 0:
            return None
        take = rng.choice(len(r_idx), size=min(spec.tuples_per_entity, len(r_idx)), replace=False)
        triples.update((h, int(r_idx[i]), int(t_idx[i])) for i in take)
    return np.array(sorted(triples), dtype=np.int64)


def _draw_embeddings(E, spec, rng):
    if spec.n_clusters == 0:
        return rng.normal(size=(E, spec.d_e))
    protos = rng.normal(size=(spec.n_clusters, spec.d_e))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    # attribute entities and extra entities are each spread evenly over clusters
    member = np.concatenate([np.arange(spec.m_tied), np.arange(E - spec.m_tied)]) % spec.n_clusters
    member = rng.permutation(member[:spec.m_tied]).tolist() + rng.permutation(member[spec.m_tied:]).tolist()
    return protos[member] + spec.cluster_spread * rng.normal(size=(E, spec.d_e))


def generate_synthetic(spec: SyntheticSpec):
    """Return ``(dataset, kg, truth)`` where ``truth`` is a :class:`JointParams`."""
    rng = np.random.default_rng(spec.ground_truth_seed)
    E = spec.m_tied + spec.n_extra_entities
    if E < 2:
        raise GenerationError("need at least two entities")
    for _ in range(spec.max_retries):
        emb = _draw_embeddings(E, spec, rng)
        rel = rng.normal(size=(spec.n_relations, spec.d_e))
        triples = _draw_tuples(emb, rel, spec, rng)
        if triples is not None:
            break
    else:
        raise GenerationError(
            f"some entity had no tuple scoring above {spec.score_margin} after {spec.max_retries} draws")

    A = rng.normal(size=(spec.d_x, spec.d_e)) / np.sqrt(spec.d_e)
    b = 0.5 * rng.normal(size=spec.d_x)
    free = rng.normal(size=(spec.m_attributes - spec.m_tied, spec.d_x))
    W = np.vstack([affine_map(A, b, emb[:spec.m_tied]), free])
    mu = rng.normal(size=spec.m_attributes)
    x = rng.normal(size=(spec.n_objects, spec.d_x))
    Y = x @ W.T + mu + spec.noise_std * rng.normal(size=(spec.n_objects, spec.m_attributes))
    c = spec.data_scale

    names = [f"y{i}" for i in range(spec.m_attributes)]
    entities = [f"attr_{i}" for i in range(spec.m_tied)] + [f"ent_{k}" for k in range(spec.n_extra_entities)]
    relations = [f"rel_{r}" for r in range(spec.n_relations)]
    kg = KnowledgeGraph(entities, relations, triples, {i: i for i in range(spec.m_tied)})
    log_var = np.full(spec.m_attributes, np.log(max((c * spec.noise_std) ** 2, 1e-6)))
    truth = JointParams(emb, rel, c * A, c * b, c * mu, log_var, c * free)
    return Dataset(c * Y, names), kg, truth
