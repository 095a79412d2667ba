# %% [markdown]
# DistMult scores and type-aware negative sampling on a toy graph.

# %%
import numpy as np

from kgfa import KnowledgeGraph, distmult_score, sample_negatives
from kgfa.errors import SamplingError
from kgfa.kg import kg_objective

# entities 0-2 stand for attributes (columns 0-2); 3-5 are other entities
kg = KnowledgeGraph(["temp", "rain", "wind", "coast", "mountain", "plain"], ["near", "caused_by"],
                    [(0, 0, 1), (1, 1, 3), (2, 0, 0), (4, 0, 3)], {0: 0, 1: 1, 2: 2})
print(kg.n_entities, "entities,", kg.n_tuples, "tuples,", kg.n_tied, "tied columns")
print("class of 'rain':", [kg.entities[e] for e in kg.class_members(1)])

# %%
rng = np.random.default_rng(0)
for neg in sample_negatives((0, 0, 1), kg, 5, rng):
    print(kg.entities[neg.head], kg.relations[neg.relation], kg.entities[neg.tail])

# %%
# replacements never leave the entity class of the replaced slot
emb = rng.normal(size=(kg.n_entities, 3))
rel = rng.normal(size=(kg.n_relations, 3))
print("score of (temp, near, rain):", distmult_score(emb[0], emb[1], rel[0]))

neg = np.array([t[:3] for p in kg.triples for t in sample_negatives(p, kg, 2, rng)])
for step in range(200):
    val, g_e, g_r = kg_objective(emb, rel, kg.triples, neg)
    emb += 0.1 * g_e
    rel += 0.1 * g_r
print("mean log-likelihood after ascent:", val)

# %%
# with only two non-attribute entities, (mountain, near, coast) has no
# corruption left: both candidates are in the tuple itself
small = KnowledgeGraph(kg.entities[:5], kg.relations, [(4, 0, 3)], {0: 0, 1: 1, 2: 2})
try:
    sample_negatives((4, 0, 3), small, 1, rng)
except SamplingError as exc:
    print("SamplingError:", exc)
