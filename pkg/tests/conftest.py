import numpy as np
import pytest

from kgfa.kg import KnowledgeGraph


def central_diff(f, x, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b, floor=1e-6):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_kg(rng, n_entities=6, n_relations=2, n_tuples=10, n_attr=3):
    """Random KG whose first ``n_attr`` entities map to columns 0..n_attr-1."""
    keys = set()
    while len(keys) < n_tuples:
        h, t = rng.choice(n_entities, 2, replace=False)
        keys.add((int(h), int(rng.integers(n_relations)), int(t)))
    return KnowledgeGraph([f"e{i}" for i in range(n_entities)], [f"r{i}" for i in range(n_relations)],
                          sorted(keys), {i: i for i in range(n_attr)})


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
