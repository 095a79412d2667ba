"""Central finite-difference checks of every analytic gradient.

The gradient functions are looked up on this module at call time, so a test
can monkeypatch e.g. ``kgfa.gradcheck.fa_marginal_nll_grad`` with a broken
version and observe a failing report.
"""
from __future__ import annotations

import sys
import time

import numpy as np

from .bridge import BLOCKS, Dims, JointParams, joint_objective, pack, unpack
from .fa import FaParams, fa_marginal_nll, fa_marginal_nll_grad
from .kg import KnowledgeGraph, kg_objective

STEP = 1e-5
TOL = 1e-5


def numerical_grad(f, x: np.ndarray, h: float = STEP) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_error(analytic, numeric, floor: float = 1e-6) -> float:
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _fa_instance(rng):
    n, m, d = rng.integers(2, 31), rng.integers(1, 9), rng.integers(1, 4)
    Y = rng.normal(size=(n, m)) * rng.uniform(0.5, 2.0)
    p = FaParams(rng.normal(size=m), rng.normal(0.0, 0.5, size=m), rng.normal(size=(m, d)))
    return Y, p


def check_fa(n_instances: int, rng) -> dict:
    worst = dict.fromkeys(("fa.mu", "fa.loadings", "fa.log_var"), 0.0)
    for _ in range(n_instances):
        Y, p = _fa_instance(rng)
        m, d = p.loadings.shape
        g_mu, g_W, g_lv = fa_marginal_nll_grad(Y, p)

        def at(mu=p.mu, lv=p.log_var, W=p.loadings):
            return FaParams(mu, lv, W)

        num = {
            "fa.mu": numerical_grad(lambda v: fa_marginal_nll(Y, at(mu=v)), p.mu),
            "fa.loadings": numerical_grad(lambda v: fa_marginal_nll(Y, at(W=v.reshape(m, d))), p.loadings.ravel()),
            "fa.log_var": numerical_grad(lambda v: fa_marginal_nll(Y, at(lv=v)), p.log_var),
        }
        ana = {"fa.mu": g_mu, "fa.loadings": g_W, "fa.log_var": g_lv}
        for k in worst:
            worst[k] = max(worst[k], rel_error(ana[k], num[k]))
    return worst


def check_kg(n_instances: int, rng) -> dict:
    worst = dict.fromkeys(("kg.embeddings", "kg.relations"), 0.0)
    for _ in range(n_instances):
        E, R, d = rng.integers(2, 9), rng.integers(1, 4), rng.integers(1, 5)
        emb, rel = rng.normal(size=(E, d)), rng.normal(size=(R, d))
        idx = lambda k: np.column_stack([rng.integers(0, E, k), rng.integers(0, R, k), rng.integers(0, E, k)])
        pos, neg = idx(rng.integers(1, 16)), idx(rng.integers(0, 31))
        _, g_emb, g_rel = kg_objective(emb, rel, pos, neg)
        n_emb = numerical_grad(lambda v: kg_objective(v.reshape(E, d), rel, pos, neg)[0], emb.ravel())
        n_rel = numerical_grad(lambda v: kg_objective(emb, v.reshape(R, d), pos, neg)[0], rel.ravel())
        worst["kg.embeddings"] = max(worst["kg.embeddings"], rel_error(g_emb, n_emb))
        worst["kg.relations"] = max(worst["kg.relations"], rel_error(g_rel, n_rel))
    return worst


def _joint_instance(rng, E=6, R=2, m=5, m_tied=3, n=12, d=2):
    cols = rng.permutation(m)[:m_tied]
    ents = rng.permutation(E)[:m_tied]
    kg = KnowledgeGraph([f"e{i}" for i in range(E)], [f"r{k}" for k in range(R)], [],
                        {int(c): int(e) for c, e in zip(cols, ents)})
    dims = Dims(E, R, d, d, m, m_tied)
    joint = unpack(rng.normal(size=dims.size) * 0.7, dims)
    joint.log_var = rng.normal(0.0, 0.3, size=m)
    idx = lambda k: np.column_stack([rng.integers(0, E, k), rng.integers(0, R, k), rng.integers(0, E, k)])
    return kg, dims, joint, rng.normal(size=(n, m)), idx(8), idx(16)


def check_joint(n_instances: int, rng) -> dict:
    worst = {f"joint.{b}": 0.0 for b in BLOCKS}
    for _ in range(n_instances):
        kg, dims, joint, Y, pos, neg = _joint_instance(rng)
        _, grad = joint_objective(joint, Y, pos, neg, kg)
        num = unpack(numerical_grad(lambda v: joint_objective(unpack(v, dims), Y, pos, neg, kg)[0], pack(joint)), dims)
        for b in BLOCKS:
            worst[f"joint.{b}"] = max(worst[f"joint.{b}"], rel_error(getattr(grad, b), getattr(num, b)))
    return worst


def run_gradcheck(n_instances: int = 100, seed: int = 0, tol: float = TOL, out=sys.stdout):
    """Run all suites; print one line per block. Returns ``(ok, report)``."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    report = {}
    for suite in (check_fa, check_kg, check_joint):
        report.update(suite(n_instances, rng))
    ok = True
    for name, err in report.items():
        flag = "ok" if err < tol else "FAIL"
        ok &= err < tol
        print(f"{name:<22} max rel err {err:.3e}  {flag}", file=out)
    print(f"{len(report)} blocks, {n_instances} instances each, {time.perf_counter() - t0:.1f}s: "
          f"{'PASS' if ok else 'FAIL'}", file=out)
    return ok, report
