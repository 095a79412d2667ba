# %% [markdown]
# Factor analysis marginal likelihood: value, gradients, and the rotation
# ambiguity that makes loadings hard to pin down from little data.

# %%
import numpy as np
from scipy.stats import ortho_group

from kgfa import FaParams, fa_marginal_nll, fa_marginal_nll_grad
from kgfa.gradcheck import numerical_grad, rel_error

rng = np.random.default_rng(0)
n, m, d = 200, 6, 2
W_true = rng.normal(size=(m, d))
Y = rng.normal(size=(n, d)) @ W_true.T + 0.5 * rng.normal(size=(n, m))

p = FaParams(Y.mean(0), np.log(Y.var(0)), 0.1 * rng.normal(size=(m, d)))
print("average NLL at a rough start:", fa_marginal_nll(Y, p))

# %%
# analytic gradient vs central differences for the loadings
g_mu, g_W, g_lv = fa_marginal_nll_grad(Y, p)
num = numerical_grad(lambda w: fa_marginal_nll(Y, FaParams(p.mu, p.log_var, w.reshape(m, d))), p.loadings.ravel())
print("relative error on W:", rel_error(g_W, num))

# %%
# W and W Q give the same covariance for any orthogonal Q
Q = ortho_group.rvs(d, random_state=1)
print(fa_marginal_nll(Y, p), fa_marginal_nll(Y, FaParams(p.mu, p.log_var, p.loadings @ Q)))

# %%
# a few hundred plain gradient steps on W only
for _ in range(300):
    p.loadings -= 0.05 * fa_marginal_nll_grad(Y, p)[1]
print("after descent:", fa_marginal_nll(Y, p))
