"""
Kernels and the residual projector
==================================

Two ingredients sit underneath every test in the package: a Gaussian Gram
matrix whose bandwidth comes from the median heuristic, and the projector
that strips the score directions of the fitted linear model from a vector.
"""
# %%
import numpy as np

from spectest import KernelSpec, build_projector, gram, median_heuristic, project
from spectest.projection import as_matrix

rng = np.random.default_rng(0)
X = rng.standard_normal((200, 3))

# %% The median heuristic picks sigma as the median pairwise distance
spec = median_heuristic(X)
print("sigma =", round(spec.sigma, 4))

K = gram(X, X, spec)
print("diagonal is one:", np.allclose(np.diag(K), 1.0))
print("smallest eigenvalue:", np.linalg.eigvalsh(K).min())

# %% A hand-made bandwidth works too
wide = gram(X[:4], X[:4], KernelSpec(50.0))
print(np.round(wide, 3))

# %% The projector removes everything in the span of the design
G = np.column_stack([np.ones(200), X])
P = build_projector(G)
v = rng.standard_normal(200)
pv = project(P, v)
print("G^T (Pi v) =", np.abs(G.T @ pv).max())
print("Pi is idempotent:", np.allclose(project(P, pv), pv))

# %% The dense matrix is available for small problems
Pi = as_matrix(P)
print("trace(Pi) = n - d:", round(np.trace(Pi), 8), 200 - G.shape[1])
