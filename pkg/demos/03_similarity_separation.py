"""Gradient similarity separates clusters after a few local rounds."""
import numpy as np

from panm import learner
from panm.data import make_synthetic_clustered_tasks
from panm.learner import ModelSpec, OptimizerState
from panm.similarity import pairwise_grad_similarity

n, r = 12, 2
clients, clusters = make_synthetic_clustered_tasks(n, r, 200, "rotation", 10, 32, seed=0, test_size=50,
                                                   class_sep=0.5, noise=1.0)
spec = ModelSpec("mlp", 32, 10, (32,))
w0 = learner.init_params(spec, np.random.default_rng(0))
models = np.tile(w0, (n, 1))
opts = [OptimizerState.fresh(spec.num_params, lr=0.08) for _ in range(n)]

# %% a few rounds of purely local training
for t in range(1, 4):
    prev = models
    models = np.stack([learner.local_train(prev[i], spec, c.train, 3, 128, opts[i], seed=[0, i, t])
                       for i, c in enumerate(clients)])
    sim = pairwise_grad_similarity(w0, prev, models, alpha=0.5)
    same = clusters[:, None] == clusters[None, :]
    off = ~np.eye(n, dtype=bool)
    print(f"round {t}: same-cluster {sim[same & off].mean():.3f}, cross-cluster {sim[~same].mean():.3f}")
