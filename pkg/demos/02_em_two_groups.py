"""Splitting similarity scores into a true and a false group with hard EM."""
import numpy as np

from panm.matching import em_fit, naem_update

rng = np.random.default_rng(3)

# %% two groups of similarity scores, 0.45 apart with sigma 0.05
true_scores = rng.normal(0.8, 0.05, 12)
false_scores = rng.normal(0.35, 0.05, 20)
y = np.concatenate([true_scores, false_scores])
est = em_fit(y, rng.integers(0, 2, size=y.size))  # random start
hi = est.high_component
print(f"means {est.mu0:.3f} / {est.mu1:.3f}, sigmas {est.sigma0:.3f} / {est.sigma1:.3f}, "
      f"weights {est.beta0:.2f} / {est.beta1:.2f}, {est.iterations} iterations")
print("high group recovered exactly:", np.array_equal(est.assignments == hi, np.arange(y.size) < 12))

# %% one bag update: S is sampled from the bag, C from outside it
bag = {1, 2, 3, 4, 30}          # peer 30 is a false neighbor already in the bag
S = [1, 2, 30]
C = [5, 6, 7, 31, 32, 33, 34]   # 5..7 true, 31..34 false
scores = {p: rng.normal(0.8, 0.05) for p in (1, 2, 5, 6, 7)}
scores.update({p: rng.normal(0.35, 0.05) for p in (30, 31, 32, 33, 34)})
new_bag, _ = naem_update(0, bag, S, C, scores)
print("bag before", sorted(bag))
print("bag after ", sorted(new_bag))
