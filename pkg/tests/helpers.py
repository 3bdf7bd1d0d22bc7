"""Fixtures and oracles shared by the unit tests and the acceptance suite."""
import numpy as np

from panm.learner import ModelSpec, init_params, loss_and_grad


def central_diff(spec, w, x, y, h=1e-5):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (loss_and_grad(spec, w + e, x, y)[0] - loss_and_grad(spec, w - e, x, y)[0]) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def grad_fixture(i):
    """Random model, parameters and batch; even ids linear, odd ids MLP."""
    rng = np.random.default_rng([77, i])
    kind = "linear" if i % 2 == 0 else "mlp"
    f, c = int(rng.integers(2, 6)), int(rng.integers(2, 5))
    hidden = (int(rng.integers(2, 6)),) if kind == "mlp" else ()
    if kind == "mlp" and i % 4 == 3:
        hidden = hidden + (3,)
    spec = ModelSpec(kind, f, c, hidden)
    w = init_params(spec, rng) + 0.1 * rng.normal(size=spec.num_params)
    m = int(rng.integers(1, 9))
    return spec, w, rng.normal(size=(m, f)), rng.integers(0, c, size=m)


def em_fixture(rng, sep_lo, sep_hi):
    """Two Gaussian similarity groups, separation in max-sigma units."""
    s0, s1 = rng.uniform(0.02, 0.08, size=2)
    sep = rng.uniform(sep_lo, sep_hi) * max(s0, s1)
    mu1 = rng.uniform(-0.5, 0.5)
    mu0 = mu1 + sep
    n0, n1 = rng.integers(5, 16, size=2)
    y = np.concatenate([rng.normal(mu0, s0, n0), rng.normal(mu1, s1, n1)])
    return y, (mu0 + mu1) / 2


def midpoint_agreement(est, y, mid):
    pred = est.assignments == est.high_component
    return float(np.mean(pred == (y > mid)))
