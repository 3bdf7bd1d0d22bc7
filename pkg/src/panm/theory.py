"""
Probability model for neighbor purity and error-bound calculators.

The selection process is modelled as repeated draws from an urn: each peer is
a ball, same-cluster peers are white. A client draws ``l`` balls per round and
keeps the ``k`` most similar peers. Under a perfect similarity ordering, the
round neighbor list is all-true exactly when the accumulated white count over
the rounds reaches ``k``.

Two urn conventions are supported (see :class:`BallSelectionSetting`):

* ``include_self=False``: the client draws among its ``n - 1`` peers, of which
  ``a - 1`` are white. This is what a simulated client actually does.
* ``include_self=True``: ``n`` balls with ``a`` white. The published purity
  table for the protocol is computed on this urn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "BallSelectionSetting",
    "ErrorBoundParams",
    "prob_exact_white",
    "prob_at_least_white",
    "nsmc_prob_series",
    "pens_prob_series",
    "nsmc_dedup_prob_series",
    "monte_carlo_selection_oracle",
    "contraction_coefficient",
    "non_contraction_threshold",
    "one_round_error_bound",
    "stage_one_error_bound",
    "TABLE_III_SETTINGS",
    "table_iii_rows",
]

_CLAMP_TOL = 1e-9


class ConfigurationError(ValueError):
    """Raised when a setting or run configuration violates its invariants."""


@dataclass(frozen=True)
class BallSelectionSetting:
    """Urn parameters for one client.

    ``n`` clients in total, ``a`` of them in the client's cluster (self
    included), ``l`` candidates drawn per round, ``k`` neighbors kept.
    """

    n: int
    a: int
    l: int
    k: int
    include_self: bool = False

    def __post_init__(self) -> None:
        n, a, l, k = self.n, self.a, self.l, self.k
        if not all(isinstance(v, (int, np.integer)) for v in (n, a, l, k)):
            raise ConfigurationError("n, a, l, k must be integers")
        if not 1 <= k <= l <= n - 1:
            raise ConfigurationError(f"need 1 <= k <= l <= n-1, got k={k}, l={l}, n={n}")
        if not 2 <= a <= n:
            raise ConfigurationError(f"need 2 <= a <= n, got a={a}, n={n}")

    @property
    def balls(self) -> int:
        return self.n if self.include_self else self.n - 1

    @property
    def white(self) -> int:
        return self.a if self.include_self else self.a - 1


# Rows of the published purity table, evaluated at t = 3, 5, 7.
TABLE_III_SETTINGS: tuple[tuple[int, int, int, int], ...] = (
    (200, 50, 10, 5),
    (200, 50, 20, 10),
    (200, 50, 20, 6),
    (100, 50, 10, 5),
)


def _hypergeom_pmf(x: int, balls: int, white: int, draws: int) -> float:
    if x < 0 or x > draws or x > white or draws - x > balls - white:
        return 0.0
    # exact integer arithmetic, one correctly rounded division
    return math.comb(white, x) * math.comb(balls - white, draws - x) / math.comb(balls, draws)


def _white_pmf(s: BallSelectionSetting) -> np.ndarray:
    return np.array([_hypergeom_pmf(x, s.balls, s.white, s.l) for x in range(s.l + 1)])


def _check_count(x: int, s: BallSelectionSetting) -> None:
    if not 0 <= x <= s.l:
        raise ConfigurationError(f"white count x={x} outside [0, l={s.l}]")


def prob_exact_white(x: int, s: BallSelectionSetting) -> float:
    """Probability that exactly ``x`` of the ``l`` drawn peers are white."""
    _check_count(x, s)
    return _hypergeom_pmf(x, s.balls, s.white, s.l)


def prob_at_least_white(x: int, s: BallSelectionSetting) -> float:
    """Probability that at least ``x`` of the ``l`` drawn peers are white."""
    _check_count(x, s)
    if x == 0:
        return 1.0
    return min(1.0, float(sum(_hypergeom_pmf(j, s.balls, s.white, s.l) for j in range(x, s.l + 1))))


def _tail(pmf: np.ndarray) -> np.ndarray:
    # tail[j] = P(X >= j), j = 0..l
    return np.minimum(np.cumsum(pmf[::-1])[::-1], 1.0)


def _clamp(p: np.ndarray) -> np.ndarray:
    excess = max(float(np.max(p - 1.0, initial=0.0)), float(np.max(-p, initial=0.0)))
    assert excess < _CLAMP_TOL, f"probability round-off {excess:.3e} exceeds clamp tolerance"
    return np.clip(p, 0.0, 1.0)


def nsmc_prob_series(T: int, s: BallSelectionSetting) -> np.ndarray:
    """Round-by-round probability that all ``k`` neighbors are true under NSMC.

    Entry ``t - 1`` holds P^t(k). The recursion carries the whole vector
    P^t(j) for j = 1..k, since the convolution reads P^{t-1}(k - m).
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    pmf = _white_pmf(s)
    k = s.k
    tail = _tail(pmf)
    R = np.array([tail[j] if j <= s.l else 0.0 for j in range(k + 1)])

    P = R.copy()
    out = [P[k]]
    for _ in range(2, T + 1):
        nxt = np.empty_like(P)
        nxt[0] = 1.0
        for j in range(1, k + 1):
            m = np.arange(j)
            nxt[j] = float(np.dot(pmf[m], P[j - m])) + R[j]
        P = _clamp(nxt)
        out.append(P[k])
    return np.array(out)


def pens_prob_series(T: int, s: BallSelectionSetting) -> np.ndarray:
    """PENS keeps no memory across rounds, so every round equals R(k)."""
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    return np.full(T, prob_at_least_white(s.k, s))


def nsmc_dedup_prob_series(T: int, s: BallSelectionSetting) -> np.ndarray:
    """Exact all-true probability when carried-over neighbors can be redrawn.

    The urn model above treats every round's draw as fresh, so a true
    neighbor already held and drawn again counts twice. A simulated client
    deduplicates ``C ∪ N``; this Markov chain over the number ``j`` of true
    neighbors held tracks that process exactly: the next round holds
    ``min(k, j + X)`` with ``X`` the count of *new* white peers drawn.
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    k, l = s.k, s.l
    trans = np.zeros((k + 1, k + 1))
    for j in range(k + 1):
        for x in range(l + 1):
            trans[j, min(k, j + x)] += _hypergeom_pmf(x, s.balls, s.white - j, l)
    state = np.zeros(k + 1)
    state[0] = 1.0
    out = []
    for _ in range(T):
        state = state @ trans
        out.append(state[k])
    return _clamp(np.array(out))


def monte_carlo_selection_oracle(
    s: BallSelectionSetting,
    T: int,
    trials: int,
    seed: int,
    strategy: Literal["nsmc", "pens"] = "nsmc",
    batch_size: int = 50_000,
) -> np.ndarray:
    """Empirical all-true frequency per round by sampling the urn.

    Each trial draws ``l`` balls per round without replacement. ``pens``
    succeeds in a round when that draw alone holds ``k`` whites; ``nsmc``
    succeeds once the white count accumulated over rounds reaches ``k``.
    Batches use the stream ``(seed, batch index)`` so results do not depend
    on how batches are scheduled.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if strategy not in ("nsmc", "pens"):
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    hits = np.zeros(T, dtype=np.int64)
    black = s.balls - s.white
    for b, start in enumerate(range(0, trials, batch_size)):
        size = min(batch_size, trials - start)
        rng = np.random.default_rng([seed, b])
        acc = np.zeros(size, dtype=np.int64)
        for t in range(T):
            drawn = rng.hypergeometric(s.white, black, s.l, size=size)
            if strategy == "nsmc":
                acc += drawn
                hits[t] += int(np.count_nonzero(acc >= s.k))
            else:
                hits[t] += int(np.count_nonzero(drawn >= s.k))
    return hits / trials


@dataclass(frozen=True)
class ErrorBoundParams:
    """Constants of the one-round error bound.

    mu/L are the strong-convexity and smoothness constants, ``epsilon`` the
    fraction of false neighbors, ``Delta`` the distance between cluster
    optima, ``v`` the gradient-variance bound, ``d`` samples per client.
    """

    mu: float
    L: float
    eta: float
    epsilon: float
    Delta: float
    v: float
    d: int
    k: int
    r: int
    delta0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("mu", "L", "v", "Delta", "delta0"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not self.eta > 0:
            raise ConfigurationError("eta must be > 0")
        if not 0 <= self.epsilon <= 1:
            raise ConfigurationError("epsilon must lie in [0, 1]")
        if min(self.d, self.k, self.r) < 1:
            raise ConfigurationError("d, k, r must be >= 1")


def contraction_coefficient(p: ErrorBoundParams) -> float:
    """Factor multiplying the current gap in the one-round bound."""
    mu, L, eta, eps = p.mu, p.L, p.eta, p.epsilon
    return 1.0 - eta * mu * L * (1.0 - eps) / (mu + L) + eta * L * eps


def non_contraction_threshold(mu: float, L: float) -> float:
    """Error rate above which the gap coefficient exceeds one."""
    return mu / (2.0 * mu + L)


def one_round_error_bound(p: ErrorBoundParams, current_gap: float) -> float:
    if p.epsilon >= 1.0:
        raise ZeroDivisionError("epsilon = 1 leaves no true neighbor; the bound is undefined")
    eta, L, eps = p.eta, p.L, p.epsilon
    return (
        contraction_coefficient(p) * current_gap
        + eta * L * p.Delta * eps
        + p.v / math.sqrt(p.d * p.k) / math.sqrt(1.0 - eps)
        + eta * p.v * math.sqrt(p.r / (p.k * p.d)) * math.sqrt(eps)
    )


def stage_one_error_bound(
    s: BallSelectionSetting,
    T: int,
    *,
    L: float,
    delta0: float,
    Delta: float,
    v: float,
    d: int,
    r: int,
) -> float:
    """Gap bound after ``T`` first-stage rounds, with mu = L and eta = 1/L.

    The first-round error rate is taken as R(k) of ``s`` and later rounds
    are treated as error free.
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if L <= 0:
        raise ConfigurationError("L must be > 0")
    k = s.k
    eps0 = prob_at_least_white(k, s)
    if eps0 >= 1.0:
        raise ZeroDivisionError("epsilon_0 = 1 makes the bound undefined")
    head = (
        (1 + 3 * eps0) / 2 * delta0
        + eps0 * Delta
        + v / math.sqrt(d * k * (1 - eps0))
        + (v / L) * math.sqrt(r * eps0 / (k * d))
    )
    tail = sum(v / math.sqrt(d * k) / 2**t for t in range(T - 1))
    return head / 2 ** (T - 1) + tail


def table_iii_rows(ts: Sequence[int] = (3, 5, 7), include_self: bool = True) -> list[dict]:
    """Analytic PENS/NSMC probabilities for the published table grid."""
    rows = []
    for n, a, l, k in TABLE_III_SETTINGS:
        s = BallSelectionSetting(n, a, l, k, include_self=include_self)
        nsmc = nsmc_prob_series(max(ts), s)
        pens = prob_at_least_white(k, s)
        for t in ts:
            rows.append({"n": n, "a": a, "l": l, "k": k, "t": t, "pens_prob": pens, "nsmc_prob": float(nsmc[t - 1])})
    return rows
