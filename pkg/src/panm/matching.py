"""
Neighbor-list construction.

* :func:`nsmc_select` keeps the top-k scored peers (stage one, both NSMC and
  the PENS baseline; they differ only in what the caller feeds in).
* :func:`em_fit` / :func:`naem_update` split sampled similarities into two
  Gaussians and admit the high-mean group to the neighbor bag (stage two).
* :func:`pens_stage2_threshold` is the count filter used by PENS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

SIGMA_FLOOR = 1e-6
EM_MAX_ITER = 100


@dataclass(frozen=True)
class ScoredPeer:
    peer_id: int
    score: float


def nsmc_select(owner: int, scored: Sequence[ScoredPeer], k: int) -> list[int]:
    """Return the ``k`` best-scoring peers, ties going to the lower id.

    Fewer than ``k`` distinct peers yields all of them; the caller can detect
    that from the length of the result.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    seen: dict[int, float] = {}
    for sp in scored:
        if sp.peer_id == owner:
            raise ValueError(f"client {owner} cannot score itself")
        if sp.peer_id in seen:
            raise ValueError(f"peer {sp.peer_id} scored twice; dedupe C ∪ L first")
        seen[sp.peer_id] = sp.score
    ranked = sorted(seen.items(), key=lambda kv: (-kv[1], kv[0]))
    return [pid for pid, _ in ranked[:k]]


@dataclass
class GmmEstimate:
    """Hard-assignment two-component fit.

    ``assignments[j]`` is 0 or 1, the component index of member ``j``.
    """

    assignments: np.ndarray
    mu0: float
    sigma0: float
    beta0: float
    mu1: float
    sigma1: float
    beta1: float
    iterations: int
    converged: bool
    degenerate: bool = False

    @property
    def high_component(self) -> int:
        """Index of the component with the larger mean (heavier one on ties)."""
        if self.mu0 != self.mu1:
            return 0 if self.mu0 > self.mu1 else 1
        return 0 if self.beta0 >= self.beta1 else 1

    def members_of(self, component: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == component)


def _component_stats(y: np.ndarray, mask: np.ndarray) -> tuple[float, float, float]:
    nr = int(mask.sum())
    mu = float(y[mask].mean())
    sigma = math.sqrt(float(((y[mask] - mu) ** 2).mean()))
    return mu, max(sigma, SIGMA_FLOOR), nr / y.size


def _log_weighted_density(y: np.ndarray, mu: float, sigma: float, beta: float) -> np.ndarray:
    return math.log(beta) - math.log(sigma) - 0.5 * math.log(2 * math.pi) - 0.5 * ((y - mu) / sigma) ** 2


def _median_split(y: np.ndarray) -> np.ndarray:
    # top half by value -> component 0, ties broken by position
    order = np.lexsort((np.arange(y.size), -y))
    labels = np.ones(y.size, dtype=np.int8)
    labels[order[: y.size // 2]] = 0
    return labels


def _reseed_empty(y: np.ndarray, labels: np.ndarray) -> None:
    for r in (0, 1):
        if not np.any(labels == r):
            # reseed an empty component with the member farthest from the other mean
            other = y[labels != r].mean()
            labels[int(np.argmax(np.abs(y - other)))] = r


def _nearest_mean_warmup(y: np.ndarray, labels: np.ndarray, max_iter: int) -> tuple[np.ndarray, int]:
    """Equal-variance, equal-weight relabelling (1-D two-means) to a fixpoint.

    From a near-uninformative split both fitted components sit close to the
    global mean with slightly different spreads, and the unequal-variance
    rule then hands every tail point to the wider component. Settling the
    means first avoids that collapse; an already good split is left as is.
    """
    passes = 0
    while passes < max_iter:
        _reseed_empty(y, labels)
        m0, m1 = y[labels == 0].mean(), y[labels == 1].mean()
        if m0 == m1:
            # a split with equal means carries no information; restart from the median
            labels = _median_split(y)
            m0, m1 = y[labels == 0].mean(), y[labels == 1].mean()
        d0, d1 = np.abs(y - m0), np.abs(y - m1)
        new = labels.copy()
        new[d0 < d1] = 0
        new[d1 < d0] = 1
        passes += 1
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, passes


def em_fit(values: Sequence[float], init: Sequence[int], max_iter: int = EM_MAX_ITER) -> GmmEstimate:
    """Fit a two-component 1-D Gaussian mixture with hard assignments.

    After a nearest-mean warm-up, alternates parameter estimation from the
    current labels and relabelling each member by maximum weighted density,
    until the labels stop changing or ``max_iter`` relabelling passes have
    run. ``iterations`` counts the weighted-density passes only.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("em_fit needs at least two values")
    if not np.all(np.isfinite(y)):
        raise ValueError("em_fit received non-finite similarities")
    labels = np.asarray(init, dtype=np.int8).copy()
    if labels.shape != y.shape or not np.isin(labels, (0, 1)).all():
        raise ValueError("init must give a 0/1 label per value")

    if np.all(y == y[0]):
        mu = float(y[0])
        return GmmEstimate(
            assignments=np.zeros(y.size, dtype=np.int8),
            mu0=mu, sigma0=SIGMA_FLOOR, beta0=1.0,
            mu1=mu, sigma1=SIGMA_FLOOR, beta1=0.0,
            iterations=0, converged=True, degenerate=True,
        )
    if labels.all() or not labels.any():
        labels = _median_split(y)
    labels, _ = _nearest_mean_warmup(y, labels, max_iter)

    converged = False
    iterations = 0
    while iterations < max_iter:
        _reseed_empty(y, labels)
        params = [_component_stats(y, labels == r) for r in (0, 1)]
        dens = np.stack([_log_weighted_density(y, *p) for p in params])
        new = labels.copy()
        new[dens[0] > dens[1]] = 0
        new[dens[1] > dens[0]] = 1
        iterations += 1
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new

    if not converged:
        _reseed_empty(y, labels)
        params = [_component_stats(y, labels == r) for r in (0, 1)]
    (mu0, s0, b0), (mu1, s1, b1) = params
    return GmmEstimate(labels, mu0, s0, b0, mu1, s1, b1, iterations, converged)


def naem_update(
    owner: int,
    bag: Iterable[int],
    sampled_S: Iterable[int],
    sampled_C: Iterable[int],
    scores: Mapping[int, float],
    max_iter: int = EM_MAX_ITER,
) -> tuple[set[int], GmmEstimate]:
    """One bag-augmentation step: ``(bag - S) ∪ H``.

    S members start in one component and C members in the other; after the
    fit, H is the component with the higher mean, whichever index it has.
    """
    bag = set(bag)
    S = sorted(set(sampled_S))
    C = sorted(set(sampled_C))
    if not set(S) <= bag:
        raise ValueError("sampled_S must be drawn from the bag")
    if set(C) & bag or owner in C or owner in bag:
        raise ValueError("sampled_C must avoid the bag and the owner")
    members = S + C
    y = [scores[j] for j in members]
    init = [0] * len(S) + [1] * len(C)
    if len(members) < 2:
        # nothing to contrast; keep whatever was sampled
        est = em_fit([y[0], y[0]], [0, 1], max_iter) if members else None
        return bag, est
    est = em_fit(y, init, max_iter)
    if est.degenerate:
        H = set(members)
    else:
        H = {members[j] for j in est.members_of(est.high_component)}
    return (bag - set(S)) | H, est


def pens_threshold(T1: int, l: int, k: int, n: int) -> int:
    """Expected-selection-count threshold, ``ceil(T1 * (l + k) / n)``."""
    return -(-T1 * (l + k) // n)


def pens_stage2_threshold(
    selection_counts: Mapping[int, int], threshold: int, k: int | None = None
) -> tuple[set[int], bool]:
    """Peers selected strictly more than ``threshold`` times.

    With ``k`` given, a result smaller than ``k`` is topped up with the
    highest-count remaining peers (ties to the lower id). The flag reports
    whether any top-up happened.
    """
    if any(c < 0 for c in selection_counts.values()):
        raise ValueError("selection counts must be non-negative")
    keep = {p for p, c in selection_counts.items() if c > threshold}
    if k is None or len(keep) >= k:
        return keep, False
    rest = sorted((p for p in selection_counts if p not in keep), key=lambda p: (-selection_counts[p], p))
    keep.update(rest[: k - len(keep)])
    return keep, True
