"""
Synchronous round loop for two-stage neighbor matching and its P2P baselines.

Every round runs in three phases separated by a barrier:

1. all clients train locally from their round-start models;
2. every client scores peers and decides its round neighbor list (and bag)
   against the post-training snapshot only;
3. all aggregations commit at once.

Randomness for client ``i`` in round ``t`` comes from the stream
``(seed, i, t, purpose)``, so the result does not depend on client order.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import learner
from .data import ClientData, ingest_external_images, make_synthetic_clustered_tasks
from .learner import DivergenceError, ModelSpec, OptimizerState
from .matching import (
    EM_MAX_ITER,
    ScoredPeer,
    naem_update,
    nsmc_select,
    pens_stage2_threshold,
    pens_threshold,
)
from .similarity import loss_similarity, pairwise_grad_similarity
from .theory import ConfigurationError

log = logging.getLogger(__name__)

METHODS = ("panm_loss", "panm_grad", "pens", "random", "fix_topology", "oracle", "local")
PANM_METHODS = ("panm_loss", "panm_grad")

_PURPOSE = {"init": 1, "train": 2, "candidates": 3, "bag_sample": 4, "naem_candidates": 5, "aggregate": 6, "eval": 7}

# Signature of an injected scorer: (owner, peer ids, post-training models) -> scores.
ScoreHook = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class RunConfig:
    n: int = 40
    r: int = 2
    l: int = 10
    k: int = 5
    T1: int = 100
    T2: int = 200
    tau: int = 10
    alpha: float = 0.5
    method: str = "panm_grad"
    seed: int = 0
    nu: float = 0.01
    # task
    heterogeneity: str = "rotation"
    d: int = 200
    test_size: int = 100
    num_classes: int = 10
    feature_dim: int = 32
    class_sep: float = 0.5
    noise: float = 1.0
    data_path: str | None = None
    data_format: str = "idx"
    labels_path: str | None = None
    # model and optimizer
    model: str = "mlp"
    hidden: tuple[int, ...] = (32,)
    lr: float = 0.08
    momentum: float = 0.9
    lr_decay: float = 0.99
    epochs: int = 3
    batch_size: int = 128
    # matching
    loss_eval_samples: int | None = None
    em_max_iter: int = EM_MAX_ITER

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def a(self) -> int:
        return self.n // self.r

    def validate(self) -> "RunConfig":
        def bad(fld, msg):
            raise ConfigurationError(f"{fld}: {msg}")

        if self.method not in METHODS:
            bad("method", f"must be one of {', '.join(METHODS)}")
        if self.n < 2:
            bad("n", "need at least two clients")
        if self.r < 1 or self.n % self.r:
            bad("r", f"n={self.n} must be divisible by r={self.r}")
        if self.k < 1:
            bad("k", "must be >= 1")
        if self.k > self.l:
            bad("k", f"k={self.k} > l={self.l} violates k <= l")
        # local never samples peers, so l is not bounded by the network size
        if self.l > self.n - 1 and self.method != "local":
            bad("l", f"l={self.l} > n-1={self.n - 1}")
        if self.tau < 1:
            bad("tau", "must be >= 1")
        if self.T1 < 0 or self.T2 < 0:
            bad("T1" if self.T1 < 0 else "T2", "must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            bad("alpha", "must lie in [0, 1]")
        if self.heterogeneity not in ("rotation", "label_swap"):
            bad("heterogeneity", "must be rotation or label_swap")
        if self.heterogeneity == "label_swap" and 2 * self.r > self.num_classes:
            bad("r", f"label_swap needs num_classes >= 2r, got {self.num_classes} < {2 * self.r}")
        if self.heterogeneity == "rotation" and self.data_path is None and self.feature_dim % 2:
            bad("feature_dim", "rotation needs an even feature dimension")
        if self.model not in ("linear", "mlp"):
            bad("model", "must be linear or mlp")
        if self.model == "mlp" and not self.hidden:
            bad("hidden", "mlp needs at least one hidden layer")
        if self.d < 1 or self.test_size < 1:
            bad("d" if self.d < 1 else "test_size", "must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            bad("epochs" if self.epochs < 1 else "batch_size", "must be >= 1")
        if self.lr < 0:
            bad("lr", "must be >= 0")
        if not 0 <= self.momentum < 1:
            bad("momentum", "must lie in [0, 1)")
        if self.loss_eval_samples is not None and self.loss_eval_samples < 1:
            bad("loss_eval_samples", "must be >= 1 when set")
        if self.data_format not in ("idx", "csv"):
            bad("data_format", "must be idx or csv")
        return self

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigurationError(f"{unknown[0]}: unknown configuration key")
        for f in dataclasses.fields(cls):
            if f.name not in raw or raw[f.name] is None:
                continue
            v = raw[f.name]
            want = type(f.default)
            if want is int and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigurationError(f"{f.name}: expected an integer, got {v!r}")
            if want is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigurationError(f"{f.name}: expected a number, got {v!r}")
            if want is str and not isinstance(v, str):
                raise ConfigurationError(f"{f.name}: expected a string, got {v!r}")
        raw = {k: (float(v) if type(getattr(cls, k, None)) is float and v is not None else v) for k, v in raw.items()}
        return cls(**raw)


@dataclass
class RoundMetrics:
    round: int
    stage: int
    mean_test_accuracy: float
    mean_test_loss: float
    mean_train_loss: float
    neighbor_precision: float | None
    neighbor_recall: float | None
    round_list_purity: float | None
    cumulative_model_transfers: int
    cumulative_probe_transfers: int
    cumulative_receive_shortfall: int
    max_client_receives: int
    joint_objective: float
    em_nonconvergence_count: int
    short_list_count: int
    empty_bag_count: int


METRIC_FIELDS = [f.name for f in dataclasses.fields(RoundMetrics)]


class NeighborGraph:
    """n x n 0/1 adjacency with unit diagonal; row ``i`` is client i's bag."""

    def __init__(self, adjacency: np.ndarray):
        adjacency = np.asarray(adjacency, dtype=np.int8)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.all(np.diag(adjacency) == 1):
            raise ValueError("neighbor graph needs ones on the diagonal")
        self.adjacency = adjacency

    @classmethod
    def from_bags(cls, bags: Sequence[Iterable[int]]) -> "NeighborGraph":
        n = len(bags)
        adj = np.eye(n, dtype=np.int8)
        for i, bag in enumerate(bags):
            for j in bag:
                if j == i:
                    raise ValueError(f"client {i} lists itself in its bag")
                adj[i, j] = 1
        return cls(adj)

    def bags(self) -> list[set[int]]:
        return [set(np.flatnonzero(row).tolist()) - {i} for i, row in enumerate(self.adjacency)]

    def adjacency_list(self) -> dict[str, list[int]]:
        return {str(i): sorted(b) for i, b in enumerate(self.bags())}


def aggregate(self_model: np.ndarray, neighbor_models: Sequence[np.ndarray]) -> np.ndarray:
    """Uniform average of the own model and the neighbors' models."""
    for m in neighbor_models:
        if m.shape != self_model.shape:
            raise ValueError(f"dimension mismatch: {m.shape} vs {self_model.shape}")
    if not neighbor_models:
        return self_model.copy()
    return (self_model + np.sum(neighbor_models, axis=0)) / (len(neighbor_models) + 1)


def neighbor_precision_recall(
    bags: Sequence[Iterable[int]], clusters: Sequence[int]
) -> tuple[float, float, int]:
    """Mean precision and recall of the bags against same-cluster peers.

    Returns ``(precision, recall, empty_bags)``; an empty bag counts as
    precision 1.0. A client alone in its cluster counts as recall 1.0.
    """
    clusters = np.asarray(clusters)
    precs, recs, empty = [], [], 0
    for i, bag in enumerate(bags):
        bag = set(bag)
        true = set(np.flatnonzero(clusters == clusters[i]).tolist()) - {i}
        hit = len(bag & true)
        if bag:
            precs.append(hit / len(bag))
        else:
            precs.append(1.0)
            empty += 1
        recs.append(hit / len(true) if true else 1.0)
    return float(np.mean(precs)), float(np.mean(recs)), empty


def joint_objective(
    train_losses: Sequence[float], models: np.ndarray, graph: NeighborGraph, nu: float
) -> float:
    """Sum of local losses plus ``nu/2 * sum_ij G_ij ||w_i - w_j||^2``."""
    models = np.asarray(models, dtype=float)
    sq = np.sum(models**2, axis=1)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * models @ models.T, 0.0)
    return float(np.sum(train_losses)) + 0.5 * nu * float(np.sum(graph.adjacency * dist2))


def naem_rounds(config: RunConfig) -> int:
    """Number of stage-two rounds ``t`` with ``t % tau == 0``."""
    lo, hi = config.T1 + 1, config.T1 + config.T2
    if hi < lo:
        return 0
    return hi // config.tau - (lo - 1) // config.tau


def comm_cost_analytic(config: RunConfig) -> tuple[int, int]:
    """Closed-form ``(total model receives, max receives per client-round)``.

    The counting model: a stage-one NSMC client receives its ``l`` candidates
    and its ``k`` round neighbors; a PENS stage-one client aggregates from
    candidates it already holds; every NAEM invocation adds ``l`` candidate
    receives; every other aggregation costs one receive per neighbor.
    Receives of sampled bag members during NAEM are reported separately
    (``cumulative_probe_transfers``) and are not part of this count. A
    round list shorter than nominal (a bag that shrank below ``k``, or too
    few non-bag peers to draw ``l`` candidates) receives less; the engine
    tracks that gap as ``cumulative_receive_shortfall``, so measured plus
    shortfall always equals this total.
    """
    config.validate()
    n, l, k, T1, T2 = config.n, config.l, config.k, config.T1, config.T2
    m = config.method
    if m == "local":
        return 0, 0
    if m in ("random", "fix_topology"):
        return n * k * (T1 + T2), (k if T1 + T2 else 0)
    if m == "oracle":
        kk = min(k, config.a - 1)
        return n * kk * (T1 + T2), (kk if T1 + T2 else 0)
    if m == "pens":
        bw = max(l if T1 else 0, k if T2 else 0)
        return n * l * T1 + n * k * T2, bw
    naem = naem_rounds(config)
    bw = l + k if (T1 or naem) else (k if T2 else 0)
    return n * (l + k) * T1 + n * (l * naem + k * T2), bw


def perfect_score_hook(clusters: Sequence[int]) -> ScoreHook:
    """Scores 1 for same-cluster peers and 0 otherwise."""
    clusters = np.asarray(clusters)

    def hook(owner: int, peers: np.ndarray, models: np.ndarray) -> np.ndarray:
        return (clusters[peers] == clusters[owner]).astype(float)

    return hook


@dataclass
class SimulationResult:
    config: RunConfig
    metrics: list[RoundMetrics]
    graph: NeighborGraph
    models: np.ndarray
    clusters: np.ndarray
    round_lists: list[list[int]]
    round_list_purity_history: list[np.ndarray] = field(default_factory=list)
    final_accuracies: np.ndarray | None = None

    @property
    def final(self) -> RoundMetrics:
        return self.metrics[-1]

    def metrics_csv(self) -> str:
        lines = [",".join(METRIC_FIELDS)]
        for m in self.metrics:
            row = []
            for name in METRIC_FIELDS:
                v = getattr(m, name)
                if v is None:
                    row.append("")
                elif isinstance(v, float):
                    row.append(repr(v))
                else:
                    row.append(str(v))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        analytic_total, analytic_bw = comm_cost_analytic(self.config)
        fm = self.final if self.metrics else None
        accs = self.final_accuracies
        return {
            "config": self.config.to_dict(),
            "rounds": len(self.metrics),
            "final_accuracy_mean": float(np.mean(accs)) if accs is not None else None,
            "final_accuracy_std": float(np.std(accs)) if accs is not None else None,
            "final_precision": fm.neighbor_precision if fm else None,
            "final_recall": fm.neighbor_recall if fm else None,
            "final_graph": self.graph.adjacency_list(),
            "comm_cost": {
                "analytic_transfers": analytic_total,
                "measured_transfers": fm.cumulative_model_transfers if fm else 0,
                "probe_transfers": fm.cumulative_probe_transfers if fm else 0,
                "receive_shortfall": fm.cumulative_receive_shortfall if fm else 0,
                "analytic_max_bandwidth": analytic_bw,
                "measured_max_bandwidth": max((m.max_client_receives for m in self.metrics), default=0),
            },
        }


class Simulation:
    """One run of a configured method. Not meant to be shared across threads."""

    def __init__(self, config: RunConfig, score_hook: ScoreHook | None = None, clients: list[ClientData] | None = None,
                 clusters: np.ndarray | None = None):
        self.cfg = config.validate()
        cfg = self.cfg
        if clients is None:
            clients, clusters = self._make_clients()
        self.clients = clients
        self.clusters = np.asarray(clusters)
        self.n = cfg.n
        num_classes = clients[0].train.num_classes
        input_dim = clients[0].train.features.shape[1]
        hidden = cfg.hidden if cfg.model == "mlp" else ()
        self.spec = ModelSpec(cfg.model, input_dim, num_classes, hidden)
        self.w0 = learner.init_params(self.spec, np.random.default_rng([cfg.seed, 0x5EED]))
        self.models = np.tile(self.w0, (self.n, 1))
        self.opts = [OptimizerState.fresh(self.spec.num_params, cfg.lr, cfg.momentum, cfg.lr_decay) for _ in range(self.n)]
        self.score_hook = score_hook
        self.others = [np.array([j for j in range(self.n) if j != i]) for i in range(self.n)]
        self.true_peers = [np.flatnonzero((self.clusters == self.clusters[i]) & (np.arange(self.n) != i)) for i in range(self.n)]
        self._eval_sets = [self._loss_eval_set(i) for i in range(self.n)]

        self.round_lists: list[list[int]] = [[] for _ in range(self.n)]
        self.bags: list[set[int]] = [set() for _ in range(self.n)]
        self.counts = np.zeros((self.n, self.n), dtype=np.int64)
        self.permanent: list[set[int]] | None = None
        self.fixed: list[list[int]] | None = None
        self.transfers = 0
        self.probes = 0
        self.shortfall = 0
        self.em_nonconv = 0

    # ------------------------------------------------------------------ setup
    def _make_clients(self):
        cfg = self.cfg
        if cfg.data_path is not None:
            turns = [round(4 * c / cfg.r) for c in range(cfg.r)]
            return ingest_external_images(
                cfg.data_path, cfg.data_format, turns, cfg.n, cfg.d, cfg.test_size, cfg.seed, cfg.labels_path,
            )
        return make_synthetic_clustered_tasks(
            cfg.n, cfg.r, cfg.d, cfg.heterogeneity, cfg.num_classes, cfg.feature_dim, cfg.seed,
            cfg.test_size, cfg.class_sep, cfg.noise,
        )

    def _loss_eval_set(self, i: int):
        train = self.clients[i].train
        m = self.cfg.loss_eval_samples
        if m is None or m >= len(train):
            return train
        idx = self._rng(i, 0, "eval").permutation(len(train))[:m]
        return train.subset(np.sort(idx))

    def _rng(self, client: int, t: int, purpose: str) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, client, t, _PURPOSE[purpose]])

    @staticmethod
    def _sample(rng: np.random.Generator, pool: Sequence[int], size: int) -> list[int]:
        pool = np.asarray(sorted(pool), dtype=np.int64)
        size = min(size, pool.size)
        if size == 0:
            return []
        return sorted(rng.choice(pool, size=size, replace=False).tolist())

    # ---------------------------------------------------------------- scoring
    def _scores(self, owner: int, peers: Sequence[int], post: np.ndarray, grad_sim: np.ndarray | None) -> dict[int, float]:
        peers = np.asarray(peers, dtype=np.int64)
        if self.score_hook is not None:
            vals = self.score_hook(owner, peers, post)
        elif self.cfg.method == "panm_grad":
            vals = grad_sim[owner, peers]
        else:
            data = self._eval_sets[owner]
            vals = [loss_similarity(post[j], lambda w: learner.mean_loss(self.spec, w, data)) for j in peers]
        return {int(p): float(v) for p, v in zip(peers, vals)}

    # --------------------------------------------------------------- matching
    def _match_client(self, i: int, t: int, post: np.ndarray, grad_sim) -> tuple[list[int], set[int], int, int, bool]:
        """Return (round list, bag, model receives, probe receives, em_nonconverged)."""
        cfg = self.cfg
        m = cfg.method
        stage = 1 if t <= cfg.T1 else 2
        l, k = cfg.l, cfg.k

        if m == "local":
            return [], set(), 0, 0, False
        if m == "random":
            N = self._sample(self._rng(i, t, "aggregate"), self.others[i], k)
            return N, set(N), len(N), 0, False
        if m == "fix_topology":
            N = self.fixed[i]
            return N, set(N), len(N), 0, False
        if m == "oracle":
            N = self._sample(self._rng(i, t, "aggregate"), self.true_peers[i], k)
            return N, set(self.true_peers[i].tolist()), len(N), 0, False

        if m == "pens":
            if stage == 1:
                C = self._sample(self._rng(i, t, "candidates"), self.others[i], l)
                sc = self._scores(i, C, post, grad_sim)
                N = nsmc_select(i, [ScoredPeer(p, sc[p]) for p in C], k)
                self.counts[i, N] += 1
                return N, set(N), len(C), 0, False
            perm = self.permanent[i]
            N = self._sample(self._rng(i, t, "aggregate"), perm, k)
            return N, set(perm), len(N), 0, False

        # two-stage neighbor matching
        if stage == 1:
            C = self._sample(self._rng(i, t, "candidates"), self.others[i], l)
            pool = sorted(set(C) | set(self.round_lists[i]))
            sc = self._scores(i, pool, post, grad_sim)
            N = nsmc_select(i, [ScoredPeer(p, sc[p]) for p in pool], k)
            return N, set(N), len(C) + len(N), 0, False

        bag = self.bags[i]
        receives = probes = 0
        nonconv = False
        if t % cfg.tau == 0:
            S = self._sample(self._rng(i, t, "bag_sample"), bag, l)
            outside = set(range(self.n)) - bag - {i}
            C = self._sample(self._rng(i, t, "naem_candidates"), outside, l)
            sc = self._scores(i, S + C, post, grad_sim)
            bag, est = naem_update(i, bag, S, C, sc, cfg.em_max_iter)
            nonconv = est is not None and not est.converged
            receives += len(C)
            probes += len(S)
        N = self._sample(self._rng(i, t, "aggregate"), bag, k)
        return N, set(bag), receives + len(N), probes, nonconv

    def _nominal_receives(self, t: int) -> int:
        # per-client receives assumed by the closed-form count
        cfg = self.cfg
        m = cfg.method
        stage = 1 if t <= cfg.T1 else 2
        if m == "local":
            return 0
        if m == "oracle":
            return min(cfg.k, cfg.a - 1)
        if m in ("random", "fix_topology"):
            return cfg.k
        if m == "pens":
            return cfg.l if stage == 1 else cfg.k
        if stage == 1:
            return cfg.l + cfg.k
        return cfg.k + (cfg.l if t % cfg.tau == 0 else 0)

    def _expected_width(self, i: int) -> int:
        if self.cfg.method == "local":
            return 0
        if self.cfg.method == "oracle":
            return min(self.cfg.k, len(self.true_peers[i]))
        return self.cfg.k

    def _start_of_stage_two(self) -> None:
        cfg = self.cfg
        if cfg.method in PANM_METHODS:
            if cfg.T1 == 0:
                self.bags = [set(self._sample(self._rng(i, 0, "init"), self.others[i], cfg.k)) for i in range(self.n)]
            else:
                self.bags = [set(N) for N in self.round_lists]
        elif cfg.method == "pens":
            thr = pens_threshold(cfg.T1, cfg.l, cfg.k, cfg.n)
            self.permanent = []
            for i in range(self.n):
                counts = {int(j): int(self.counts[i, j]) for j in self.others[i]}
                keep, topped = pens_stage2_threshold(counts, thr, cfg.k)
                if topped:
                    log.debug("client %d: PENS permanent set topped up to k", i)
                self.permanent.append(keep)

    # ------------------------------------------------------------------- loop
    def _client_order(self, t: int) -> Sequence[int]:
        # any order gives the same result; tests override this to check that
        return range(self.n)

    def run(self) -> SimulationResult:
        cfg = self.cfg
        total = cfg.T1 + cfg.T2
        metrics: list[RoundMetrics] = []
        purity_hist: list[np.ndarray] = []
        if cfg.method == "fix_topology":
            self.fixed = [self._sample(self._rng(i, 0, "init"), self.others[i], cfg.k) for i in range(self.n)]
        if cfg.T1 == 0:
            self._start_of_stage_two()

        for t in range(1, total + 1):
            stage = 1 if t <= cfg.T1 else 2
            if t == cfg.T1 + 1 and cfg.T1 > 0:
                self._start_of_stage_two()
            w_prev = self.models
            post = np.empty_like(w_prev)
            for i in self._client_order(t):
                post[i] = learner.local_train(
                    w_prev[i], self.spec, self.clients[i].train, cfg.epochs, cfg.batch_size,
                    self.opts[i], [cfg.seed, i, t, _PURPOSE["train"]],
                )
                self.opts[i].end_round()

            grad_sim = None
            if cfg.method == "panm_grad" and self.score_hook is None:
                grad_sim = pairwise_grad_similarity(self.w0, w_prev, post, cfg.alpha)

            decisions: list = [None] * self.n
            for i in self._client_order(t):
                decisions[i] = self._match_client(i, t, post, grad_sim)
            # barrier: commit lists, bags and models together
            new_models = np.empty_like(post)
            max_recv = 0
            short = 0
            nominal = self._nominal_receives(t)
            for i, (N, bag, recv, probe, nonconv) in enumerate(decisions):
                self.round_lists[i] = N
                self.bags[i] = bag
                self.transfers += recv
                self.probes += probe
                self.shortfall += nominal - recv
                self.em_nonconv += int(nonconv)
                max_recv = max(max_recv, recv)
                short += int(len(N) < self._expected_width(i))
                new_models[i] = aggregate(post[i], [post[j] for j in N])
            self.models = new_models
            metrics.append(self._round_metrics(t, stage, max_recv, short, purity_hist))

        graph = NeighborGraph.from_bags(self.bags)
        accs = np.array([learner.evaluate(self.spec, self.models[i], c.test)[1] for i, c in enumerate(self.clients)])
        return SimulationResult(cfg, metrics, graph, self.models, self.clusters,
                                [list(N) for N in self.round_lists], purity_hist, accs)

    def _round_metrics(self, t, stage, max_recv, short, purity_hist) -> RoundMetrics:
        cfg = self.cfg
        test = [learner.evaluate(self.spec, self.models[i], c.test) for i, c in enumerate(self.clients)]
        train_losses = [learner.mean_loss(self.spec, self.models[i], c.train) for i, c in enumerate(self.clients)]
        if not all(math.isfinite(x) for x in train_losses):
            raise DivergenceError(f"non-finite training loss after round {t}")
        graph = NeighborGraph.from_bags(self.bags)
        if cfg.method == "local":
            prec = rec = purity = None
            empty = self.n
        else:
            prec, rec, empty = neighbor_precision_recall(self.bags, self.clusters)
            pure = np.array([bool(N) and all(self.clusters[j] == self.clusters[i] for j in N)
                             for i, N in enumerate(self.round_lists)])
            purity_hist.append(pure)
            purity = float(pure.mean())
        return RoundMetrics(
            round=t,
            stage=stage,
            mean_test_accuracy=float(np.mean([a for _, a in test])),
            mean_test_loss=float(np.mean([l for l, _ in test])),
            mean_train_loss=float(np.mean(train_losses)),
            neighbor_precision=prec,
            neighbor_recall=rec,
            round_list_purity=purity,
            cumulative_model_transfers=self.transfers,
            cumulative_probe_transfers=self.probes,
            cumulative_receive_shortfall=self.shortfall,
            max_client_receives=max_recv,
            joint_objective=joint_objective(train_losses, self.models, graph, cfg.nu),
            em_nonconvergence_count=self.em_nonconv,
            short_list_count=short,
            empty_bag_count=empty,
        )


def run_simulation(config: RunConfig, score_hook: ScoreHook | None = None) -> SimulationResult:
    return Simulation(config, score_hook).run()


def write_outputs(result: SimulationResult, out_dir, stem: str | None = None) -> tuple[str, str]:
    """Write ``<stem>.csv`` (per-round metrics) and ``<stem>.json`` (summary)."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{result.config.method}_seed{result.config.seed}"
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(result.metrics_csv(), encoding="utf-8")
    json_path.write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(csv_path), str(json_path)
