import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panm.engine import (
    METHODS,
    NeighborGraph,
    RunConfig,
    Simulation,
    aggregate,
    comm_cost_analytic,
    joint_objective,
    naem_rounds,
    neighbor_precision_recall,
    perfect_score_hook,
    run_simulation,
    write_outputs,
)
from panm.theory import ConfigurationError

# small task that trains in milliseconds; matching logic is unchanged
FAST = dict(d=20, test_size=10, model="linear", epochs=1, feature_dim=8, num_classes=4)


def fast(**kw):
    return RunConfig(**{**dict(n=12, r=2, l=4, k=2, T1=4, T2=6, tau=2), **FAST, **kw})


# -------------------------------------------------------------- aggregate
def test_aggregate_examples():
    assert np.array_equal(aggregate(np.array([0.0, 2.0]), [np.array([4.0, 0.0])]), [2.0, 1.0])
    own = np.array([2.0, 2.0])
    assert np.allclose(aggregate(own, [own, np.array([2.0, 8.0])]), [2.0, 4.0])
    assert np.array_equal(aggregate(own, []), own)
    with pytest.raises(ValueError):
        aggregate(own, [np.zeros(3)])


@given(st.integers(0, 6), st.integers(1, 5))
@settings(max_examples=50, deadline=None)
def test_aggregate_is_mean(m, e):
    rng = np.random.default_rng(m * 10 + e)
    own, nb = rng.normal(size=e), list(rng.normal(size=(m, e)))
    assert np.allclose(aggregate(own, nb), np.mean([own] + nb, axis=0))


# ------------------------------------------------------ precision / recall
def test_precision_recall_examples():
    clusters = [0, 0, 0, 1, 1, 1]
    bags = [{1, 3}, {0, 2}, set(), {4}, {0, 1}, {3, 4}]
    p, r, empty = neighbor_precision_recall(bags, clusters)
    assert p == pytest.approx((0.5 + 1 + 1 + 1 + 0 + 1) / 6)
    assert r == pytest.approx((0.5 + 1 + 0 + 0.5 + 0 + 1) / 6)
    assert empty == 1


def test_precision_random_bags_matches_expectation():
    # uniformly random bags of size 3: expected precision (a-1)/(n-1)
    n, a = 20, 5
    clusters = np.repeat(np.arange(n // a), a)
    rng = np.random.default_rng(0)
    precs = []
    for _ in range(500):
        bags = [set(rng.choice([j for j in range(n) if j != i], size=3, replace=False).tolist()) for i in range(n)]
        precs.append(neighbor_precision_recall(bags, clusters)[0])
    # 10000 bags in total
    assert np.mean(precs) == pytest.approx((a - 1) / (n - 1), abs=0.01)


def test_recall_singleton_bag():
    clusters = [0] * 5
    _, r, _ = neighbor_precision_recall([{1}] + [set(range(5)) - {i} for i in range(1, 5)], clusters)
    assert r == pytest.approx((1 / 4 + 4) / 5)


# ------------------------------------------------------------ graph / objective
def test_neighbor_graph_roundtrip():
    bags = [{1}, {0, 2}, set()]
    g = NeighborGraph.from_bags(bags)
    assert g.bags() == bags
    assert g.adjacency_list() == {"0": [1], "1": [0, 2], "2": []}
    assert np.all(np.diag(g.adjacency) == 1)
    with pytest.raises(ValueError):
        NeighborGraph.from_bags([{0}])
    with pytest.raises(ValueError):
        NeighborGraph(np.zeros((2, 2)))


def test_joint_objective_manual():
    w = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    g = NeighborGraph.from_bags([{1, 2}, {0}, set()])
    # ||w0-w1||^2 = 1 (twice, both directions), ||w0-w2||^2 = 4 once
    want = 6.0 + 0.5 * 0.1 * (1 + 1 + 4)
    assert joint_objective([1.0, 2.0, 3.0], w, g, 0.1) == pytest.approx(want)
    assert joint_objective([1.0, 2.0, 3.0], w, g, 0.0) == 6.0
    same = np.ones((3, 2))
    full = NeighborGraph(np.ones((3, 3)))
    assert joint_objective([0.5, 0.5, 0.5], same, full, 10.0) == pytest.approx(1.5)


# ------------------------------------------------------------------ comm
def test_naem_rounds():
    assert naem_rounds(RunConfig(T1=100, T2=200, tau=10)) == 20
    assert naem_rounds(RunConfig(T1=10, T2=20, tau=5)) == 4
    assert naem_rounds(RunConfig(T1=3, T2=4, tau=2)) == 2  # rounds 4 and 6
    assert naem_rounds(RunConfig(T1=5, T2=0, tau=2)) == 0


def test_comm_cost_examples():
    base = dict(n=40, l=10, k=5, T1=10, T2=20, tau=5)
    assert comm_cost_analytic(RunConfig(method="random", **base)) == (40 * 5 * 30, 5)
    assert comm_cost_analytic(RunConfig(method="pens", **base)) == (40 * 10 * 10 + 40 * 5 * 20, 10)
    assert comm_cost_analytic(RunConfig(method="panm_grad", **base)) == (40 * 15 * 10 + 40 * (10 * 4 + 5 * 20), 15)
    assert comm_cost_analytic(RunConfig(method="local", **base)) == (0, 0)
    assert comm_cost_analytic(RunConfig(method="oracle", **{**base, "r": 20})) == (40 * 1 * 30, 1)


@pytest.mark.parametrize("method", METHODS)
def test_measured_plus_shortfall_is_analytic(method):
    cfg = fast(method=method, seed=3)
    f = run_simulation(cfg).final
    assert f.cumulative_model_transfers + f.cumulative_receive_shortfall == comm_cost_analytic(cfg)[0]


def test_shortfall_when_candidates_run_out():
    # l = n - 1: once the bag holds peers, NAEM can draw fewer than l outsiders
    cfg = fast(method="panm_loss", n=6, l=5, k=2, T1=2, T2=4, tau=1, seed=1)
    f = run_simulation(cfg).final
    assert f.cumulative_receive_shortfall > 0
    assert f.cumulative_model_transfers + f.cumulative_receive_shortfall == comm_cost_analytic(cfg)[0]


# ----------------------------------------------------------- config checks
@pytest.mark.parametrize("kw,field", [
    (dict(k=12, l=10), "k"), (dict(n=41), "r"), (dict(l=40), "l"), (dict(method="x"), "method"),
    (dict(alpha=1.5), "alpha"), (dict(tau=0), "tau"), (dict(T1=-1), "T1"), (dict(feature_dim=7), "feature_dim"),
    (dict(heterogeneity="label_swap", r=6, num_classes=10), "r"), (dict(momentum=1.0), "momentum"),
])
def test_validation_names_field(kw, field):
    with pytest.raises(ConfigurationError, match=f"^{field}:"):
        RunConfig(**kw).validate()


def test_local_ignores_l_bound():
    RunConfig(method="local", n=4, r=1, l=10, k=5).validate()


def test_config_roundtrip():
    cfg = RunConfig(method="pens", hidden=(8, 4), lr=0.1, seed=9)
    back = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg


def test_from_dict_rejects_bad_keys_and_types():
    with pytest.raises(ConfigurationError, match="^bogus:"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigurationError, match="^n:"):
        RunConfig.from_dict({"n": "40"})
    with pytest.raises(ConfigurationError, match="^n:"):
        RunConfig.from_dict({"n": True})
    assert isinstance(RunConfig.from_dict({"lr": 1}).lr, float)


# ------------------------------------------------------------ simulation
def test_determinism_byte_identical_csv():
    a = run_simulation(fast(method="panm_grad", seed=5)).metrics_csv()
    b = run_simulation(fast(method="panm_grad", seed=5)).metrics_csv()
    assert a == b
    assert a != run_simulation(fast(method="panm_grad", seed=6)).metrics_csv()


class Reversed(Simulation):
    def _client_order(self, t):
        return range(self.n - 1, -1, -1)


class Shuffled(Simulation):
    def _client_order(self, t):
        return np.random.default_rng(t).permutation(self.n).tolist()


@pytest.mark.parametrize("method", ["panm_loss", "panm_grad", "pens"])
def test_client_schedule_does_not_matter(method):
    cfg = fast(method=method, seed=2)
    ref = Simulation(cfg).run().metrics_csv()
    assert Reversed(cfg).run().metrics_csv() == ref
    assert Shuffled(cfg).run().metrics_csv() == ref


def test_local_has_null_neighbor_metrics():
    res = run_simulation(fast(method="local"))
    for m in res.metrics:
        assert m.neighbor_precision is None and m.round_list_purity is None
        assert m.cumulative_model_transfers == 0
    assert res.round_lists == [[]] * 12


def test_oracle_with_one_cluster_equals_random():
    a = run_simulation(fast(method="oracle", r=1, seed=4))
    b = run_simulation(fast(method="random", r=1, seed=4))
    assert np.array_equal(a.models, b.models)
    assert a.round_lists == b.round_lists


def test_oracle_round_lists_are_pure():
    res = run_simulation(fast(method="oracle", seed=1))
    assert all(m.round_list_purity == 1.0 for m in res.metrics)
    assert res.final.neighbor_precision == 1.0 and res.final.neighbor_recall == 1.0


def test_graph_matches_bags_every_round():
    seen = []

    class Watch(Simulation):
        def _round_metrics(self, t, *rest):
            g = NeighborGraph.from_bags(self.bags)
            seen.append(g.bags() == self.bags and all(set(N) <= B for N, B in zip(self.round_lists, self.bags)))
            return super()._round_metrics(t, *rest)

    res = Watch(fast(method="panm_loss", seed=0)).run()
    assert all(seen) and len(seen) == 10
    assert res.graph.bags() == [set(b) for b in NeighborGraph.from_bags(res.graph.bags()).bags()]


def run_perfect(cfg):
    sim = Simulation(cfg)
    sim.score_hook = perfect_score_hook(sim.clusters)
    return sim.run()


@pytest.mark.parametrize("method", ["panm_loss", "panm_grad"])
def test_perfect_hook_stage_two_precision_stays_one(method):
    res = run_perfect(fast(method=method, n=20, l=6, k=3, T1=6, T2=10, tau=2, seed=0))
    stage2 = [m.neighbor_precision for m in res.metrics if m.stage == 2]
    assert all(p == 1.0 for p in stage2)
    recall = [m.neighbor_recall for m in res.metrics if m.stage == 2]
    assert all(b >= a for a, b in zip(recall, recall[1:]))


def test_pens_permanent_sets_from_counts():
    cfg = fast(method="pens", seed=0)
    sim = Simulation(cfg)
    sim.score_hook = perfect_score_hook(sim.clusters)
    res = sim.run()
    for i, perm in enumerate(sim.permanent):
        assert i not in perm and len(perm) >= min(cfg.k, cfg.n - 1)
    assert sum(sim.counts.sum(axis=1)) == cfg.n * cfg.k * cfg.T1
    assert res.final.cumulative_model_transfers == comm_cost_analytic(cfg)[0]


def test_stage_two_only_starts_from_random_bags():
    res = run_simulation(fast(method="panm_loss", T1=0, T2=4, tau=2))
    assert res.metrics[0].stage == 2 and len(res.metrics) == 4


def _stage_two_train_loss(method):
    runs = [run_simulation(RunConfig(method=method, seed=s, T1=10, T2=30)) for s in range(3)]
    return np.mean([[m.mean_train_loss for m in r.metrics if m.stage == 2] for r in runs], axis=0)


@pytest.fixture(scope="module")
def stage_two_losses():
    return {m: _stage_two_train_loss(m) for m in ("oracle", "panm_loss", "panm_grad")}


def test_stage_two_train_loss_non_increasing(stage_two_losses):
    # strict per-round property on the default task, 3-seed mean
    ups = {m: float(np.diff(v).max()) for m, v in stage_two_losses.items()}
    assert all(u <= 0 for u in ups.values()), f"largest per-round increase: {ups}"


def test_stage_two_train_loss_falls_overall(stage_two_losses):
    for m, v in stage_two_losses.items():
        assert v[-1] < v[0], m


def test_outputs_written(tmp_path):
    res = run_simulation(fast(method="random", seed=7))
    csv_path, json_path = write_outputs(res, tmp_path)
    assert csv_path.endswith("random_seed7.csv") and json_path.endswith("random_seed7.json")
    summary = json.loads(open(json_path).read())
    assert summary["rounds"] == 10
    assert summary["comm_cost"]["measured_transfers"] == summary["comm_cost"]["analytic_transfers"]
    assert set(summary["final_graph"]) == {str(i) for i in range(12)}
    assert open(csv_path).read() == res.metrics_csv()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_surfaces():
    from panm.learner import DivergenceError

    with pytest.raises(DivergenceError):
        run_simulation(fast(method="local", model="mlp", hidden=(4,), lr=1e200, momentum=0.0, T1=1, T2=1))
