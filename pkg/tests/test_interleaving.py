import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mapper_stability.cover import build_interval_cover, interval_growth_for_delta
from mapper_stability.filtration import build_grid
from mapper_stability.interleaving import IDENTITIES, check_alignment, verify_interleaving
from mapper_stability.pointcloud import OrderedPointCloud, eval_filter, load_cloud, perturbation_from_clouds
from mapper_stability.stability import StabilityExperiment, load_experiment, run_stability

from conftest import circle_cloud, sandwich_values

DELTA8 = 0.125


def two_blob_pair():
    """Two blobs; the perturbation opens two gaps of width eps + 2 delta in the first."""
    a = [float(v) for v in range(9)] + [float(v) for v in range(20, 27)]
    b = list(a)
    for i, sign in ((2, -1), (3, 1), (5, -1), (6, 1)):
        b[i] += sign * DELTA8
    x, xd = load_cloud([[v] for v in a]), load_cloud([[v] for v in b])
    return x, xd, perturbation_from_clouds(x, xd, DELTA8)


def two_blob_result():
    x, xd, pert = two_blob_pair()
    exp = StabilityExperiment(intervals=1, overlap=0, epsilon=1, min_pts=3, delta=DELTA8, k_max=2, l_max=2, k=0)
    return run_stability(x, exp, xd, pert)


def test_two_blob_cluster_pattern_and_verdict():
    res = two_blob_result()
    counts = res.report.cluster_counts
    assert counts["X"][0][0] == 2
    assert counts["X_delta"][0][0] == 4
    assert counts["X_delta"][0][1] == 2
    sizes = sorted(el.size for el in res.grid_xd.covers[0][0].elements)
    assert sizes == [3, 3, 3, 7]
    assert res.report.verdict and res.bin_capture


def test_circle_identities_and_rank_audit():
    exp = StabilityExperiment(intervals=3, overlap=30, epsilon=0.2, min_pts=2, delta=0.03, k=1, seed=4)
    res = run_stability(circle_cloud(), exp)
    rep = res.report
    assert set(rep.identities) == set(IDENTITIES)
    assert all(v["checked"] > 0 for v in rep.identities.values())
    assert rep.verdict
    assert rep.transition_ranks
    for row in rep.transition_ranks:
        assert row["transition_rank"] == row["composed_rank"] == 1


def test_zero_delta_maps_are_internal_maps():
    cloud = circle_cloud()
    exp = StabilityExperiment(intervals=3, overlap=30, epsilon=0.2, min_pts=2, delta=0.0)
    res = run_stability(cloud, exp)
    assert res.report.verdict
    for u, a in res.report.phi.items():
        v = (u[0] + 1, u[1] + 1)
        assert a == res.grid_x.transition(u, v).assignment == res.report.psi[u]


@settings(max_examples=30)
@given(st.integers(1, 2).flatmap(lambda d: arrays(np.float64, st.tuples(st.integers(1, 25), st.just(d)),
                                                  elements=st.floats(-3, 3))),
       st.floats(0.05, 1), st.integers(1, 6), st.integers(1, 4))
def test_zero_delta_always_verifies(pts, eps, min_pts, n):
    exp = StabilityExperiment(intervals=n, overlap=20, epsilon=eps, min_pts=min_pts, delta=0.0, k=0)
    assert run_stability(OrderedPointCloud(pts), exp).report.verdict


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.floats(0.005, 0.03))
def test_small_perturbations_of_circle_verify(seed, delta):
    exp = StabilityExperiment(intervals=3, overlap=30, epsilon=0.2, min_pts=2, delta=delta, k=1, seed=seed,
                              k_max=1, l_max=1)
    res = run_stability(circle_cloud(60), exp)
    assert res.report.verdict and res.bin_capture


def test_free_border_blocks_the_interleaving():
    vals = sandwich_values()
    order = [1] + list(range(3, 9)) + [0] + [2] + list(range(9, 15))
    cloud = load_cloud([[vals[i]] for i in order])
    exp = StabilityExperiment(intervals=2, overlap=0, epsilon=0.5, min_pts=5, delta=0.5, k_max=1, l_max=1, k=0)
    rep = run_stability(cloud, exp).report
    assert not rep.verdict
    assert rep.obstruction_grid == "X" and rep.obstruction.witnesses == (order.index(0),)
    assert rep.to_dict()["obstruction"]["grid"] == "X"


def test_alignment_is_enforced():
    cloud = circle_cloud()
    f = eval_filter(cloud, 0)
    base = build_interval_cover(f, 3, 30)
    covers = [interval_growth_for_delta(base, g) for g in (0, 0.1)]
    g1 = build_grid(cloud, f, covers, [0.2, 0.25], 2)
    with pytest.raises(ValueError, match="epsilon"):
        check_alignment(g1, g1, 0.05)
    g2 = build_grid(cloud, f, covers, [0.2, 0.3], 2)
    check_alignment(g2, g2, 0.05)
    with pytest.raises(ValueError, match="bin"):
        check_alignment(g2, g2, 0.11)
    g3 = build_grid(cloud, f, covers[:1], [0.2, 0.3], 2)
    with pytest.raises(ValueError):
        check_alignment(g2, g3, 0.05)


def test_experiment_validation_and_loading(tmp_path):
    with pytest.raises(ValueError):
        StabilityExperiment(delta=-1)
    with pytest.raises(ValueError):
        StabilityExperiment(delta=0.1, eps_step=0.1)
    exp = StabilityExperiment(delta=0.05)
    assert exp.eps_values() == pytest.approx([0.5, 0.6, 0.7])
    assert exp.growths() == pytest.approx([0, 0.1, 0.2])
    kv = tmp_path / "exp.txt"
    kv.write_text("# stability run\nintervals = 4\ndelta = 0.02\nlayout = tdamapper\n")
    loaded = load_experiment(kv)
    assert (loaded.intervals, loaded.delta, loaded.layout) == (4, 0.02, "tdamapper")
    js = tmp_path / "exp.json"
    js.write_text(json.dumps({"min_pts": 1, "seed": 9}))
    assert load_experiment(js).seed == 9
    bad = tmp_path / "bad.txt"
    bad.write_text("colour = red\n")
    with pytest.raises(ValueError):
        load_experiment(bad)


def test_report_serializes():
    res = two_blob_result()
    doc = json.loads(json.dumps(res.to_dict()))
    assert doc["report"]["verdict"] is True
    assert set(doc["report"]["identities"]) == set(IDENTITIES)


def test_index_preserving_only():
    from mapper_stability.pointcloud import Perturbation
    x, xd, _ = two_blob_pair()
    res = two_blob_result()
    with pytest.raises(ValueError):
        verify_interleaving(res.grid_x, res.grid_xd, Perturbation(DELTA8, None, tuple(reversed(range(len(x))))),
                            DELTA8)
