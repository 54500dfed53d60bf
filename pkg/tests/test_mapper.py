import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mapper_stability.clustering import DbscanParams, LinkageParams
from mapper_stability.cover import build_interval_cover, pullback
from mapper_stability.mapper import build_cluster_cover, complex_from_simplices, mapper_graph, nerve
from mapper_stability.pointcloud import OrderedPointCloud, eval_filter, load_cloud

from conftest import circle_cloud
from oracles import brute_nerve


def two_blob_cloud():
    return load_cloud([[float(v)] for v in list(range(9)) + list(range(20, 27))])


@pytest.mark.parametrize("params", [LinkageParams("single", 0.4), DbscanParams(0.4, 1)])
def test_circle_is_a_four_cycle(params):
    cloud = circle_cloud()
    cx, cc = mapper_graph(cloud, eval_filter(cloud, 0), 3, 30, params)
    assert cx.counts() == [4, 4, 0]
    assert [el.bin_index for el in cc.elements] == [0, 1, 1, 2]
    assert all(len([e for e in cx.edges() if v in e]) == 2 for v in range(4))


def test_one_bin_huge_eps():
    cloud = circle_cloud(20)
    f = eval_filter(cloud, 0)
    cc = build_cluster_cover(cloud, pullback(cloud, f, build_interval_cover(f, 1, 0)), DbscanParams(100, 1))
    assert len(cc) == 1 and cc.elements[0].members == tuple(range(20))


def test_two_blobs_give_nine_and_seven():
    cloud = two_blob_cloud()
    f = eval_filter(cloud)
    cc = build_cluster_cover(cloud, pullback(cloud, f, build_interval_cover(f, 1, 0)), DbscanParams(1, 3))
    assert sorted(el.size for el in cc.elements) == [7, 9]


def test_nerve_small_cases():
    cloud = load_cloud([[0.0], [10.0], [20.0]])
    f = eval_filter(cloud)
    cc = build_cluster_cover(cloud, pullback(cloud, f, build_interval_cover(f, 3, 0)), DbscanParams(1, 1))
    # pairwise disjoint clusters: vertices only
    cx = nerve(cc)
    assert cx.counts()[0] == 3 and cx.counts()[1] == 0
    tri = complex_from_simplices(3, [(0, 1, 2)], 2)
    assert tri.counts() == [3, 3, 1]
    with pytest.raises(ValueError):
        nerve(cc, 0)


def test_three_clusters_sharing_a_point():
    cloud = load_cloud([[0.0], [1.0], [2.0]])
    f = eval_filter(cloud, "custom", [1.0, 1.0, 1.0])
    cc = build_cluster_cover(cloud, pullback(cloud, f, build_interval_cover((0, 2), 3, 60)), DbscanParams(5, 1))
    cx = nerve(cc, 2)
    assert cx.counts() == [3, 3, 1]


def test_exports():
    cloud = circle_cloud()
    cx, _ = mapper_graph(cloud, eval_filter(cloud, 0), 3, 30, DbscanParams(0.4, 1))
    doc = cx.to_json(include_members=True)
    json.dumps(doc)
    assert set(doc["vertices"][0]) == {"id", "bin", "rep", "size", "members"}
    assert len(doc["simplices"]["1"]) == 4 and doc["simplices"]["2"] == []
    dot = cx.to_dot()
    assert dot.startswith("graph mapper {") and dot.count(" -- ") == 4
    assert '"0:' in dot


def test_cover_rejects_foreign_pullback():
    a, b = circle_cloud(10), circle_cloud(11)
    f = eval_filter(a, 0)
    with pytest.raises(ValueError):
        build_cluster_cover(b, pullback(a, f, build_interval_cover(f, 2, 10)), DbscanParams(1, 1))


@settings(max_examples=100)
@given(st.integers(1, 2).flatmap(lambda d: arrays(np.float64, st.tuples(st.integers(1, 25), st.just(d)),
                                                  elements=st.floats(-3, 3))),
       st.integers(1, 5), st.floats(0, 80), st.floats(0.1, 2), st.integers(1, 4), st.integers(1, 3))
def test_nerve_matches_brute_force(pts, n, overlap, eps, min_pts, dim_cap):
    cloud = OrderedPointCloud(pts)
    cx, cc = mapper_graph(cloud, eval_filter(cloud, 0), n, overlap, DbscanParams(eps, min_pts), dim_cap)
    assert cx.simplices == brute_nerve([el.members for el in cc.elements], dim_cap)
    covered = {p for el in cc.elements for p in el.members}
    assert covered | set(cc.noise) == set(range(len(cloud)))
    assert not covered & set(cc.noise)
