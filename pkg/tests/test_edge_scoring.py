"""Edge rasterization and the pluggable confidence scorers."""

import json
import math

import numpy as np
import pytest

from conftest import make_graph
from skelgrow.cloud import PointCloud
from skelgrow.config import SearchConfig
from skelgrow.edge_scoring import (GRID_ALONG, GRID_LATERAL, DenseModel,
                                   EdgeRaster, edge_key, heuristic_confidence,
                                   model_confidence, project_edge,
                                   score_all_edges)
from skelgrow.errors import (DegenerateGeometryError, ModelFormatError,
                             OverrideError)
from skelgrow.synth import SynthSpec, generate
from skelgrow.superpoints import build_graph

CFG = SearchConfig()


def _edge_fixture(points):
    """Cloud plus a 2-node graph with one edge along +X of length 0.15."""
    cloud = PointCloud(np.asarray(points, dtype=np.float32))
    graph = make_graph([(0.0, 0.0, 0.0), (0.15, 0.0, 0.0)], [(0, 1)])
    return cloud, graph


def test_project_edge_collinear_points_central_rows():
    xs = np.linspace(-0.05, 0.20, 60)
    pts = np.stack([xs, np.zeros_like(xs), np.zeros_like(xs)], axis=1)
    cloud, graph = _edge_fixture(pts)
    raster = project_edge(cloud, graph, 0, CFG.r_super)
    assert raster.grid.shape == (GRID_ALONG, GRID_LATERAL)
    assert raster.grid.max() == pytest.approx(1.0)
    lateral_mass = raster.grid.sum(axis=0)
    occupied = np.nonzero(lateral_mass)[0]
    center = GRID_LATERAL // 2
    assert set(occupied) <= {center - 1, center}
    # Columns along the edge are uniformly hit over the sampled span.
    col_mass = raster.grid.sum(axis=1)
    assert (col_mass[col_mass > 0] > 0).all()


def test_project_edge_rigid_invariance_up_to_lateral_flip():
    rng = np.random.default_rng(4)
    pts = np.column_stack([
        rng.uniform(-0.05, 0.2, 300),
        rng.normal(scale=0.01, size=300),
        rng.normal(scale=0.005, size=300),
    ])
    cloud, graph = _edge_fixture(pts)
    base = project_edge(cloud, graph, 0, CFG.r_super)

    # Random rigid motion applied to cloud and node positions together.
    theta = 0.83
    rot = np.array([[math.cos(theta), -math.sin(theta), 0],
                    [math.sin(theta), math.cos(theta), 0],
                    [0, 0, 1.0]])
    axis_tilt = np.array([[1, 0, 0],
                          [0, math.cos(0.4), -math.sin(0.4)],
                          [0, math.sin(0.4), math.cos(0.4)]])
    rot = rot @ axis_tilt
    shift = np.array([0.3, -0.2, 0.7])
    moved_cloud = PointCloud((pts @ rot.T + shift).astype(np.float32))
    moved_graph = make_graph(
        (np.asarray([(0, 0, 0), (0.15, 0, 0)]) @ rot.T + shift), [(0, 1)])
    moved = project_edge(moved_cloud, moved_graph, 0, CFG.r_super)
    same = np.allclose(moved.grid, base.grid)
    flipped = np.allclose(moved.grid, base.grid[:, ::-1])
    assert same or flipped


def test_project_edge_gap_fixture_has_zero_band():
    # Two runs parallel to the edge, offset laterally by +-r/4: a false
    # "gap-jumping" edge shows two bands with an empty lateral band
    # between them.
    xs = np.linspace(-0.05, 0.2, 80)
    off = CFG.r_super / 4
    pts = np.concatenate([
        np.stack([xs, np.full_like(xs, off), np.zeros_like(xs)], axis=1),
        np.stack([xs, np.full_like(xs, -off), np.zeros_like(xs)], axis=1),
    ])
    cloud, graph = _edge_fixture(pts)
    raster = project_edge(cloud, graph, 0, CFG.r_super)
    lateral_mass = raster.grid.sum(axis=0)
    occupied = np.nonzero(lateral_mass)[0]
    assert len(occupied) >= 2
    gap = [k for k in range(occupied.min(), occupied.max() + 1)
           if lateral_mass[k] == 0]
    assert gap, "expected an all-zero lateral band between the two runs"


def test_project_edge_too_few_points():
    cloud, graph = _edge_fixture([[0.0, 0.0, 0.0], [0.15, 0.0, 0.0]])
    with pytest.raises(DegenerateGeometryError):
        project_edge(cloud, graph, 0, CFG.r_super)


def _raster(grid):
    return EdgeRaster(grid=np.asarray(grid, dtype=np.float64),
                      midpoint=np.zeros(3), growth_angle=0.0)


def test_heuristic_all_zero_grid():
    assert heuristic_confidence(
        _raster(np.zeros((GRID_ALONG, GRID_LATERAL)))) == 0.0


def test_heuristic_central_rows_high_score():
    grid = np.zeros((GRID_ALONG, GRID_LATERAL))
    grid[:, GRID_LATERAL // 2 - 1:GRID_LATERAL // 2 + 1] = 1.0
    score = heuristic_confidence(_raster(grid))
    assert score >= 0.9


def test_heuristic_half_columns_half_score():
    full = np.zeros((GRID_ALONG, GRID_LATERAL))
    full[:, GRID_LATERAL // 2] = 1.0
    half = full.copy()
    half[GRID_ALONG // 2:] = 0.0
    compactness = heuristic_confidence(_raster(full))  # coverage is 1 here
    assert heuristic_confidence(_raster(half)) == pytest.approx(
        0.5 * compactness, rel=1e-9)


def test_model_zero_weights_gives_half():
    n_in = GRID_ALONG * GRID_LATERAL + 4
    model = DenseModel.from_dict({"layers": [
        {"rows": 1, "cols": n_in, "weights": [0.0] * n_in, "bias": [0.0]}]})
    grid = np.zeros((GRID_ALONG, GRID_LATERAL))
    assert model_confidence(_raster(grid), model) == pytest.approx(0.5)


def test_model_large_bias_saturates():
    n_in = GRID_ALONG * GRID_LATERAL + 4
    model = DenseModel.from_dict({"layers": [
        {"rows": 1, "cols": n_in, "weights": [0.0] * n_in, "bias": [10.0]}]})
    got = model_confidence(_raster(np.zeros((GRID_ALONG, GRID_LATERAL))),
                           model)
    assert got == pytest.approx(1.0 / (1.0 + math.exp(-10.0)), rel=1e-12)


def test_model_two_layers_match_manual_forward():
    rng = np.random.default_rng(8)
    n_in = GRID_ALONG * GRID_LATERAL + 4
    w1 = rng.normal(scale=0.05, size=(6, n_in))
    b1 = rng.normal(size=6)
    w2 = rng.normal(size=(1, 6))
    b2 = rng.normal(size=1)
    model = DenseModel.from_dict({"layers": [
        {"rows": 6, "cols": n_in, "weights": w1.reshape(-1).tolist(),
         "bias": b1.tolist()},
        {"rows": 1, "cols": 6, "weights": w2.reshape(-1).tolist(),
         "bias": b2.tolist()},
    ]})
    grid = rng.uniform(size=(GRID_ALONG, GRID_LATERAL))
    raster = EdgeRaster(grid=grid, midpoint=np.array([0.1, 0.2, 0.3]),
                        growth_angle=0.7)
    x = np.concatenate([grid.reshape(-1), [0.1, 0.2, 0.3, 0.7]])
    hidden = np.maximum(w1 @ x + b1, 0.0)
    logit = float((w2 @ hidden + b2)[0])
    expected = 1.0 / (1.0 + math.exp(-logit))
    assert model_confidence(raster, model) == pytest.approx(expected,
                                                            rel=1e-12)


def test_model_dimension_mismatch():
    with pytest.raises(ModelFormatError):
        DenseModel.from_dict({"layers": [
            {"rows": 1, "cols": 7, "weights": [0.0] * 7, "bias": [0.0]}]})
    with pytest.raises(ModelFormatError):
        DenseModel.from_dict({"layers": []})
    n_in = GRID_ALONG * GRID_LATERAL + 4
    with pytest.raises(ModelFormatError):
        DenseModel.from_dict({"layers": [
            {"rows": 2, "cols": n_in, "weights": [0.0] * (2 * n_in),
             "bias": [0.0, 0.0]}]})  # final layer must output one row


def test_override_full_coverage():
    graph = make_graph([(0, 0, 0), (0.1, 0, 0), (0.2, 0, 0)],
                       [(0, 1), (1, 2)])
    table = {"0-1": 1.0, "1-2": 1.0}
    conf = score_all_edges(None, graph, ("override", table), CFG)
    assert conf.provenance == "override"
    np.testing.assert_array_equal(conf.values, [1.0, 1.0])


def test_override_missing_edges_listed():
    graph = make_graph([(0, 0, 0), (0.1, 0, 0), (0.2, 0, 0)],
                       [(0, 1), (1, 2)])
    with pytest.raises(OverrideError, match="1-2"):
        score_all_edges(None, graph, ("override", {"0-1": 1.0}), CFG)


def test_override_out_of_range_rejected():
    graph = make_graph([(0, 0, 0), (0.1, 0, 0)], [(0, 1)])
    with pytest.raises(OverrideError):
        score_all_edges(None, graph, ("override", {"0-1": 1.5}), CFG)


def test_override_file_round_trip(tmp_path):
    graph = make_graph([(0, 0, 0), (0.1, 0, 0)], [(0, 1)])
    path = tmp_path / "override.json"
    path.write_text(json.dumps({"scores": {"0-1": 0.25}}))
    conf = score_all_edges(None, graph, ("override", str(path)), CFG)
    assert conf[0] == pytest.approx(0.25)


def test_edge_key_sorted():
    assert edge_key(4, 2) == "2-4"
    assert edge_key(2, 4) == "2-4"


def test_heuristic_penalizes_gap_jumping_cross_edge():
    # Two parallel vertical chains 0.18 apart with a horizontal cross edge
    # between them: the cross edge spans empty space, so its heuristic
    # confidence must fall well below the within-chain edges'.
    zs = np.linspace(0.0, 0.6, 240)
    pts = np.concatenate([
        np.stack([np.zeros_like(zs), np.zeros_like(zs), zs], axis=1),
        np.stack([np.full_like(zs, 0.18), np.zeros_like(zs), zs], axis=1),
    ]).astype(np.float32)
    cloud = PointCloud(pts)
    positions = ([(0.0, 0.0, 0.15 * k) for k in range(5)]
                 + [(0.18, 0.0, 0.15 * k) for k in range(5)])
    chain_edges = ([(k, k + 1) for k in range(4)]
                   + [(5 + k, 6 + k) for k in range(4)])
    cross = (2, 7)
    graph = make_graph(positions, chain_edges + [cross])
    conf = score_all_edges(cloud, graph, ("heuristic",), CFG)
    assert conf.values.min() >= 0.0 and conf.values.max() <= 1.0
    cross_score = conf[graph.edge_id(*cross)]
    chain_scores = [conf[graph.edge_id(i, j)] for i, j in chain_edges]
    assert cross_score < 0.5 * min(chain_scores)


def test_heuristic_scores_synthetic_tree_edges_high():
    spec = SynthSpec(n_leaders=2, leader_height=1.0, seed=3)
    cloud, truth = generate(spec)
    graph = build_graph(cloud, CFG.r_super, 3)
    oracle = truth.oracle_confidences(graph)
    conf = score_all_edges(cloud, graph, ("heuristic",), CFG)
    true_scores = conf.values[oracle.values == 1.0]
    assert len(true_scores)
    assert true_scores.mean() > 0.4
    assert conf.values.min() >= 0.0 and conf.values.max() <= 1.0
