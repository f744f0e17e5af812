"""Edge confidence scoring: raster projection plus pluggable scorers.

The CNN of the original system is replaced by (a) a coverage/compactness
heuristic over the raster, (b) an optional user-supplied dense feedforward
model, and (c) an exact score-override file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .config import SearchConfig
from .errors import DegenerateGeometryError, ModelFormatError, OverrideError
from .geometry import grow_angle
from .superpoints import SuperpointGraph

#: Raster shape: 32 buckets along the edge, 16 lateral.
GRID_ALONG = 32
GRID_LATERAL = 16


@dataclass(frozen=True)
class EdgeRaster:
    """32x16 intensity grid (max-normalized) plus the descriptor fields."""

    grid: np.ndarray          # (32, 16), values in [0, 1]
    midpoint: np.ndarray      # (3,)
    growth_angle: float       # radians

    def descriptor(self) -> np.ndarray:
        return np.concatenate([self.midpoint, [self.growth_angle]])


@dataclass(frozen=True)
class ConfidenceMap:
    """Per-edge score in [0, 1] aligned with the graph's edge ids."""

    values: np.ndarray
    provenance: str  # heuristic | model | override

    def __getitem__(self, edge_id: int) -> float:
        return float(self.values[edge_id])

    def __len__(self) -> int:
        return len(self.values)


def project_edge(cloud: PointCloud, graph: SuperpointGraph, edge: int,
                 r_super: float, kdtree: cKDTree | None = None) -> EdgeRaster:
    """Rasterize the two-sphere neighborhood of a candidate edge.

    Frame: origin at the edge midpoint, x along the edge, z along the
    least-significant singular vector orthogonalized against the edge
    (sign fixed toward world +Y). The z component is dropped and (x, y)
    histogrammed over [-2r, 2r] x [-r, r]; out-of-range points land in
    the boundary buckets.
    """
    i, j = (int(v) for v in graph.edges[edge])
    pa, pb = graph.positions[i], graph.positions[j]
    pts = cloud.points.astype(np.float64)
    if kdtree is None:
        kdtree = cKDTree(pts)
    idx = set(kdtree.query_ball_point(pa, r_super))
    idx.update(kdtree.query_ball_point(pb, r_super))
    if len(idx) < 3:
        raise DegenerateGeometryError(
            f"edge {edge}: only {len(idx)} points near endpoints")
    local = pts[sorted(idx)]

    mid = 0.5 * (pa + pb)
    evec = pb - pa
    elen = np.linalg.norm(evec)
    if elen == 0:
        raise DegenerateGeometryError(f"edge {edge}: coincident endpoints")
    x_axis = evec / elen

    centered = local - local.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    z_axis = vt[-1] - np.dot(vt[-1], x_axis) * x_axis
    nz = np.linalg.norm(z_axis)
    if nz < 1e-12:
        # Least-significant direction parallel to the edge (collinear
        # points); fall back to the least-aligned world axis.
        k = int(np.argmin(np.abs(x_axis)))
        unit = np.zeros(3)
        unit[k] = 1.0
        z_axis = unit - np.dot(unit, x_axis) * x_axis
        nz = np.linalg.norm(z_axis)
    z_axis = z_axis / nz
    # SVD sign ambiguity: canonicalize toward world +Y, tie-break on +Z.
    dy = z_axis[1]
    if dy < 0 or (dy == 0 and z_axis[2] < 0):
        z_axis = -z_axis
    y_axis = np.cross(z_axis, x_axis)

    rel = local - mid
    u = rel @ x_axis
    v = rel @ y_axis
    iu = np.clip(((u + 2 * r_super) / (4 * r_super) * GRID_ALONG).astype(int),
                 0, GRID_ALONG - 1)
    iv = np.clip(((v + r_super) / (2 * r_super) * GRID_LATERAL).astype(int),
                 0, GRID_LATERAL - 1)
    grid = np.zeros((GRID_ALONG, GRID_LATERAL))
    np.add.at(grid, (iu, iv), 1.0)
    peak = grid.max()
    if peak > 0:
        grid /= peak
    return EdgeRaster(grid=grid, midpoint=mid, growth_angle=grow_angle(evec))


def heuristic_confidence(raster: EdgeRaster) -> float:
    """coverage * compactness over the along-edge columns.

    coverage = fraction of nonempty columns; compactness = 1 minus the
    mean lateral intensity-weighted standard deviation over nonempty
    columns, scaled by half the lateral bucket count.
    """
    grid = raster.grid
    col_mass = grid.sum(axis=1)
    nonempty = col_mass > 0
    coverage = float(nonempty.mean())
    if coverage == 0.0:
        return 0.0
    lat = np.arange(GRID_LATERAL, dtype=np.float64)
    cols = grid[nonempty]
    mass = col_mass[nonempty]
    mean = (cols * lat).sum(axis=1) / mass
    var = (cols * (lat[None, :] - mean[:, None]) ** 2).sum(axis=1) / mass
    compactness = 1.0 - float(np.sqrt(var).mean()) / (GRID_LATERAL / 2)
    compactness = min(max(compactness, 0.0), 1.0)
    return min(max(coverage * compactness, 0.0), 1.0)


@dataclass(frozen=True)
class DenseModel:
    """Stack of dense layers with ReLU between and a final logistic."""

    weights: tuple  # of (rows, cols) float arrays
    biases: tuple   # of (rows,) float arrays

    @classmethod
    def load(cls, path: str | Path) -> "DenseModel":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "DenseModel":
        layers = doc.get("layers")
        if not layers:
            raise ModelFormatError("model file has no layers")
        ws, bs = [], []
        expected = GRID_ALONG * GRID_LATERAL + 4
        for k, layer in enumerate(layers):
            rows, cols = layer["rows"], layer["cols"]
            if cols != expected:
                raise ModelFormatError(
                    f"layer {k}: expected {expected} input columns, "
                    f"got {cols}")
            w = np.asarray(layer["weights"], dtype=np.float64)
            if w.size != rows * cols:
                raise ModelFormatError(
                    f"layer {k}: {w.size} weights for shape {rows}x{cols}")
            b = np.asarray(layer["bias"], dtype=np.float64)
            if b.size != rows:
                raise ModelFormatError(
                    f"layer {k}: {b.size} biases for {rows} rows")
            ws.append(w.reshape(rows, cols))
            bs.append(b)
            expected = rows
        if expected != 1:
            raise ModelFormatError(
                f"final layer must have 1 output row, got {expected}")
        return cls(weights=tuple(ws), biases=tuple(bs))

    def forward(self, x: np.ndarray) -> float:
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = w @ x + b
            if k + 1 < len(self.weights):
                x = np.maximum(x, 0.0)
        return 1.0 / (1.0 + math.exp(-float(x[0])))


def model_confidence(raster: EdgeRaster, model: DenseModel) -> float:
    x = np.concatenate([raster.grid.reshape(-1), raster.descriptor()])
    return model.forward(x)


def edge_key(i: int, j: int) -> str:
    a, b = (i, j) if i < j else (j, i)
    return f"{a}-{b}"


def load_override(path: str | Path) -> dict[str, float]:
    with open(path) as fh:
        doc = json.load(fh)
    scores = doc.get("scores")
    if not isinstance(scores, dict):
        raise OverrideError("override file must contain a 'scores' object")
    return {k: float(v) for k, v in scores.items()}


def score_all_edges(cloud: PointCloud | None, graph: SuperpointGraph,
                    scorer, cfg: SearchConfig) -> ConfidenceMap:
    """Score every dense edge.

    ``scorer`` is one of:
      - ("heuristic",)
      - ("model", DenseModel | path)
      - ("override", mapping "i-j" -> score | path)
    Degenerate edges score 0; an override must cover every edge.
    """
    kind = scorer[0]
    m = graph.num_edges
    values = np.zeros(m, dtype=np.float64)
    if kind == "override":
        table = scorer[1]
        if not isinstance(table, dict):
            table = load_override(table)
        missing = []
        for k, (i, j) in enumerate(graph.edges):
            key = edge_key(int(i), int(j))
            if key in table:
                values[k] = table[key]
            else:
                missing.append(key)
        if missing:
            raise OverrideError(
                f"override file missing {len(missing)} edges: "
                f"{missing[:20]}")
        if values.min() < 0 or values.max() > 1:
            raise OverrideError("override scores must lie in [0, 1]")
        return ConfidenceMap(values=values, provenance="override")

    if kind == "model":
        model = scorer[1]
        if not isinstance(model, DenseModel):
            model = DenseModel.load(model)
        score_one = lambda raster: model_confidence(raster, model)
    elif kind == "heuristic":
        score_one = heuristic_confidence
    else:
        raise ValueError(f"unknown scorer kind {kind!r}")

    if cloud is None:
        raise ValueError(f"{kind} scorer needs the point cloud")
    tree = cKDTree(cloud.points.astype(np.float64))
    for k in range(m):
        try:
            raster = project_edge(cloud, graph, k, cfg.r_super, kdtree=tree)
        except DegenerateGeometryError:
            values[k] = 0.0
            continue
        values[k] = score_one(raster)
    return ConfidenceMap(values=values, provenance=kind)
