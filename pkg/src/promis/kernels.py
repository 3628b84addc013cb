"""Geometry kernels evaluated for many query points at once.

``distance_field`` is the hot loop of relation estimation: for every query
point it finds the distance to the closest segment, point or polygon edge
and whether the point lies inside (or on) any polygon ring.

Two implementations exist with identical contracts: a numba kernel that
runs parallel over the points, and a chunked numpy fallback. The module
level ``distance_field`` is bound to the numba one unless
``PROMIS_DISABLE_NUMBA`` is set.
"""

from __future__ import annotations

import numpy as np

from promis._accel import USE_NUMBA, njit, prange

BOUNDARY_EPS = 1e-9
_CHUNK_ELEMENTS = 1 << 22


class Geometry:
    """Packed coordinates of a set of features.

    ``segments`` is ``(K, 4)`` as ``x1, y1, x2, y2``; ``points`` is ``(P, 2)``;
    polygon rings are stacked into ``ring_xy`` with ``ring_offsets`` of
    length ``R + 1`` delimiting each closed ring.
    """

    __slots__ = ("segments", "points", "ring_xy", "ring_offsets")

    def __init__(self, segments=None, points=None, ring_xy=None, ring_offsets=None):
        self.segments = np.zeros((0, 4)) if segments is None else np.ascontiguousarray(segments, dtype=np.float64)
        self.points = np.zeros((0, 2)) if points is None else np.ascontiguousarray(points, dtype=np.float64)
        self.ring_xy = np.zeros((0, 2)) if ring_xy is None else np.ascontiguousarray(ring_xy, dtype=np.float64)
        self.ring_offsets = (
            np.zeros(1, dtype=np.int64) if ring_offsets is None else np.ascontiguousarray(ring_offsets, dtype=np.int64)
        )

    @property
    def empty(self) -> bool:
        return len(self.segments) == 0 and len(self.points) == 0 and len(self.ring_offsets) < 2

    @classmethod
    def pack(cls, kinds, vertex_arrays) -> "Geometry":
        segs, pts, rings = [], [], []
        for kind, v in zip(kinds, vertex_arrays):
            if kind == "point":
                pts.append(v[:1])
            elif kind == "polyline":
                segs.append(np.hstack([v[:-1], v[1:]]))
            else:
                rings.append(v)
        offsets = np.zeros(len(rings) + 1, dtype=np.int64)
        if rings:
            offsets[1:] = np.cumsum([len(r) for r in rings])
        return cls(
            np.vstack(segs) if segs else None,
            np.vstack(pts) if pts else None,
            np.vstack(rings) if rings else None,
            offsets,
        )


@njit(cache=True, inline="always")
def _seg_dist2(x, y, x1, y1, x2, y2):
    dx = x2 - x1
    dy = y2 - y1
    l2 = dx * dx + dy * dy
    t = 0.0
    if l2 > 0.0:
        t = ((x - x1) * dx + (y - y1) * dy) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    cx = x1 + t * dx - x
    cy = y1 + t * dy - y
    return cx * cx + cy * cy


@njit(parallel=True, cache=True)
def _distance_field_numba(px, py, segments, points, ring_xy, ring_offsets, eps):
    n = px.shape[0]
    dist = np.empty(n)
    inside = np.zeros(n, dtype=np.bool_)
    eps2 = eps * eps
    for g in prange(n):
        x = px[g]
        y = py[g]
        best = np.inf
        for k in range(segments.shape[0]):
            d = _seg_dist2(x, y, segments[k, 0], segments[k, 1], segments[k, 2], segments[k, 3])
            if d < best:
                best = d
        for k in range(points.shape[0]):
            ex = points[k, 0] - x
            ey = points[k, 1] - y
            d = ex * ex + ey * ey
            if d < best:
                best = d
        hit = False
        for r in range(ring_offsets.shape[0] - 1):
            crossing = False
            edge_best = np.inf
            for v in range(ring_offsets[r], ring_offsets[r + 1] - 1):
                x1 = ring_xy[v, 0]
                y1 = ring_xy[v, 1]
                x2 = ring_xy[v + 1, 0]
                y2 = ring_xy[v + 1, 1]
                d = _seg_dist2(x, y, x1, y1, x2, y2)
                if d < edge_best:
                    edge_best = d
                if (y1 > y) != (y2 > y):
                    if x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
                        crossing = not crossing
            if edge_best < best:
                best = edge_best
            if crossing or edge_best <= eps2:
                hit = True
        dist[g] = np.sqrt(best)
        inside[g] = hit
    return dist, inside


def _seg_dist2_np(x, y, x1, y1, x2, y2):
    dx = x2 - x1
    dy = y2 - y1
    l2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(l2 > 0.0, ((x - x1) * dx + (y - y1) * dy) / np.where(l2 > 0.0, l2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    cx = x1 + t * dx - x
    cy = y1 + t * dy - y
    return cx * cx + cy * cy


def _distance_field_numpy(px, py, segments, points, ring_xy, ring_offsets, eps):
    n = px.shape[0]
    dist2 = np.full(n, np.inf)
    inside = np.zeros(n, dtype=bool)

    n_rings = len(ring_offsets) - 1
    if n_rings > 0:
        starts = np.concatenate([np.arange(ring_offsets[r], ring_offsets[r + 1] - 1) for r in range(n_rings)])
        edges = np.hstack([ring_xy[starts], ring_xy[starts + 1]])
        ring_first = np.concatenate([[0], np.cumsum(np.diff(ring_offsets) - 1)[:-1]])
    width = max(len(segments), len(points), (len(ring_xy) if n_rings else 0), 1)
    step = max(1, _CHUNK_ELEMENTS // width)
    for lo in range(0, n, step):
        x = px[lo : lo + step, None]
        y = py[lo : lo + step, None]
        best = np.full(x.shape[0], np.inf)
        if len(segments):
            s = segments
            best = np.minimum(best, _seg_dist2_np(x, y, s[:, 0], s[:, 1], s[:, 2], s[:, 3]).min(axis=1))
        if len(points):
            d = (points[:, 0] - x) ** 2 + (points[:, 1] - y) ** 2
            best = np.minimum(best, d.min(axis=1))
        if n_rings > 0:
            x1, y1, x2, y2 = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
            d = _seg_dist2_np(x, y, x1, y1, x2, y2)
            best = np.minimum(best, d.min(axis=1))
            edge_min = np.minimum.reduceat(d, ring_first, axis=1)
            straddle = (y1 > y) != (y2 > y)
            with np.errstate(invalid="ignore", divide="ignore"):
                xcross = (x2 - x1) * (y - y1) / np.where(straddle, y2 - y1, 1.0) + x1
            crossing = straddle & (x < xcross)
            parity = np.add.reduceat(crossing.astype(np.int64), ring_first, axis=1) % 2 == 1
            inside[lo : lo + step] = np.any(parity | (edge_min <= eps * eps), axis=1)
        dist2[lo : lo + step] = best
    return np.sqrt(dist2), inside


def distance_field_numpy(px, py, geometry: Geometry, eps: float = BOUNDARY_EPS):
    return _distance_field_numpy(
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        geometry.segments, geometry.points, geometry.ring_xy, geometry.ring_offsets, eps,
    )


def distance_field_numba(px, py, geometry: Geometry, eps: float = BOUNDARY_EPS):
    return _distance_field_numba(
        np.ascontiguousarray(px, dtype=np.float64),
        np.ascontiguousarray(py, dtype=np.float64),
        geometry.segments, geometry.points, geometry.ring_xy, geometry.ring_offsets, eps,
    )


def distance_field(px, py, geometry: Geometry, eps: float = BOUNDARY_EPS):
    """Distance to the nearest primitive and polygon containment per point.

    Returns ``(dist, inside)``; ``dist`` is ``inf`` when the geometry is
    empty. Containment is boundary-inclusive within ``eps`` meters.
    """
    if USE_NUMBA:
        return distance_field_numba(px, py, geometry, eps)
    return distance_field_numpy(px, py, geometry, eps)
