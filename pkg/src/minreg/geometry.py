"""Planar polygon queries used by the region builder and the verifier.

``PolygonIndex`` answers membership and distance questions for a closed
polyline with many vertices. Winding numbers use a rightward ray whose
candidate edges come from horizontal row buckets; distances use an R-tree
over the edges. A raster of cell centres settles most bulk queries
without touching the edges at all.
"""
from __future__ import annotations

import numpy as np
import shapely

INSIDE, BOUNDARY, OUTSIDE = 1, 0, -1


def close_ring(poly) -> np.ndarray:
    """Return ``poly`` with its first vertex repeated at the end."""
    poly = np.asarray(poly, dtype=float)
    if not np.array_equal(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[:1]])
    return poly


def signed_area(poly) -> float:
    p = close_ring(poly)
    return 0.5 * float(np.sum(p[:-1, 0] * p[1:, 1] - p[1:, 0] * p[:-1, 1]))


def centroid(poly) -> np.ndarray:
    p = close_ring(poly)
    cross = p[:-1, 0] * p[1:, 1] - p[1:, 0] * p[:-1, 1]
    a = cross.sum() / 2
    cx = ((p[:-1, 0] + p[1:, 0]) * cross).sum() / (6 * a)
    cy = ((p[:-1, 1] + p[1:, 1]) * cross).sum() / (6 * a)
    return np.array([cx, cy])


def is_simple(poly) -> bool:
    return bool(shapely.LinearRing(close_ring(poly)).is_simple)


def segment_distance(pts, a, b) -> np.ndarray:
    """Distance from each point to the matching segment ``[a, b]``."""
    d = b - a
    dd = np.einsum("...i,...i->...", d, d)
    t = np.einsum("...i,...i->...", pts - a, d) / np.where(dd > 0, dd, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.linalg.norm(pts - proj, axis=-1)


def polyline_crossings(p, q) -> list[tuple[float, float, np.ndarray]]:
    """Isolated intersection points of two polylines.

    Returns ``(s_p, s_q, point)`` with the arc positions of each point along
    ``p`` and ``q``, sorted by ``s_p``. Overlapping stretches are reported
    through their endpoints.
    """
    lp, lq = shapely.LineString(p), shapely.LineString(q)
    inter = lp.intersection(lq)
    pts = []
    for g in getattr(inter, "geoms", [inter]):
        if g.is_empty:
            continue
        if g.geom_type == "Point":
            pts.append(np.array(g.coords[0]))
        elif g.geom_type == "LineString":
            pts.extend(np.array(c.coords[0]) for c in g.boundary.geoms)
    out = [(float(lp.project(shapely.Point(pt))), float(lq.project(shapely.Point(pt))), pt) for pt in pts]
    return sorted(out, key=lambda r: r[0])


def overlaps(p, q, tol: float) -> bool:
    """True when the two polylines share a stretch of positive length."""
    inter = shapely.LineString(p).intersection(shapely.LineString(q).buffer(tol))
    return inter.length > 1e3 * tol


def _grid_lines(values: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    """Cell edges at quantiles of ``values``, so crowded stretches get narrow cells."""
    q = np.quantile(values, np.linspace(0.0, 1.0, n + 1))
    q[0], q[-1] = lo, hi
    q = np.unique(q)
    if len(q) < 2:
        q = np.array([lo, lo + 1.0])
    return q


def _cell_of(lines: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cell index along one axis; -1 or ``len(lines) - 1`` when outside."""
    i = np.searchsorted(lines, v, side="right") - 1
    i[v == lines[-1]] = len(lines) - 2
    return i


class PolygonIndex:
    """Membership and distance oracle for a closed polygon.

    Grid lines sit at quantiles of the vertex coordinates, so polygons whose
    vertices cluster at very different scales still get balanced buckets.
    """

    def __init__(self, poly, n_cells: int = 512):
        ring = close_ring(poly)
        self.ring = ring
        self.a = ring[:-1]
        self.b = ring[1:]
        self.lo = ring.min(axis=0)
        self.hi = ring.max(axis=0)
        self.diameter = float(np.linalg.norm(self.hi - self.lo))
        self._tree = shapely.STRtree(shapely.linestrings(np.stack([self.a, self.b], axis=1)))
        self._xs = _grid_lines(self.a[:, 0], self.lo[0], self.hi[0], n_cells)
        self._ys = _grid_lines(self.a[:, 1], self.lo[1], self.hi[1], n_cells)
        self.n_cols, self.n_rows = len(self._xs) - 1, len(self._ys) - 1

        # row buckets for the ray test
        r0 = _cell_of(self._ys, np.minimum(self.a[:, 1], self.b[:, 1]))
        r1 = _cell_of(self._ys, np.maximum(self.a[:, 1], self.b[:, 1]))
        rows, edge_ids = _expand(r0, r1)
        order = np.argsort(rows, kind="stable")
        self._row_edges = edge_ids[order]
        self._row_start = np.searchsorted(rows[order], np.arange(self.n_rows + 1))

        # raster: cells clear of the boundary take the winding of their centre
        self._cell_wind = self._raster_winding()
        self._near, self._clearance = self._boundary_cells()

    def _raster_winding(self) -> np.ndarray:
        cx = 0.5 * (self._xs[:-1] + self._xs[1:])
        wind = np.zeros((self.n_rows, self.n_cols), dtype=int)
        for r in range(self.n_rows):
            y = 0.5 * (self._ys[r] + self._ys[r + 1])
            e = self._row_edges[self._row_start[r]:self._row_start[r + 1]]
            a, b = self.a[e], self.b[e]
            up = (a[:, 1] <= y) & (b[:, 1] > y)
            down = (b[:, 1] <= y) & (a[:, 1] > y)
            hit = up | down
            if not hit.any():
                continue
            a, b, sign = a[hit], b[hit], np.where(up[hit], 1, -1)
            xc = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
            order = np.argsort(xc)
            xc, sign = xc[order], sign[order]
            right = np.concatenate([np.cumsum(sign[::-1])[::-1], [0]])
            wind[r] = right[np.searchsorted(xc, cx, side="right")]
        return wind

    def _boundary_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Cells touched by the boundary, grown by one, and each cell's clearance.

        A segment lies inside the box of cells spanned by its endpoints, so
        marking those boxes covers every cell the boundary passes through.
        A point in an unmarked cell is at least the clearance of its cell
        away from the boundary.
        """
        ix0 = _cell_of(self._xs, np.minimum(self.a[:, 0], self.b[:, 0]))
        ix1 = _cell_of(self._xs, np.maximum(self.a[:, 0], self.b[:, 0]))
        iy0 = _cell_of(self._ys, np.minimum(self.a[:, 1], self.b[:, 1]))
        iy1 = _cell_of(self._ys, np.maximum(self.a[:, 1], self.b[:, 1]))
        cols, owner = _expand(ix0, ix1)
        rows_lo, rows_hi = iy0[owner], iy1[owner]
        rows, own2 = _expand(rows_lo, rows_hi)
        mask = np.zeros((self.n_rows, self.n_cols), dtype=bool)
        mask[rows, cols[own2]] = True
        m = mask.copy()
        m[1:] |= mask[:-1]
        m[:-1] |= mask[1:]
        m[:, 1:] |= m[:, :-1].copy()
        m[:, :-1] |= m[:, 1:].copy()
        mask = mask | m
        w, h = np.diff(self._xs), np.diff(self._ys)
        size = np.minimum(w[None, :], h[:, None])
        pad = np.pad(size, 1, constant_values=np.inf)
        clear = np.min([pad[1 + di:1 + di + self.n_rows, 1 + dj:1 + dj + self.n_cols]
                        for di in (-1, 0, 1) for dj in (-1, 0, 1)], axis=0)
        return mask, clear

    def winding(self, pts, budget: int = 1 << 22) -> np.ndarray:
        """Exact winding numbers of ``pts`` (boundary points get either side).

        Points are processed in batches holding at most ``budget`` candidate
        point-edge pairs.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts), dtype=int)
        inbox = ((pts[:, 1] >= self.lo[1]) & (pts[:, 1] <= self.hi[1])
                 & (pts[:, 0] <= self.hi[0]))
        idx = np.flatnonzero(inbox)
        if not len(idx):
            return out
        rows = np.clip(_cell_of(self._ys, pts[idx, 1]), 0, self.n_rows - 1)
        counts = self._row_start[rows + 1] - self._row_start[rows]
        cum = np.cumsum(counts)
        lo = 0
        while lo < len(idx):
            base = cum[lo - 1] if lo else 0
            hi = max(lo + 1, int(np.searchsorted(cum, base + budget, side="right")))
            out[idx[lo:hi]] = self._winding_rows(pts[idx[lo:hi]], rows[lo:hi])
            lo = hi
        return out

    def _winding_rows(self, p0: np.ndarray, rows: np.ndarray) -> np.ndarray:
        starts, stops = self._row_start[rows], self._row_start[rows + 1]
        e_pos, owner = _expand(starts, stops - 1)
        e = self._row_edges[e_pos]
        p = p0[owner]
        a, b = self.a[e], self.b[e]
        up = (a[:, 1] <= p[:, 1]) & (b[:, 1] > p[:, 1])
        down = (b[:, 1] <= p[:, 1]) & (a[:, 1] > p[:, 1])
        hit = up | down
        dy = np.where(hit, b[:, 1] - a[:, 1], 1.0)
        xc = a[:, 0] + (p[:, 1] - a[:, 1]) * (b[:, 0] - a[:, 0]) / dy
        contrib = np.where(hit & (xc > p[:, 0]), np.where(up, 1, -1), 0)
        return np.bincount(owner, weights=contrib, minlength=len(p0)).astype(int)

    def distance(self, pts) -> np.ndarray:
        """Exact distance from each point to the boundary polyline."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, d = self._tree.query_nearest(shapely.points(pts), return_distance=True, all_matches=False)
        return d

    def classify(self, pts, band: float) -> np.ndarray:
        """INSIDE / BOUNDARY / OUTSIDE with a boundary band of half-width ``band``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = self.distance(pts)
        w = self.winding(pts)
        return np.where(d <= band, BOUNDARY, np.where(w != 0, INSIDE, OUTSIDE))

    def within(self, pts, delta: float) -> np.ndarray:
        """Membership in the polygon dilated by ``delta``, using the raster when decisive."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        res = np.zeros(len(pts), dtype=bool)
        ix = _cell_of(self._xs, pts[:, 0])
        iy = _cell_of(self._ys, pts[:, 1])
        ingrid = (ix >= 0) & (ix < self.n_cols) & (iy >= 0) & (iy < self.n_rows)
        # points outside the bounding box are outside unless within delta of it
        far = ~ingrid
        if far.any():
            gap = np.maximum(np.maximum(self.lo - pts[far], pts[far] - self.hi), 0.0)
            near = np.linalg.norm(gap, axis=1) <= delta
            sub = np.flatnonzero(far)[near]
            if len(sub):
                res[sub] = self.distance(pts[sub]) <= delta
        g = np.flatnonzero(ingrid)
        gi, gj = iy[g], ix[g]
        decisive = ~self._near[gi, gj] & (delta < self._clearance[gi, gj])
        res[g[decisive]] = self._cell_wind[gi[decisive], gj[decisive]] != 0
        rest = g[~decisive]
        if len(rest):
            inside = self.winding(pts[rest]) != 0
            res[rest[inside]] = True
            out = rest[~inside]
            if len(out):
                res[out] = self.distance(pts[out]) <= delta
        return res

    def signed_distance(self, pts) -> np.ndarray:
        """Distance to the boundary, negative inside."""
        d = self.distance(pts)
        return np.where(self.winding(pts) != 0, -d, d)


def _expand(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All integers in each inclusive range ``[lo_i, hi_i]`` and the range each came from."""
    counts = np.maximum(hi - lo + 1, 0)
    owner = np.repeat(np.arange(len(lo)), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(lo, counts) + offs, owner


def first_crossing(path, index: PolygonIndex, skip: float = 0.0, chunk: int = 4096):
    """First point where ``path`` meets the polygon boundary.

    The first ``skip`` of arc length along ``path`` is ignored. Returns the
    arc position along ``path`` and the point, or ``None``.
    """
    path = np.asarray(path, dtype=float)
    seg_len = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    n_seg = len(seg_len)
    start = max(0, int(np.searchsorted(cum, skip, side="right")) - 1)
    for c0 in range(start, n_seg, chunk):
        c1 = min(c0 + chunk, n_seg)
        segs = shapely.linestrings(np.stack([path[c0:c1], path[c0 + 1:c1 + 1]], axis=1))
        pi, ej = index._tree.query(segs, predicate="intersects")
        while len(pi):
            i = int(pi.min())
            p, r = path[c0 + i], path[c0 + i + 1] - path[c0 + i]
            q, s = index.a[ej[pi == i]], index.b[ej[pi == i]] - index.a[ej[pi == i]]
            den = r[0] * s[:, 1] - r[1] * s[:, 0]
            num = (q[:, 0] - p[0]) * s[:, 1] - (q[:, 1] - p[1]) * s[:, 0]
            rr = float(r @ r) or 1.0
            # parallel overlaps: the nearer end of the edge along r
            t_par = np.minimum(((q - p) @ r) / rr, ((q + s - p) @ r) / rr)
            t = np.clip(np.where(den != 0, num / np.where(den != 0, den, 1.0), t_par), 0.0, 1.0)
            pos = cum[c0 + i] + t * seg_len[c0 + i]
            ok = pos > skip
            if ok.any():
                j = int(np.argmin(np.where(ok, pos, np.inf)))
                return float(pos[j]), p + t[j] * r
            keep = pi != i
            pi, ej = pi[keep], ej[keep]
    return None
