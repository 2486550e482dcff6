"""Simplicial meshes of parameter domains and their induced-metric quadrature."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import BandResolutionError, EmptyInteriorError, MeshError

__all__ = [
    "DomainMesh",
    "MeshGeometry",
    "interval_mesh",
    "box_mesh",
    "disk_mesh",
    "band_mesh",
    "induced_quadrature",
    "write_mesh",
    "read_mesh",
]

_TRI_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI_W = np.full(3, 1 / 3)
_SEG_BARY = np.array([[0.5 + 0.5 / math.sqrt(3), 0.5 - 0.5 / math.sqrt(3)],
                      [0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)]])
_SEG_W = np.full(2, 0.5)


@dataclass(frozen=True)
class DomainMesh:
    """Segments (``m = 1``) or triangles (``m = 2``) in parameter space.

    ``periods[a] > 0`` marks a periodic parameter axis; cells that straddle
    the seam are unwrapped by :meth:`cell_coords`.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    periods: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=np.int64))
        object.__setattr__(self, "boundary", np.asarray(self.boundary, dtype=bool))
        per = np.zeros(v.shape[1]) if self.periods is None else np.asarray(self.periods, dtype=float)
        object.__setattr__(self, "periods", per)
        if self.cells.ndim != 2 or self.cells.shape[1] != self.m + 1:
            raise MeshError(f"cells must have {self.m + 1} vertices each")
        if self.boundary.shape != (len(v),):
            raise MeshError("one boundary flag per vertex is required")

    @property
    def m(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def interior(self):
        return np.flatnonzero(~self.boundary)

    def cell_coords(self):
        coords = self.vertices[self.cells]
        if np.any(self.periods > 0):
            d = coords - coords[:, :1]
            per = np.where(self.periods > 0, self.periods, 1.0)
            d = d - np.where(self.periods > 0, per * np.round(d / per), 0.0)
            coords = coords[:, :1] + d
        return coords

    @property
    def h(self):
        c = self.cell_coords()
        edges = [np.linalg.norm(c[:, i] - c[:, j], axis=-1)
                 for i in range(self.m + 1) for j in range(i + 1, self.m + 1)]
        return float(np.max(edges))

    def centroids(self):
        return self.cell_coords().mean(axis=1)

    def oriented(self):
        """Copy with every cell positively oriented in parameters."""
        c = self.cell_coords()
        jac = np.swapaxes(c[:, 1:] - c[:, :1], -1, -2)
        det = np.linalg.det(jac) if self.m > 1 else jac[:, 0, 0]
        cells = self.cells.copy()
        flip = det < 0
        cells[flip, 0], cells[flip, 1] = self.cells[flip, 1], self.cells[flip, 0]
        return DomainMesh(self.vertices, cells, self.boundary, self.periods)


@dataclass(frozen=True)
class MeshGeometry:
    """Quadrature data of a mesh in the metric induced by an immersion."""

    points: np.ndarray  # (nc, nq, m)
    weights: np.ndarray  # (nc, nq) parameter measure
    bary: np.ndarray  # (nq, m + 1)
    grads: np.ndarray  # (nc, m + 1, m) parameter gradients of the hat functions
    g: np.ndarray  # (nc, nq, m, m)
    ginv: np.ndarray
    sqrt_det: np.ndarray  # (nc, nq)

    @property
    def measure(self):
        return self.weights * self.sqrt_det


def induced_quadrature(imm, mesh):
    """Gauss points (2 per segment, 3 per triangle) with induced metric data."""
    if mesh.m != imm.m:
        raise MeshError(f"mesh dimension {mesh.m} does not match immersion dimension {imm.m}")
    c = mesh.cell_coords()
    jac = np.swapaxes(c[:, 1:] - c[:, :1], -1, -2)  # columns X_a - X_0
    det = np.linalg.det(jac)
    bad = np.flatnonzero(~(det > 0))
    if bad.size:
        raise MeshError(f"cell {int(bad[0])} is inverted or degenerate in parameters")
    inv = np.linalg.inv(jac)  # rows are gradients of barycentrics 1..m
    grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
    if mesh.m == 1:
        bary, w = _SEG_BARY, _SEG_W * det[:, None]
    elif mesh.m == 2:
        bary, w = _TRI_BARY, _TRI_W * 0.5 * det[:, None]
    else:
        raise MeshError("only segments and triangles are supported")
    pts = np.einsum("qa,cai->cqi", bary, c)
    g = imm.induced_metric(pts)
    dg = np.linalg.det(g)
    bad = np.argwhere(~(dg > 0))
    if bad.size:
        raise MeshError(f"cell {int(bad[0][0])} has nonpositive induced volume")
    return MeshGeometry(pts, w, bary, grads, g, np.linalg.inv(g), np.sqrt(dg))


# -- generators ------------------------------------------------------------------------

def interval_mesh(a, b, n):
    x = np.linspace(a, b, n + 1)
    cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    bnd = np.zeros(n + 1, dtype=bool)
    bnd[[0, -1]] = True
    return DomainMesh(x[:, None], cells, bnd)


def box_mesh(lo, hi, n, periodic=(False, False)):
    """Structured triangulation of a parameter rectangle; periodic axes wrap."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    nx, ny = n
    px, py = periodic
    xs = np.linspace(lo[0], hi[0], nx + 1)[: nx if px else nx + 1]
    ys = np.linspace(lo[1], hi[1], ny + 1)[: ny if py else ny + 1]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    cx, cy = len(xs), len(ys)

    def idx(i, j):
        return (i % cx) * cy + (j % cy)

    cells = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            cells += [(a, b, c), (a, c, d)]
    bnd = np.zeros(len(verts), dtype=bool)
    if not px:
        bnd |= np.isclose(verts[:, 0], lo[0]) | np.isclose(verts[:, 0], hi[0])
    if not py:
        bnd |= np.isclose(verts[:, 1], lo[1]) | np.isclose(verts[:, 1], hi[1])
    periods = np.array([hi[0] - lo[0] if px else 0.0, hi[1] - lo[1] if py else 0.0])
    return DomainMesh(verts, np.array(cells), bnd, periods).oriented()


def disk_mesh(radius, n_rings, center=(0.0, 0.0)):
    """Quasi-uniform disk mesh: ring ``k`` carries ``6k`` vertices, Delaunay triangulated."""
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        ang = 2 * math.pi * (np.arange(6 * k) + 0.5 * (k % 2)) / (6 * k)
        pts.append((radius * k / n_rings) * np.stack([np.cos(ang), np.sin(ang)], axis=1))
    verts = np.concatenate(pts)
    tri = Delaunay(verts)
    bnd = np.zeros(len(verts), dtype=bool)
    bnd[-6 * n_rings:] = True
    return DomainMesh(verts + np.asarray(center, float), tri.simplices, bnd).oriented()


def _runs(inside):
    """Start/stop index pairs of True runs along the last axis of a 1-d mask."""
    d = np.diff(np.concatenate([[False], inside, [False]]).astype(int))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1))


def _line_intervals(origins, dirs, s_min, s_max, level_lo, level_hi, values, n_scan, iters=60):
    """Intervals of ``s`` where ``level_lo < values(o + s d) < level_hi``, for a batch of lines.

    Every line is scanned on ``n_scan`` points in one call to ``values``; the
    crossings are then refined by simultaneous bisection.
    """
    origins, dirs = np.atleast_2d(origins), np.atleast_2d(dirs)
    s_min, s_max = np.broadcast_to(s_min, len(origins)), np.broadcast_to(s_max, len(origins))
    frac = np.linspace(0.0, 1.0, n_scan)
    grid = s_min[:, None] + frac[None, :] * (s_max - s_min)[:, None]  # (lines, n_scan)
    pts = origins[:, None, :] + grid[..., None] * dirs[:, None, :]
    vals = np.asarray(values(pts.reshape(-1, origins.shape[1])), dtype=float).reshape(grid.shape)
    inside = (vals > level_lo) & (vals < level_hi)
    runs = [_runs(row) for row in inside]
    # brackets (line, inside end, outside end) for every interior crossing
    lines, a, b = [], [], []
    for li, rr in enumerate(runs):
        for i0, i1 in rr:
            if i0 > 0:
                lines.append(li), a.append(grid[li, i0]), b.append(grid[li, i0 - 1])
            if i1 < n_scan - 1:
                lines.append(li), a.append(grid[li, i1]), b.append(grid[li, i1 + 1])
    cross = np.zeros(0)
    if lines:
        li_arr, a, b = np.array(lines), np.array(a), np.array(b)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            v = np.asarray(values(origins[li_arr] + mid[:, None] * dirs[li_arr]), dtype=float)
            ok = (v > level_lo) & (v < level_hi)
            a, b = np.where(ok, mid, a), np.where(ok, b, mid)
        cross = 0.5 * (a + b)
    out, k = [], 0
    for li, rr in enumerate(runs):
        ivals = []
        for i0, i1 in rr:
            if i0 > 0:
                lo_end, k = cross[k], k + 1
            else:
                lo_end = float(s_min[li])
            if i1 < n_scan - 1:
                hi_end, k = cross[k], k + 1
            else:
                hi_end = float(s_max[li])
            ivals.append((float(lo_end), float(hi_end)))
        out.append(ivals)
    return out


def band_mesh(imm, values, level_lo, level_hi, n_along, n_across, axis=1, center=None, n_scan=2048):
    """Structured mesh of ``{level_lo < values(q) < level_hi}`` inside the patch.

    Along each parameter line (the ``axis`` direction, or rays from
    ``center`` in polar mode) the band is located by scanning and its ends
    are placed on the level sets by bisection; consecutive lines are stitched
    together.  Every interval end is a boundary vertex.
    """
    lo, hi = imm.lo, imm.hi
    if imm.m == 1:
        ivals = _line_intervals(np.zeros(1), np.ones(1), lo[0], hi[0], level_lo, level_hi, values, n_scan)[0]
        if not ivals:
            raise EmptyInteriorError("the band is empty")
        verts, cells, bnd = [], [], []
        for a, b in ivals:
            base = len(verts)
            verts += list(np.linspace(a, b, n_across + 1))
            bnd += [True] + [False] * (n_across - 1) + [True]
            cells += [(base + i, base + i + 1) for i in range(n_across)]
        return DomainMesh(np.array(verts)[:, None], np.array(cells), np.array(bnd))

    if center is not None:
        center = np.asarray(center, dtype=float)
        angles = 2 * math.pi * np.arange(n_along) / n_along
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        origins = np.broadcast_to(center, dirs.shape).copy()
        with np.errstate(divide="ignore"):
            exits = np.where(dirs > 0, (hi - center) / dirs, np.where(dirs < 0, (lo - center) / dirs, np.inf))
        s_lo, s_hi = np.zeros(n_along), exits.min(axis=1)
        wrap = True
    else:
        along = 1 - axis
        periodic = imm.periodic[along]
        count = n_along if periodic else n_along + 1
        origins = np.zeros((count, 2))
        origins[:, along] = lo[along] + (hi[along] - lo[along]) * np.arange(count) / n_along
        dirs = np.zeros((count, 2))
        dirs[:, axis] = 1.0
        s_lo, s_hi = np.full(count, lo[axis]), np.full(count, hi[axis])
        wrap = periodic

    all_ivals = _line_intervals(origins, dirs, s_lo, s_hi, level_lo, level_hi, values, n_scan)
    counts = {len(iv) for iv in all_ivals}
    if counts == {0}:
        raise EmptyInteriorError("the band is empty")
    if len(counts) != 1:
        raise BandResolutionError(
            "the band changes topology between parameter lines; increase n_along or n_scan"
        )
    if center is not None and any(a == 0.0 for iv in all_ivals for a, _ in iv):
        raise BandResolutionError("the band contains the polar center")
    widths = [b - a for iv in all_ivals for a, b in iv]
    if min(widths) <= 0:
        raise BandResolutionError("degenerate band interval; refine the mesh")

    verts, bnd = [], []
    index = []
    for li, iv in enumerate(all_ivals):
        line_idx = []
        for a, b in iv:
            s = np.linspace(a, b, n_across + 1)
            start = len(verts)
            verts.extend(origins[li] + s[:, None] * dirs[li])
            flags = np.zeros(n_across + 1, dtype=bool)
            flags[[0, -1]] = True
            if not wrap and li in (0, len(origins) - 1):
                flags[:] = True
            bnd.extend(flags)
            line_idx.append(np.arange(start, start + n_across + 1))
        index.append(line_idx)
    cells = []
    n_lines = len(origins)
    for li in range(n_lines if wrap else n_lines - 1):
        lj = (li + 1) % n_lines
        for k in range(len(index[li])):
            a_idx, b_idx = index[li][k], index[lj][k]
            for i in range(n_across):
                cells.append((a_idx[i], b_idx[i], b_idx[i + 1]))
                cells.append((a_idx[i], b_idx[i + 1], a_idx[i + 1]))
    periods = imm.periods if center is None else np.zeros(2)
    return DomainMesh(np.array(verts), np.array(cells), np.array(bnd), periods).oriented()


# -- text format -----------------------------------------------------------------------

_MAGIC = "spectone-mesh 1"


def write_mesh(mesh, path):
    """Write the plain vertex/cell text format.

    Header: magic line, ``m nv nc``, periods.  Body: ``nv`` coordinate
    lines, ``nc`` cell lines, ``nv`` boundary flags.
    """
    with open(path, "w") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"{mesh.m} {mesh.n_vertices} {len(mesh.cells)}\n")
        fh.write(" ".join(repr(float(p)) for p in mesh.periods) + "\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in v) + "\n")
        for c in mesh.cells:
            fh.write(" ".join(str(int(i)) for i in c) + "\n")
        for b in mesh.boundary:
            fh.write("1\n" if b else "0\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _MAGIC:
        raise MeshError(f"{path}: missing header {_MAGIC!r}")
    try:
        m, nv, nc = (int(x) for x in lines[1].split())
        periods = [float(x) for x in lines[2].split()]
        body = lines[3:]
        verts = np.array([[float(x) for x in ln.split()] for ln in body[:nv]])
        cells = np.array([[int(x) for x in ln.split()] for ln in body[nv: nv + nc]])
        bnd = np.array([ln == "1" for ln in body[nv + nc: nv + nc + nv]])
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed mesh body ({exc})") from exc
    if verts.shape != (nv, m) or cells.shape != (nc, m + 1) or bnd.shape != (nv,):
        raise MeshError(f"{path}: counts in header do not match the body")
    if cells.size and (cells.min() < 0 or cells.max() >= nv):
        raise MeshError(f"{path}: cell references a missing vertex")
    return DomainMesh(verts, cells, bnd, periods)
