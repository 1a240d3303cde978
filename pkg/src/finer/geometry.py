"""Scalar lattices, marching cubes, IoU, Chamfer distance and ray compositing."""
import json
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._mc_tables import CORNERS, EDGES, TRI_TABLE
from .errors import ContractError

BRUTE_FORCE_LIMIT = 10_000


@dataclass
class ScalarGrid:
    """Samples on a regular lattice including both bbox corners.

    ``values`` has shape ``(nz, ny, nx)``, so its flat order is x-fastest.
    """

    values: np.ndarray
    bbox_min: tuple = (-1.0, -1.0, -1.0)
    bbox_max: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < 2:
            raise ContractError(f"grid needs >= 2 samples per axis, got {self.values.shape}")
        self.bbox_min = tuple(float(v) for v in self.bbox_min)
        self.bbox_max = tuple(float(v) for v in self.bbox_max)

    @property
    def dims(self):
        nz, ny, nx = self.values.shape
        return nx, ny, nz

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.bbox_min, self.bbox_max, self.dims))

    def axes(self):
        return [lo + np.arange(n) * h for lo, n, h in zip(self.bbox_min, self.dims, self.spacing)]

    def points(self):
        """``(nx*ny*nz, 3)`` lattice positions in flat (x-fastest) order."""
        xs, ys, zs = self.axes()
        z, y, x = np.meshgrid(zs, ys, xs, indexing="ij")
        return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    @classmethod
    def from_function(cls, fn, res, bbox_min=(-1.0, -1.0, -1.0), bbox_max=(1.0, 1.0, 1.0)):
        """Sample ``fn(points) -> values`` on a ``res``-per-axis lattice."""
        res = (res,) * 3 if np.isscalar(res) else tuple(res)
        shell = cls(np.zeros(res[::-1]), bbox_min, bbox_max)
        shell.values = np.asarray(fn(shell.points()), dtype=np.float64).reshape(res[::-1])
        return shell

    def write_raw(self, path):
        """Little-endian float32 values plus a ``<path>.json`` sidecar."""
        self.values.astype("<f4").tofile(path)
        with open(str(path) + ".json", "w") as f:
            json.dump({"dims": list(self.dims), "bbox_min": list(self.bbox_min),
                       "bbox_max": list(self.bbox_max), "dtype": "float32-le",
                       "order": "x-fastest"}, f, indent=1, sort_keys=True)

    @classmethod
    def read_raw(cls, path):
        with open(str(path) + ".json") as f:
            meta = json.load(f)
        nx, ny, nz = meta["dims"]
        vals = np.fromfile(path, dtype="<f4").astype(np.float64).reshape(nz, ny, nx)
        return cls(vals, tuple(meta["bbox_min"]), tuple(meta["bbox_max"]))


@dataclass
class TriMesh:
    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def areas(self):
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


def _edge_geometry():
    """Per local edge: lower-corner offset and axis of the lattice edge."""
    lo = np.empty((12, 3), dtype=np.int64)
    axis = np.empty(12, dtype=np.int64)
    for e, (a, b) in enumerate(EDGES):
        ca, cb = CORNERS[a], CORNERS[b]
        lo[e] = np.minimum(ca, cb)
        axis[e] = int(np.argmax(np.abs(ca - cb)))
    return lo, axis


_EDGE_LO, _EDGE_AXIS = _edge_geometry()
_TRI_COUNT = np.array([int(np.sum(row >= 0)) // 3 for row in TRI_TABLE], dtype=np.int64)


@_accel.njit
def _mc_numba(vals, iso, lo, step, tri_table, tri_count, edge_lo, edge_axis, corners):
    nz, ny, nx = vals.shape
    n_cells = (nz - 1) * (ny - 1) * (nx - 1)
    cases = np.empty(n_cells, dtype=np.int64)
    n_tris = 0
    c = 0
    for k in range(nz - 1):
        for j in range(ny - 1):
            for i in range(nx - 1):
                case = 0
                for q in range(8):
                    if vals[k + corners[q, 2], j + corners[q, 1], i + corners[q, 0]] < iso:
                        case |= 1 << q
                cases[c] = case
                n_tris += tri_count[case]
                c += 1
    tris = np.empty((n_tris, 3), dtype=np.int64)
    vmap = np.full(3 * nz * ny * nx, -1, dtype=np.int64)
    verts = np.empty((3 * n_tris, 3))
    n_verts = 0
    t = 0
    c = 0
    for k in range(nz - 1):
        for j in range(ny - 1):
            for i in range(nx - 1):
                case = cases[c]
                c += 1
                for s in range(tri_count[case]):
                    for r in range(3):
                        e = tri_table[case, 3 * s + r]
                        x0 = i + edge_lo[e, 0]
                        y0 = j + edge_lo[e, 1]
                        z0 = k + edge_lo[e, 2]
                        ax = edge_axis[e]
                        gid = ax * (nz * ny * nx) + (z0 * ny + y0) * nx + x0
                        vid = vmap[gid]
                        if vid < 0:
                            x1 = x0 + (1 if ax == 0 else 0)
                            y1 = y0 + (1 if ax == 1 else 0)
                            z1 = z0 + (1 if ax == 2 else 0)
                            v0 = vals[z0, y0, x0]
                            v1 = vals[z1, y1, x1]
                            den = v1 - v0
                            tt = (iso - v0) / den if den != 0.0 else 0.5
                            tt = min(max(tt, 0.0), 1.0)
                            p0x = lo[0] + x0 * step[0]
                            p0y = lo[1] + y0 * step[1]
                            p0z = lo[2] + z0 * step[2]
                            p1x = lo[0] + x1 * step[0]
                            p1y = lo[1] + y1 * step[1]
                            p1z = lo[2] + z1 * step[2]
                            verts[n_verts, 0] = p0x + tt * (p1x - p0x)
                            verts[n_verts, 1] = p0y + tt * (p1y - p0y)
                            verts[n_verts, 2] = p0z + tt * (p1z - p0z)
                            vid = n_verts
                            vmap[gid] = vid
                            n_verts += 1
                        tris[t, r] = vid
                    t += 1
    return verts[:n_verts].copy(), tris


def _mc_numpy(vals, iso, lo, step):
    nz, ny, nx = vals.shape
    inside = vals < iso
    case = np.zeros((nz - 1, ny - 1, nx - 1), dtype=np.int64)
    for q, (dx, dy, dz) in enumerate(CORNERS):
        case |= inside[dz:nz - 1 + dz, dy:ny - 1 + dy, dx:nx - 1 + dx].astype(np.int64) << q
    case = case.ravel()
    cells = np.nonzero(_TRI_COUNT[case])[0]
    if cells.size == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    ci = cells % (nx - 1)
    cj = (cells // (nx - 1)) % (ny - 1)
    ck = cells // ((nx - 1) * (ny - 1))
    local = TRI_TABLE[case[cells]][:, :15]           # (M, 15), cell order
    valid = local >= 0
    cell_of = np.repeat(np.arange(cells.size), 15).reshape(-1, 15)[valid]
    e = local[valid]                                 # flattened in emission order
    x0 = ci[cell_of] + _EDGE_LO[e, 0]
    y0 = cj[cell_of] + _EDGE_LO[e, 1]
    z0 = ck[cell_of] + _EDGE_LO[e, 2]
    ax = _EDGE_AXIS[e]
    gid = ax * (nz * ny * nx) + (z0 * ny + y0) * nx + x0
    uniq, first, inverse = np.unique(gid, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")         # vertex ids by first use
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    vid = rank[inverse.ravel()]
    f = first[order]
    fx0, fy0, fz0, fax = x0[f], y0[f], z0[f], ax[f]
    fx1 = fx0 + (fax == 0)
    fy1 = fy0 + (fax == 1)
    fz1 = fz0 + (fax == 2)
    v0 = vals[fz0, fy0, fx0]
    v1 = vals[fz1, fy1, fx1]
    den = v1 - v0
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = np.where(den != 0.0, (iso - v0) / np.where(den != 0.0, den, 1.0), 0.5)
    tt = np.minimum(np.maximum(tt, 0.0), 1.0)
    verts = np.empty((f.size, 3))
    for a, (c0, c1) in enumerate(((fx0, fx1), (fy0, fy1), (fz0, fz1))):
        p0 = lo[a] + c0 * step[a]
        p1 = lo[a] + c1 * step[a]
        verts[:, a] = p0 + tt * (p1 - p0)
    return verts, vid.reshape(-1, 3)


def _drop_degenerate(verts, tris):
    if len(tris) == 0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    v = verts[tris]
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    keep = np.einsum("ij,ij->i", cross, cross) > 0.0
    tris = tris[keep]
    used = np.zeros(len(verts), dtype=bool)
    used[tris.ravel()] = True
    remap = np.cumsum(used) - 1
    return TriMesh(np.ascontiguousarray(verts[used]), remap[tris].astype(np.int64))


def marching_cubes(grid, iso=0.0):
    """Extract the ``iso`` level set of a :class:`ScalarGrid` as a triangle mesh.

    Corners with ``value < iso`` are inside.  Vertices are shared between
    neighbouring cells (one per crossed lattice edge, linearly interpolated
    with the parameter clamped to [0, 1]); zero-area triangles are dropped.
    Triangles come out in cell-index order.
    """
    vals = grid.values
    if not np.isfinite(vals).all():
        raise ContractError("grid has non-finite values")
    lo = np.array(grid.bbox_min, dtype=np.float64)
    step = np.array(grid.spacing, dtype=np.float64)
    iso = float(iso)
    if _accel.use_numba():
        verts, tris = _mc_numba(vals, iso, lo, step, TRI_TABLE, _TRI_COUNT, _EDGE_LO, _EDGE_AXIS, CORNERS)
    else:
        verts, tris = _mc_numpy(vals, iso, lo, step)
    return _drop_degenerate(verts, tris)


def iou(grid_a, grid_b, iso=0.0):
    """Volume IoU of the ``value < iso`` regions; 1.0 when both are empty."""
    a = grid_a.values if isinstance(grid_a, ScalarGrid) else np.asarray(grid_a)
    b = grid_b.values if isinstance(grid_b, ScalarGrid) else np.asarray(grid_b)
    if a.shape != b.shape:
        raise ContractError(f"grid dims differ: {a.shape} vs {b.shape}")
    if isinstance(grid_a, ScalarGrid) and isinstance(grid_b, ScalarGrid):
        if grid_a.bbox_min != grid_b.bbox_min or grid_a.bbox_max != grid_b.bbox_max:
            raise ContractError("grid bounding boxes differ")
    ia, ib = a < iso, b < iso
    union = np.count_nonzero(ia | ib)
    if union == 0:
        return 1.0
    return np.count_nonzero(ia & ib) / union


def _points(p, name):
    p = np.ascontiguousarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ContractError(f"{name} must be (N, 3), got {p.shape}")
    if len(p) == 0:
        raise ContractError(f"{name} is empty")
    return p


@_accel.njit
def _nn_brute_numba(a, b):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        best = np.inf
        for j in range(b.shape[0]):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            dz = a[i, 2] - b[j, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
        out[i] = best
    return out


def _nn_brute_numpy(a, b, chunk=512):
    out = np.empty(len(a))
    for s in range(0, len(a), chunk):
        q = a[s:s + chunk]
        dx = q[:, None, 0] - b[None, :, 0]
        dy = q[:, None, 1] - b[None, :, 1]
        dz = q[:, None, 2] - b[None, :, 2]
        out[s:s + chunk] = (dx * dx + dy * dy + dz * dz).min(axis=1)
    return out


@_accel.njit
def _nn_bucket_numba(a, b, lo, h, dims, start, order):
    nx, ny, nz = dims[0], dims[1], dims[2]
    out = np.empty(a.shape[0])
    max_r = max(nx, max(ny, nz))
    for i in range(a.shape[0]):
        qx, qy, qz = a[i, 0], a[i, 1], a[i, 2]
        cx = min(max(int(np.floor((qx - lo[0]) / h)), 0), nx - 1)
        cy = min(max(int(np.floor((qy - lo[1]) / h)), 0), ny - 1)
        cz = min(max(int(np.floor((qz - lo[2]) / h)), 0), nz - 1)
        best = np.inf
        for r in range(max_r + 1):
            for kz in range(max(cz - r, 0), min(cz + r, nz - 1) + 1):
                for ky in range(max(cy - r, 0), min(cy + r, ny - 1) + 1):
                    for kx in range(max(cx - r, 0), min(cx + r, nx - 1) + 1):
                        if max(abs(kx - cx), max(abs(ky - cy), abs(kz - cz))) != r:
                            continue
                        cell = (kz * ny + ky) * nx + kx
                        for t in range(start[cell], start[cell + 1]):
                            j = order[t]
                            dx = qx - b[j, 0]
                            dy = qy - b[j, 1]
                            dz = qz - b[j, 2]
                            d = dx * dx + dy * dy + dz * dz
                            if d < best:
                                best = d
            # every point outside the (2r+1)^3 block is farther than `gap`
            gap = min(qx - (lo[0] + (cx - r) * h), (lo[0] + (cx + r + 1) * h) - qx)
            gap = min(gap, min(qy - (lo[1] + (cy - r) * h), (lo[1] + (cy + r + 1) * h) - qy))
            gap = min(gap, min(qz - (lo[2] + (cz - r) * h), (lo[2] + (cz + r + 1) * h) - qz))
            if gap > 0.0 and best <= gap * gap:
                break
        out[i] = best
    return out


def _bucket_grid(b):
    lo = b.min(axis=0)
    ext = np.maximum(b.max(axis=0) - lo, 1e-12)
    # about two points per occupied cell for surface-like sets
    h = float(max(np.sqrt(ext[0] * ext[1] + ext[1] * ext[2] + ext[0] * ext[2]) / np.sqrt(len(b) / 2.0),
                  ext.max() / 512.0))
    dims = np.minimum(np.floor(ext / h).astype(np.int64) + 1, 512)
    idx = np.minimum(np.floor((b - lo) / h).astype(np.int64), dims - 1)
    cell = (idx[:, 2] * dims[1] + idx[:, 1]) * dims[0] + idx[:, 0]
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=int(np.prod(dims)))
    start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return lo, h, dims, start, order.astype(np.int64)


def _nn_bucket_numpy(a, b):
    from scipy.spatial import cKDTree

    _, j = cKDTree(b).query(a, k=1)
    d = a - b[j]
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    return dx * dx + dy * dy + dz * dz


def nearest_sq_dist(a, b, method="auto"):
    """Squared distance from every point of ``a`` to its nearest point in ``b``.

    ``method`` is ``"brute"``, ``"bucket"`` or ``"auto"`` (brute force up to
    ``BRUTE_FORCE_LIMIT`` points).  Both methods evaluate the same
    ``dx*dx + dy*dy + dz*dz`` expression, so they agree exactly.
    """
    a = _points(a, "a")
    b = _points(b, "b")
    if method == "auto":
        method = "brute" if max(len(a), len(b)) <= BRUTE_FORCE_LIMIT else "bucket"
    if method == "brute":
        return _nn_brute_numba(a, b) if _accel.use_numba() else _nn_brute_numpy(a, b)
    if method == "bucket":
        if _accel.use_numba():
            return _nn_bucket_numba(a, b, *_bucket_grid(b))
        return _nn_bucket_numpy(a, b)
    raise ContractError(f"unknown method {method!r}")


def chamfer(points_a, points_b, method="auto"):
    """Symmetric mean squared nearest-neighbour distance.

    ``0.5 * mean_a min_b |a-b|^2 + 0.5 * mean_b min_a |a-b|^2``.
    """
    da = nearest_sq_dist(points_a, points_b, method)
    db = nearest_sq_dist(points_b, points_a, method)
    return float(0.5 * np.mean(da) + 0.5 * np.mean(db))


def sample_surface(mesh, n, rng):
    """``n`` points uniformly distributed over the mesh area."""
    if mesh.num_triangles == 0:
        raise ContractError("cannot sample an empty mesh")
    areas = mesh.areas()
    tri = rng.choice(mesh.num_triangles, size=n, p=areas / areas.sum())
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1.0
    u[flip] = 1.0 - u[flip]
    v = mesh.vertices[mesh.triangles[tri]]
    return v[:, 0] + u[:, :1] * (v[:, 1] - v[:, 0]) + u[:, 1:] * (v[:, 2] - v[:, 0])


def write_obj(mesh, path):
    """ASCII OBJ with ``v`` and 1-based ``f`` records."""
    with open(path, "w", newline="\n") as f:
        for x, y, z in mesh.vertices:
            f.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles + 1:
            f.write(f"f {a} {b} {c}\n")


def read_obj(path):
    verts, tris = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                tris.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return TriMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                   np.array(tris, dtype=np.int64).reshape(-1, 3))


@dataclass
class RaySamples:
    """Front-to-back samples along one ray."""

    colors: np.ndarray   # (N, 3) in [0, 1]
    sigmas: np.ndarray   # (N,) densities >= 0
    deltas: np.ndarray   # (N,) spacings > 0

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64).reshape(-1)
        self.deltas = np.asarray(self.deltas, dtype=np.float64).reshape(-1)
        n = len(self.sigmas)
        if len(self.colors) != n or len(self.deltas) != n:
            raise ContractError("colors, sigmas and deltas must have equal length")
        if (self.sigmas < 0).any():
            raise ContractError("densities must be non-negative")
        if (self.deltas <= 0).any():
            raise ContractError("sample spacings must be positive")
        if (self.colors < 0).any() or (self.colors > 1).any():
            raise ContractError("colors must lie in [0, 1]")


def composite_weights(samples):
    """``T_i (1 - exp(-sigma_i delta_i))`` with ``T_i = exp(-sum_{j<i} sigma_j delta_j)``."""
    tau = samples.sigmas * samples.deltas
    optical = np.concatenate([[0.0], np.cumsum(tau)[:-1]])
    return np.exp(-optical) * -np.expm1(-tau)


def composite_ray(samples):
    """Emission-absorption compositing of one ray into an RGB colour."""
    if not isinstance(samples, RaySamples):
        samples = RaySamples(*samples)
    return composite_weights(samples) @ samples.colors
