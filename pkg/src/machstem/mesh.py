"""Structured curvilinear quad blocks with bilinear element mappings.

A block is an (ni x nj) array of straight-sided quadrilateral elements
defined by an (ni+1 x nj+1) vertex lattice. Element (i, j) spans vertices
(i, j), (i+1, j), (i+1, j+1), (i, j+1) and maps the reference square
through the standard bilinear shape functions, so edges stay straight,
edge normals are constant per face, and the metric identities hold to
quadrature exactness (uniform flow produces a zero residual to round-off).

Boundary conditions are carried as one integer tag per boundary face on
each of the four sides, which lets a single side mix tags (the channel
top wall ahead of a shoulder, outflow behind it).

Grid file format (plain text): first line ``nvi nvj`` (vertex counts),
then ``nvi*nvj`` lines of ``x y`` in row-major order (i outer, j inner).
"""

from __future__ import annotations

import numpy as np

from .basis import FACE_W, FACE_E, FACE_S, FACE_N

# boundary face tags
TAG_INFLOW = 1
TAG_OUTFLOW = 2
TAG_WALL = 3
TAG_INTERFACE = 4   # overset outer boundary: data arrives by transfer
TAG_PERIODIC = 5

TAG_NAMES = {TAG_INFLOW: "inflow", TAG_OUTFLOW: "outflow", TAG_WALL: "wall",
             TAG_INTERFACE: "interface", TAG_PERIODIC: "periodic"}


class GridBlock:
    """Structured block of bilinear quad elements plus boundary tags."""

    def __init__(self, vertices, name="block", tags=None):
        vertices = np.asarray(vertices, float)
        if vertices.ndim != 3 or vertices.shape[2] != 2:
            raise ValueError("vertices must have shape (nvi, nvj, 2)")
        if vertices.shape[0] < 2 or vertices.shape[1] < 2:
            raise ValueError("a block needs at least one element")
        self.vertices = vertices
        self.name = name
        self.ni = vertices.shape[0] - 1
        self.nj = vertices.shape[1] - 1
        self.n_elements = self.ni * self.nj
        if tags is None:
            tags = {}
        self.tags = {
            FACE_W: np.full(self.nj, tags.get(FACE_W, TAG_OUTFLOW), int)
            if np.isscalar(tags.get(FACE_W, TAG_OUTFLOW))
            else np.asarray(tags[FACE_W], int).copy(),
            FACE_E: np.full(self.nj, tags.get(FACE_E, TAG_OUTFLOW), int)
            if np.isscalar(tags.get(FACE_E, TAG_OUTFLOW))
            else np.asarray(tags[FACE_E], int).copy(),
            FACE_S: np.full(self.ni, tags.get(FACE_S, TAG_OUTFLOW), int)
            if np.isscalar(tags.get(FACE_S, TAG_OUTFLOW))
            else np.asarray(tags[FACE_S], int).copy(),
            FACE_N: np.full(self.ni, tags.get(FACE_N, TAG_OUTFLOW), int)
            if np.isscalar(tags.get(FACE_N, TAG_OUTFLOW))
            else np.asarray(tags[FACE_N], int).copy(),
        }
        for f, n in ((FACE_W, self.nj), (FACE_E, self.nj),
                     (FACE_S, self.ni), (FACE_N, self.ni)):
            if self.tags[f].shape != (n,):
                raise ValueError("tag array length mismatch on a side")
        self._geometry_cache = {}

    # corner fields as (ni, nj) arrays
    @property
    def corners(self):
        V = self.vertices
        return (V[:-1, :-1], V[1:, :-1], V[1:, 1:], V[:-1, 1:])

    def element_centroids(self):
        c00, c10, c11, c01 = self.corners
        return 0.25 * (c00 + c10 + c11 + c01)

    def map_points(self, r, s):
        """Map reference points (r, s), one pair per element-broadcastable
        array, through the bilinear element mappings.

        r, s have shape (..., npts) broadcast against element grids; the
        usual call passes (npts,) and receives (ni, nj, npts, 2).
        """
        c00, c10, c11, c01 = self.corners
        r = np.asarray(r, float)
        s = np.asarray(s, float)
        n00 = (1 - r) * (1 - s) / 4.0
        n10 = (1 + r) * (1 - s) / 4.0
        n11 = (1 + r) * (1 + s) / 4.0
        n01 = (1 - r) * (1 + s) / 4.0
        out = (c00[:, :, None, :] * n00[..., None] +
               c10[:, :, None, :] * n10[..., None] +
               c11[:, :, None, :] * n11[..., None] +
               c01[:, :, None, :] * n01[..., None])
        return out

    def geometry(self, basis):
        """Metric data for a basis, cached per polynomial order."""
        key = basis.order
        cached = self._geometry_cache.get(key)
        if cached is None:
            cached = _BlockGeometry(self, basis)
            self._geometry_cache[key] = cached
        return cached

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(f"{self.ni + 1} {self.nj + 1}\n")
            for i in range(self.ni + 1):
                for j in range(self.nj + 1):
                    x, y = self.vertices[i, j]
                    fh.write(f"{float(x)!r} {float(y)!r}\n")

    @classmethod
    def read(cls, path, name=None, tags=None):
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"bad grid header in {path}")
            nvi, nvj = int(header[0]), int(header[1])
            data = np.loadtxt(fh)
        if data.shape != (nvi * nvj, 2):
            raise ValueError(
                f"grid {path}: expected {nvi * nvj} vertex rows, got {data.shape}")
        verts = data.reshape(nvi, nvj, 2)
        return cls(verts, name=name or "imported", tags=tags)

    def __repr__(self):
        return f"GridBlock({self.name!r}, {self.ni}x{self.nj})"


class _BlockGeometry:
    """Quadrature-point metrics of one block under one basis."""

    def __init__(self, block, basis):
        self.block = block
        self.basis = basis
        c00, c10, c11, c01 = block.corners
        r = basis.vol_nodes[:, 0]
        s = basis.vol_nodes[:, 1]

        # bilinear derivatives; shapes (ni, nj, nq)
        def dx_dr(c00c, c10c, c11c, c01c):
            return ((c10c - c00c)[:, :, None] * (1 - s) +
                    (c11c - c01c)[:, :, None] * (1 + s)) / 4.0

        def dx_ds(c00c, c10c, c11c, c01c):
            return ((c01c - c00c)[:, :, None] * (1 - r) +
                    (c11c - c10c)[:, :, None] * (1 + r)) / 4.0

        x_r = dx_dr(c00[..., 0], c10[..., 0], c11[..., 0], c01[..., 0])
        y_r = dx_dr(c00[..., 1], c10[..., 1], c11[..., 1], c01[..., 1])
        x_s = dx_ds(c00[..., 0], c10[..., 0], c11[..., 0], c01[..., 0])
        y_s = dx_ds(c00[..., 1], c10[..., 1], c11[..., 1], c01[..., 1])
        detJ = x_r * y_s - x_s * y_r
        if np.any(detJ <= 0.0):
            bad = np.argwhere(detJ <= 0.0)[0]
            raise ValueError(
                f"block {block.name!r}: degenerate or inverted element "
                f"(i={bad[0]}, j={bad[1]})")
        self.x_r, self.y_r, self.x_s, self.y_s, self.detJ = x_r, y_r, x_s, y_s, detJ
        self.vol_points = block.map_points(r, s)

        # mass matrices and inverses (ni, nj, Np, Np)
        V = basis.vol_V
        wV = V * basis.vol_weights[:, None]
        M = np.einsum("qp,qr,ijq->ijpr", wV, V, detJ, optimize=True)
        self.mass = M
        self.mass_inv = np.linalg.inv(M)
        self.element_area = np.einsum("q,ijq->ij", basis.vol_weights, detJ)

        # straight edges: constant tangent, normal, half-length per face
        V00, V10, V11, V01 = c00, c10, c11, c01
        self.face_normal = {}
        self.face_sj = {}
        # rotating the edge tangent t by -90 deg gives (t_y, -t_x); the
        # outward sense per face is fixed by the reference orientation
        for face, (a, b, sign_out) in {
            FACE_W: (V00, V01, -1.0),   # tangent is d/ds along the edge
            FACE_E: (V10, V11, +1.0),
            FACE_S: (V00, V10, +1.0),   # tangent is d/dr along the edge
            FACE_N: (V01, V11, -1.0),
        }.items():
            t = (b - a) / 2.0  # derivative of position along the face param
            sj = np.sqrt(t[..., 0] ** 2 + t[..., 1] ** 2)
            if np.any(sj <= 0.0):
                bad = np.argwhere(sj <= 0.0)[0]
                raise ValueError(
                    f"block {block.name!r}: zero-length edge at element "
                    f"(i={bad[0]}, j={bad[1]}) face {face}")
            n = np.stack([t[..., 1], -t[..., 0]], axis=-1) * sign_out
            self.face_normal[face] = n / sj[..., None]
            self.face_sj[face] = sj

        # characteristic sizes
        edge_len = {f: 2.0 * self.face_sj[f] for f in self.face_sj}
        self.h_max_edge = np.maximum.reduce(list(edge_len.values()))
        g_r = np.sqrt(x_r ** 2 + y_r ** 2)
        g_s = np.sqrt(x_s ** 2 + y_s ** 2)
        self.h_dt = 2.0 * np.min(detJ / np.maximum(g_r, g_s), axis=2)

        # physical face quadrature points, needed for boundary data
        self.face_points = {}
        x1 = basis.q1d_nodes
        ones = np.ones_like(x1)
        for face, (fr, fs) in {FACE_W: (-ones, x1), FACE_E: (ones, x1),
                               FACE_S: (x1, -ones), FACE_N: (x1, ones)}.items():
            self.face_points[face] = block.map_points(fr, fs)
