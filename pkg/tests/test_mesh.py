import numpy as np
import pytest

from machstem.basis import Basis, FACE_W, FACE_E, FACE_S, FACE_N
from machstem.mesh import GridBlock, TAG_WALL, TAG_INFLOW, TAG_OUTFLOW


def cartesian_block(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0, **kw):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    verts = np.zeros((nx + 1, ny + 1, 2))
    verts[..., 0] = xs[:, None]
    verts[..., 1] = ys[None, :]
    return GridBlock(verts, **kw)


def wavy_block(nx, ny, amp=0.08):
    """Smoothly distorted block; elements stay straight-sided quads."""
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.zeros((nx + 1, ny + 1, 2))
    verts[..., 0] = X + amp * np.sin(np.pi * X) * np.sin(2 * np.pi * Y)
    verts[..., 1] = Y + amp * np.sin(2 * np.pi * X) * np.sin(np.pi * Y)
    return GridBlock(verts, name="wavy")


def test_cartesian_geometry():
    nx, ny = 4, 3
    blk = cartesian_block(nx, ny, x1=2.0, y1=1.5)
    basis = Basis(2)
    geo = blk.geometry(basis)
    hx, hy = 2.0 / nx, 1.5 / ny
    assert np.allclose(geo.detJ, hx * hy / 4.0)
    assert np.allclose(geo.element_area, hx * hy)
    # mass matrix of an affine element is detJ * identity
    eye = np.eye(basis.n_modes)
    assert np.allclose(geo.mass, hx * hy / 4.0 * eye, atol=1e-14)
    assert np.allclose(geo.mass_inv, 4.0 / (hx * hy) * eye, atol=1e-11)


def test_outward_normals_cartesian():
    blk = cartesian_block(3, 3)
    geo = blk.geometry(Basis(1))
    assert np.allclose(geo.face_normal[FACE_W], [-1.0, 0.0])
    assert np.allclose(geo.face_normal[FACE_E], [1.0, 0.0])
    assert np.allclose(geo.face_normal[FACE_S], [0.0, -1.0])
    assert np.allclose(geo.face_normal[FACE_N], [0.0, 1.0])
    assert np.allclose(geo.face_sj[FACE_W], 0.5 / 3.0)
    assert np.allclose(geo.face_sj[FACE_S], 0.5 / 3.0)


def test_normals_unit_length_and_outward_curvilinear():
    blk = wavy_block(5, 4)
    geo = blk.geometry(Basis(3))
    cent = blk.element_centroids()
    for face in (FACE_W, FACE_E, FACE_S, FACE_N):
        n = geo.face_normal[face]
        assert np.allclose(np.hypot(n[..., 0], n[..., 1]), 1.0)
        # outward: normal points away from the centroid through the face mid
        mids = geo.face_points[face].mean(axis=2)
        d = mids - cent
        assert np.all(np.einsum("ijk,ijk->ij", d, n) > 0.0)


def test_watertight_shared_faces():
    """Opposite faces of neighboring elements carry opposite normals and
    identical physical quadrature points, in matching order."""
    blk = wavy_block(4, 4)
    geo = blk.geometry(Basis(2))
    pe = geo.face_points[FACE_E][:-1, :]
    pw = geo.face_points[FACE_W][1:, :]
    assert np.allclose(pe, pw, atol=1e-14)
    assert np.allclose(geo.face_normal[FACE_E][:-1, :],
                       -geo.face_normal[FACE_W][1:, :], atol=1e-14)
    assert np.allclose(geo.face_sj[FACE_E][:-1, :],
                       geo.face_sj[FACE_W][1:, :], atol=1e-14)
    pn = geo.face_points[FACE_N][:, :-1]
    ps = geo.face_points[FACE_S][:, 1:]
    assert np.allclose(pn, ps, atol=1e-14)
    assert np.allclose(geo.face_normal[FACE_N][:, :-1],
                       -geo.face_normal[FACE_S][:, 1:], atol=1e-14)


def test_metric_identity_discrete_divergence():
    """Constant fields have exactly zero weak divergence: the volume term
    with a constant flux equals the surface sum of n*sJ integrals."""
    blk = wavy_block(4, 3)
    basis = Basis(3)
    geo = blk.geometry(basis)
    # sum over faces of (outward normal * sJ * total face weight) must
    # vanish per element for any closed straight-edge polygon
    total = np.zeros((blk.ni, blk.nj, 2))
    wsum = basis.q1d_weights.sum()
    for face in (FACE_W, FACE_E, FACE_S, FACE_N):
        total += geo.face_normal[face] * geo.face_sj[face][..., None] * wsum
    assert np.allclose(total, 0.0, atol=1e-13)


def test_h_dt_square_matches_side_length():
    blk = cartesian_block(10, 10, x1=0.1, y1=0.1)
    geo = blk.geometry(Basis(1))
    assert np.allclose(geo.h_dt, 0.01)
    assert np.allclose(geo.h_max_edge, 0.01)


def test_inverted_element_rejected():
    blk = cartesian_block(2, 2)
    blk.vertices[1, 1] = (-0.3, -0.3)  # fold the central vertex outside
    with pytest.raises(ValueError, match="inverted|degenerate"):
        blk.geometry(Basis(1))


def test_tags_scalar_and_mixed():
    blk = cartesian_block(4, 2, tags={FACE_W: TAG_INFLOW, FACE_S: TAG_WALL,
                                      FACE_N: [TAG_WALL, TAG_WALL,
                                               TAG_OUTFLOW, TAG_OUTFLOW]})
    assert np.all(blk.tags[FACE_W] == TAG_INFLOW)
    assert np.all(blk.tags[FACE_S] == TAG_WALL)
    assert list(blk.tags[FACE_N]) == [TAG_WALL, TAG_WALL,
                                      TAG_OUTFLOW, TAG_OUTFLOW]
    assert np.all(blk.tags[FACE_E] == TAG_OUTFLOW)  # default


def test_grid_file_roundtrip(tmp_path):
    blk = wavy_block(3, 5)
    path = tmp_path / "grid.txt"
    blk.write(path)
    back = GridBlock.read(path)
    assert back.ni == 3 and back.nj == 5
    assert np.array_equal(back.vertices, blk.vertices)


def test_grid_file_bad_count(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 2\n0 0\n1 0\n0 1\n")
    with pytest.raises(ValueError, match="expected 4"):
        GridBlock.read(path)
