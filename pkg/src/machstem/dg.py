"""Modal discontinuous Galerkin discretization of 2D compressible Euler.

One ``Discretization`` owns a grid block, a basis, a gas model, and a
numerical flux, and evaluates the semi-discrete right-hand side

    d coeffs / dt = Minv * (volume term - surface term)

in the weak form: the volume term contracts the physical fluxes against
basis gradients through the cofactor metrics, and the surface term
integrates a single numerical flux per interior face, added to the left
element and subtracted from the right, so conservation holds to round-off.

Coefficient layout: ``(4, ni, nj, n_modes)`` — variable first, element
grid, then modal index.

Boundary conditions come from the block's per-face tag arrays:
inflow (free-stream Dirichlet through the flux), outflow (zero-gradient
copy), slip wall (normal-velocity mirror), interface (copy; the overset
layer owns those faces by overwriting fringe coefficients), and periodic
(wrap-around pairing of opposite sides).
"""

from __future__ import annotations

import numpy as np

from . import gas as gasmod
from .basis import FACE_W, FACE_E, FACE_S, FACE_N
from .fluxes import get_flux
from .mesh import (TAG_INFLOW, TAG_OUTFLOW, TAG_WALL, TAG_INTERFACE,
                   TAG_PERIODIC)


class Discretization:
    def __init__(self, block, basis, gas, flux="lax_friedrichs",
                 bc_state=None):
        self.block = block
        self.basis = basis
        self.gas = gas
        self.flux = get_flux(flux) if isinstance(flux, str) else flux
        self.flux_name = (flux if isinstance(flux, str)
                          else getattr(flux, "__name__", "custom"))
        self.geo = block.geometry(basis)
        self.bc_state = None if bc_state is None else np.asarray(bc_state, float)
        # elements whose coefficients evolve; overset assembly narrows this
        self.active_mask = np.ones((block.ni, block.nj), bool)
        w1 = basis.q1d_weights
        # basis columns pre-weighted by face quadrature weights
        self._face_W = {f: basis.face_V[f] * w1[:, None]
                        for f in (FACE_W, FACE_E, FACE_S, FACE_N)}
        self._vol_WDr = basis.vol_Dr * basis.vol_weights[:, None]
        self._vol_WDs = basis.vol_Ds * basis.vol_weights[:, None]
        self._vol_WV = basis.vol_V * basis.vol_weights[:, None]

    # ---- projection / evaluation -------------------------------------
    def project(self, fn):
        """L2-project ``fn(x, y) -> (4, ...)`` onto the modal space."""
        pts = self.geo.vol_points
        vals = np.asarray(fn(pts[..., 0], pts[..., 1]), float)
        rhs = np.einsum("qp,vijq->vijp", self._vol_WV,
                        vals * self.geo.detJ[None], optimize=True)
        return np.einsum("ijpr,vijr->vijp", self.geo.mass_inv, rhs,
                         optimize=True)

    def project_constant(self, state):
        """Coefficients representing one uniform conserved state."""
        c = np.zeros((4, self.block.ni, self.block.nj, self.basis.n_modes))
        c[:, :, :, self.basis.mode_const] = np.asarray(state, float)[:, None, None] * 2.0
        return c

    def evaluate(self, coeffs):
        """Point values at the volume quadrature nodes, shape (4,ni,nj,nq)."""
        return np.einsum("qp,vijp->vijq", self.basis.vol_V, coeffs,
                         optimize=True)

    def face_traces(self, coeffs):
        return {f: np.einsum("qp,vijp->vijq", self.basis.face_V[f], coeffs,
                             optimize=True)
                for f in (FACE_W, FACE_E, FACE_S, FACE_N)}

    def cell_means(self, coeffs):
        """Per-element means of the conserved variables, shape (4,ni,nj)."""
        vals = self.evaluate(coeffs)
        tot = np.einsum("q,vijq,ijq->vij", self.basis.vol_weights, vals,
                        self.geo.detJ, optimize=True)
        return tot / self.geo.element_area[None]

    def conserved_totals(self, coeffs, mask=None):
        """Domain integrals of the four conserved variables."""
        vals = self.evaluate(coeffs)
        contrib = np.einsum("q,vijq,ijq->vij", self.basis.vol_weights, vals,
                            self.geo.detJ, optimize=True)
        if mask is not None:
            contrib = contrib * mask[None]
        return contrib.sum(axis=(1, 2))

    def l2_error(self, coeffs, fn, mask=None):
        """Composite L2 norm of (solution - fn) over (masked) elements."""
        pts = self.geo.vol_points
        ref = np.asarray(fn(pts[..., 0], pts[..., 1]), float)
        diff = self.evaluate(coeffs) - ref
        cell = np.einsum("q,vijq,ijq->vij", self.basis.vol_weights,
                         diff * diff, self.geo.detJ, optimize=True)
        if mask is not None:
            cell = cell * mask[None]
        return np.sqrt(cell.sum(axis=(1, 2)))

    def max_wave_speed(self, coeffs):
        """Per-element max |u| + a over the volume nodes, shape (ni,nj)."""
        vals = self.evaluate(coeffs)
        return gasmod.max_wave_speed(vals, self.gas).max(axis=2)

    # ---- boundary ghosts ---------------------------------------------
    def _ghost_states(self, q_in, face, nrm):
        """Ghost trace for one boundary side from the tag array.

        q_in: (4, nface, nq) interior trace along the side; nrm: (nface, 2)
        outward unit normals.
        """
        tags = self.block.tags[face]
        ghost = q_in.copy()  # outflow / interface default: zero gradient
        out = tags == TAG_OUTFLOW
        if np.any(out):
            # one-way boundary: an extrapolated ghost that would carry
            # mass back in (re-entrant normal momentum) gets its normal
            # momentum clipped to zero, otherwise the boundary acts as a
            # reservoir feeding spurious unstarted states
            nx = nrm[out, 0][:, None]
            ny = nrm[out, 1][:, None]
            qo = q_in[:, out, :]
            vn = qo[1] * nx + qo[2] * ny
            neg = np.minimum(vn, 0.0)
            go = qo.copy()
            go[1] = qo[1] - neg * nx
            go[2] = qo[2] - neg * ny
            ghost[:, out, :] = go
        wall = tags == TAG_WALL
        if np.any(wall):
            nx = nrm[wall, 0][:, None]
            ny = nrm[wall, 1][:, None]
            qw = q_in[:, wall, :]
            vn = qw[1] * nx + qw[2] * ny
            gw = qw.copy()
            gw[1] = qw[1] - 2.0 * vn * nx
            gw[2] = qw[2] - 2.0 * vn * ny
            ghost[:, wall, :] = gw
        infl = tags == TAG_INFLOW
        if np.any(infl):
            if self.bc_state is None:
                raise ValueError(
                    f"block {self.block.name!r}: inflow tag present but no "
                    "free-stream state was given")
            ghost[:, infl, :] = self.bc_state[:, None, None]
        return ghost

    # ---- residual ----------------------------------------------------
    def residual(self, coeffs, mask_inactive=True):
        """Semi-discrete rate of change of the modal coefficients."""
        basis, geo, gas = self.basis, self.geo, self.gas
        vals = self.evaluate(coeffs)
        F, G = gasmod.flux(vals, gas)
        A = F * geo.y_s[None] - G * geo.x_s[None]
        B = -F * geo.y_r[None] + G * geo.x_r[None]
        rhs = (np.einsum("qp,vijq->vijp", self._vol_WDr, A, optimize=True)
               + np.einsum("qp,vijq->vijp", self._vol_WDs, B, optimize=True))

        tr = self.face_traces(coeffs)

        def surf(face, fhat_sj, sel):
            """Accumulate -(surface integral) of fhat*sJ over one face of
            the selected elements."""
            rhs[(slice(None),) + sel] -= np.einsum(
                "qp,vijq->vijp", self._face_W[face], fhat_sj, optimize=True)

        # interior vertical faces: E of (i,j) against W of (i+1,j)
        if self.block.ni > 1:
            n = geo.face_normal[FACE_E][:-1]
            fhat = self.flux(tr[FACE_E][:, :-1], tr[FACE_W][:, 1:],
                             n[..., 0, None], n[..., 1, None], gas)
            fhat_sj = fhat * geo.face_sj[FACE_E][None, :-1, :, None]
            surf(FACE_E, fhat_sj, (slice(None, -1), slice(None)))
            surf(FACE_W, -fhat_sj, (slice(1, None), slice(None)))

        # interior horizontal faces: N of (i,j) against S of (i,j+1)
        if self.block.nj > 1:
            n = geo.face_normal[FACE_N][:, :-1]
            fhat = self.flux(tr[FACE_N][:, :, :-1], tr[FACE_S][:, :, 1:],
                             n[..., 0, None], n[..., 1, None], gas)
            fhat_sj = fhat * geo.face_sj[FACE_N][None, :, :-1, None]
            surf(FACE_N, fhat_sj, (slice(None), slice(None, -1)))
            surf(FACE_S, -fhat_sj, (slice(None), slice(1, None)))

        # boundary sides
        for face, sel in ((FACE_W, (0, slice(None))),
                          (FACE_E, (-1, slice(None))),
                          (FACE_S, (slice(None), 0)),
                          (FACE_N, (slice(None), -1))):
            tags = self.block.tags[face]
            nrm = geo.face_normal[face][sel]
            q_in = tr[face][(slice(None),) + sel]
            if np.all(tags == TAG_PERIODIC):
                continue  # handled pairwise below
            ghost = self._ghost_states(q_in, face, nrm)
            fhat = self.flux(q_in, ghost, nrm[:, None, 0],
                             nrm[:, None, 1], gas)
            fhat_sj = fhat * geo.face_sj[face][sel][None, :, None]
            rhs[(slice(None),) + sel] -= np.einsum(
                "qp,viq->vip", self._face_W[face], fhat_sj, optimize=True)

        # periodic wrap faces (whole sides only)
        if np.all(self.block.tags[FACE_E] == TAG_PERIODIC):
            n = geo.face_normal[FACE_E][-1]
            fhat = self.flux(tr[FACE_E][:, -1], tr[FACE_W][:, 0],
                             n[:, None, 0], n[:, None, 1], gas)
            fhat_sj = fhat * geo.face_sj[FACE_E][-1][None, :, None]
            rhs[:, -1] -= np.einsum("qp,viq->vip", self._face_W[FACE_E],
                                    fhat_sj, optimize=True)
            rhs[:, 0] -= np.einsum("qp,viq->vip", self._face_W[FACE_W],
                                   -fhat_sj, optimize=True)
        if np.all(self.block.tags[FACE_N] == TAG_PERIODIC):
            n = geo.face_normal[FACE_N][:, -1]
            fhat = self.flux(tr[FACE_N][:, :, -1], tr[FACE_S][:, :, 0],
                             n[:, None, 0], n[:, None, 1], gas)
            fhat_sj = fhat * geo.face_sj[FACE_N][:, -1][None, :, None]
            rhs[:, :, -1] -= np.einsum("qp,viq->vip", self._face_W[FACE_N],
                                       fhat_sj, optimize=True)
            rhs[:, :, 0] -= np.einsum("qp,viq->vip", self._face_W[FACE_S],
                                      -fhat_sj, optimize=True)

        rhs = np.einsum("ijpr,vijr->vijp", self.geo.mass_inv, rhs,
                        optimize=True)
        if mask_inactive and not self.active_mask.all():
            rhs[:, ~self.active_mask] = 0.0
        return rhs
