"""Shock capturing: discontinuity-sensing indicator plus moment limiter.

The indicator measures, per element, the jump of the solution across the
inflow portion of the element boundary, scaled so that smooth solutions
produce values that vanish under refinement while discontinuities hold
values above unity:

    I = |integral over inflow boundary of (own trace - neighbor trace)|
        / ( h^((N+1)/2) * inflow-boundary measure * max-norm of own values )

Elements whose indicator exceeds a threshold (default 1) are flagged and
limited; everything else keeps its full high-order polynomial.

The limiter drops every mode of total degree two or higher in a flagged
element and applies a minmod comparison of the two linear modes against
scaled neighbor mean differences, chosen so that data that are exactly
linear across a uniform grid pass through unchanged. Element means are
never modified, so the limiter is conservative, and a second application
is a no-op.
"""

from __future__ import annotations

import numpy as np

from .basis import FACE_W, FACE_E, FACE_S, FACE_N
from .gas import conserved, pressure

SQRT3 = np.sqrt(3.0)


def _neighbor_traces(disc, traces):
    """Neighbor trace values seen through each face, boundary faces fall
    back to the element's own trace (zero jump)."""
    out = {}
    for face, opp, shift in ((FACE_E, FACE_W, +1), (FACE_W, FACE_E, -1),
                             (FACE_N, FACE_S, +1), (FACE_S, FACE_N, -1)):
        nbr = traces[face].copy()
        if face == FACE_E:
            nbr[:, :-1] = traces[opp][:, 1:]
        elif face == FACE_W:
            nbr[:, 1:] = traces[opp][:, :-1]
        elif face == FACE_N:
            nbr[:, :, :-1] = traces[opp][:, :, 1:]
        else:
            nbr[:, :, 1:] = traces[opp][:, :, :-1]
        out[face] = nbr
    return out


def kxrcf_indicator(disc, coeffs, variables=(0,), threshold=1.0):
    """Inflow-boundary jump indicator.

    Returns ``(indicator, flagged)``: the indicator is the maximum over
    the requested conserved variables, shape (ni, nj); ``flagged`` marks
    elements where it exceeds the threshold.
    """
    basis, geo = disc.basis, disc.geo
    traces = disc.face_traces(coeffs)
    nbr = _neighbor_traces(disc, traces)
    w1 = basis.q1d_weights

    num = np.zeros((len(variables), disc.block.ni, disc.block.nj))
    inflow_len = np.zeros((disc.block.ni, disc.block.nj))
    for face in (FACE_W, FACE_E, FACE_S, FACE_N):
        tr = traces[face]
        n = geo.face_normal[face]
        with np.errstate(invalid="ignore", divide="ignore"):
            vn = (tr[1] * n[..., 0, None] + tr[2] * n[..., 1, None]) / tr[0]
            inflow = vn < 0.0
        wgt = inflow * w1 * geo.face_sj[face][..., None]
        inflow_len += wgt.sum(axis=2)
        for k, v in enumerate(variables):
            num[k] += ((tr[v] - nbr[face][v]) * wgt).sum(axis=2)

    vals = disc.evaluate(coeffs)
    ind = np.zeros_like(inflow_len)
    active = inflow_len > 0.0
    hpow = geo.h_max_edge ** (0.5 * (basis.order + 1))
    for k, v in enumerate(variables):
        norm = np.max(np.abs(vals[v]), axis=2)
        den = hpow * inflow_len * np.maximum(norm, 1e-300)
        with np.errstate(invalid="ignore"):
            ind_v = np.where(active, np.abs(num[k]) / den, 0.0)
        ind = np.maximum(ind, ind_v)
    return ind, ind > threshold


def _minmod3(a, b, c):
    s = np.sign(a)
    agree = (np.sign(b) == s) & (np.sign(c) == s)
    return np.where(agree, s * np.minimum(np.abs(a),
                                          np.minimum(np.abs(b),
                                                     np.abs(c))), 0.0)


def moment_limit(disc, coeffs, flagged, tvb_m=0.0):
    """Limit flagged elements in place; means are untouched."""
    if not np.any(flagged):
        return
    basis = disc.basis
    means = disc.cell_means(coeffs)

    # neighbor means with boundary replication; replicated entries are
    # marked and later excluded from the minmod (one-sided limiting)
    mE = np.concatenate([means[:, 1:], means[:, -1:]], axis=1)
    mW = np.concatenate([means[:, :1], means[:, :-1]], axis=1)
    mN = np.concatenate([means[:, :, 1:], means[:, :, -1:]], axis=2)
    mS = np.concatenate([means[:, :, :1], means[:, :, :-1]], axis=2)

    dE = (mE - means) / SQRT3
    dW = (means - mW) / SQRT3
    dN = (mN - means) / SQRT3
    dS = (means - mS) / SQRT3
    # one-sided at boundaries: drop the missing constraint by copying the
    # mode itself into that slot
    c10 = coeffs[:, :, :, basis.mode_lin_r]
    c01 = coeffs[:, :, :, basis.mode_lin_s]
    dE[:, -1] = c10[:, -1]
    dW[:, 0] = c10[:, 0]
    dN[:, :, -1] = c01[:, :, -1]
    dS[:, :, 0] = c01[:, :, 0]

    lim10 = _minmod3(c10, dE, dW)
    lim01 = _minmod3(c01, dN, dS)
    if tvb_m > 0.0:
        keep = disc.geo.h_max_edge[None] ** 2 * tvb_m
        lim10 = np.where(np.abs(c10) <= keep, c10, lim10)
        lim01 = np.where(np.abs(c01) <= keep, c01, lim01)

    sel = flagged
    c10[:, sel] = lim10[:, sel]
    c01[:, sel] = lim01[:, sel]
    hi = coeffs[:, :, :, basis.modes_high]
    hi[:, sel] = 0.0
    coeffs[:, :, :, basis.modes_high] = hi


def _pointwise_eval_matrix(basis):
    """Modes evaluated at every volume and face quadrature node."""
    V = getattr(basis, "_pointwise_eval_V", None)
    if V is None:
        V = np.vstack([basis.vol_V] + [basis.face_V[f] for f in
                                       (FACE_W, FACE_E, FACE_S, FACE_N)])
        basis._pointwise_eval_V = V
    return V


def positivity_guard(disc, coeffs, rho_floor=1e-8, p_floor=1e-10):
    """Emergency fallback keeping every active cell's state physical.

    A cell whose mean density or pressure is non-finite or below the
    floor is rebuilt as a constant cell with floored values; a cell
    whose polynomial dips below the floors anywhere on its quadrature
    nodes has its non-constant modes shrunk toward the (physical) mean
    until the dip disappears.  A no-op on physical states, so steady
    solutions are untouched.  Returns the number of cell repairs made.
    """
    gas = disc.gas
    mask = disc.active_mask
    repaired = 0

    means = disc.cell_means(coeffs)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        pm = pressure(means, gas)
        bad = (~np.isfinite(means).all(axis=0) | (means[0] <= rho_floor) |
               ~np.isfinite(pm) | (pm <= p_floor)) & mask
        if bad.any():
            m = means[:, bad]
            rho = np.maximum(np.nan_to_num(m[0], nan=rho_floor), rho_floor)
            u = np.nan_to_num(m[1] / rho, nan=0.0, posinf=0.0, neginf=0.0)
            v = np.nan_to_num(m[2] / rho, nan=0.0, posinf=0.0, neginf=0.0)
            p = np.maximum(np.nan_to_num(pm[bad], nan=p_floor), p_floor)
            state = conserved(rho, u, v, p, gas)
            coeffs[:, bad, :] = 0.0
            coeffs[:, bad, 0] = 2.0 * state         # mode-0 value is 1/2
            repaired += int(bad.sum())

        V = _pointwise_eval_matrix(disc.basis)
        for _ in range(60):
            vals = np.einsum("qp,vijp->vijq", V, coeffs, optimize=True)
            p = pressure(vals, gas)
            bad = ((vals[0].min(axis=-1) <= rho_floor) |
                   (p.min(axis=-1) <= p_floor) |
                   ~np.isfinite(vals).all(axis=(0, 3)) |
                   ~np.isfinite(p).all(axis=-1)) & mask
            if not bad.any():
                break
            coeffs[:, bad, 1:] *= 0.5
            repaired += int(bad.sum())
    return repaired


class Stabilizer:
    """Per-block limiting policy: indicator-gated, always-on, or off.

    Records the most recent indicator field and flag map so drivers can
    export troubled-cell diagnostics without recomputation.  With
    ``positivity`` set, the positivity guard runs after the limiter and
    its cell-repair count accumulates in ``guard_activations``.
    """

    def __init__(self, mode="indicator", variables=(0,), threshold=1.0,
                 tvb_m=0.0, positivity=False, rho_floor=1e-8,
                 p_floor=1e-10):
        if mode not in ("indicator", "always", "off"):
            raise ValueError(f"unknown stabilization mode {mode!r}")
        self.mode = mode
        self.variables = tuple(variables)
        self.threshold = threshold
        self.tvb_m = tvb_m
        self.positivity = positivity
        self.rho_floor = rho_floor
        self.p_floor = p_floor
        self.guard_activations = 0
        self.last_indicator = None
        self.last_flagged = None

    def __call__(self, disc, coeffs):
        if self.mode != "off":
            if self.mode == "always":
                flagged = disc.active_mask.copy()
                self.last_indicator = np.full(flagged.shape, np.inf)
            else:
                ind, flagged = kxrcf_indicator(disc, coeffs, self.variables,
                                               self.threshold)
                flagged &= disc.active_mask
                self.last_indicator = ind
            self.last_flagged = flagged
            moment_limit(disc, coeffs, flagged, self.tvb_m)
        if self.positivity:
            self.guard_activations += positivity_guard(
                disc, coeffs, self.rho_floor, self.p_floor)


def make_limiter_hook(discs, stabilizers):
    """Build the marcher hook applying each block's stabilizer in turn."""
    def hook(coeffs_list):
        for d, st, c in zip(discs, stabilizers, coeffs_list):
            if st is not None:
                st(d, c)
    return hook
