import numpy as np
import pytest

from machstem.basis import Basis
from machstem.dg import Discretization
from machstem.gas import GasModel, conserved, free_stream
from machstem.mesh import GridBlock
from machstem.mms import vortex_ic
from machstem.stabilization import (kxrcf_indicator, moment_limit,
                                    Stabilizer, make_limiter_hook)

GAS = GasModel()


def box_disc(n, order, size=20.0, flux="lax_friedrichs"):
    xs = np.linspace(0.0, size, n + 1)
    verts = np.zeros((n + 1, n + 1, 2))
    verts[..., 0] = xs[:, None]
    verts[..., 1] = xs[None, :]
    return Discretization(GridBlock(verts), Basis(order), GAS, flux=flux)


def shock_ic(x, y, x0=10.0):
    """Vertical jump at x = x0 between two supersonic states."""
    left = conserved(1.4, 3.0, 0.0, 1.0, GAS)
    right = conserved(5.4, 0.78, 0.0, 10.3, GAS)
    out = np.where(x[None] < x0, left[:, None, None, None],
                   right[:, None, None, None])
    return np.broadcast_to(out, (4,) + x.shape).copy()


def test_indicator_zero_flags_on_smooth_field():
    disc = box_disc(16, 3)
    coeffs = disc.project(vortex_ic(GAS))
    ind, flagged = kxrcf_indicator(disc, coeffs)
    assert not np.any(flagged)
    assert np.all(ind < 0.5)


def test_indicator_decays_under_refinement_on_smooth_field():
    vals = []
    for n in (24, 48):
        disc = box_disc(n, 3)
        coeffs = disc.project(vortex_ic(GAS))
        ind, _ = kxrcf_indicator(disc, coeffs)
        vals.append(ind.max())
    assert vals[1] < 0.5 * vals[0]


def test_indicator_flags_discontinuity():
    """At solver-typical element sizes (h < 1) a strong jump drives the
    indicator far above threshold in the jump column and nowhere else."""
    disc = box_disc(16, 2, size=2.0)
    coeffs = disc.project(lambda x, y: shock_ic(x, y, x0=1.0))
    ind, flagged = kxrcf_indicator(disc, coeffs)
    cols = np.where(flagged.any(axis=1))[0]
    assert len(cols) > 0
    # flags concentrate at the jump columns (x0 is between cols 7 and 8)
    assert set(cols) <= {6, 7, 8, 9}
    assert np.all(flagged[cols[0]])


def test_indicator_empty_inflow_gives_zero():
    """A purely diverging velocity field makes every face an outflow face
    for the central element, so its indicator must be exactly zero."""
    disc = box_disc(3, 1, size=3.0)

    def diverging(x, y):
        return conserved(np.ones_like(x), 2.0 * (x - 1.5), 2.0 * (y - 1.5),
                         np.ones_like(x), GAS)

    coeffs = disc.project(diverging)
    ind, flagged = kxrcf_indicator(disc, coeffs)
    assert ind[1, 1] == 0.0
    assert not flagged[1, 1]


def test_limiter_preserves_cell_means():
    disc = box_disc(12, 3)
    coeffs = disc.project(shock_ic)
    before = disc.cell_means(coeffs)
    _, flagged = kxrcf_indicator(disc, coeffs)
    moment_limit(disc, coeffs, flagged)
    after = disc.cell_means(coeffs)
    assert np.allclose(before, after, rtol=0, atol=1e-13)


def test_limiter_idempotent():
    disc = box_disc(12, 3)
    coeffs = disc.project(shock_ic)
    _, flagged = kxrcf_indicator(disc, coeffs)
    moment_limit(disc, coeffs, flagged)
    once = coeffs.copy()
    moment_limit(disc, coeffs, flagged)
    assert np.array_equal(coeffs, once)


def test_limiter_zeroes_high_modes_of_flagged_elements():
    disc = box_disc(8, 4)
    coeffs = disc.project(shock_ic)
    flagged = np.ones((8, 8), bool)
    moment_limit(disc, coeffs, flagged)
    assert np.all(coeffs[:, :, :, disc.basis.modes_high] == 0.0)


def test_limiter_exact_on_linear_data():
    """Globally linear fields pass through the limiter bitwise-unchanged
    on a uniform grid, including boundary elements."""
    disc = box_disc(6, 2, size=1.0)

    def linear(x, y):
        rho = 1.0 + 0.3 * x - 0.2 * y
        return np.stack([rho, 0.1 + 0.2 * x + 0.05 * y,
                         0.3 * np.ones_like(x), 2.0 + 0.1 * y])

    coeffs = disc.project(linear)
    limited = coeffs.copy()
    moment_limit(disc, limited, np.ones((6, 6), bool))
    assert np.allclose(limited, coeffs, atol=1e-13)


def test_limiter_clamps_overshoot_against_flat_neighbors():
    disc = box_disc(5, 1, size=1.0)
    q_inf = free_stream(2.0, GAS)
    coeffs = disc.project_constant(q_inf)
    coeffs[0, 2, 2, disc.basis.mode_lin_r] = 0.5  # spurious density slope
    flagged = np.zeros((5, 5), bool)
    flagged[2, 2] = True
    moment_limit(disc, coeffs, flagged)
    assert coeffs[0, 2, 2, disc.basis.mode_lin_r] == 0.0


def test_tvb_keeps_small_slopes():
    disc = box_disc(5, 1, size=5.0)  # h = 1 so the tvb bound is just M
    q_inf = free_stream(2.0, GAS)
    coeffs = disc.project_constant(q_inf)
    coeffs[0, 2, 2, disc.basis.mode_lin_r] = 0.01
    flagged = np.zeros((5, 5), bool)
    flagged[2, 2] = True
    moment_limit(disc, coeffs, flagged, tvb_m=0.05)
    assert coeffs[0, 2, 2, disc.basis.mode_lin_r] == 0.01


def test_stabilizer_always_mode_flags_active_only():
    disc = box_disc(6, 2)
    disc.active_mask[:2] = False
    st = Stabilizer(mode="always")
    coeffs = disc.project(shock_ic)
    orig = coeffs.copy()
    st(disc, coeffs)
    assert np.all(st.last_flagged[2:])
    assert not np.any(st.last_flagged[:2])
    # inactive elements keep their high modes
    assert np.array_equal(coeffs[:, :2], orig[:, :2])
    assert np.all(coeffs[:, 2:, :, disc.basis.modes_high] == 0.0)


def test_stabilizer_records_indicator_and_hook_applies():
    disc = box_disc(10, 2, size=2.0)
    st = Stabilizer(mode="indicator")
    hook = make_limiter_hook([disc], [st])
    coeffs = disc.project(lambda x, y: shock_ic(x, y, x0=1.0))
    hook([coeffs])
    assert st.last_indicator is not None
    assert st.last_flagged.any()
    assert np.all(coeffs[:, st.last_flagged][:, :, disc.basis.modes_high]
                  == 0.0)


def test_stabilizer_rejects_unknown_mode():
    with pytest.raises(ValueError, match="unknown stabilization mode"):
        Stabilizer(mode="everywhere")
