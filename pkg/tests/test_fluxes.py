import numpy as np
import pytest

from machstem.gas import GasModel, conserved, free_stream, normal_flux
from machstem.fluxes import lax_friedrichs, slau2, get_flux

GAS = GasModel()

NORMALS = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0),
           (np.sqrt(0.5), np.sqrt(0.5)), (0.6, -0.8)]


def rot(q, c, s):
    """Rotate the velocity components of a conserved state."""
    out = q.copy()
    out[1] = c * q[1] - s * q[2]
    out[2] = s * q[1] + c * q[2]
    return out


@pytest.mark.parametrize("flux", [lax_friedrichs, slau2])
@pytest.mark.parametrize("nxny", NORMALS)
def test_consistency(flux, nxny):
    nx, ny = nxny
    q = conserved(1.1, 0.7, -0.4, 0.9, GAS)
    assert np.allclose(flux(q, q, nx, ny, GAS),
                       normal_flux(q, nx, ny, GAS), atol=1e-13)


@pytest.mark.parametrize("flux", [lax_friedrichs, slau2])
@pytest.mark.parametrize("nxny", NORMALS)
def test_antisymmetry_conservation(flux, nxny):
    nx, ny = nxny
    qL = conserved(1.0, 0.9, 0.2, 1.0, GAS)
    qR = conserved(0.6, -0.3, 0.5, 1.4, GAS)
    f1 = flux(qL, qR, nx, ny, GAS)
    f2 = flux(qR, qL, -nx, -ny, GAS)
    assert np.allclose(f1, -f2, atol=1e-13)


@pytest.mark.parametrize("flux", [lax_friedrichs, slau2])
def test_rotational_invariance(flux):
    ang = 0.37
    c, s = np.cos(ang), np.sin(ang)
    qL = conserved(1.0, 0.9, 0.2, 1.0, GAS)
    qR = conserved(0.6, -0.3, 0.5, 1.4, GAS)
    nx, ny = 0.6, 0.8
    f = flux(qL, qR, nx, ny, GAS)
    # rotating states and normal together rotates the flux momentum pair
    f_rot = flux(rot(qL, c, s), rot(qR, c, s),
                 c * nx - s * ny, s * nx + c * ny, GAS)
    assert np.allclose(f_rot, rot(f, c, s), atol=1e-13)


def test_slau2_supersonic_shared_normal_velocity_is_exact_upwind():
    """With matching supersonic normal velocity, the scheme reduces to the
    exact one-sided flux of the upwind state."""
    for nx, ny in [(1.0, 0.0), (0.6, 0.8)]:
        u, v = 2.5 * nx, 2.5 * ny
        qL = conserved(1.0, u + 0.3 * -ny, v + 0.3 * nx, 1.0, GAS)  # add tangential
        qR = conserved(0.55, u - 0.2 * -ny, v - 0.2 * nx, 0.8, GAS)
        f = slau2(qL, qR, nx, ny, GAS)
        assert np.allclose(f, normal_flux(qL, nx, ny, GAS), atol=1e-12)


def test_slau2_stationary_contact_resolved_exactly():
    p = 0.9
    qL = conserved(1.0, 0.0, 0.0, p, GAS)
    qR = conserved(0.125, 0.0, 0.0, p, GAS)
    f = slau2(qL, qR, 1.0, 0.0, GAS)
    assert np.allclose(f, [0.0, p, 0.0, 0.0], atol=1e-14)


def test_slau2_pressure_dissipation_vanishes_supersonic():
    """The mass flux must be free of the pressure-difference term at
    supersonic speeds: changing pR leaves the mass flux unchanged."""
    qL = conserved(1.0, 2.0, 0.0, 0.5, GAS)
    qR1 = conserved(0.9, 2.2, 0.0, 0.6, GAS)
    qR2 = conserved(0.9, 2.2, 0.0, 0.9, GAS)
    f1 = slau2(qL, qR1, 1.0, 0.0, GAS)
    f2 = slau2(qL, qR2, 1.0, 0.0, GAS)
    assert np.isclose(f1[0], f2[0], atol=1e-13)


def test_lax_friedrichs_dissipates_density_jump():
    """LLF adds |lambda|max * jump dissipation to the central average."""
    qL = conserved(1.0, 0.1, 0.0, 1.0, GAS)
    qR = conserved(0.5, 0.1, 0.0, 1.0, GAS)
    f = lax_friedrichs(qL, qR, 1.0, 0.0, GAS)
    central = 0.5 * (normal_flux(qL, 1.0, 0.0, GAS)
                     + normal_flux(qR, 1.0, 0.0, GAS))
    assert f[0] > central[0]  # jump qR-qL < 0 adds positive mass flux


@pytest.mark.parametrize("flux", [lax_friedrichs, slau2])
def test_free_stream_pairs_give_free_stream_flux(flux):
    q = free_stream(3.0, GAS)
    for nx, ny in NORMALS:
        assert np.allclose(flux(q, q, nx, ny, GAS),
                           normal_flux(q, nx, ny, GAS), atol=1e-13)


@pytest.mark.parametrize("name", ["lax_friedrichs", "slau2"])
def test_registry(name):
    assert callable(get_flux(name))


def test_registry_unknown():
    with pytest.raises(ValueError, match="unknown flux"):
        get_flux("roe")


@pytest.mark.parametrize("flux", [lax_friedrichs, slau2])
def test_batched_shapes(flux):
    rng = np.random.default_rng(7)
    rho = 1.0 + 0.1 * rng.random((3, 5))
    u = 0.5 * rng.standard_normal((3, 5))
    v = 0.5 * rng.standard_normal((3, 5))
    p = 1.0 + 0.1 * rng.random((3, 5))
    qL = conserved(rho, u, v, p, GAS)
    qR = conserved(rho[::-1], u[::-1], v[::-1], p[::-1], GAS)
    nx = np.full((3, 5), 0.6)
    ny = np.full((3, 5), 0.8)
    f = flux(qL, qR, nx, ny, GAS)
    assert f.shape == (4, 3, 5)
    # each entry matches the scalar evaluation
    f00 = flux(qL[:, 0, 0], qR[:, 0, 0], 0.6, 0.8, GAS)
    assert np.allclose(f[:, 0, 0], f00)
