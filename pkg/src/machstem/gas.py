"""Perfect-gas thermodynamics and Euler fluxes for 2D compressible flow.

Conserved states are stored variable-first: ``q[0]`` is density, ``q[1]``
x-momentum, ``q[2]`` y-momentum and ``q[3]`` total energy per unit volume.
Every function broadcasts over trailing axes, so a single state ``(4,)``
and batched quadrature data ``(4, n_elem, n_pts)`` share one code path.

The working scaling puts the free stream at density gamma, pressure 1,
so the free-stream sound speed is 1 and speed equals Mach number.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidStateError

N_VARS = 4


class GasModel:
    """Calorically perfect gas."""

    def __init__(self, gamma=1.4):
        if not gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        self.gamma = float(gamma)

    def __repr__(self):
        return f"GasModel(gamma={self.gamma})"


def conserved(rho, u, v, p, gas):
    """Conserved state array from primitive fields (broadcasting)."""
    rho, u, v, p = np.broadcast_arrays(
        np.asarray(rho, float), np.asarray(u, float),
        np.asarray(v, float), np.asarray(p, float))
    q = np.empty((N_VARS,) + rho.shape)
    q[0] = rho
    q[1] = rho * u
    q[2] = rho * v
    q[3] = p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return q


def primitives(q, gas):
    """Return (rho, u, v, p) from a conserved state array."""
    rho = q[0]
    u = q[1] / rho
    v = q[2] / rho
    p = (gas.gamma - 1.0) * (q[3] - 0.5 * rho * (u * u + v * v))
    return rho, u, v, p


def pressure(q, gas):
    return (gas.gamma - 1.0) * (q[3] - 0.5 * (q[1] ** 2 + q[2] ** 2) / q[0])


def sound_speed(q, gas):
    return np.sqrt(gas.gamma * pressure(q, gas) / q[0])


def total_enthalpy(q, gas):
    """Specific total enthalpy H = (E + p) / rho."""
    return (q[3] + pressure(q, gas)) / q[0]


def flux(q, gas):
    """Physical flux pair (F, G) of the 2D Euler equations."""
    rho, u, v, p = primitives(q, gas)
    F = np.empty_like(q)
    G = np.empty_like(q)
    F[0] = q[1]
    F[1] = q[1] * u + p
    F[2] = q[1] * v
    F[3] = u * (q[3] + p)
    G[0] = q[2]
    G[1] = q[2] * u
    G[2] = q[2] * v + p
    G[3] = v * (q[3] + p)
    return F, G


def normal_flux(q, nx, ny, gas):
    """Directional physical flux F*nx + G*ny."""
    rho, u, v, p = primitives(q, gas)
    un = u * nx + v * ny
    out = np.empty_like(q)
    out[0] = rho * un
    out[1] = q[1] * un + p * nx
    out[2] = q[2] * un + p * ny
    out[3] = (q[3] + p) * un
    return out


def max_wave_speed(q, gas):
    """Fastest signal speed |u| + a."""
    rho, u, v, p = primitives(q, gas)
    return np.sqrt(u * u + v * v) + np.sqrt(gas.gamma * p / rho)


def validate(q, gas, where=None):
    """Raise InvalidStateError on non-positive density or pressure.

    Returns the pressure array so callers can reuse it.
    """
    rho = np.asarray(q[0])
    p = np.asarray(pressure(q, gas))
    bad = ~(np.isfinite(rho) & np.isfinite(p) & (rho > 0.0) & (p > 0.0))
    if np.any(bad):
        idx = np.argwhere(bad)
        first = tuple(idx[0]) if idx.size else ()
        loc = f"{where} index {first}" if where else f"index {first}"
        raise InvalidStateError(
            f"invalid gas state (rho={np.ravel(rho[bad])[0]:.6g}, "
            f"p={np.ravel(p[bad])[0]:.6g})", location=loc)
    return p


def free_stream(mach, gas, flow_angle=0.0):
    """Free-stream conserved state under the package scaling.

    Density gamma and pressure 1 make the sound speed exactly 1, so the
    velocity magnitude equals ``mach``. ``flow_angle`` (radians) rotates
    the velocity in the x-y plane.
    """
    u = mach * np.cos(flow_angle)
    v = mach * np.sin(flow_angle)
    return conserved(gas.gamma, u, v, 1.0, gas)
