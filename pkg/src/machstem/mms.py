"""Smooth exact Euler solution used for grid-convergence studies.

The advecting isentropic vortex is an exact time-dependent solution of
the compressible Euler equations: a Gaussian-core vortex superposed on a
uniform stream, translating with that stream unchanged. On a periodic
box it exercises every interior term of the discretization with no
boundary influence, which makes measured L2 error decay a clean probe of
the spatial order of accuracy.
"""

from __future__ import annotations

import numpy as np

DOMAIN = 20.0           # periodic box edge length
CENTER = (10.0, 10.0)   # vortex core at t = 0
MEAN = (1.0, 1.0)       # advection velocity
STRENGTH = 5.0          # circulation parameter


def vortex_state(x, y, t, gas, strength=STRENGTH, mean=MEAN,
                 center=CENTER, domain=DOMAIN):
    """Conserved state of the advecting vortex, broadcast over x, y."""
    g = gas.gamma
    b = strength
    # displacement from the advected core, wrapped to the nearest image
    dx = np.asarray(x, float) - center[0] - mean[0] * t
    dy = np.asarray(y, float) - center[1] - mean[1] * t
    dx = (dx + domain / 2.0) % domain - domain / 2.0
    dy = (dy + domain / 2.0) % domain - domain / 2.0
    r2 = dx * dx + dy * dy
    e = np.exp(0.5 * (1.0 - r2))
    u = mean[0] - b / (2.0 * np.pi) * e * dy
    v = mean[1] + b / (2.0 * np.pi) * e * dx
    T = 1.0 - (g - 1.0) * b * b / (8.0 * g * np.pi ** 2) * e * e
    rho = T ** (1.0 / (g - 1.0))
    p = rho * T
    E = p / (g - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, E])


def vortex_ic(gas, **kw):
    """Initial-condition callable ``fn(x, y) -> (4, ...)``."""
    return lambda x, y: vortex_state(x, y, 0.0, gas, **kw)


def vortex_at(t, gas, **kw):
    """Exact-solution callable at a fixed time."""
    return lambda x, y: vortex_state(x, y, t, gas, **kw)
