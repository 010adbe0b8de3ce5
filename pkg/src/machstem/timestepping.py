"""Explicit time marching: a six-stage fifth-order Runge-Kutta scheme for
time-accurate integration, a strong-stability-preserving three-stage
scheme for the pseudo-time steady-state driver, and a CFL step-size rule.

The marcher advances one or several grid blocks together. After every
stage update it calls the system's hooks (overset transfer first, then
limiting), so intermediate states are always consistent across blocks and
free of limiter-visible overshoots before the next rhs evaluation.  The
steady driver deliberately uses the SSP scheme: its stages are convex
combinations of forward-Euler steps, so limiting and positivity repairs
applied per stage carry over to the full step, which the fifth-order
tableau (with its negative stage weights) cannot guarantee near shocks.

Checkpoints are written as raw float64 ``.npy`` arrays, one per block,
with a JSON sidecar; reloading reproduces the coefficients bit for bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import DivergenceError

# six-stage fifth-order explicit tableau (verified order 5.0 on
# nonautonomous nonlinear scalar problems)
RK_C = np.array([0.0, 0.25, 0.25, 0.5, 0.75, 1.0])
RK_A = [
    [],
    [1.0 / 4.0],
    [1.0 / 8.0, 1.0 / 8.0],
    [0.0, -1.0 / 2.0, 1.0],
    [3.0 / 16.0, 0.0, 0.0, 9.0 / 16.0],
    [-3.0 / 7.0, 2.0 / 7.0, 12.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0],
]
RK_B = np.array([7.0, 0.0, 32.0, 12.0, 32.0, 7.0]) / 90.0
N_STAGES = 6


def rk_step(f, t, y, dt):
    """One step for a plain ODE right-hand side ``f(t, y)``."""
    k = []
    for i in range(N_STAGES):
        yi = y
        for aij, kj in zip(RK_A[i], k):
            if aij != 0.0:
                yi = yi + dt * aij * kj
        k.append(f(t + RK_C[i] * dt, yi))
    out = y
    for bi, ki in zip(RK_B, k):
        if bi != 0.0:
            out = out + dt * bi * ki
    return out


class System:
    """Bundle of discretizations advanced in lock step.

    ``transfer`` and ``limiter`` are optional callables taking the list of
    coefficient arrays and mutating it in place; transfer runs first.
    """

    def __init__(self, discs, transfer=None, limiter=None):
        self.discs = list(discs)
        self.transfer = transfer
        self.limiter = limiter

    def apply_hooks(self, coeffs_list):
        if self.transfer is not None:
            self.transfer(coeffs_list)
        if self.limiter is not None:
            self.limiter(coeffs_list)

    def rhs(self, coeffs_list):
        return [d.residual(c) for d, c in zip(self.discs, coeffs_list)]

    def max_wave_speed(self, coeffs_list):
        out = 0.0
        for d, c in zip(self.discs, coeffs_list):
            s = d.max_wave_speed(c)[d.active_mask]
            if s.size:
                out = max(out, float(np.max(s)))
        return out

    def stable_dt(self, coeffs_list, cfl):
        """cfl * min over active elements of h / ((2N+1) * wave speed)."""
        dt = np.inf
        for d, c in zip(self.discs, coeffs_list):
            lam = d.max_wave_speed(c)
            denom = (2 * d.basis.order + 1) * lam
            local = d.geo.h_dt / np.maximum(denom, 1e-300)
            act = local[d.active_mask]
            if act.size:
                dt = min(dt, float(np.min(act)))
        if not np.isfinite(dt):
            raise DivergenceError("wave speed is not finite; state blew up")
        return cfl * dt

    def density_residual(self, rhs_list):
        """Volume-weighted RMS of the density rate over active elements."""
        num = 0.0
        den = 0.0
        for d, r in zip(self.discs, rhs_list):
            rate = np.einsum("qp,ijp->ijq", d.basis.vol_V,
                             r[0], optimize=True)
            cell = np.einsum("q,ijq,ijq->ij", d.basis.vol_weights,
                             rate * rate, d.geo.detJ, optimize=True)
            num += float(cell[d.active_mask].sum())
            den += float(d.geo.element_area[d.active_mask].sum())
        return np.sqrt(num / den)


class MarchResult:
    def __init__(self, outcome, iterations, residual, history):
        self.outcome = outcome          # converged | max_iterations | diverged
        self.iterations = iterations
        self.residual = residual
        self.history = history          # rows (iter, residual, wavespeed, dt)

    def __repr__(self):
        return (f"MarchResult({self.outcome!r}, iterations={self.iterations}, "
                f"residual={self.residual:.3e})")


def march_to_steady(system, coeffs_list, *, cfl=0.3, max_iterations=1000,
                    tol=1e-8, cfl_ramp_iters=0, cfl_start=None,
                    diverge_factor=1e4, stall_window=0, log_every=0,
                    on_log=None):
    """Pseudo-time march until the density residual drops below ``tol``.

    Never raises on blow-up: a non-finite or exploding residual ends the
    march with outcome ``"diverged"`` so drivers can decide what to do.
    With ``stall_window > 0`` the march also ends (outcome ``"stalled"``)
    once the best residual has not improved by 1% for that many
    iterations — captured shocks limit-cycle the cell-wise residual, so
    a plateau, not ``tol``, is the practical end state of shocked runs.
    """
    system.apply_hooks(coeffs_list)
    history = []
    resid0 = None
    resid = np.inf
    best = np.inf
    best_it = 0
    it = 0
    for it in range(1, max_iterations + 1):
        cfl_now = cfl
        if cfl_ramp_iters > 0:
            lo = cfl_start if cfl_start is not None else 0.25 * cfl
            frac = min(1.0, it / float(cfl_ramp_iters))
            cfl_now = lo + (cfl - lo) * frac
        try:
            dt = system.stable_dt(coeffs_list, cfl_now)
        except DivergenceError:
            return MarchResult("diverged", it - 1, resid, history)
        wave = system.max_wave_speed(coeffs_list)

        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            # SSP three-stage scheme (each stage a convex blend of
            # forward-Euler steps; hooks keep every stage admissible)
            k0 = system.rhs(coeffs_list)
            u1 = [c + dt * r for c, r in zip(coeffs_list, k0)]
            system.apply_hooks(u1)
            k1 = system.rhs(u1)
            u2 = [0.75 * c + 0.25 * (s + dt * r)
                  for c, s, r in zip(coeffs_list, u1, k1)]
            system.apply_hooks(u2)
            k2 = system.rhs(u2)
            for c, s, r in zip(coeffs_list, u2, k2):
                c *= 1.0 / 3.0
                c += (2.0 / 3.0) * (s + dt * r)
            system.apply_hooks(coeffs_list)
            resid = system.density_residual(k0)

        history.append((it, resid, wave, dt))
        if log_every and (it % log_every == 0 or it == 1) and on_log:
            on_log(it, resid, wave, dt)
        if not np.isfinite(resid):
            return MarchResult("diverged", it, resid, history)
        if resid0 is None:
            resid0 = max(resid, 1e-300)
        elif resid > diverge_factor * resid0:
            return MarchResult("diverged", it, resid, history)
        if resid < tol:
            return MarchResult("converged", it, resid, history)
        if resid < 0.99 * best:
            best = resid
            best_it = it
        elif stall_window and it - best_it >= stall_window:
            return MarchResult("stalled", it, resid, history)
    return MarchResult("max_iterations", it, resid, history)


def advance_time(system, coeffs_list, t_final, *, cfl=0.3):
    """March an unsteady problem to exactly ``t_final``."""
    t = 0.0
    system.apply_hooks(coeffs_list)
    while t < t_final - 1e-14:
        dt = min(system.stable_dt(coeffs_list, cfl), t_final - t)
        k = [system.rhs(coeffs_list)]
        for i in range(1, N_STAGES):
            stage = [c.copy() for c in coeffs_list]
            for aij, kj in zip(RK_A[i], k):
                if aij != 0.0:
                    for s, r in zip(stage, kj):
                        s += dt * aij * r
            system.apply_hooks(stage)
            k.append(system.rhs(stage))
        for bi, ki in zip(RK_B, k):
            if bi != 0.0:
                for c, r in zip(coeffs_list, ki):
                    c += dt * bi * r
        system.apply_hooks(coeffs_list)
        t += dt
    return t


def save_checkpoint(path, coeffs_list, block_names, meta=None):
    """Write coefficients (bit-exact float64) plus a JSON sidecar."""
    os.makedirs(path, exist_ok=True)
    for name, c in zip(block_names, coeffs_list):
        np.save(os.path.join(path, f"coeffs_{name}.npy"),
                np.ascontiguousarray(c, dtype=np.float64))
    side = {"blocks": [{"name": n, "shape": list(c.shape)}
                       for n, c in zip(block_names, coeffs_list)]}
    side.update(meta or {})
    with open(os.path.join(path, "checkpoint.json"), "w") as fh:
        json.dump(side, fh, indent=1)


def load_checkpoint(path):
    """Read a checkpoint directory back; returns (coeffs_list, meta)."""
    with open(os.path.join(path, "checkpoint.json")) as fh:
        meta = json.load(fh)
    coeffs = [np.load(os.path.join(path, f"coeffs_{b['name']}.npy"))
              for b in meta["blocks"]]
    for b, c in zip(meta["blocks"], coeffs):
        if list(c.shape) != b["shape"]:
            raise ValueError(
                f"checkpoint block {b['name']!r}: shape {list(c.shape)} "
                f"does not match sidecar {b['shape']}")
    return coeffs, meta
