"""Linearized flows along stored trajectories.

``jacobian_apply`` propagates a state variation with the same exponential
Euler rule as the primal solver, reusing the stored states and stored
mollified noise increments, so it is the exact derivative of the discrete
flow map (finite differences converge to it at first order in the step).

``malliavin_derivative`` is the derivative of the flow with respect to a
noise-shift direction.  Each slice of the shift enters the state exactly the
way a noise increment does, and the accumulated sum

    sum_k  J_{t_k -> t} ( G(u(t_k)) smooth(h(t_k)) ) dt

is evaluated with a single forward linearized sweep (the inhomogeneous
linearized equation), injections added as the sweep passes each slice.
"""

from __future__ import annotations

import numpy as np

from .equations import EquationSpec
from .grids import Field
from .noise import ShiftPath
from .solver import FlowOutcome, get_workspace

__all__ = ["jacobian_apply", "tangent_sweep", "malliavin_derivative"]


def _require_covering(outcome: FlowOutcome, s: float, t: float):
    if not outcome.alive:
        raise ValueError("linearization requires a live trajectory")
    if s < outcome.s - 1e-12 or t > outcome.t + 1e-12:
        raise ValueError(f"[{s}, {t}] not covered by trajectory [{outcome.s}, {outcome.t}]")


def _tangent_step(x, u, dwe, spec: EquationSpec, ws):
    df_x = spec.drift_jvp(u, x, ws)
    dg = spec.dg_values(u)
    x_new = ws.heat_step(x + ws.dt * df_x)
    if dg is not None:
        x_new = x_new + dg * x * dwe
    return x_new


def jacobian_apply(outcome: FlowOutcome, v: Field, s: float, t: float,
                   spec: EquationSpec) -> Field:
    """Derivative of the flow in its initial state: J_{s,t} v along ``outcome``."""
    _require_covering(outcome, s, t)
    if v.grid != outcome.grid or v.m != outcome.m:
        raise ValueError("tangent vector incompatible with trajectory")
    ws = get_workspace(outcome.grid, outcome.dt, spec)
    j_s = outcome.time_index(s)
    j_t = outcome.time_index(t)
    x = v.values.copy()
    for j in range(j_s, j_t):
        x = _tangent_step(x, outcome.fields[j], outcome.noise_terms[j], spec, ws)
    return Field(outcome.grid, x)


def tangent_sweep(outcome: FlowOutcome, v: Field, s: float, t: float,
                  spec: EquationSpec) -> np.ndarray:
    """All intermediate values J_{s, s+j dt} v, shape (J+1, m, spatial)."""
    _require_covering(outcome, s, t)
    ws = get_workspace(outcome.grid, outcome.dt, spec)
    j_s = outcome.time_index(s)
    j_t = outcome.time_index(t)
    out = np.empty((j_t - j_s + 1,) + outcome.fields.shape[1:])
    x = v.values.copy()
    out[0] = x
    for j in range(j_s, j_t):
        x = _tangent_step(x, outcome.fields[j], outcome.noise_terms[j], spec, ws)
        out[j - j_s + 1] = x
    return out


def malliavin_derivative(outcome: FlowOutcome, h: ShiftPath, t: float,
                         spec: EquationSpec) -> Field:
    """Directional derivative of the flow at time ``t`` along the shift ``h``.

    One forward sweep of the inhomogeneous linearized equation; the result is
    the exact derivative of the discrete flow under w -> w + delta h at
    delta = 0.
    """
    _require_covering(outcome, outcome.s, t)
    if outcome.s != 0.0:
        raise ValueError("noise derivatives are taken along trajectories started at time 0")
    if h.grid != outcome.grid or h.dt != outcome.dt:
        raise ValueError("shift incompatible with trajectory")
    ws = get_workspace(outcome.grid, outcome.dt, spec)
    j_t = outcome.time_index(t)
    dt = outcome.dt
    acc = np.zeros_like(outcome.fields[0])
    for j in range(j_t):
        u = outcome.fields[j]
        acc = _tangent_step(acc, u, outcome.noise_terms[j], spec, ws)
        hj = ws.smooth_increment(h.values[j])
        g = spec.g_values(u)
        acc = acc + (hj if g is None else g * hj) * dt
    return Field(outcome.grid, acc)
