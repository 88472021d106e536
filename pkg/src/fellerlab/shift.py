"""Compensating noise shifts.

Given two nearby initial states u and u_bar and one noise realization, this
module builds a shift h of the noise, supported on [t/2, t], such that the
solution from u_bar under the shifted noise lands on the solution from u at
time t.  The construction integrates an ODE in the artificial parameter
gamma that moves the initial state from u to u_bar at unit speed while
accumulating, slice by slice, minus the transfer direction returned by
:func:`compensating_direction`.

Guard rails mirror the structure of the underlying argument:

* a running per-slice cutoff freezes slice s once the monitor at time s has
  ever exceeded twice the cutoff scale R (frozen slices stop moving but the
  remaining slices continue, so restricting h to [0, s) only ever depends on
  the noise before s);
* each gamma increment is clamped slice-wise so the Cameron-Martin norm of
  the final shift can never exceed M * gamma, whatever the dynamics did.

``verify_coupling`` measures how well the built shift actually couples the
two solutions; everything downstream treats that residual as data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equations import EquationSpec
from .grids import Field, l2_norm
from .noise import NoisePath, ShiftPath, apply_shift, cm_norm_sq, splice
from .solver import FlowOutcome, evolve, get_workspace
from .tangent import _tangent_step

__all__ = [
    "NondegeneracyError",
    "CouplingParams",
    "ShiftResult",
    "bump_chi",
    "cutoff_chi",
    "compensating_direction",
    "build_shift",
    "verify_coupling",
    "adaptedness_check",
]

NORM_BOUND_SLACK = 1e-9


class NondegeneracyError(ValueError):
    """Raised when the noise coefficient drops below its configured floor."""


def bump_chi(s: float) -> float:
    """Unit-mass profile concentrated on the second half of [0, 1].

    Equals 2 on [1/2, 1] and 0 elsewhere, so it vanishes on [0, 1/4] and its
    Riemann sums on power-of-two grids equal 1 exactly.
    """
    if s < 0.0 or s > 1.0:
        raise ValueError(f"argument must be in [0, 1], got {s}")
    return 2.0 if s >= 0.5 else 0.0


def cutoff_chi(r: float) -> float:
    """Monotone C^1 cutoff: 1 on [0, 1], 0 on [2, inf), smoothstep between."""
    if r < 0.0:
        raise ValueError(f"argument must be >= 0, got {r}")
    if r <= 1.0:
        return 1.0
    if r >= 2.0:
        return 0.0
    x = r - 1.0
    return 1.0 - 3.0 * x * x + 2.0 * x * x * x


@dataclass(frozen=True)
class CouplingParams:
    """Knobs of the shift construction.

    M bounds the Cameron-Martin norm of the shift per unit of initial-state
    distance; R is the monitor scale at which slices start to freeze;
    k_gamma the number of Euler steps in gamma; tol the absolute coupling
    tolerance used by the harness (None picks 1e-3 * gamma).
    """

    m_bound: float
    k_gamma: int
    cutoff_r: float = 1e9
    tol: float | None = None

    def __post_init__(self):
        if self.m_bound <= 0 or self.cutoff_r <= 0 or self.k_gamma < 1:
            raise ValueError("need m_bound > 0, cutoff_r > 0, k_gamma >= 1")


@dataclass(frozen=True)
class ShiftResult:
    """Outcome of the gamma integration.

    status is 'completed' (reached u_bar with every slice live), 'frozen'
    (some slice hit the cutoff, gamma_star records the first event), or
    'dead' (the very first evolution blew up before t, h is zero).
    """

    h: ShiftPath
    gamma_target: float
    gamma_reached: float
    status: str
    gamma_star: float | None
    cm_norm: float
    a_bound_used: float
    cutoff_r: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cm_norm > self.a_bound_used * self.gamma_reached + NORM_BOUND_SLACK:
            raise RuntimeError(
                f"norm bound violated: |h| = {self.cm_norm} > "
                f"M * gamma = {self.a_bound_used * self.gamma_reached}"
            )


def _partial_sweep(outcome: FlowOutcome, v_values: np.ndarray, spec: EquationSpec) -> np.ndarray:
    """Tangent values along the stored (possibly truncated) trajectory."""
    ws = get_workspace(outcome.grid, outcome.dt, spec)
    steps = min(outcome.n_stored - 1, outcome.noise_terms.shape[0])
    out = np.empty((steps + 1,) + outcome.fields.shape[1:])
    x = v_values.copy()
    out[0] = x
    for j in range(steps):
        x = _tangent_step(x, outcome.fields[j], outcome.noise_terms[j], spec, ws)
        out[j + 1] = x
    return out


def compensating_direction(outcome: FlowOutcome, v: Field, t: float,
                           spec: EquationSpec) -> ShiftPath:
    """Noise direction equivalent to the state variation v at time t.

    Slice k carries (1/t) chi(t_k / t) G(u(t_k))^{-1} times the tangent value
    transported to the end of that slice, so injecting the returned path into
    the linearized flow reproduces J_{0,t} v exactly for the discrete stepper.
    Fails fast when G drops below the configured floor.
    """
    if not outcome.alive:
        raise ValueError("compensating direction requires a live trajectory")
    if outcome.s != 0.0:
        raise ValueError("transfer paths are built from time 0")
    k_t = outcome.time_index(t)
    if k_t < 1:
        raise ValueError("need t > 0 on the trajectory grid")
    sweep = _partial_sweep(outcome, v.values, spec)
    values = np.zeros((k_t,) + outcome.fields.shape[1:])
    _fill_transfer_slices(values, outcome, sweep, k_t, t, spec, upto=k_t)
    # full path length: pad to the trajectory's noise grid when embedded later
    return ShiftPath(outcome.grid, outcome.dt, values)


def _fill_transfer_slices(values, outcome, sweep, k_t, t, spec, upto):
    """Write (1/t) chi(k/k_t) G^{-1}(u_k) sweep[k+1] into values[k] for k < upto."""
    g_min = spec.g_min
    for k in range(min(upto, sweep.shape[0] - 1, k_t)):
        chi = bump_chi(k / k_t)
        if chi == 0.0:
            continue
        u_k = outcome.fields[k]
        g = spec.g_values(u_k)
        if g is not None and np.min(g) < g_min:
            raise NondegeneracyError(f"noise coefficient below g_min={g_min} at slice {k}")
        contrib = sweep[k + 1] if g is None else sweep[k + 1] / g
        values[k] = (chi / t) * contrib


def build_shift(u: Field, u_bar: Field, w: NoisePath, t: float, spec: EquationSpec,
                params: CouplingParams) -> ShiftResult:
    """Integrate the coupling ODE from u to u_bar and return the shift.

    Explicit Euler in gamma over ``params.k_gamma`` steps; each step evolves
    the current initial state under the currently shifted noise, updates the
    per-slice cutoffs from the monitor trace, and accumulates minus the
    transfer direction on every still-live slice.
    """
    if not isinstance(u, Field) or not isinstance(u_bar, Field):
        raise TypeError("build_shift couples two live states")
    k_t = w.time_index(t)
    if k_t < 2 or t > 1.0 + 1e-12:
        raise ValueError("need t in (0, 1] with at least two slices")
    grid, dt = w.grid, w.dt
    shape = (w.m,) + grid.shape
    h_values = np.zeros((w.n_steps,) + shape)

    gamma_target = l2_norm(u_bar - u)
    if gamma_target == 0.0:
        return ShiftResult(h=ShiftPath(grid, dt, h_values), gamma_target=0.0,
                           gamma_reached=0.0, status="completed", gamma_star=None,
                           cm_norm=0.0, a_bound_used=params.m_bound,
                           cutoff_r=params.cutoff_r, diagnostics={"monitor_per_step": []})

    v = (u_bar - u) * (1.0 / gamma_target)
    d_gamma = gamma_target / params.k_gamma
    m_bound, cutoff_r = params.m_bound, params.cutoff_r

    chi_over_t = np.array([bump_chi(k / k_t) / t for k in range(k_t)])
    support = chi_over_t > 0
    support_measure = float(np.sum(support)) * dt
    slice_cap = m_bound / math.sqrt(support_measure)  # L2 cap per slice of dh/dgamma

    vol = grid.cell_volume
    cutoffs = np.ones(k_t)
    monitor_per_step = []
    min_cutoff_per_step = []
    clamp_events = 0
    gamma = 0.0
    gamma_star = None
    steps_done = 0

    for step in range(params.k_gamma):
        u_gamma = u + gamma * v
        shifted = apply_shift(w, ShiftPath(grid, dt, h_values))
        out = evolve(u_gamma, shifted, 0.0, t, spec)

        if not out.alive and step == 0:
            return ShiftResult(h=ShiftPath(grid, dt, np.zeros_like(h_values)),
                               gamma_target=gamma_target, gamma_reached=0.0,
                               status="dead", gamma_star=None, cm_norm=0.0,
                               a_bound_used=m_bound, cutoff_r=cutoff_r,
                               diagnostics={"monitor_per_step": [math.inf],
                                            "reason": out.reason})

        # refresh per-slice running cutoffs from this trajectory's monitor
        trace = out.monitor_trace
        n_live = min(trace.shape[0], k_t)
        step_cut = np.zeros(k_t)
        for k in range(n_live):
            step_cut[k] = cutoff_chi(trace[k] / cutoff_r)
        new_cutoffs = np.minimum(cutoffs, step_cut)
        if gamma_star is None and np.any((new_cutoffs == 0.0) & support):
            gamma_star = gamma
        cutoffs = new_cutoffs
        monitor_per_step.append(float(trace[-1]) if out.alive else math.inf)
        min_cutoff_per_step.append(float(np.min(cutoffs[support])))

        live = support & (cutoffs > 0.0)
        if not live.any():
            break

        sweep = _partial_sweep(out, v.values, spec)
        a_slices = np.zeros((k_t,) + shape)
        try:
            _fill_transfer_slices(a_slices, out, sweep, k_t, t, spec, upto=n_live)
        except NondegeneracyError:
            # evolve marks these dead; only reachable through the final stored state
            gamma_star = gamma if gamma_star is None else gamma_star
            break

        increment = -d_gamma * a_slices * cutoffs[(...,) + (None,) * (grid.dim + 1)]
        # slice-wise clamp keeps |h| <= M * gamma without looking across slices
        norms = np.sqrt(vol * np.sum(increment.reshape(k_t, -1) ** 2, axis=1))
        cap = slice_cap * d_gamma
        over = norms > cap
        if over.any():
            clamp_events += int(np.sum(over))
            scale = np.ones(k_t)
            scale[over] = cap / norms[over]
            increment = increment * scale[(...,) + (None,) * (grid.dim + 1)]
        h_values[:k_t] += increment
        gamma += d_gamma
        steps_done += 1

    if steps_done == params.k_gamma:
        gamma = gamma_target
    h = ShiftPath(grid, dt, h_values)
    frozen = int(np.sum((cutoffs == 0.0) & support))
    status = "completed" if gamma_star is None and steps_done == params.k_gamma else "frozen"
    return ShiftResult(
        h=h, gamma_target=gamma_target, gamma_reached=gamma,
        status=status, gamma_star=gamma_star,
        cm_norm=math.sqrt(cm_norm_sq(h)), a_bound_used=m_bound, cutoff_r=cutoff_r,
        diagnostics={"monitor_per_step": monitor_per_step, "clamp_events": clamp_events,
                     "frozen_slice_count": frozen, "min_cutoff": float(np.min(cutoffs)),
                     "min_cutoff_per_step": min_cutoff_per_step},
    )


def verify_coupling(u: Field, u_bar: Field, w: NoisePath, h: ShiftPath, t: float,
                    spec: EquationSpec) -> float:
    """Relative coupling residual at time t.

    Evolves u under w and u_bar under the shifted noise and returns the L2
    distance of the endpoints divided by the initial distance; +inf when
    either side dies.
    """
    base = evolve(u, w, 0.0, t, spec)
    moved = evolve(u_bar, apply_shift(w, h), 0.0, t, spec)
    if not (base.alive and moved.alive):
        return math.inf
    gamma = max(l2_norm(u_bar - u), 1e-300)
    return l2_norm(base.final - moved.final) / gamma


def adaptedness_check(u: Field, u_bar: Field, w_a: NoisePath, w_b: NoisePath,
                      s: float, t: float, spec: EquationSpec,
                      params: CouplingParams) -> float:
    """Max deviation of the built shift before time s when the noise is
    replaced beyond s.  The construction only reads each slice's past, so the
    deviation is exactly zero."""
    if not s < t:
        raise ValueError("need s < t")
    k_s = w_a.time_index(s)
    h_a = build_shift(u, u_bar, w_a, t, spec, params).h
    h_b = build_shift(u, u_bar, splice(w_a, w_b, s), t, spec, params).h
    if k_s == 0:
        return 0.0
    return float(np.max(np.abs(h_a.values[:k_s] - h_b.values[:k_s])))
