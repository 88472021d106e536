"""Flow maps for the supported equations, with blow-up handled as data.

The stepper is exponential Euler: the heat part is applied exactly through
mode multipliers exp(-|2 pi k / L|^2 dt), the drift explicitly, and the noise
increment (spatially mollified at the equation's eps) is injected after the
linear flow:

    u_{k+1} = E (u_k + dt F(u_k)) + G(u_k) * smooth(dW_k)

Blow-up is detected through a running monitor (the dyadic Hoelder proxy at
the equation's monitor exponent) and through non-finite values; once a
trajectory is dead it stays dead, and evolving the dead state returns the
dead state for any input.

Everything here is deterministic: two evolutions from identical inputs agree
bit for bit, which is what makes the semigroup and noise-locality checks
exact rather than approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equations import EquationSpec
from .grids import Field, Grid, holder_proxy_norm, _dyadic_masks, _spatial_axes
from .noise import NoisePath

__all__ = [
    "DEAD",
    "DeadState",
    "FlowOutcome",
    "evolve",
    "r_monitor",
    "check_semigroup",
]


class DeadState:
    """Absorbing state of blown-up trajectories; a singleton, ``DEAD``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DEAD"


DEAD = DeadState()


class _Workspace:
    """Precomputed mode-space data for one (grid, dt, equation) combination."""

    def __init__(self, grid: Grid, dt: float, spec: EquationSpec):
        self.grid = grid
        self.dt = dt
        self.axes = _spatial_axes(grid)
        if grid.dim == 1:
            self.fft = lambda a: np.fft.fft(a, axis=-1)
            self.ifft = lambda a: np.fft.ifft(a, axis=-1)
        else:
            self.fft = lambda a: np.fft.fftn(a, axes=self.axes)
            self.ifft = lambda a: np.fft.ifftn(a, axes=self.axes)
        lam = grid.wavenumbers_sq()
        self.decay = np.exp(-lam * dt)
        self.moll = None if spec.eps == 0.0 else spec.mollifier.multiplier(grid, spec.eps)
        self.shell_masks = _dyadic_masks(grid.dim, grid.n)
        self.shell_weights = 2.0 ** (spec.monitor_eta * np.arange(self.shell_masks.shape[0]))
        self._shell_sel = self.shell_masks[:, None, ...]
        if spec.kind == "kpz1d":
            k = grid.frequencies()[0]
            self.deriv = (1j * 2.0 * np.pi / grid.extent[0]) * k
            self.dealias = np.abs(k) <= grid.n // 3
        else:
            self.deriv = None
            self.dealias = None

    def heat_step(self, arr: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(arr) * self.decay).real

    def smooth_increment(self, dw: np.ndarray) -> np.ndarray:
        if self.moll is None:
            return dw
        return self.ifft(self.fft(dw) * self.moll).real

    def dealiased_gradient(self, u: np.ndarray) -> np.ndarray:
        modes = np.fft.fft(u, axis=-1)
        return np.fft.ifft(modes * (self.deriv * self.dealias), axis=-1).real

    def monitor(self, u: np.ndarray) -> float:
        """Running-monitor integrand: the dyadic proxy norm at monitor_eta."""
        blocks = self.ifft(self._shell_sel * self.fft(u)[None, ...]).real
        sup = np.max(np.abs(blocks).reshape(self.shell_masks.shape[0], -1), axis=1)
        return float(np.max(self.shell_weights * sup))


_WORKSPACES: dict = {}


def get_workspace(grid: Grid, dt: float, spec: EquationSpec) -> _Workspace:
    key = (grid, dt, spec.kind, spec.eps, spec.monitor_eta)
    ws = _WORKSPACES.get(key)
    if ws is None:
        ws = _Workspace(grid, dt, spec)
        _WORKSPACES[key] = ws
    return ws


@dataclass(frozen=True)
class FlowOutcome:
    """Result of one evolution: a trajectory with its monitor trace, or death.

    ``fields`` holds the states at every visited grid time that was still
    alive (shape (J+1, m, spatial)); ``noise_terms`` the mollified increments
    actually injected (shape (J, m, spatial)), kept so linearizations can be
    replayed along the exact same path.
    """

    grid: Grid
    m: int
    s: float
    t: float
    dt: float
    alive: bool
    blow_up_time: float | None
    reason: str | None
    fields: np.ndarray
    monitor_trace: np.ndarray
    noise_terms: np.ndarray

    def __post_init__(self):
        for name in ("fields", "monitor_trace", "noise_terms"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_stored(self) -> int:
        return self.fields.shape[0]

    def time_index(self, time: float) -> int:
        k = (time - self.s) / self.dt
        kr = round(k)
        if abs(k - kr) > 1e-9 or kr < 0 or kr >= self.n_stored:
            raise ValueError(f"time {time} not stored on [{self.s}, {self.t}]")
        return int(kr)

    def field_at(self, time: float) -> Field:
        return Field(self.grid, self.fields[self.time_index(time)])

    @property
    def final(self) -> Field:
        if not self.alive:
            raise ValueError("dead trajectory has no final state")
        return Field(self.grid, self.fields[-1])

    @property
    def final_or_dead(self):
        return self.final if self.alive else DEAD


def _dead_outcome(grid, m, s, t, dt, time, reason, fields, trace, noise):
    return FlowOutcome(grid=grid, m=m, s=s, t=t, dt=dt, alive=False,
                       blow_up_time=time, reason=reason,
                       fields=np.asarray(fields), monitor_trace=np.asarray(trace),
                       noise_terms=np.asarray(noise))


def evolve(u0, w: NoisePath, s: float, t: float, spec: EquationSpec) -> FlowOutcome:
    """Run the flow map from time s to time t along the noise ``w``.

    ``u0`` may be a Field or the DEAD state; evolving DEAD yields DEAD.
    Both s and t must sit on the noise grid, with s <= t <= 1.
    """
    k_s = w.time_index(s)
    k_t = w.time_index(t)
    if k_s > k_t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if t > 1.0 + 1e-12:
        raise ValueError(f"flow maps are defined up to time 1, got t={t}")
    grid, dt = w.grid, w.dt
    shape = (w.m,) + grid.shape

    if isinstance(u0, DeadState):
        empty = np.zeros((0,) + shape)
        return _dead_outcome(grid, w.m, s, t, dt, s, "dead_input",
                             empty, np.zeros(0), np.zeros((0,) + shape))

    if not isinstance(u0, Field):
        raise TypeError(f"u0 must be a Field or DEAD, got {type(u0)!r}")
    if u0.grid != grid or u0.m != w.m:
        raise ValueError("initial state incompatible with the noise path")
    if grid.dim != spec.dim or w.m != spec.m:
        raise ValueError(f"{spec.kind} expects dim={spec.dim}, m={spec.m}")

    ws = get_workspace(grid, dt, spec)
    g_min = spec.g_min

    u = u0.values.copy()
    fields = [u.copy()]
    r = ws.monitor(u)
    trace = [r]
    noise_terms = []

    def finish_dead(time, reason):
        return _dead_outcome(grid, w.m, s, t, dt, time, reason,
                             np.stack(fields), np.array(trace),
                             np.stack(noise_terms) if noise_terms else np.zeros((0,) + shape))

    if r > spec.r_blowup:
        return finish_dead(s, "monitor_threshold")

    for k in range(k_s, k_t):
        g = spec.g_values(u)
        if g is not None and np.min(g) < g_min:
            return finish_dead(s + (k - k_s) * dt, "nondegenerate")
        dwe = ws.smooth_increment(w.increments[k])
        f_drift = spec.drift(u, ws)
        gain = dwe if g is None else g * dwe
        u = ws.heat_step(u + dt * f_drift) + gain
        noise_terms.append(dwe)
        time_next = s + (k - k_s + 1) * dt
        if not np.isfinite(u).all():
            return finish_dead(time_next, "non_finite")
        r = max(r, ws.monitor(u))
        if r > spec.r_blowup:
            return finish_dead(time_next, "monitor_threshold")
        fields.append(u)
        trace.append(r)

    return FlowOutcome(grid=grid, m=w.m, s=s, t=t, dt=dt, alive=True,
                       blow_up_time=None, reason=None,
                       fields=np.stack(fields), monitor_trace=np.array(trace),
                       noise_terms=np.stack(noise_terms) if noise_terms else np.zeros((0,) + shape))


def r_monitor(outcome: FlowOutcome, time: float, eta: float) -> float:
    """Running maximum of the Hoelder proxy at exponent ``eta`` up to ``time``.

    Nondecreasing in ``time``; +inf once the trajectory is dead.
    """
    if not outcome.alive and outcome.blow_up_time is not None and time >= outcome.blow_up_time - 1e-12:
        return math.inf
    k = round((time - outcome.s) / outcome.dt)
    if abs((time - outcome.s) / outcome.dt - k) > 1e-9 or k < 0:
        raise ValueError(f"time {time} off the trajectory grid")
    if k >= outcome.n_stored:
        raise ValueError(f"time {time} beyond the stored trajectory")
    k = int(k)
    vals = [holder_proxy_norm(Field(outcome.grid, outcome.fields[j]), eta) for j in range(k + 1)]
    return float(max(vals))


def check_semigroup(u0, w: NoisePath, s: float, t: float, r: float, spec: EquationSpec) -> float:
    """Max deviation between the one-shot flow s -> r and the composition
    through t.  Deterministic stepping makes this exactly zero, including the
    dead-absorption cases."""
    if not (s <= t <= r):
        raise ValueError("need s <= t <= r")
    whole = evolve(u0, w, s, r, spec)
    first = evolve(u0, w, s, t, spec)
    second = evolve(first.final_or_dead, w, t, r, spec)
    if not whole.alive and not second.alive:
        return 0.0
    if whole.alive != second.alive:
        return math.inf
    return float(np.max(np.abs(whole.final.values - second.final.values)))
