"""Integrating-factor IMEX time stepping.

The stiff part ``L = -|xi|^2`` (times J_k on the truncated level) is
integrated exactly through E = exp(L dt); transport, chemotaxis, reaction,
buoyancy and sources are explicit. ``if_rk2`` is the integrating-factor
Heun scheme (second order), ``if_euler`` its first-order sibling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .diagnostics import DiagnosticsRecord, compute_record
from .spectral import Grid
from .system import State, SystemOperator, SystemParams

log = logging.getLogger(__name__)

SCHEMES = ("if_rk2", "if_euler")
MAX_HALVINGS = 10
OVERFLOW = 1e150


class BlowUp(RuntimeError):
    """Raised by ``step`` when a step produces NaN/inf or overflows."""

    def __init__(self, time: float, norms: dict):
        self.time = time
        self.norms = norms
        desc = ", ".join(f"{k}={v:.3e}" for k, v in norms.items())
        super().__init__(f"blow-up at t={time:.6g} ({desc})")


@dataclass
class IntegratorConfig:
    """Time-stepping controls.

    ``dt=None`` selects the adaptive CFL step (capped by ``dt_max``).
    Diagnostics are sampled at t = 0, every ``sample_every`` steps, and at
    ``t_end``.
    """

    dt: Optional[float] = None
    t_end: float = 1.0
    cfl_safety: float = 0.4
    dt_max: float = 1e-2
    sample_every: int = 1
    scheme: str = "if_rk2"
    clip_negative: bool = False
    keep_states: bool = True
    diagnostics: bool = True
    s_list: Tuple[float, ...] = (1, 2)

    def __post_init__(self):
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError(f"sample_every must be a positive integer, got {self.sample_every}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        self.sample_every = int(self.sample_every)
        self.s_list = tuple(self.s_list)

    def with_(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass
class Trajectory:
    samples: List[Tuple[float, Optional[State]]] = field(default_factory=list)
    records: List[DiagnosticsRecord] = field(default_factory=list)
    failed: bool = False
    message: str = ""
    warnings: List[str] = field(default_factory=list)
    n_steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def final(self) -> Optional[State]:
        return self.samples[-1][1] if self.samples else None

    def states(self) -> List[State]:
        return [s for _, s in self.samples]


class Stepper:
    """Caches the operator and the exponential factors for repeated steps."""

    def __init__(self, grid: Grid, params: SystemParams, scheme: str = "if_rk2"):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        self.grid = grid
        self.op = SystemOperator(grid, params)
        self.scheme = scheme
        self._E_dt = None
        self._E = None

    def factor(self, dt: float) -> np.ndarray:
        if dt != self._E_dt:
            self._E = np.exp(self.op.linear * dt)
            self._E_dt = dt
        return self._E

    def advance_hat(self, y_hat: np.ndarray, t: float, dt: float) -> np.ndarray:
        E = self.factor(dt)
        nl = self.op.nonlinear_hat
        N0 = nl(y_hat, t)
        if self.scheme == "if_euler":
            return E * (y_hat + dt * N0)
        y_star = E * (y_hat + dt * N0)
        N1 = nl(y_star, t + dt)
        return E * y_hat + 0.5 * dt * (E * N0 + N1)


def _norms(grid: Grid, y_hat: np.ndarray) -> dict:
    with np.errstate(all="ignore"):
        y = grid.inverse(y_hat)
        return {"max|n|": float(np.max(np.abs(y[0]))), "max|c|": float(np.max(np.abs(y[1]))),
                "max|u|": float(np.max(np.abs(y[2:4])))}


def _healthy(y_hat: np.ndarray) -> bool:
    with np.errstate(all="ignore"):
        return bool(np.all(np.isfinite(y_hat)) and np.max(np.abs(y_hat)) < OVERFLOW)


def step(state: State, params: SystemParams, dt: float, scheme: str = "if_rk2") -> State:
    """One integrating-factor step; raises ``BlowUp`` on NaN/overflow."""
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    g = state.grid
    stepper = Stepper(g, params, scheme)
    with np.errstate(all="ignore"):
        y1 = stepper.advance_hat(g.forward(state.stacked()), state.time, dt)
    if not _healthy(y1):
        raise BlowUp(state.time, _norms(g, g.forward(state.stacked())))
    return State.from_stacked(g, g.inverse(y1), state.time + dt)


def cfl_dt(state: State, grid: Grid, cfl_safety: float = 0.4, dt_max: float = 1e-2,
           params: Optional[SystemParams] = None) -> float:
    """safety * dx / max(1e-12, |u|_inf, |grad(c * rho)|_inf), capped at dt_max."""
    u_inf = float(np.max(np.hypot(state.u[0], state.u[1])))
    c_hat = grid.forward(state.c)
    if params is not None and params.level != "full":
        c_hat = c_hat * grid.mollifier_symbol(params.eps)
    gc = grid.inverse(grid.gradient_hat(c_hat))
    gc_inf = float(np.max(np.hypot(gc[0], gc[1])))
    speed = max(1e-12, u_inf, gc_inf)
    return min(cfl_safety * grid.dx / speed, dt_max)


def run(initial: State, params: SystemParams, cfg: IntegratorConfig,
        monitors: Optional[Iterable[Callable[[State], None]]] = None) -> Trajectory:
    """Integrate from ``initial.time`` to ``initial.time + cfg.t_end``.

    Blow-up halves the step up to ten times before aborting; the returned
    trajectory then carries ``failed=True`` and everything sampled so far.
    """
    g = initial.grid
    monitors = list(monitors or ())
    stepper = Stepper(g, params, cfg.scheme)
    traj = Trajectory()
    t0 = float(initial.time)
    t_final = t0 + cfg.t_end
    y_hat = g.forward(initial.stacked())
    scale = max(float(np.max(np.abs(initial.n))), float(np.max(np.abs(initial.c))), 0.0)
    neg_tol = -1e-8 * scale
    c0_inf = float(np.max(np.abs(initial.c)))
    c_peak = c0_inf

    def sample(state: State):
        nonlocal c_peak
        traj.samples.append((state.time, state if cfg.keep_states else None))
        if cfg.diagnostics:
            rec = compute_record(state, params, cfg.s_list)
            traj.records.append(rec)
            elapsed = state.time - t0
            if rec.linf_c > c0_inf * (1 + 1e-6 * max(elapsed, 1.0)) and rec.linf_c > c_peak:
                msg = f"t={state.time:.6g}: max|c| rose to {rec.linf_c:.6g} from {c0_inf:.6g}"
                log.info(msg)
                traj.warnings.append(msg)
            c_peak = max(c_peak, rec.linf_c)
        for m in monitors:
            m(state)

    sample(State(g, initial.n, initial.c, initial.u, t0))
    t = t0
    i = 0
    while t_final - t > 1e-12 * max(1.0, abs(t_final)):
        if cfg.dt is None:
            cur = State.from_stacked(g, g.inverse(y_hat), t)
            dt = cfl_dt(cur, g, cfg.cfl_safety, cfg.dt_max, params)
        else:
            dt = cfg.dt
        if t + dt > t_final or t_final - (t + dt) < 1e-9 * dt:
            dt = t_final - t
        with np.errstate(all="ignore"):
            y_new = stepper.advance_hat(y_hat, t, dt)
            halvings = 0
            while not _healthy(y_new) and halvings < MAX_HALVINGS:
                halvings += 1
                dt *= 0.5
                y_new = stepper.advance_hat(y_hat, t, dt)
        if not _healthy(y_new):
            err = BlowUp(t, _norms(g, y_hat))
            traj.failed = True
            traj.message = str(err)
            log.warning(traj.message)
            break
        if halvings:
            traj.warnings.append(f"t={t:.6g}: step halved {halvings} time(s)")
        t_next = t_final if (dt == t_final - t) else t + dt
        y_hat = y_new
        i += 1
        t = t_next
        at_end = t_final - t <= 1e-12 * max(1.0, abs(t_final))
        if cfg.clip_negative or i % cfg.sample_every == 0 or at_end:
            y = g.inverse(y_hat)
            if cfg.clip_negative and (y[0].min() < 0 or y[1].min() < 0):
                y[0:2] = np.maximum(y[0:2], 0.0)
                y_hat = g.forward(y)
            mins = float(y[0].min()), float(y[1].min())
            if min(mins) < neg_tol:
                traj.warnings.append(
                    f"t={t:.6g}: positivity violated (min n={mins[0]:.3e}, min c={mins[1]:.3e})")
            if i % cfg.sample_every == 0 or at_end:
                sample(State.from_stacked(g, y, t))
    traj.n_steps = i
    return traj


def velocity_energy_residual(traj: Trajectory, params: SystemParams) -> float:
    """|1/2||u(T)||^2 - 1/2||u(0)||^2 + int ||grad u||^2 - int (n grad phi, u)|.

    Time integrals use the trapezoid rule over the stored samples, so the
    residual is O(dt^2) only when every step is sampled.
    """
    states = traj.states()
    if not states or states[0] is None:
        raise ValueError("energy residual needs stored states")
    g = states[0].grid
    t = traj.times
    diss, work = [], []
    grad_phi = None if params.phi is None else g.gradient(params.phi)
    rho = None if params.level == "full" else g.mollifier_symbol(params.eps)
    for s in states:
        u_hat = g.forward(s.u)
        diss.append(g.area * float(np.sum(g.k_squared * np.abs(u_hat) ** 2)))
        if grad_phi is None:
            work.append(0.0)
        else:
            force = s.n * grad_phi
            if rho is not None:
                force = np.stack([g.inverse(rho * g.forward(f)) for f in force])
            work.append(g.inner(force[0], s.u[0]) + g.inner(force[1], s.u[1]))
    kin = [0.5 * (g.inner(s.u[0], s.u[0]) + g.inner(s.u[1], s.u[1])) for s in (states[0], states[-1])]
    return abs(kin[1] - kin[0] + trapezoid(diss, t) - trapezoid(work, t))


def sample_times(traj: Trajectory) -> Sequence[float]:
    return [t for t, _ in traj.samples]
