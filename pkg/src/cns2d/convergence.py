"""Self-convergence sweeps and manufactured-solution order checks.

Every experiment compares trajectories at matching sample times. Rates are
least-squares slopes of log(error) against log(parameter).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import linregress

from .integrator import IntegratorConfig, Trajectory, run
from .manufactured import ManufacturedSolution
from .spectral import Grid
from .system import State, SystemParams, mollify_state

log = logging.getLogger(__name__)

VARIABLES = ("k", "eps", "dt", "N")
InitialSource = Union[State, Callable[[Grid], State]]


@dataclass
class SweepSpec:
    """One-parameter family of runs sharing initial data and everything else.

    ``initial`` is a State, or a callable grid -> State (needed for N
    sweeps). ``compare_s`` gives the Sobolev index per component (n, c, u);
    ``compare_time`` is ``"sup"`` (over common samples) or ``"end"``.
    """

    variable: str
    values: Sequence[float]
    base_params: SystemParams
    base_config: IntegratorConfig
    initial: InitialSource
    grid: Optional[Grid] = None
    compare_s: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    compare_time: str = "sup"
    workers: int = 1

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}, got {self.variable!r}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("values must be a non-empty list")
        d = np.diff(v)
        if v.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"values must be strictly monotone, got {list(self.values)}")
        if self.compare_time not in ("sup", "end"):
            raise ValueError(f"compare_time must be 'sup' or 'end', got {self.compare_time!r}")
        if isinstance(self.compare_s, (int, float)):
            self.compare_s = (float(self.compare_s),) * 3
        if self.grid is None:
            if isinstance(self.initial, State):
                self.grid = self.initial.grid
            elif self.variable != "N":
                raise ValueError("grid is required when initial is a callable")

    def initial_on(self, grid: Grid) -> State:
        if isinstance(self.initial, State):
            if self.initial.grid != grid:
                raise ValueError("a fixed initial State cannot be used on another grid")
            return self.initial
        return self.initial(grid)


@dataclass
class RateFit:
    pairs: List[Tuple[float, float]]
    slope: float
    r_squared: float
    stderr: float = math.nan
    failed: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.array([e for _, e in self.pairs])

    @property
    def parameters(self) -> np.ndarray:
        return np.array([p for p, _ in self.pairs])

    @property
    def defined(self) -> bool:
        return math.isfinite(self.slope)


ROUNDOFF = 1e-12


def fit_rate(params: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Log-log least squares; slope is NaN unless all errors are positive."""
    pairs = [(float(p), float(e)) for p, e in zip(params, errors)]
    p = np.array([q for q, _ in pairs])
    e = np.array([q for _, q in pairs])
    if len(pairs) < 2 or np.any(~np.isfinite(e)) or np.any(e <= 0):
        return RateFit(pairs, math.nan, math.nan)
    if len(pairs) == 2:
        slope = math.log(e[1] / e[0]) / math.log(p[1] / p[0])
        return RateFit(pairs, slope, 1.0)
    res = linregress(np.log(p), np.log(e))
    return RateFit(pairs, float(res.slope), float(res.rvalue ** 2), float(res.stderr))


def state_distance(a: State, b: State, s: Tuple[float, float, float] = (1, 1, 1)) -> float:
    """sqrt(||dn||^2_{H^s0} + ||dc||^2_{H^s1} + ||du||^2_{H^s2})."""
    g = a.grid
    if b.grid != g:
        raise ValueError(f"states on different grids: {a.grid} vs {b.grid}")
    d = g.forward(a.stacked() - b.stacked())
    return math.sqrt(g.sobolev_norm_sq_hat(d[0], s[0]) + g.sobolev_norm_sq_hat(d[1], s[1])
                     + g.sobolev_norm_sq_hat(d[2:4], s[2]))


def _common_samples(a: Trajectory, b: Trajectory):
    tb = b.times
    out = []
    for t, sa in a.samples:
        j = np.flatnonzero(np.isclose(tb, t, rtol=0, atol=1e-9 * max(1.0, abs(t))))
        if j.size:
            out.append((sa, b.samples[j[0]][1]))
    return out


def trajectory_distance(a: Trajectory, b: Trajectory, s=(1, 1, 1), mode: str = "sup") -> float:
    """Distance over common sample times: supremum, or at the last common time."""
    pairs = _common_samples(a, b)
    if not pairs:
        raise ValueError("trajectories share no sample times")
    if mode == "end":
        return state_distance(*pairs[-1], s)
    return max(state_distance(x, y, s) for x, y in pairs)


def _run_job(job) -> Trajectory:
    return run(*job)


def run_many(jobs, workers: int = 1) -> List[Trajectory]:
    """Run (initial, params, cfg) jobs, in a process pool when workers > 1."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def _quiet(cfg: IntegratorConfig) -> IntegratorConfig:
    return cfg.with_(keep_states=True, diagnostics=False)


def _flush(errors: Sequence[float], ref: Trajectory, s) -> List[float]:
    """Zero out errors at round-off level relative to the reference size."""
    g = ref.samples[0][1].grid
    size = max(1.0, max(state_distance(x, State.zeros(g, x.time), s) for x in ref.states()))
    return [0.0 if e <= ROUNDOFF * size else e for e in errors]


def _first_failure(trajs: Sequence[Trajectory], labels) -> Optional[str]:
    for lab, tr in zip(labels, trajs):
        if tr.failed:
            return f"run {lab} failed: {tr.message}"
    return None


def _partial(pairs, msg) -> RateFit:
    log.warning(msg)
    fit = fit_rate(*zip(*pairs)) if len(pairs) >= 2 else RateFit(list(pairs), math.nan, math.nan)
    fit.failed, fit.message = True, msg
    return fit


def cauchy_k_experiment(k_values: Sequence[float], reference_k: float, spec: SweepSpec,
                        mode: str = "annulus") -> RateFit:
    """Truncated-system runs for each k against a reference truncation level.

    The level is forced to ``truncated`` with ``eps`` from ``spec.base_params``
    (0.1 when the base is the full system).
    """
    k_values = list(k_values)
    if reference_k <= max(k_values):
        raise ValueError(f"reference_k ({reference_k}) must exceed max(k_values)")
    base = spec.base_params
    eps = base.eps if base.eps is not None else 0.1
    grid = spec.grid
    init = spec.initial_on(grid)
    cfg = _quiet(spec.base_config)
    ks = k_values + [reference_k]
    jobs = [(init, base.with_(level="truncated", eps=eps, k_trunc=float(k), trunc_mode=mode), cfg)
            for k in ks]
    trajs = run_many(jobs, spec.workers)
    ref = trajs[-1]
    if ref.failed:
        return _partial([], f"reference run k={reference_k} failed: {ref.message}")
    pairs = []
    for k, tr in zip(k_values, trajs[:-1]):
        if tr.failed:
            return _partial(pairs, f"run k={k} failed: {tr.message}")
        pairs.append((float(k), trajectory_distance(tr, ref, spec.compare_s, spec.compare_time)))
    ks, errs = zip(*pairs)
    fit = fit_rate(ks, _flush(errs, ref, spec.compare_s))
    fit.extra["raw"] = list(errs)
    return fit


def eps_stability_experiment(eps_values: Sequence[float], spec: SweepSpec,
                             mollify_initial: bool = False) -> RateFit:
    """Mollified-system runs compared with the smallest-eps run.

    The fit reports both the chosen comparison and, in ``extra``, the
    sup-over-samples and end-time errors. With ``mollify_initial`` each run
    starts from data smoothed at its own eps.
    """
    eps_values = list(eps_values)
    if len(eps_values) < 2 or np.any(np.diff(eps_values) >= 0):
        raise ValueError(f"eps_values must be strictly decreasing, got {eps_values}")
    base = spec.base_params
    init = spec.initial_on(spec.grid)
    cfg = _quiet(spec.base_config)
    jobs = []
    for e in eps_values:
        s0 = mollify_state(init, e) if mollify_initial else init
        jobs.append((s0, base.with_(level="mollified", eps=float(e), k_trunc=None), cfg))
    trajs = run_many(jobs, spec.workers)
    msg = _first_failure(trajs, [f"eps={e}" for e in eps_values])
    ref = trajs[-1]
    if ref.failed:
        return _partial([], msg)
    pairs, sup_e, end_e = [], [], []
    for e, tr in zip(eps_values[:-1], trajs[:-1]):
        if tr.failed:
            return _partial(pairs, msg)
        sup_e.append(trajectory_distance(tr, ref, spec.compare_s, "sup"))
        end_e.append(trajectory_distance(tr, ref, spec.compare_s, "end"))
        pairs.append((float(e), sup_e[-1] if spec.compare_time == "sup" else end_e[-1]))
    es, errs = zip(*pairs)
    fit = fit_rate(es, _flush(errs, ref, spec.compare_s))
    fit.extra.update(sup=sup_e, end=end_e,
                     monotone=bool(all(b < a for a, b in zip(sup_e, sup_e[1:]))))
    return fit


@dataclass
class UniquenessReport:
    dts: List[float]
    distances: List[float]      # between consecutive dt levels
    ratios: List[float]
    failed: bool = False
    message: str = ""


def uniqueness_experiment(spec: SweepSpec) -> UniquenessReport:
    """Sup-in-time H^1 x H^2 x H^1 (default) distance between successive dt levels.

    ``spec.values`` are step sizes; each must divide the first, and the
    sample cadence is scaled so all runs share their sample times.
    """
    if spec.variable != "dt":
        raise ValueError("uniqueness_experiment sweeps dt")
    dts = [float(v) for v in spec.values]
    init = spec.initial_on(spec.grid)
    base_cfg = _quiet(spec.base_config)
    jobs = []
    for dt in dts:
        ratio = dts[0] / dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"dt={dt} does not divide the coarsest step {dts[0]}")
        jobs.append((init, spec.base_params,
                     base_cfg.with_(dt=dt, sample_every=base_cfg.sample_every * int(round(ratio)))))
    trajs = run_many(jobs, spec.workers)
    msg = _first_failure(trajs, [f"dt={d}" for d in dts])
    dist = []
    for a, b in zip(trajs, trajs[1:]):
        if a.failed or b.failed:
            break
        dist.append(trajectory_distance(a, b, spec.compare_s, spec.compare_time))
    ratios = [x / y if y > 0 else math.inf for x, y in zip(dist, dist[1:])]
    return UniquenessReport(dts, dist, ratios, msg is not None, msg or "")


def trajectory_pair_distance(initial: State, params: SystemParams, cfg_a: IntegratorConfig,
                             cfg_b: IntegratorConfig, s=(1, 2, 1)) -> float:
    """Sup distance between two configurations started from the same data."""
    a, b = run(initial, params, _quiet(cfg_a)), run(initial, params, _quiet(cfg_b))
    for tr in (a, b):
        if tr.failed:
            raise RuntimeError(tr.message)
    return trajectory_distance(a, b, s, "sup")


def mms_run(grid: Grid, cfg: IntegratorConfig, kind: str = "unsteady", levels: int = 3,
            phi_amplitude: float = 0.5, spatial_grids: Sequence[int] = (32, 64)) -> RateFit:
    """Temporal order against a manufactured solution, plus a spatial check.

    Errors are max-norm at t_end for dt = cfg.dt / 2^j, j < levels; the
    slope of log error against log dt is the observed order. ``extra``
    holds ``spatial``: the max difference between runs on the
    ``spatial_grids`` (same dt) sampled at common points, which isolates
    the spatial error from the temporal one.
    """
    if cfg.dt is None:
        raise ValueError("mms_run needs a fixed dt")
    ms = ManufacturedSolution(kind, phi_amplitude)
    base = cfg.with_(diagnostics=False, keep_states=True, sample_every=10 ** 9)
    dts = [cfg.dt / 2 ** j for j in range(levels)]
    errors = []
    for dt in dts:
        tr = run(ms.state(grid, 0.0), ms.params(grid), base.with_(dt=dt))
        if tr.failed:
            return _partial(list(zip(dts, errors)), f"mms run dt={dt} failed: {tr.message}")
        errors.append(ms.error(tr.final))
    fit = fit_rate(dts, errors)
    fit.extra["errors"] = errors
    if spatial_grids:
        finals = []
        for n in spatial_grids:
            g = Grid(n, grid.box_length)
            finals.append(run(ms.state(g, 0.0), ms.params(g), base).final)
        coarse = finals[0].grid.n_points
        spatial = []
        for f in finals[1:]:
            stride = f.grid.n_points // coarse
            spatial.append(float(np.max(np.abs(
                f.stacked()[:, ::stride, ::stride] - finals[0].stacked()))))
        fit.extra["spatial"] = spatial
        fit.extra["spatial_grids"] = list(spatial_grids)
    return fit
