"""Run configuration, binary snapshots and the diagnostics CSV.

Config files are INI-style (``configparser``) with a strict schema: unknown
sections or keys, bad values and missing required sections raise
``ConfigError`` carrying the file line number.

Snapshot layout (little-endian)::

    "CNS2"  u32 version=1  u32 N  f64 L  f64 time  f64 eps  u32 k_trunc
    then n, c, u_x, u_y as N*N f64 each, row-major (y outer)

The header is 40 bytes, so a file is exactly 40 + 32 N^2 bytes.
"""
from __future__ import annotations

import configparser
import csv
import math
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord
from .integrator import IntegratorConfig
from .spectral import Grid
from .system import BumpSpec, State, SystemParams, initial_data, potential, velocity_from_stream

MAGIC = b"CNS2"
VERSION = 1
HEADER = struct.Struct("<4sIIdddI")
UNDEFINED_TEXT = "undefined"


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


# ------------------------------------------------------------------ snapshot
@dataclass
class SnapshotMeta:
    level: str
    eps: Optional[float]
    k_trunc: Optional[int]


def write_snapshot(path, state: State, params: Optional[SystemParams] = None) -> None:
    """Atomically write ``state`` (temp file in the same directory, then rename)."""
    g = state.grid
    eps = 0.0 if params is None or params.eps is None else float(params.eps)
    k = 0 if params is None or params.k_trunc is None else int(round(params.k_trunc))
    head = HEADER.pack(MAGIC, VERSION, g.n_points, g.box_length, float(state.time), eps, k)
    body = np.ascontiguousarray(state.stacked(), dtype="<f8").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=".snap-", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(head)
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshot(path):
    """Return (State, SnapshotMeta); raises SnapshotError on any corruption."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise SnapshotError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, L, t, eps, k = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    expected = HEADER.size + 32 * n * n
    if len(data) != expected:
        raise SnapshotError(f"{path}: length {len(data)} != expected {expected}")
    try:
        grid = Grid(n, L)
    except ValueError as exc:
        raise SnapshotError(f"{path}: {exc}") from None
    y = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(4, n, n).astype(float)
    if eps == 0:
        meta = SnapshotMeta("full", None, None)
    elif k > 0:
        meta = SnapshotMeta("truncated", eps, k)
    else:
        meta = SnapshotMeta("mollified", eps, None)
    return State.from_stacked(grid, y, t), meta


# ----------------------------------------------------------------------- csv
def format_value(v: float) -> str:
    return UNDEFINED_TEXT if isinstance(v, float) and math.isnan(v) else "%.17g" % v


def write_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = r.row()
            w.writerow([format_value(row[k]) for k in CSV_COLUMNS])


def read_csv(path) -> Dict[str, np.ndarray]:
    """Columns as float arrays; ``undefined`` cells come back as NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header")
    cols: Dict[str, List[float]] = {k: [] for k in CSV_COLUMNS}
    for row in rows[1:]:
        for k, v in zip(CSV_COLUMNS, row):
            cols[k].append(math.nan if v == UNDEFINED_TEXT else float(v))
    return {k: np.array(v) for k, v in cols.items()}


# -------------------------------------------------------------------- config
def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none") else float(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _dt(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("adaptive", "auto", "") else float(s)


def _floats(s: str) -> List[float]:
    return [float(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return parse


_BUMP_KEYS = {f: float for f in ("n_background", "n_mass", "n_sigma", "c_background",
                                 "c_amplitude", "c_sigma", "u_amplitude", "u_sigma",
                                 "second_mass")}

# section -> key -> (parser, default)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "grid": {"n_points": (int, None), "box_length": (float, 2 * math.pi)},
    "params": {
        "level": (_choice("full", "mollified", "truncated"), "full"),
        "eps": (_opt_float, None),
        "k_trunc": (_opt_float, None),
        "trunc_mode": (_choice("annulus", "lowpass"), "annulus"),
        "potential": (_choice("zero", "cosine"), "zero"),
        "potential_amplitude": (float, 1.0),
        "nonlinear": (_bool, True),
    },
    "integrator": {
        "dt": (_dt, None),
        "t_end": (float, 1.0),
        "cfl_safety": (float, 0.4),
        "dt_max": (float, 1e-2),
        "sample_every": (int, 10),
        "scheme": (_choice("if_rk2", "if_euler"), "if_rk2"),
        "clip_negative": (_bool, False),
        "s_list": (_floats, [1.0, 2.0]),
    },
    "initial": dict({
        "preset": (_choice("zero", "gaussian_bump", "two_bumps", "low_modes", "random",
                           "manufactured"), "gaussian_bump"),
        "seed": (int, 0),
        "mollify": (_opt_float, None),
    }, **{k: (t, None) for k, t in _BUMP_KEYS.items()}),
    "output": {
        "dir": (str, "out"),
        "csv": (str, "diagnostics.csv"),
        "snapshot_every": (int, 0),
    },
    "sweep": {
        "experiment": (_choice("cauchy_k", "eps_stability", "uniqueness"), "cauchy_k"),
        "values": (_floats, None),
        "reference": (float, 128.0),
        "compare_s": (_floats, [1.0]),
        "compare_time": (_choice("sup", "end"), "sup"),
        "workers": (int, 1),
    },
}
REQUIRED = ("grid",)


@dataclass
class InitialSpec:
    preset: str = "gaussian_bump"
    seed: int = 0
    mollify: Optional[float] = None
    bump: Dict[str, float] = field(default_factory=dict)

    def build(self, grid: Grid) -> State:
        if self.preset == "low_modes":
            X, Y = grid.coords
            s = 2 * np.pi / grid.box_length
            psi = 0.2 * np.sin(s * X) * np.sin(s * Y) / s
            st = State(grid, 1 + 0.5 * np.sin(s * X), 1 + 0.3 * np.cos(s * Y),
                       velocity_from_stream(grid, psi))
        elif self.preset == "random":
            from .corpus import random_state_fields
            n, c, psi = random_state_fields(grid, self.seed)
            st = State(grid, n, c, velocity_from_stream(grid, psi))
        elif self.preset == "manufactured":
            st = initial_data("manufactured", grid)
        else:
            st = initial_data(self.preset, grid, BumpSpec(**self.bump))
        if self.mollify:
            from .system import mollify_state
            st = mollify_state(st, self.mollify)
        return st


@dataclass
class OutputSpec:
    dir: str = "out"
    csv: str = "diagnostics.csv"
    snapshot_every: int = 0


@dataclass
class SweepConfig:
    experiment: str = "cauchy_k"
    values: Optional[List[float]] = None
    reference: float = 128.0
    compare_s: tuple = (1.0, 1.0, 1.0)
    compare_time: str = "sup"
    workers: int = 1


@dataclass
class RunConfig:
    grid: Grid
    params: SystemParams
    integrator: IntegratorConfig
    initial: InitialSpec
    output: OutputSpec
    sweep: Optional[SweepConfig] = None
    source: str = "<config>"


def _line_index(text: str) -> Dict[tuple, int]:
    """(section, key) -> line; (section, None) -> header line."""
    where: Dict[tuple, int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a run configuration."""
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        raise ConfigError(f"{source}:{lineno or '?'}: {msg}") from None
    lines = _line_index(text)
    n_lines = len(text.splitlines())

    def fail(section, key, msg):
        no = lines.get((section, key), lines.get((section, None), n_lines + 1))
        raise ConfigError(f"{source}:{no}: {msg}")

    values: Dict[str, Dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            fail(section, None, f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                fail(section, key, f"unknown key '{key}' in [{section}]")
            try:
                values.setdefault(section, {})[key] = SCHEMA[section][key][0](raw)
            except ValueError as exc:
                fail(section, key, f"bad value for '{key}' in [{section}]: {exc}")
    for section in REQUIRED:
        if section not in values and not cp.has_section(section):
            raise ConfigError(f"{source}:{n_lines + 1}: missing required section [{section}]")

    def get(section, key):
        return values.get(section, {}).get(key, SCHEMA[section][key][1])

    if get("grid", "n_points") is None:
        fail("grid", None, "missing required key 'n_points' in [grid]")
    try:
        grid = Grid(get("grid", "n_points"), get("grid", "box_length"))
    except ValueError as exc:
        fail("grid", "n_points", str(exc))

    level = get("params", "level")
    try:
        params = SystemParams(
            level=level, eps=get("params", "eps"), k_trunc=get("params", "k_trunc"),
            phi=potential(get("params", "potential"), grid, get("params", "potential_amplitude")),
            trunc_mode=get("params", "trunc_mode"), nonlinear=get("params", "nonlinear"))
    except ValueError as exc:
        # blame the named key if the file sets it, otherwise the level line
        key = next((k for k in ("eps", "k_trunc") if k in str(exc)
                    and ("params", k) in lines), "level")
        fail("params", key, str(exc))

    try:
        integ = IntegratorConfig(**{k: get("integrator", k) for k in SCHEMA["integrator"]})
    except ValueError as exc:
        bad = next((k for k in SCHEMA["integrator"] if k in str(exc)), None)
        fail("integrator", bad, str(exc))

    bump = {k: values["initial"][k] for k in _BUMP_KEYS if k in values.get("initial", {})}
    initial = InitialSpec(get("initial", "preset"), get("initial", "seed"),
                          get("initial", "mollify"), bump)
    if initial.mollify is not None and not 0 < initial.mollify < 1:
        fail("initial", "mollify", f"mollify must lie in (0, 1), got {initial.mollify}")
    output = OutputSpec(get("output", "dir"), get("output", "csv"), get("output", "snapshot_every"))
    if output.snapshot_every < 0:
        fail("output", "snapshot_every", "snapshot_every must be >= 0")

    sweep = None
    if cp.has_section("sweep"):
        cs = get("sweep", "compare_s")
        if len(cs) not in (1, 3):
            fail("sweep", "compare_s", "compare_s takes one or three numbers")
        sweep = SweepConfig(get("sweep", "experiment"), get("sweep", "values"),
                            get("sweep", "reference"),
                            tuple(cs * 3 if len(cs) == 1 else cs),
                            get("sweep", "compare_time"), get("sweep", "workers"))
        if sweep.workers < 1:
            fail("sweep", "workers", "workers must be >= 1")
    return RunConfig(grid, params, integ, initial, output, sweep, source)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))
