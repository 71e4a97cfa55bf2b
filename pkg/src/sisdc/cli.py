"""Experiment driver: parse a JSON study config, run it, emit CSV artifacts.

One config file describes one study (a stability map, a Dahlquist accuracy
probe, a PDE run, a CFL sweep, a mesh convergence table, the sweep-form
equivalence check, or the cost model). Outputs are deterministic: floats are
written with 17 significant digits, nothing carries a timestamp, and the
manifest records a sha256 per file, so re-running the same config
byte-reproduces the whole output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from . import __version__
from .analysis import (
    GridSpec,
    MethodSpec,
    StabilityMap,
    amplification,
    amplification_history,
    converged_iteration,
    extract_contour,
    observed_order,
    region_area,
    scan_map,
    stability_function,
)
from .collocation import make_nodes, make_weights
from .dgsem import (
    ArtificialViscosityParams,
    DGOperator,
    Mesh1D,
    SolverError,
    cfl_number,
    dt_from_cfl,
    max_wave_speed,
    smooth_start,
)
from .integrators import tvd_rk3_step
from .mlsdc import (
    Hierarchy,
    Level,
    cost_mlsdc_cycle,
    cost_sdc,
    cost_start,
    equivalence_products,
    integrate_mlsdc,
)
from .problems import (
    CompressibleFlow,
    ConvectionDiffusion,
    acoustic_wave_init,
    burgers_front_problem,
    sod_init,
    wave_packet_exact,
)
from .sdc import run_sdc
from .transfer import (
    SpaceTimeTransfer,
    build_identity_spatial,
    build_spatial_h_transfer,
    build_spatial_p_transfer,
    build_temporal_transfer,
)

STUDIES = (
    "stability",
    "accuracy",
    "run",
    "cfl-sweep",
    "convergence",
    "equivalence",
    "costmodel",
)

_SCHEMES = ("euler", "si1", "si2")
_FORMS = ("incremental", "nonincremental")
_STARTS = ("constant", "predictor", "cascade", "fmg")
_NODE_KINDS = ("radau_right", "lobatto", "equidistant")
_PROJECTIONS = ("embedded", "l2")
_JUMP_POLICIES = ("linear_blend", "average")
_METHOD_KINDS = ("auto", "collocation", "exact")


class ConfigError(ValueError):
    """Config rejected; the message names the offending key path."""


# --------------------------------------------------------------------------
# schema walking

_MISSING = object()


class _Section:
    """One nested config object with typed access and path-qualified errors.

    Every key read is recorded; close() rejects whatever was never asked
    for, so typos fail loudly instead of silently using a default.
    """

    def __init__(self, data: dict, path: str = ""):
        self.data = data
        self.path = path
        self._seen: set = set()

    def _at(self, key) -> str:
        return f"{self.path}.{key}" if self.path else str(key)

    def has(self, key) -> bool:
        return key in self.data

    def get(self, key, expect: str, default=_MISSING, choices=None):
        self._seen.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(f"{self._at(key)}: required")
            return default
        v = self.data[key]
        ok = {
            "int": lambda x: isinstance(x, int) and not isinstance(x, bool),
            "number": lambda x: isinstance(x, (int, float)) and not isinstance(x, bool),
            "str": lambda x: isinstance(x, str),
            "bool": lambda x: isinstance(x, bool),
            "list": lambda x: isinstance(x, list),
        }[expect]
        if not ok(v):
            raise ConfigError(
                f"{self._at(key)}: expected {expect}, got {type(v).__name__}"
            )
        if expect == "number":
            v = float(v)
        if choices is not None and v not in choices:
            opts = ", ".join(str(c) for c in choices)
            raise ConfigError(f"{self._at(key)}: expected one of {opts}, got {v!r}")
        return v

    def numbers(self, key, default=_MISSING, length=None):
        v = self.get(key, "list", default=default)
        if not isinstance(v, list):
            return v
        out = []
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ConfigError(f"{self._at(key)}[{i}]: expected number")
            out.append(float(x))
        if length is not None and len(out) != length:
            raise ConfigError(f"{self._at(key)}: expected {length} entries, got {len(out)}")
        return tuple(out)

    def section(self, key, required: bool = True) -> "_Section":
        self._seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self._at(key)}: required")
            return _Section({}, self._at(key))
        v = self.data[key]
        if not isinstance(v, dict):
            raise ConfigError(f"{self._at(key)}: expected an object")
        return _Section(v, self._at(key))

    def sections(self, key) -> list:
        v = self.get(key, "list")
        if not v:
            raise ConfigError(f"{self._at(key)}: must not be empty")
        out = []
        for i, item in enumerate(v):
            if not isinstance(item, dict):
                raise ConfigError(f"{self._at(key)}[{i}]: expected an object")
            out.append(_Section(item, f"{self._at(key)}[{i}]"))
        return out

    def close(self):
        extra = sorted(set(self.data) - self._seen)
        if extra:
            raise ConfigError(f"{self._at(extra[0])}: unknown key")


# --------------------------------------------------------------------------
# config model


@dataclass(frozen=True)
class LevelSpec:
    n_nodes: int
    n_elem: Optional[int] = None
    degree: Optional[int] = None


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    init: str
    domain: tuple
    params: dict
    av: Optional[ArtificialViscosityParams] = None
    smooth_init: bool = False


@dataclass(frozen=True)
class TimeSpec:
    t_end: float
    cfl: Optional[float] = None
    n_steps: Optional[int] = None
    dt: Optional[float] = None


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str
    dt: Optional[float] = None
    cfl: Optional[float] = None


@dataclass(frozen=True)
class ProbeSpec:
    z: complex
    stall_min: Optional[int] = None
    stall_max: Optional[int] = None
    error_at_stall_max: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    """Validated study description; study-specific fields stay None elsewhere."""

    study: str
    levels: tuple
    scheme: str = "si2"
    form: str = "incremental"
    start: str = "predictor"
    c_fmg: int = 1
    n_coarse: int = 2
    n_sweep: int = 1
    iterations: int = 5
    nodes: str = "radau_right"
    kind: str = "auto"
    projection: str = "embedded"
    node_convention: str = "nodes_only"
    jump_policy: str = "linear_blend"
    post_sweep: bool = True
    problem: Optional[ProblemSpec] = None
    time: Optional[TimeSpec] = None
    reference: Optional[ReferenceSpec] = None
    grid: Optional[GridSpec] = None
    contour_level: Optional[float] = None
    probes: tuple = ()
    cfl_values: tuple = ()
    max_iterations: int = 25
    element_counts: tuple = ()
    equivalence: Optional[dict] = None
    costmodel: Optional[dict] = None
    expect: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def _parse_method(root: _Section, n_levels: int) -> dict:
    m = root.section("method", required=False)
    start_default = "fmg" if n_levels > 1 else "predictor"
    out = dict(
        scheme=m.get("scheme", "str", default="si2", choices=_SCHEMES),
        form=m.get("form", "str", default="incremental", choices=_FORMS),
        start=m.get("start", "str", default=start_default, choices=_STARTS),
        c_fmg=m.get("c_fmg", "int", default=1),
        n_coarse=m.get("n_coarse", "int", default=2),
        n_sweep=m.get("n_sweep", "int", default=1),
        iterations=m.get("iterations", "int", default=5),
        nodes=m.get("nodes", "str", default="radau_right", choices=_NODE_KINDS),
        kind=m.get("kind", "str", default="auto", choices=_METHOD_KINDS),
        projection=m.get("projection", "str", default="embedded", choices=_PROJECTIONS),
        node_convention=m.get(
            "node_convention", "str", default="nodes_only",
            choices=("nodes_only", "nodes_plus_t0"),
        ),
        jump_policy=m.get(
            "jump_policy", "str", default="linear_blend", choices=_JUMP_POLICIES
        ),
        post_sweep=m.get("post_sweep", "bool", default=True),
    )
    if n_levels == 1 and m.has("start") and out["start"] in ("cascade", "fmg"):
        raise ConfigError(f"method.start: {out['start']!r} needs at least two levels")
    for key in ("c_fmg", "n_coarse", "n_sweep"):
        if out[key] < 1:
            raise ConfigError(f"method.{key}: must be at least 1")
    if out["iterations"] < 0:
        raise ConfigError("method.iterations: must be nonnegative")
    m.close()
    return out


def _parse_levels(root: _Section, *, spatial: bool, n_steps_ok: bool = False):
    """Per-level lists; coarsest first, checked against the builder limits."""
    specs = []
    n_steps = None
    for i, sec in enumerate(root.sections("levels")):
        M = sec.get("n_nodes", "int")
        if M < 1:
            raise ConfigError(f"levels[{i}].n_nodes: must be at least 1")
        ne = deg = None
        if spatial:
            ne = sec.get("n_elem", "int", default=None)
            deg = sec.get("degree", "int")
            if ne is not None and ne < 1:
                raise ConfigError(f"levels[{i}].n_elem: must be at least 1")
            if deg < 1:
                raise ConfigError(f"levels[{i}].degree: must be at least 1")
        if n_steps_ok:
            ns = sec.get("n_steps", "int", default=None)
            if ns is not None:
                if ns < 1:
                    raise ConfigError(f"levels[{i}].n_steps: must be at least 1")
                if n_steps is not None and ns != n_steps:
                    raise ConfigError(
                        f"levels[{i}].n_steps: all levels must march the same"
                        " number of steps"
                    )
                n_steps = ns
        sec.close()
        specs.append(LevelSpec(n_nodes=M, n_elem=ne, degree=deg))
    for i in range(1, len(specs)):
        lo, hi = specs[i - 1], specs[i]
        if hi.n_nodes < lo.n_nodes:
            raise ConfigError(
                f"levels[{i}].n_nodes: node counts must be nondecreasing"
                " from coarse to fine"
            )
        if not spatial or lo.n_elem is None or hi.n_elem is None:
            continue
        if hi.n_elem % lo.n_elem != 0:
            raise ConfigError(
                f"levels[{i}].n_elem: must be a multiple of the previous level's"
            )
        ratio = hi.n_elem // lo.n_elem
        if ratio not in (1, 2):
            raise ConfigError(
                f"levels[{i}].n_elem: only 2:1 element coarsening is supported"
            )
        if hi.degree < lo.degree:
            raise ConfigError(
                f"levels[{i}].degree: degrees must be nondecreasing"
                " from coarse to fine"
            )
        if ratio == 2 and hi.degree != lo.degree:
            raise ConfigError(
                f"levels[{i}]: cannot change element count and degree across"
                " the same pair of levels"
            )
    return tuple(specs), n_steps


_INITS = {
    "convection_diffusion": ("wave_packet",),
    "burgers": ("front",),
    "euler": ("acoustic", "sod"),
}

_DEFAULT_DOMAIN = {
    "wave_packet": (0.0, 1.0),
    "front": (-1.0, 1.0),
    "acoustic": (0.0, 1.0),
    "sod": (0.0, 1.0),
}


def _parse_problem(root: _Section) -> ProblemSpec:
    p = root.section("problem")
    kind = p.get("kind", "str", choices=tuple(_INITS))
    opts = _INITS[kind]
    default = opts[0] if len(opts) == 1 else _MISSING
    init = p.get("init", "str", default=default, choices=opts)
    domain = p.numbers("domain", default=_DEFAULT_DOMAIN[init], length=2)
    if domain[1] <= domain[0]:
        raise ConfigError("problem.domain: must be increasing")
    params: dict = {}
    if kind == "convection_diffusion":
        params["speed"] = p.get("speed", "number", default=1.0)
        params["nu"] = p.get("nu", "number", default=0.0)
        if params["nu"] < 0:
            raise ConfigError("problem.nu: must be nonnegative")
    elif kind == "burgers":
        params["nu"] = p.get("nu", "number")
        if params["nu"] <= 0:
            raise ConfigError("problem.nu: the moving front needs positive viscosity")
    else:
        params["gamma"] = p.get("gamma", "number", default=1.4)
        params["R_gas"] = p.get("R_gas", "number", default=287.28)
        params["eta"] = p.get("eta", "number", default=0.0)
        params["prandtl"] = p.get("prandtl", "number", default=0.75)
        if init == "acoustic":
            params["mach"] = p.get("mach", "number", default=0.1)
            params["p_inf"] = p.get("p_inf", "number", default=1000.0)
            params["T_inf"] = p.get("T_inf", "number", default=300.0)
            params["amp_frac"] = p.get("amp_frac", "number", default=1e-2)
        else:
            params["split"] = p.get("split", "number", default=0.5)
    av = None
    if p.has("av"):
        a = p.section("av")
        av = ArtificialViscosityParams(
            kappa_s=a.get("kappa_s", "number"), c_s=a.get("c_s", "number")
        )
        a.close()
    smooth_init = p.get("smooth_init", "bool", default=False)
    p.close()
    return ProblemSpec(kind, init, tuple(domain), params, av, smooth_init)


def _parse_time(root: _Section, *, stepping_here: bool, level_steps) -> TimeSpec:
    t = root.section("time")
    t_end = t.get("t_end", "number")
    if t_end <= 0:
        raise ConfigError("time.t_end: must be positive")
    cfl = n_steps = dt = None
    if stepping_here:
        cfl = t.get("cfl", "number", default=None)
        n_steps = t.get("n_steps", "int", default=None)
        dt = t.get("dt", "number", default=None)
        given = [k for k, v in (("cfl", cfl), ("n_steps", n_steps), ("dt", dt)) if v is not None]
        if level_steps is not None:
            if given:
                raise ConfigError(
                    f"time.{given[0]}: conflicts with the per-level n_steps entries"
                )
            n_steps = level_steps
        elif len(given) != 1:
            raise ConfigError("time: give exactly one of cfl, n_steps, dt")
        if cfl is not None and cfl <= 0:
            raise ConfigError("time.cfl: must be positive")
        if n_steps is not None and n_steps < 1:
            raise ConfigError("time.n_steps: must be at least 1")
        if dt is not None and dt <= 0:
            raise ConfigError("time.dt: must be positive")
    t.close()
    return TimeSpec(t_end=t_end, cfl=cfl, n_steps=n_steps, dt=dt)


def _parse_reference(root: _Section, required: bool) -> Optional[ReferenceSpec]:
    if not root.has("reference"):
        root._seen.add("reference")
        return ReferenceSpec("exact") if required else None
    r = root.section("reference")
    kind = r.get("kind", "str", choices=("exact", "rk3"))
    dt = r.get("dt", "number", default=None)
    cfl = r.get("cfl", "number", default=None)
    if kind == "rk3":
        if (dt is None) == (cfl is None):
            raise ConfigError("reference: rk3 needs exactly one of dt, cfl")
    elif dt is not None or cfl is not None:
        raise ConfigError("reference.dt: only meaningful for the rk3 reference")
    r.close()
    return ReferenceSpec(kind, dt=dt, cfl=cfl)


def _parse_grid(root: _Section) -> GridSpec:
    g = root.section("grid", required=False)
    default = GridSpec()
    zr = g.numbers("z_r", default=default.z_r, length=2)
    zi = g.numbers("z_i", default=default.z_i, length=2)
    n_r = g.get("n_r", "int", default=default.n_r)
    n_i = g.get("n_i", "int", default=default.n_i)
    if n_r < 16 or n_i < 16:
        key = "n_r" if n_r < 16 else "n_i"
        raise ConfigError(f"grid.{key}: need at least 16 samples per axis")
    if zr[1] <= zr[0] or zi[1] <= zi[0]:
        key = "z_r" if zr[1] <= zr[0] else "z_i"
        raise ConfigError(f"grid.{key}: range must be increasing")
    g.close()
    return GridSpec(z_r=zr, z_i=zi, n_r=n_r, n_i=n_i)


def _parse_probes(root: _Section) -> tuple:
    if not root.has("probes"):
        root._seen.add("probes")
        return ()
    probes = []
    for sec in root.sections("probes"):
        z = sec.numbers("z", length=2)
        probes.append(
            ProbeSpec(
                z=complex(z[0], z[1]),
                stall_min=sec.get("stall_min", "int", default=None),
                stall_max=sec.get("stall_max", "int", default=None),
                error_at_stall_max=sec.get("error_at_stall_max", "number", default=None),
            )
        )
        sec.close()
    return tuple(probes)


_EXPECT_KEYS = {
    "stability": ("area_min", "area_max", "real_axis_stable"),
    "accuracy": (),
    "run": ("max_error", "conservation_rtol", "positivity"),
    "cfl-sweep": ("all_converged", "max_iterations_to_converge"),
    "convergence": ("order_min", "order_max", "error_max"),
    "equivalence": ("difference_min", "difference_max"),
    "costmodel": ("slope", "intercept", "ratios", "tol"),
}


def _parse_expect(root: _Section, study: str) -> dict:
    e = root.section("expect", required=False)
    out = {}
    allowed = _EXPECT_KEYS[study]
    for key in sorted(e.data):
        if key not in allowed:
            raise ConfigError(f"expect.{key}: unknown key for the {study} study")
    for key in allowed:
        if not e.has(key):
            e._seen.add(key)
            continue
        if key in ("real_axis_stable", "ratios"):
            out[key] = e.numbers(key)
        elif key in ("all_converged", "positivity"):
            out[key] = e.get(key, "bool")
        elif key == "max_iterations_to_converge":
            out[key] = e.get(key, "int")
        else:
            out[key] = e.get(key, "number")
    e.close()
    return out


def parse_config(text: str) -> RunConfig:
    """Validate a JSON study description into a RunConfig.

    Messages name the offending key by its config path. Defaults follow the
    reference setup: two coarse-level sweeps, embedded interpolation, an FMG
    start with one corrector cycle, incremental form, the si2 scheme.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    root = _Section(data)
    study = root.get("study", "str", choices=STUDIES)
    cfg = dict(study=study, raw=data)

    if study in ("stability", "accuracy"):
        levels, _ = _parse_levels(root, spatial=False)
        cfg.update(_parse_method(root, len(levels)))
        cfg["levels"] = levels
        cfg["grid"] = _parse_grid(root)
        default_level = 1.0 if study == "stability" else 1e-6
        cfg["contour_level"] = root.get("contour_level", "number", default=default_level)
        if study == "accuracy":
            cfg["probes"] = _parse_probes(root)
            if cfg["probes"] and cfg["kind"] != "auto":
                raise ConfigError(
                    "probes: iteration histories need method.kind = auto"
                )
    elif study in ("run", "cfl-sweep", "convergence"):
        conv = study == "convergence"
        levels, level_steps = _parse_levels(
            root, spatial=True, n_steps_ok=study == "run"
        )
        for i, lvl in enumerate(levels):
            if lvl.n_elem is None and not conv:
                raise ConfigError(f"levels[{i}].n_elem: required")
            if lvl.n_elem is not None and conv:
                raise ConfigError(
                    f"levels[{i}].n_elem: the convergence study takes element"
                    " counts from convergence.element_counts"
                )
        cfg.update(_parse_method(root, len(levels)))
        cfg["levels"] = levels
        cfg["problem"] = _parse_problem(root)
        cfg["time"] = _parse_time(
            root, stepping_here=study == "run", level_steps=level_steps
        )
        if study == "run":
            ref = _parse_reference(root, required=False)
            if ref is None and cfg["problem"].kind != "euler":
                ref = ReferenceSpec("exact")
            cfg["reference"] = ref
        elif study == "cfl-sweep":
            s = root.section("sweep")
            cfg["cfl_values"] = s.numbers("cfl_values")
            if any(c <= 0 for c in cfg["cfl_values"]):
                raise ConfigError("sweep.cfl_values: entries must be positive")
            cfg["max_iterations"] = s.get("max_iterations", "int", default=25)
            if cfg["max_iterations"] < 1:
                raise ConfigError("sweep.max_iterations: must be at least 1")
            s.close()
            cfg["reference"] = _parse_reference(root, required=True)
        else:
            c = root.section("convergence")
            families = []
            counts = c.get("element_counts", "list")
            if not counts:
                raise ConfigError("convergence.element_counts: must not be empty")
            for i, fam in enumerate(counts):
                if not isinstance(fam, list) or len(fam) != len(levels):
                    raise ConfigError(
                        f"convergence.element_counts[{i}]: expected one element"
                        f" count per level ({len(levels)})"
                    )
                for j, ne in enumerate(fam):
                    if isinstance(ne, bool) or not isinstance(ne, int) or ne < 1:
                        raise ConfigError(
                            f"convergence.element_counts[{i}][{j}]: expected a"
                            " positive integer"
                        )
                for j in range(1, len(fam)):
                    if fam[j] % fam[j - 1] != 0 or fam[j] // fam[j - 1] not in (1, 2):
                        raise ConfigError(
                            f"convergence.element_counts[{i}][{j}]: only 2:1"
                            " element coarsening is supported"
                        )
                families.append(tuple(fam))
            for i in range(1, len(families)):
                a, b = families[i - 1], families[i]
                if b[-1] <= a[-1]:
                    raise ConfigError(
                        f"convergence.element_counts[{i}]: families must refine"
                        " the finest level"
                    )
            cfg["element_counts"] = tuple(families)
            cfg["cfl_values"] = c.numbers("cfl_values")
            if any(x <= 0 for x in cfg["cfl_values"]):
                raise ConfigError("convergence.cfl_values: entries must be positive")
            c.close()
            if cfg["problem"].kind == "euler":
                raise ConfigError(
                    "problem.kind: the convergence study needs an exact solution"
                )
    elif study == "equivalence":
        e = root.section("equivalence")
        coarse = e.get("coarse_nodes", "int")
        fine = e.get("fine_nodes", "int")
        if coarse < 1 or fine < coarse:
            raise ConfigError(
                "equivalence.fine_nodes: need 1 <= coarse_nodes <= fine_nodes"
            )
        cfg["equivalence"] = dict(
            coarse_nodes=coarse,
            fine_nodes=fine,
            nodes=e.get("nodes", "str", default="radau_right", choices=_NODE_KINDS),
            node_convention=e.get(
                "node_convention", "str", default="nodes_only",
                choices=("nodes_only", "nodes_plus_t0"),
            ),
            projection=e.get(
                "projection", "str", default="embedded", choices=_PROJECTIONS
            ),
        )
        e.close()
        cfg["levels"] = (LevelSpec(n_nodes=coarse), LevelSpec(n_nodes=fine))
    else:
        levels, _ = _parse_levels(root, spatial=True)
        for i, lvl in enumerate(levels):
            if lvl.n_elem is None:
                raise ConfigError(f"levels[{i}].n_elem: required")
        cfg.update(_parse_method(root, len(levels)))
        cfg["levels"] = levels
        c = root.section("costmodel", required=False)
        cfg["costmodel"] = dict(
            cycles=c.get("cycles", "int", default=None),
            sdc_sweeps=c.get("sdc_sweeps", "int", default=None),
        )
        c.close()

    cfg["expect"] = _parse_expect(root, study)
    root.close()
    return RunConfig(**cfg)


# --------------------------------------------------------------------------
# artifact plumbing


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> str:
    """Write one CSV deterministically; returns the sha256 of its bytes."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    data = ("\n".join(lines) + "\n").encode()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def write_manifest(out_dir: Path, cfg: RunConfig, outputs: dict) -> None:
    doc = {
        "study": cfg.study,
        "config": cfg.raw,
        "versions": {
            "python": ".".join(str(x) for x in sys.version_info[:3]),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "sisdc": __version__,
        },
        "outputs": outputs,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    (out_dir / "manifest.json").write_text(text)


# --------------------------------------------------------------------------
# shared builders


@dataclass
class ProblemBundle:
    problem: object
    init: Callable
    exact: Optional[Callable]
    bc: str
    domain: tuple
    av: Optional[ArtificialViscosityParams]
    smooth_init: bool


def build_problem(spec: ProblemSpec) -> ProblemBundle:
    """Instantiate the governing equations, initial data and exact solution."""
    p = spec.params
    if spec.kind == "convection_diffusion":
        problem = ConvectionDiffusion(speed=p["speed"], nu=p["nu"])
        exact = wave_packet_exact(p["nu"], p["speed"])
        init = lambda x: exact(x, 0.0)[None]
        wrapped = lambda x, t: exact(x, t)[None]
        return ProblemBundle(problem, init, wrapped, "periodic", spec.domain,
                             spec.av, spec.smooth_init)
    if spec.kind == "burgers":
        problem, exact = burgers_front_problem(p["nu"])
        init = lambda x: exact(x, 0.0)[None]
        wrapped = lambda x, t: exact(x, t)[None]
        return ProblemBundle(problem, init, wrapped, "dirichlet", spec.domain,
                             spec.av, spec.smooth_init)
    if spec.init == "acoustic":
        init, _ = acoustic_wave_init(
            gamma=p["gamma"], R_gas=p["R_gas"], mach=p["mach"],
            p_inf=p["p_inf"], T_inf=p["T_inf"], amp_frac=p["amp_frac"],
        )
        problem = CompressibleFlow(gamma=p["gamma"], R_gas=p["R_gas"],
                                   eta=p["eta"], Pr=p["prandtl"])
        return ProblemBundle(problem, init, None, "periodic", spec.domain,
                             spec.av, spec.smooth_init)
    init = sod_init(gamma=p["gamma"], split=p["split"])
    ends = init(np.asarray(spec.domain))
    left, right = ends[:, 0].copy(), ends[:, 1].copy()
    problem = CompressibleFlow(gamma=p["gamma"], R_gas=p["R_gas"],
                               eta=p["eta"], Pr=p["prandtl"],
                               boundary=lambda t: (left, right))
    return ProblemBundle(problem, init, None, "dirichlet", spec.domain,
                         spec.av, spec.smooth_init)


def _build_operators(cfg: RunConfig, bundle: ProblemBundle, n_elems=None):
    ops, rules, weights = [], [], []
    x0, x1 = bundle.domain
    for i, lvl in enumerate(cfg.levels):
        ne = lvl.n_elem if n_elems is None else n_elems[i]
        mesh = Mesh1D(x0, x1, ne, lvl.degree, bc=bundle.bc)
        ops.append(DGOperator(mesh, bundle.problem, av=bundle.av))
        rule = make_nodes(cfg.nodes, lvl.n_nodes)
        rules.append(rule)
        weights.append(make_weights(rule))
    return ops, rules, weights


def _build_hierarchy(cfg: RunConfig, ops, rules, weights) -> Hierarchy:
    levels = [Level(op, r, w, cfg.scheme) for op, r, w in zip(ops, rules, weights)]
    transfers = []
    for lo, hi in zip(range(len(ops) - 1), range(1, len(ops))):
        pair = build_temporal_transfer(
            rules[lo], rules[hi], cfg.projection, cfg.node_convention
        )
        mc, mf = ops[lo].mesh, ops[hi].mesh
        if mc.n_elem != mf.n_elem:
            spatial = build_spatial_h_transfer(
                mc.n_elem, mc.degree, ops[lo].ncomp, cfg.projection, cfg.jump_policy
            )
        elif mc.degree != mf.degree:
            spatial = build_spatial_p_transfer(
                mc.degree, mf.degree, mc.n_elem, ops[lo].ncomp, cfg.projection
            )
        else:
            spatial = build_identity_spatial(ops[lo].ndof)
        transfers.append(SpaceTimeTransfer(pair, spatial))
    return Hierarchy(
        levels,
        transfers,
        n_coarse=cfg.n_coarse,
        n_sweep=cfg.n_sweep,
        form=cfg.form,
        post_sweep_on_finest=cfg.post_sweep,
    )


def _initial_state(op: DGOperator, bundle: ProblemBundle) -> np.ndarray:
    u0 = op.nodal_field(bundle.init)
    if bundle.smooth_init:
        u0 = smooth_start(op, u0)
    return u0


def _steps_from_time(cfg: RunConfig, op_fine: DGOperator, lam: float):
    """Resolve (dt, n_steps) from whichever of cfl, n_steps, dt was given."""
    t = cfg.time
    mesh = op_fine.mesh
    if t.cfl is not None:
        dt0 = dt_from_cfl(t.cfl, mesh.dx, lam, mesh.degree)
        n = max(1, math.ceil(t.t_end / dt0 - 1e-12))
    elif t.n_steps is not None:
        n = t.n_steps
    else:
        n = max(1, math.ceil(t.t_end / t.dt - 1e-12))
    return t.t_end / n, n


def _march_single(cfg, op, rule, w, u0, dt, n_steps, k):
    u, t = u0, 0.0
    for _ in range(n_steps):
        sol = run_sdc(op, rule, w, dt, cfg.scheme, u, t, k,
                      form=cfg.form, start=cfg.start)
        u = sol.end_value.copy()
        t += dt
    return u


def _march(cfg, ops, rules, weights, hier, u0, dt, n_steps, k):
    # a state leaving the admissible set mid-march is a solver failure,
    # not a config problem
    try:
        if len(ops) == 1:
            return _march_single(cfg, ops[0], rules[0], weights[0], u0, dt, n_steps, k)
        return integrate_mlsdc(hier, u0, 0.0, dt, n_steps, k,
                               strategy=cfg.start, c_fmg=cfg.c_fmg)
    except ValueError as exc:
        raise SolverError(str(exc)) from exc


def _rel_l2(op: DGOperator, u: np.ndarray, u_ref: np.ndarray) -> float:
    den = op.norm_l2(u_ref)
    err = op.norm_l2(u - u_ref)
    return err if den == 0 else err / den


def _reference_state(cfg, bundle, op_fine, u0, lam):
    """Terminal-state reference: exact solution or a fine explicit march."""
    t_end = cfg.time.t_end
    ref = cfg.reference
    if ref is None:
        return None, "none"
    if ref.kind == "exact":
        if bundle.exact is None:
            raise ConfigError("reference.kind: this problem has no exact solution")
        return op_fine.nodal_field(lambda x: bundle.exact(x, t_end)), "exact"
    dt0 = ref.dt
    if dt0 is None:
        dt0 = dt_from_cfl(ref.cfl, op_fine.mesh.dx, lam, op_fine.mesh.degree)
    n = max(1, math.ceil(t_end / dt0 - 1e-12))
    dt = t_end / n
    u, t = u0.copy(), 0.0
    for _ in range(n):
        try:
            u = tvd_rk3_step(op_fine, u, t, dt)
        except ValueError as exc:
            raise SolverError(str(exc)) from exc
        if not np.all(np.isfinite(u)):
            raise SolverError("explicit reference march produced non-finite values")
        t += dt
    return u, f"rk3 n={n}"


def _dahlquist_method(cfg: RunConfig) -> MethodSpec:
    return MethodSpec(
        levels=tuple(l.n_nodes for l in cfg.levels),
        scheme=cfg.scheme,
        nodes=cfg.nodes,
        iterations=cfg.iterations,
        n_coarse=cfg.n_coarse,
        start=cfg.start,
        form=cfg.form,
        kind=cfg.kind,
        c_fmg=cfg.c_fmg,
    )


def _scan(method, grid: GridSpec, quantity: str, threads: int) -> StabilityMap:
    if threads <= 1:
        return scan_map(method, grid, quantity=quantity)
    # rows are independent; chunked evaluation assembles in index order
    zr, zi = grid.axes()
    Z = zr[None, :] + 1j * zi[:, None]
    chunks = np.array_split(np.arange(grid.n_i), min(4 * threads, grid.n_i))
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda idx: amplification(method, Z[idx]), chunks))
    R = np.concatenate(parts, axis=0)
    values = np.abs(R) if quantity == "stability" else np.abs(R - np.exp(Z))
    return StabilityMap(zr=zr, zi=zi, values=values, quantity=quantity, method=method)


# --------------------------------------------------------------------------
# study runners; each returns ({filename: sha256}, [check failures])


def _map_rows(smap: StabilityMap):
    for i in range(len(smap.zi)):
        for j in range(len(smap.zr)):
            yield (smap.zr[j], smap.zi[i], smap.values[i, j])


def _contour_rows(contours):
    for pi, poly in enumerate(contours.polylines):
        for vi in range(poly.shape[0]):
            yield (pi, vi, poly[vi, 0], poly[vi, 1])


def _origin_index(smap: StabilityMap):
    jr = np.where(np.isclose(smap.zr, 0.0, atol=1e-12))[0]
    ji = np.where(np.isclose(smap.zi, 0.0, atol=1e-12))[0]
    if len(jr) and len(ji):
        return int(ji[0]), int(jr[0])
    return None


def _probe_map_values(smap, method, rng, n_probes=5):
    """Randomized spot check: scalar re-evaluation must reproduce the map."""
    fails = []
    ni, nr = smap.values.shape
    for _ in range(n_probes):
        i, j = int(rng.integers(ni)), int(rng.integers(nr))
        z = complex(smap.zr[j], smap.zi[i])
        r = stability_function(method, z)
        want = abs(r) if smap.quantity == "stability" else abs(r - np.exp(z))
        if not np.isclose(smap.values[i, j], want, rtol=1e-12, atol=1e-12):
            fails.append(
                f"map value at z = {z} not reproduced by pointwise evaluation"
            )
    return fails


def _run_stability(cfg, out_dir, check, rng, threads):
    method = _dahlquist_method(cfg)
    smap = _scan(method, cfg.grid, "stability", threads)
    contours = extract_contour(smap, cfg.contour_level)
    area = region_area(smap, cfg.contour_level)
    outputs = {
        "map.csv": write_csv(out_dir / "map.csv", ("z_r", "z_i", "value"),
                             _map_rows(smap)),
        "contour.csv": write_csv(out_dir / "contour.csv",
                                 ("polyline", "vertex", "z_r", "z_i"),
                                 _contour_rows(contours)),
        "summary.csv": write_csv(out_dir / "summary.csv", ("key", "value"), [
            ("contour_level", cfg.contour_level),
            ("region_area", area),
            ("n_polylines", len(contours.polylines)),
        ]),
    }
    failures = []
    if check:
        idx = _origin_index(smap)
        if idx is not None and abs(smap.values[idx] - 1.0) > 1e-12:
            failures.append(f"origin value {smap.values[idx]!r} differs from 1")
        failures += _probe_map_values(smap, method, rng)
        exp = cfg.expect
        if "area_min" in exp and area < exp["area_min"]:
            failures.append(f"region area {area:.6g} below {exp['area_min']:.6g}")
        if "area_max" in exp and area > exp["area_max"]:
            failures.append(f"region area {area:.6g} above {exp['area_max']:.6g}")
        for x in exp.get("real_axis_stable", ()):
            r = abs(stability_function(method, complex(x, 0.0)))
            if r > 1.0 + 1e-10:
                failures.append(f"|R({x:g})| = {r:.6g} exceeds 1")
    return outputs, failures


def _run_accuracy(cfg, out_dir, check, rng, threads):
    method = _dahlquist_method(cfg)
    smap = _scan(method, cfg.grid, "accuracy", threads)
    contours = extract_contour(smap, cfg.contour_level)
    area = region_area(smap, cfg.contour_level)
    probe_rows, stall_rows, failures = [], [], []
    for pi, probe in enumerate(cfg.probes):
        hist = np.asarray(amplification_history(method, probe.z))
        errs = np.abs(hist - np.exp(probe.z))
        for k, e in enumerate(errs):
            probe_rows.append((pi, probe.z.real, probe.z.imag, k, e))
        stall = converged_iteration(errs) if len(errs) >= 2 else None
        e_at = errs[stall] if stall is not None else errs[-1]
        stall_rows.append((pi, probe.z.real, probe.z.imag,
                           "" if stall is None else stall, e_at))
        if check:
            tag = f"probe {pi} (z = {probe.z})"
            if probe.stall_min is not None and (stall is None or stall < probe.stall_min):
                failures.append(f"{tag}: stalled at {stall}, expected >= {probe.stall_min}")
            if probe.stall_max is not None and (stall is None or stall > probe.stall_max):
                failures.append(f"{tag}: stalled at {stall}, expected <= {probe.stall_max}")
            if probe.error_at_stall_max is not None and e_at > probe.error_at_stall_max:
                failures.append(
                    f"{tag}: error {e_at:.6g} at stall exceeds"
                    f" {probe.error_at_stall_max:.6g}"
                )
    outputs = {
        "map.csv": write_csv(out_dir / "map.csv", ("z_r", "z_i", "value"),
                             _map_rows(smap)),
        "contour.csv": write_csv(out_dir / "contour.csv",
                                 ("polyline", "vertex", "z_r", "z_i"),
                                 _contour_rows(contours)),
        "probes.csv": write_csv(out_dir / "probes.csv",
                                ("probe", "z_r", "z_i", "iteration", "error"),
                                probe_rows),
        "summary.csv": write_csv(
            out_dir / "summary.csv",
            ("probe", "z_r", "z_i", "converged_iteration", "error"),
            stall_rows),
    }
    if check:
        idx = _origin_index(smap)
        if idx is not None and smap.values[idx] > 1e-12:
            failures.append(f"origin defect {smap.values[idx]!r} differs from 0")
        failures += _probe_map_values(smap, method, rng)
    return outputs, failures


def _run_run(cfg, out_dir, check, rng, threads):
    bundle = build_problem(cfg.problem)
    ops, rules, weights = _build_operators(cfg, bundle)
    hier = _build_hierarchy(cfg, ops, rules, weights) if len(ops) > 1 else None
    op = ops[-1]
    u0 = _initial_state(op, bundle)
    lam = max_wave_speed(op, u0)
    dt, n_steps = _steps_from_time(cfg, op, lam)
    u_ref, ref_label = _reference_state(cfg, bundle, op, u0, lam)
    u = _march(cfg, ops, rules, weights, hier, u0, dt, n_steps, cfg.iterations)

    x = op.mesh.nodes_x.reshape(-1)
    u3 = op.as_nodes(u)
    header = ["x"] + [f"u{c}" for c in range(op.ncomp)]
    cols = [x] + [u3[c].reshape(-1) for c in range(op.ncomp)]
    if u_ref is not None:
        ref3 = op.as_nodes(u_ref)
        header += [f"ref{c}" for c in range(op.ncomp)]
        cols += [ref3[c].reshape(-1) for c in range(op.ncomp)]
    mass0, mass1 = op.total_integral(u0), op.total_integral(u)
    summary = [
        ("t_end", cfg.time.t_end),
        ("dt", dt),
        ("n_steps", n_steps),
        ("cfl", cfl_number(dt, op.mesh.dx, lam, op.mesh.degree)),
        ("max_wave_speed", lam),
        ("iterations", cfg.iterations),
        ("reference", ref_label),
    ]
    err = None
    if u_ref is not None:
        err = _rel_l2(op, u, u_ref)
        summary.append(("error_l2", err))
    for c in range(op.ncomp):
        summary.append((f"integral0_u{c}", mass0[c]))
        summary.append((f"integral1_u{c}", mass1[c]))
    outputs = {
        "solution.csv": write_csv(out_dir / "solution.csv", header, zip(*cols)),
        "summary.csv": write_csv(out_dir / "summary.csv", ("key", "value"), summary),
    }
    failures = []
    if check:
        exp = cfg.expect
        if "max_error" in exp:
            if err is None:
                failures.append("max_error check needs a reference")
            elif err > exp["max_error"]:
                failures.append(f"error {err:.6g} exceeds {exp['max_error']:.6g}")
        if "conservation_rtol" in exp:
            drift = np.abs(mass1 - mass0)
            # zero-mean fields: measure drift against the solution size instead
            scale = np.maximum(np.abs(mass0), op.norm_l2(u0))
            worst = float(np.max(drift / scale))
            if worst > exp["conservation_rtol"]:
                failures.append(
                    f"integral drift {worst:.6g} exceeds {exp['conservation_rtol']:.6g}"
                )
        if exp.get("positivity") and op.ncomp == 3:
            rho = u3[0]
            p = (bundle.problem.gamma - 1.0) * (u3[2] - 0.5 * u3[1] ** 2 / u3[0])
            if not (np.all(rho > 0) and np.all(p > 0)):
                failures.append("density or pressure lost positivity")
    return outputs, failures


def _sweep_one_cfl(cfg, bundle, cfl, u_ref, shared=None):
    """Error-vs-iterations series at one CFL; stops once the series stalls."""
    if shared is None:
        ops, rules, weights = _build_operators(cfg, bundle)
        hier = _build_hierarchy(cfg, ops, rules, weights) if len(ops) > 1 else None
        op = ops[-1]
        u0 = _initial_state(op, bundle)
        lam = max_wave_speed(op, u0)
    else:
        ops, rules, weights, hier, op, u0, lam = shared
    dt0 = dt_from_cfl(cfl, op.mesh.dx, lam, op.mesh.degree)
    n_steps = max(1, math.ceil(cfg.time.t_end / dt0 - 1e-12))
    dt = cfg.time.t_end / n_steps
    errors, status = [], "ok"
    for k in range(cfg.max_iterations + 1):
        try:
            u = _march(cfg, ops, rules, weights, hier, u0, dt, n_steps, k)
        except SolverError:
            status = "failed"
            break
        e = _rel_l2(op, u, u_ref)
        if not np.isfinite(e):
            status = "failed"
            break
        errors.append(e)
        if len(errors) >= 2 and converged_iteration(errors) is not None:
            break
    stall = converged_iteration(errors) if len(errors) >= 2 else None
    return cfl, n_steps, errors, stall, status


def _run_cfl_sweep(cfg, out_dir, check, rng, threads):
    bundle = build_problem(cfg.problem)
    ops, rules, weights = _build_operators(cfg, bundle)
    hier = _build_hierarchy(cfg, ops, rules, weights) if len(ops) > 1 else None
    op = ops[-1]
    u0 = _initial_state(op, bundle)
    lam = max_wave_speed(op, u0)
    u_ref, ref_label = _reference_state(cfg, bundle, op, u0, lam)
    if threads > 1:
        # fresh operators per job so nothing shares factorization caches
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(
                lambda c: _sweep_one_cfl(cfg, bundle, c, u_ref), cfg.cfl_values
            ))
    else:
        shared = (ops, rules, weights, hier, op, u0, lam)
        results = [_sweep_one_cfl(cfg, bundle, c, u_ref, shared)
                   for c in cfg.cfl_values]

    err_rows, it_rows = [], []
    for cfl, n_steps, errors, stall, status in results:
        for k, e in enumerate(errors):
            err_rows.append((cfl, n_steps, k, e))
        e_at = errors[stall] if stall is not None else (errors[-1] if errors else math.nan)
        it_rows.append((cfl, n_steps, "" if stall is None else stall, e_at, status))
    outputs = {
        "errors.csv": write_csv(out_dir / "errors.csv",
                                ("cfl", "n_steps", "iterations", "error"), err_rows),
        "iterations.csv": write_csv(
            out_dir / "iterations.csv",
            ("cfl", "n_steps", "converged_iteration", "error", "status"), it_rows),
        "summary.csv": write_csv(out_dir / "summary.csv", ("key", "value"), [
            ("t_end", cfg.time.t_end),
            ("max_wave_speed", lam),
            ("reference", ref_label),
            ("max_iterations", cfg.max_iterations),
        ]),
    }
    failures = []
    if check:
        exp = cfg.expect
        for cfl, _, _, stall, status in results:
            if exp.get("all_converged") and (stall is None or status != "ok"):
                failures.append(f"cfl {cfl:g}: did not converge ({status})")
            if "max_iterations_to_converge" in exp and stall is not None:
                if stall > exp["max_iterations_to_converge"]:
                    failures.append(
                        f"cfl {cfl:g}: needed {stall} iterations, expected"
                        f" <= {exp['max_iterations_to_converge']}"
                    )
    return outputs, failures


def _convergence_one(cfg, bundle, n_elems, cfl):
    ops, rules, weights = _build_operators(cfg, bundle, n_elems)
    hier = _build_hierarchy(cfg, ops, rules, weights) if len(ops) > 1 else None
    op = ops[-1]
    u0 = _initial_state(op, bundle)
    lam = max_wave_speed(op, u0)
    dt0 = dt_from_cfl(cfl, op.mesh.dx, lam, op.mesh.degree)
    n_steps = max(1, math.ceil(cfg.time.t_end / dt0 - 1e-12))
    dt = cfg.time.t_end / n_steps
    u = _march(cfg, ops, rules, weights, hier, u0, dt, n_steps, cfg.iterations)
    u_ref = op.nodal_field(lambda x: bundle.exact(x, cfg.time.t_end))
    return n_steps, _rel_l2(op, u, u_ref)


def _run_convergence(cfg, out_dir, check, rng, threads):
    bundle = build_problem(cfg.problem)
    jobs = [(fi, n_elems, cfl)
            for cfl in cfg.cfl_values
            for fi, n_elems in enumerate(cfg.element_counts)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            done = list(ex.map(
                lambda j: _convergence_one(cfg, bundle, j[1], j[2]), jobs
            ))
    else:
        done = [_convergence_one(cfg, bundle, n_elems, cfl)
                for _, n_elems, cfl in jobs]

    err_rows, orders, table = [], [], {}
    for (fi, n_elems, cfl), (n_steps, err) in zip(jobs, done):
        err_rows.append((cfl, fi, n_elems[-1], n_steps, err))
        table[(cfl, fi)] = (n_elems[-1], err)
    order_rows = []
    for cfl in cfg.cfl_values:
        for fi in range(1, len(cfg.element_counts)):
            ne_c, e_c = table[(cfl, fi - 1)]
            ne_f, e_f = table[(cfl, fi)]
            if e_c <= 0 or e_f <= 0:
                order_rows.append((cfl, fi - 1, fi, ""))
                continue
            q = observed_order(e_c, e_f, ratio=ne_f / ne_c)
            orders.append(q)
            order_rows.append((cfl, fi - 1, fi, q))
    outputs = {
        "errors.csv": write_csv(
            out_dir / "errors.csv",
            ("cfl", "family", "n_elem_fine", "n_steps", "error"), err_rows),
        "orders.csv": write_csv(
            out_dir / "orders.csv",
            ("cfl", "family_coarse", "family_fine", "order"), order_rows),
    }
    failures = []
    if check:
        exp = cfg.expect
        if "order_min" in exp and orders and min(orders) < exp["order_min"]:
            failures.append(f"observed order {min(orders):.4g} below {exp['order_min']:g}")
        if "order_max" in exp and orders and max(orders) > exp["order_max"]:
            failures.append(f"observed order {max(orders):.4g} above {exp['order_max']:g}")
        if "error_max" in exp:
            worst = max(r[-1] for r in err_rows)
            if worst > exp["error_max"]:
                failures.append(f"error {worst:.6g} exceeds {exp['error_max']:.6g}")
    return outputs, failures


def _run_equivalence(cfg, out_dir, check, rng, threads):
    e = cfg.equivalence
    coarse = make_nodes(e["nodes"], e["coarse_nodes"])
    fine = make_nodes(e["nodes"], e["fine_nodes"])
    A, B = equivalence_products(coarse, fine, e["node_convention"], e["projection"])
    rows = []
    for name, mat in (("restrict_then_accumulate", A), ("accumulate_then_restrict", B)):
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                rows.append((name, i, j, mat[i, j]))
    diff = float(np.max(np.abs(A - B)))
    outputs = {
        "matrices.csv": write_csv(out_dir / "matrices.csv",
                                  ("matrix", "row", "col", "value"), rows),
        "summary.csv": write_csv(out_dir / "summary.csv", ("key", "value"), [
            ("max_abs_difference", diff),
            ("frobenius_difference", float(np.linalg.norm(A - B))),
            ("coarse_nodes", e["coarse_nodes"]),
            ("fine_nodes", e["fine_nodes"]),
        ]),
    }
    failures = []
    if check:
        exp = cfg.expect
        if "difference_min" in exp and diff < exp["difference_min"]:
            failures.append(
                f"max difference {diff:.6g} below {exp['difference_min']:.6g};"
                " the two sweep forms would coincide"
            )
        if "difference_max" in exp and diff > exp["difference_max"]:
            failures.append(f"max difference {diff:.6g} above {exp['difference_max']:.6g}")
    return outputs, failures


def _run_costmodel(cfg, out_dir, check, rng, threads):
    dims = [(l.n_elem, l.degree, l.n_nodes) for l in cfg.levels]
    units = [(p + 1) * ne * m for ne, p, m in dims]
    ratios = [round(u / units[-1], 2) for u in units]
    slope = cost_mlsdc_cycle(dims, n_coarse=cfg.n_coarse, include_finest_post=False)
    start_cost = cost_start(dims, cfg.start, n_coarse=cfg.n_coarse, c_fmg=cfg.c_fmg)
    closing = 1.0 if cfg.post_sweep else 0.0
    intercept = start_cost + closing
    level_rows = [(i, ne, p, m, units[i], ratios[i])
                  for i, (ne, p, m) in enumerate(dims)]
    summary = [
        ("cycle_cost", slope),
        ("start_cost", start_cost),
        ("closing_cost", closing),
        ("total_intercept", intercept),
        ("start", cfg.start),
        ("n_coarse", cfg.n_coarse),
    ]
    cm = cfg.costmodel or {}
    if cm.get("cycles") is not None:
        total = slope * cm["cycles"] + intercept
        summary.append(("cycles", cm["cycles"]))
        summary.append(("total_cost", total))
        if cm.get("sdc_sweeps") is not None:
            sdc = cost_sdc(cm["sdc_sweeps"])
            summary.append(("sdc_sweeps", cm["sdc_sweeps"]))
            summary.append(("sdc_cost", sdc))
            summary.append(("cost_ratio", total / sdc))
    outputs = {
        "cost.csv": write_csv(
            out_dir / "cost.csv",
            ("level", "n_elem", "degree", "n_nodes", "work_units", "ratio"),
            level_rows),
        "summary.csv": write_csv(out_dir / "summary.csv", ("key", "value"), summary),
    }
    failures = []
    if check:
        exp = cfg.expect
        tol = exp.get("tol", 1e-9)
        if "slope" in exp and abs(slope - exp["slope"]) > tol:
            failures.append(f"cycle cost {slope!r} differs from {exp['slope']!r}")
        if "intercept" in exp and abs(intercept - exp["intercept"]) > tol:
            failures.append(f"intercept {intercept!r} differs from {exp['intercept']!r}")
        if "ratios" in exp:
            want = list(exp["ratios"])
            if len(want) != len(ratios) or any(
                abs(a - b) > tol for a, b in zip(ratios, want)
            ):
                failures.append(f"level ratios {ratios} differ from {want}")
    return outputs, failures


_RUNNERS = {
    "stability": _run_stability,
    "accuracy": _run_accuracy,
    "run": _run_run,
    "cfl-sweep": _run_cfl_sweep,
    "convergence": _run_convergence,
    "equivalence": _run_equivalence,
    "costmodel": _run_costmodel,
}


def run_study(cfg: RunConfig, out_dir, threads: int = 1, seed: int = 0,
              check: bool = False):
    """Run one study, write its artifacts, return ({file: sha256}, failures).

    The seed only feeds the randomized spot checks enabled by check; the
    numeric artifacts never depend on it.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    outputs, failures = _RUNNERS[cfg.study](cfg, out, check, rng, max(1, threads))
    write_manifest(out, cfg, outputs)
    return outputs, failures


# --------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sisdc",
        description="Deferred-correction experiment driver; each subcommand"
        " runs one study described by a JSON config.",
    )
    sub = parser.add_subparsers(dest="study", required=True)
    for name in STUDIES:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to the study config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent sweep points")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for randomized spot checks (with --check)")
        sp.add_argument("--check", action="store_true",
                        help="evaluate the config's expectations; failures exit 4")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        if cfg.study != args.study:
            raise ConfigError(
                f"study: config describes {cfg.study!r}, invoked as {args.study!r}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        outputs, failures = run_study(
            cfg, args.out, threads=args.threads, seed=args.seed, check=args.check
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3

    print(f"{cfg.study}: wrote {len(outputs) + 1} files to {args.out}")
    if failures:
        for f in failures:
            print(f"check failed: {f}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
