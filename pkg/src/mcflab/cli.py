"""Command-line entry point: ``mcflab <subcommand> [flags]``.

Settings come from an optional ``key = value`` file (``--config``) and flags;
flags win. Outputs are written under ``--out-dir`` together with
``manifest.json``. Exit codes: 0 success, 1 gating check failure,
2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
import typing
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .ambient import parse_ambient
from .flow import FlowConfig, FlowStopped, run_flow
from .functionals import SearchConfig, area_growth, entropy, equivalence_check, li_yau_check
from .heat_kernel import KernelConfig, NumericOverflowError, kernel_selftest
from .shapes import make_shape
from .suites import SuiteContext, resolve_suites, run_suites
from .surface import MeshValidationError, load_mesh, save_mesh

SUBCOMMANDS = ("make-mesh", "kernel-selftest", "entropy", "area-growth", "check-bounds", "flow", "verify")
THREADS_ENV = "MCFLAB_THREADS"
MANIFEST = "manifest.json"
DEFAULT_OUT = {
    "make-mesh": "mesh.off",
    "kernel-selftest": "kernel_selftest.jsonl",
    "entropy": "entropy.json",
    "area-growth": "area_growth.json",
    "check-bounds": "check_bounds.json",
    "flow": "series.csv",
}
SELFTEST_TIMES = tuple(np.geomspace(0.01, 10.0, 25).tolist())


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    """Every setting of a run. An empty config file gives these defaults."""

    ambient: str = "euclidean3"  # euclidean3 | torus:Lx,Ly,Lz | sphere3
    mesh: str = "icosphere:1,3"  # generator spec or OFF path; ';' separates a family
    perturb: Optional[str] = None  # "amp,mode"
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    grid: int = 8  # background lattice points per axis
    n_t: int = 48
    quad_order: int = 6
    n_starts: int = 3
    dt_safety: float = 0.2
    t_end: float = 1.0
    record_every: int = 10
    record_dt: Optional[float] = None
    lambda_every: int = 0
    max_h: float = math.inf
    min_quality: float = 0.05
    suite: str = "all"
    samples: int = 1000  # Li-Yau samples for check-bounds
    kernel_samples: int = 4
    truncation_tol: float = 1e-12
    crossover_time: float = 1.0
    out_dir: str = "."
    out: Optional[str] = None
    final_mesh: Optional[str] = None
    seed: int = 0
    threads: int = 1

    def search_cfg(self) -> SearchConfig:
        return SearchConfig(
            t_min=self.t_min,
            t_max=self.t_max,
            n_t=self.n_t,
            r_min=self.r_min,
            r_max=self.r_max,
            lattice=self.grid,
            quad_order=self.quad_order,
            n_starts=self.n_starts,
            threads=self.threads,
        )

    def kernel_cfg(self) -> KernelConfig:
        return KernelConfig(self.truncation_tol, self.crossover_time)

    def flow_cfg(self) -> FlowConfig:
        return FlowConfig(
            dt_safety=self.dt_safety,
            record_every=self.record_every,
            record_dt=self.record_dt,
            lambda_every=self.lambda_every,
            t_end=self.t_end,
            max_h=self.max_h,
            min_quality=self.min_quality,
        )

    def echo(self) -> dict:
        return _jsonable(dataclasses.asdict(self))


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_HINTS = typing.get_type_hints(RunConfig)


def _convert(key: str, text: str):
    hint = _HINTS[key]
    optional = typing.get_origin(hint) is typing.Union
    base = [a for a in typing.get_args(hint) if a is not type(None)][0] if optional else hint
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if base is int:
            return int(text, 0)
        if base is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {base.__name__}") from None
    return text


def _key(raw: str) -> str:
    return raw.strip().replace("-", "_")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; quotes are stripped."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        values[_key(k)] = v
    return values


def parse_config(path=None, overrides: Optional[dict] = None, defaults: Optional[dict] = None) -> RunConfig:
    """Built-in defaults, then ``defaults``, then the file at ``path``, then
    ``overrides``; values may be text or already typed."""
    raw = {_key(k): v for k, v in (defaults or {}).items() if v is not None}
    raw.update(read_config_file(path) if path else {})
    raw.update({_key(k): v for k, v in (overrides or {}).items() if v is not None})
    values = {}
    for k, v in raw.items():
        if k not in _FIELDS:
            raise ConfigError(f"{k}: unknown key")
        values[k] = _convert(k, v) if isinstance(v, str) else v
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def _parse_perturb(text: Optional[str]):
    if text is None:
        return None
    try:
        amp, mode = text.split(",")
        return float(amp), int(mode)
    except ValueError:
        raise ConfigError(f"perturb: expected 'amp,mode', got {text!r}") from None


def validate(cfg: RunConfig) -> None:
    try:
        parse_ambient(cfg.ambient)
    except ValueError as exc:
        raise ConfigError(f"ambient: {exc}") from None
    for lo, hi in (("t_min", "t_max"), ("r_min", "r_max")):
        a, b = getattr(cfg, lo), getattr(cfg, hi)
        for k, v in ((lo, a), (hi, b)):
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{k}: must be positive and finite")
        if a is not None and b is not None and not a < b:
            raise ConfigError(f"{lo}/{hi}: contradictory window ({a} >= {b})")
    positive = ("grid", "n_t", "n_starts", "dt_safety", "t_end", "record_every", "samples", "kernel_samples", "threads", "crossover_time", "max_h")
    for k in positive:
        if not getattr(cfg, k) > 0:
            raise ConfigError(f"{k}: must be positive")
    for k in ("record_dt",):
        v = getattr(cfg, k)
        if v is not None and not v > 0:
            raise ConfigError(f"{k}: must be positive")
    if cfg.lambda_every < 0:
        raise ConfigError("lambda_every: must be non-negative")
    if cfg.quad_order not in (1, 3, 6):
        raise ConfigError("quad_order: must be 1, 3 or 6")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be a 64-bit unsigned integer")
    if not 0.0 < cfg.truncation_tol <= 1e-6:
        raise ConfigError("truncation_tol: must lie in (0, 1e-6]")
    if not 0.0 <= cfg.min_quality < 1.0:
        raise ConfigError("min_quality: must lie in [0, 1)")
    _parse_perturb(cfg.perturb)
    try:
        resolve_suites(cfg.suite)
    except ValueError as exc:
        raise ConfigError(f"suite: {exc}") from None
    for spec in cfg.mesh.split(";"):
        spec = spec.strip()
        if not spec:
            raise ConfigError("mesh: empty entry")
        if not spec.lower().endswith(".off"):
            name = spec.partition(":")[0]
            if name not in ("icosphere", "slice", "equator", "clifford", "geodesic-sphere"):
                raise ConfigError(f"mesh: unknown shape {name!r}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def dumps(obj, indent=None) -> str:
    """Deterministic JSON: sorted keys, repr floats, non-finite values as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=indent, allow_nan=False)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    timings: dict = field(default_factory=dict)
    outputs: List[dict] = field(default_factory=list)
    status: str = "ok"
    exit_code: int = 0
    message: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class Run:
    """Output bookkeeping: files are written as ``name.partial`` and renamed
    when the run succeeds; failed runs keep the ``.partial`` files."""

    def __init__(self, command: str, cfg: RunConfig):
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir)
        self.manifest = RunManifest(command, cfg.echo())
        self.pending: List[str] = []

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except (ValueError, MeshValidationError, OSError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{name}: {exc}") from exc
        finally:
            self.manifest.timings[name] = time.perf_counter() - t0

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.pending.append(name)
        return self.out_dir / (name + ".partial")

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text, encoding="utf-8")

    def finish(self, ok: bool) -> None:
        for name in self.pending:
            src = self.out_dir / (name + ".partial")
            if not src.exists():
                continue
            final = name if ok else name + ".partial"
            if ok:
                os.replace(src, self.out_dir / name)
            self.manifest.outputs.append({"path": final, "sha256": sha256_file(self.out_dir / final), "bytes": (self.out_dir / final).stat().st_size})
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / MANIFEST).write_text(dumps(self.manifest.as_dict(), indent=2) + "\n", encoding="utf-8")


def load_meshes(cfg: RunConfig):
    amb = parse_ambient(cfg.ambient)
    perturb = _parse_perturb(cfg.perturb)
    meshes = []
    for spec in cfg.mesh.split(";"):
        spec = spec.strip()
        if spec.lower().endswith(".off"):
            p = Path(cfg.out_dir) / spec
            p = p if p.exists() else Path(spec)
            meshes.append(load_mesh(p, amb))
        else:
            meshes.append(make_shape(spec, amb, perturb=perturb))
    return meshes


def _out_name(cfg: RunConfig, command: str) -> str:
    return cfg.out or DEFAULT_OUT[command]


def _assertion(check, value, threshold, **detail) -> dict:
    return {"check": check, "value": value, "threshold": threshold, "passed": bool(value < threshold), **detail}


def cmd_make_mesh(run: Run) -> bool:
    with run.stage("mesh"):
        mesh = load_meshes(run.cfg)[0]
    save_mesh(mesh, run.path(_out_name(run.cfg, "make-mesh")))
    return True


def cmd_kernel_selftest(run: Run) -> bool:
    cfg = run.cfg
    with run.stage("kernel-selftest"):
        amb = parse_ambient(cfg.ambient)
        times = SELFTEST_TIMES if amb.is_compact else None
        rep = kernel_selftest(amb, cfg.kernel_cfg(), cfg.kernel_samples, times, cfg.seed)
    semi_tol = 1e-8 if amb.is_compact else 1e-9
    lines = [
        _assertion("symmetry", rep.max_symmetry_err, 1e-12),
        _assertion("normalization", rep.max_normalization_err, 1e-8),
        _assertion("semigroup", rep.max_semigroup_err, semi_tol),
        _assertion("dual series", rep.max_dual_series_err, 1e-8),
    ]
    run.write_text(_out_name(cfg, "kernel-selftest"), "".join(dumps(x) + "\n" for x in lines + [{"report": rep.as_dict()}]))
    return all(x["passed"] for x in lines)


def _report_json(mesh_spec, cfg, body) -> str:
    return dumps({"ambient": cfg.ambient, "mesh": mesh_spec, "seed": cfg.seed, **body}, indent=2) + "\n"


def cmd_entropy(run: Run) -> bool:
    cfg = run.cfg
    with run.stage("mesh"):
        mesh = load_meshes(cfg)[0]
    with run.stage("entropy"):
        rep = entropy(mesh, cfg.search_cfg(), cfg.kernel_cfg())
    run.write_text(_out_name(cfg, "entropy"), _report_json(cfg.mesh, cfg, rep.as_dict()))
    return True


def cmd_area_growth(run: Run) -> bool:
    cfg = run.cfg
    with run.stage("mesh"):
        mesh = load_meshes(cfg)[0]
    with run.stage("area-growth"):
        rep = area_growth(mesh, cfg.search_cfg())
    run.write_text(_out_name(cfg, "area-growth"), _report_json(cfg.mesh, cfg, rep.as_dict()))
    return True


def cmd_check_bounds(run: Run) -> bool:
    cfg = run.cfg
    with run.stage("mesh"):
        meshes = load_meshes(cfg)
    with run.stage("li-yau"):
        ly = li_yau_check(parse_ambient(cfg.ambient), n_samples=cfg.samples, seed=cfg.seed, kernel_cfg=cfg.kernel_cfg())
    with run.stage("equivalence"):
        eq = equivalence_check(meshes, search_cfg=cfg.search_cfg(), kernel_cfg=cfg.kernel_cfg())
    ok = ly.passed and eq.passed and ly.c_low > 0.01 and ly.c_up < 1e4
    body = {"li_yau": ly.as_dict(), "equivalence": eq.as_dict(), "passed": ok}
    run.write_text(_out_name(cfg, "check-bounds"), _report_json(cfg.mesh, cfg, body))
    return ok


def cmd_flow(run: Run) -> bool:
    cfg = run.cfg
    with run.stage("mesh"):
        mesh = load_meshes(cfg)[0]
    with run.stage("flow"):
        series = run_flow(mesh, cfg.flow_cfg(), cfg.search_cfg(), cfg.kernel_cfg())
    series.write_csv(run.path(_out_name(cfg, "flow")))
    if cfg.final_mesh:
        save_mesh(series.final.mesh, run.path(cfg.final_mesh))
    if series.failed:
        raise FlowStopped(f"flow: {series.stop_reason} at t={series.final.time:.6g}", series.final)
    return True


def cmd_verify(run: Run) -> bool:
    cfg = run.cfg
    ctx = SuiteContext(seed=cfg.seed, threads=cfg.threads, kernel_cfg=cfg.kernel_cfg())
    ok = True
    for name in resolve_suites(cfg.suite):
        with run.stage(f"verify:{name}"):
            items = run_suites([name], ctx)
        run.write_text(f"verify_{name}.jsonl", "".join(dumps(a.as_dict()) + "\n" for a in items))
        ok &= all(a.passed or not a.gating for a in items)
    return ok


COMMANDS = {
    "make-mesh": cmd_make_mesh,
    "kernel-selftest": cmd_kernel_selftest,
    "entropy": cmd_entropy,
    "area-growth": cmd_area_growth,
    "check-bounds": cmd_check_bounds,
    "flow": cmd_flow,
    "verify": cmd_verify,
}


def run(command: str, cfg: RunConfig) -> RunManifest:
    """Execute ``command``; the manifest's ``exit_code`` follows the exit contract."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}")
    r = Run(command, cfg)
    m = r.manifest
    try:
        passed = COMMANDS[command](r)
        m.exit_code, m.status = (0, "ok") if passed else (1, "gating check failed")
    except ConfigError as exc:
        m.exit_code, m.status, m.message = 2, "configuration error", str(exc)
    except (NumericOverflowError, FlowStopped, FloatingPointError) as exc:
        m.exit_code, m.status, m.message = 3, "numeric failure", str(exc)
    r.finish(m.exit_code in (0, 1))
    return m


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcflab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mcflab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        for key in _FIELDS:
            flag = "--" + key.replace("_", "-")
            helptext = f"default: {_FIELDS[key].default!r}"
            if key == "threads":
                helptext = f"default: ${THREADS_ENV} or 1"
            p.add_argument(flag, dest=key, default=None, metavar=key.upper(), help=helptext)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in _FIELDS}
    try:
        cfg = parse_config(args.config, overrides, {"threads": os.environ.get(THREADS_ENV) or None})
    except ConfigError as exc:
        print(f"mcflab: configuration error: {exc}", file=sys.stderr)
        return 2
    m = run(args.command, cfg)
    if m.exit_code:
        print(f"mcflab {args.command}: {m.status}{': ' + m.message if m.message else ''}", file=sys.stderr)
    return m.exit_code


if __name__ == "__main__":
    sys.exit(main())
