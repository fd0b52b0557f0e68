"""Command-line front end: ``domcert <task> --config <path> [--set k=v]... [--out path]``.

Exit codes follow the report status: 0 ok, 2 infeasible / not found, 1 error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import dissipativity as ds
from . import dominance as dm
from . import interconnect as ic
from . import models_sim as ms
from . import plotdata, sdp
from ._io import atomic_write_text
from .errors import DomcertError, Infeasible, InputError
from .matrix_core import SymMatrix, inertia_of

TASKS = ("scan", "analyze", "dissipate", "gain", "compose", "simulate", "verify")
EXIT_CODES = {"ok": 0, "infeasible": 2, "error": 1}

DEFAULTS = {
    "epsilon": dm.DEFAULT_EPSILON,
    "norm_bound": 10.0,
    "residual_tol": sdp.SolverSettings().residual_tol,
    "solver": sdp.SolverSettings().solver,
    "max_iter": sdp.SolverSettings().max_iter,
    "dt": ms.DEFAULT_DT,
    "T": ms.DEFAULT_T,
    "tail_fraction": 0.5,
    "gamma_bracket": [1e-3, 100.0],
    "gamma_tol": 1e-3,
    "samples": 41,
}

Vector = Union[str, list[float]]
Matrix = list[list[float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SupplyConfig(_Strict):
    kind: Literal["passivity", "gain", "custom"] = "passivity"
    gamma: float | None = None
    Q: Matrix | None = None
    L: Matrix | None = None
    R: Matrix | None = None

    @model_validator(mode="after")
    def _complete(self):
        if self.kind == "gain" and self.gamma is None:
            raise ValueError("gain supply needs gamma")
        if self.kind == "custom" and None in (self.Q, self.L, self.R):
            raise ValueError("custom supply needs Q, L and R")
        return self


class ModelConfig(_Strict):
    name: str | None = None
    params: dict[str, Union[float, str]] = {}
    vertices: list[Matrix] | None = None
    B: Matrix | None = None
    C: Matrix | None = None
    D: Matrix | None = None
    input: Vector | None = None
    output: Vector | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.name is None) == (self.vertices is None):
            raise ValueError("give exactly one of name or vertices")
        return self


class Subsystem(ModelConfig):
    supply: SupplyConfig = SupplyConfig()
    lam: float | None = None
    epsilon: float | None = None


class TaskConfig(_Strict):
    type: str | None = None
    lam: float | None = None
    lambda_grid: list[float] | None = None
    lambda_range: tuple[float, float, float] | None = None
    p: int | None = None
    epsilon: float = DEFAULTS["epsilon"]
    norm_bound: float = DEFAULTS["norm_bound"]
    samples: int = DEFAULTS["samples"]
    supply: SupplyConfig | None = None
    gamma_bracket: tuple[float, float] = tuple(DEFAULTS["gamma_bracket"])
    gamma_tol: float = DEFAULTS["gamma_tol"]
    subsystems: list[Subsystem] = []
    H: Matrix | None = None
    mode: Literal["certificates", "small_gain"] = "certificates"
    gamma1: float | None = None
    gamma2: float | None = None
    x0: list[float] | None = None
    dt: float = DEFAULTS["dt"]
    T: float = DEFAULTS["T"]
    tail_fraction: float = DEFAULTS["tail_fraction"]
    certificate: Union[str, dict, None] = None
    tol: float | None = None


class OutputConfig(_Strict):
    trajectory: str | None = None
    locus: str | None = None
    cone: str | None = None


class AnalysisConfig(_Strict):
    model: ModelConfig | None = None
    task: TaskConfig = TaskConfig()
    output: OutputConfig = OutputConfig()


# --- config loading -------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, item: str) -> None:
    """Apply one ``a.b.c=value`` override in place; integer parts index lists."""
    if "=" not in item:
        raise InputError(f"override {item!r} is not of the form key=value")
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) < 2 or not all(parts):
        raise InputError(f"override key {key!r} must look like section.key")
    node = raw
    for part in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise InputError(f"override {key!r}: no list item {part!r}") from None
        else:
            node = node.setdefault(part, {})
        if not isinstance(node, (dict, list)):
            raise InputError(f"override {key!r}: {part!r} is not a table")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = _parse_value(value)
        except (ValueError, IndexError):
            raise InputError(f"override {key!r}: no list item {last!r}") from None
    else:
        node[last] = _parse_value(value)


def load_config(path, overrides=()) -> tuple[dict, AnalysisConfig]:
    """Parsed raw dict (after overrides) and its validated form."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config {path} is not valid TOML: {exc}") from None
    for item in overrides:
        apply_override(raw, item)
    try:
        cfg = AnalysisConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = ["{}: {}".format(".".join(str(x) for x in e["loc"]) or "<root>", e["msg"])
                for e in exc.errors()]
        raise InputError("invalid config: " + "; ".join(msgs)) from None
    return raw, cfg


# --- model plumbing -------------------------------------------------------------------

def _need(value, path):
    if value is None:
        raise InputError(f"{path} is required for this task")
    return value


def _builtin(mc: ModelConfig, path="model"):
    if mc.name is None:
        raise InputError(f"{path}.name is required for this task")
    return ms.builtin(mc.name, mc.params)


def _closed_family(mc: ModelConfig) -> dm.VertexFamily:
    if mc.vertices is not None:
        return dm.VertexFamily(mc.vertices)
    return ms.jacobian_vertices(_builtin(mc))


def _open_family(mc: ModelConfig, path="model") -> ds.OpenVertexFamily:
    if mc.vertices is not None:
        B, C = _need(mc.B, f"{path}.B"), _need(mc.C, f"{path}.C")
        D = mc.D if mc.D is not None else np.zeros((np.shape(C)[0], np.shape(B)[1]))
        return ds.OpenVertexFamily([(A, B, C, D) for A in mc.vertices])
    return ms.open_family(_builtin(mc, path), _need(mc.input, f"{path}.input"),
                          _need(mc.output, f"{path}.output"))


def _supply(sc: SupplyConfig | None, m_y: int, m_u: int) -> ds.SupplyRate:
    sc = sc or SupplyConfig()
    if sc.kind == "passivity":
        if m_y != m_u:
            raise InputError("passivity supply needs as many outputs as inputs")
        return ds.passivity_supply(m_y)
    if sc.kind == "gain":
        return ds.gain_supply(m_y, m_u, sc.gamma)
    return ds.SupplyRate(sc.Q, sc.L, sc.R)


def _grid(tc: TaskConfig):
    if tc.lambda_grid is not None:
        return [float(x) for x in tc.lambda_grid]
    if tc.lambda_range is not None:
        lo, hi, step = tc.lambda_range
        if step <= 0 or hi < lo:
            raise InputError("task.lambda_range must be [lo, hi, step] with step > 0")
        k = int(np.floor((hi - lo) / step + 1e-9))
        return [round(lo + i * step, 12) for i in range(k + 1)]
    return None


def _model(cfg: AnalysisConfig) -> ModelConfig:
    return _need(cfg.model, "model")


# --- tasks ----------------------------------------------------------------------------

def task_scan(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    grid = _need(_grid(tc), "task.lambda_grid")
    if mc.vertices is not None:
        samples = [np.asarray(A, float) for A in mc.vertices]
    else:
        samples = ms.box_samples(_builtin(mc), tc.samples)
    report = dm.spectral_scan(samples, grid)
    result = report.to_dict()
    if cfg.output.locus:
        result["locus_csv"] = str(plotdata.write(out_dir / cfg.output.locus,
                                                 plotdata.eigen_locus_csv(samples)))
    return "ok", result


def _cone_output(cfg, P, out_dir, result):
    if cfg.output.cone and np.shape(P) == (2, 2):
        result["cone_csv"] = str(plotdata.write(out_dir / cfg.output.cone,
                                                plotdata.negative_arc_csv(P)))
        result["cone_boundary"] = plotdata.cone_boundary(P)


def task_analyze(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    fam = _closed_family(mc)
    grid = _grid(tc)
    if grid is not None:
        lam, cert = dm.rate_search(fam, _need(tc.p, "task.p"), grid, tc.epsilon, tc.norm_bound)
    else:
        lam = _need(tc.lam, "task.lam")
        scan = dm.spectral_scan(fam.vertices, [lam])
        split = scan.per_lambda[0]
        if split is None or (tc.p is not None and split != tc.p):
            splits = [dm.eigen_split(A, lam) for A in fam]
            raise Infeasible(
                f"vertex spectra of A + {lam} I do not split consistently"
                + ("" if split is None else f" into degree {tc.p} (found {split})"),
                splits=splits)
        cert = dm.solve_dominance(fam, lam, tc.epsilon, tc.norm_bound)
        if tc.p is not None and cert.p != tc.p:
            raise Infeasible(f"certificate has degree {cert.p}, not {tc.p}")
    result = {"lambda": lam, "certificate": cert.to_dict(),
              "inertia": list(inertia_of(cert.P))}
    _cone_output(cfg, cert.P.entries, out_dir, result)
    return "ok", result


def task_dissipate(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    fam = _open_family(mc)
    supply = _supply(tc.supply, fam.m_y, fam.m_u)
    cert = ds.solve_dissipativity(fam, supply, _need(tc.lam, "task.lam"), tc.epsilon, tc.norm_bound)
    if tc.p is not None and cert.p != tc.p:
        raise Infeasible(f"storage has degree {cert.p}, not {tc.p}")
    return "ok", {"certificate": cert.to_dict(), "inertia": list(inertia_of(cert.P))}


def task_gain(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    fam = _open_family(mc)
    gamma, cert = ds.min_gain(fam, _need(tc.p, "task.p"), _need(tc.lam, "task.lam"), tc.epsilon,
                              tc.gamma_bracket, tc.gamma_tol, tc.norm_bound)
    return "ok", {"gamma": gamma, "certificate": cert.to_dict()}


def task_compose(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    tc = cfg.task
    if tc.mode == "small_gain":
        tau = ic.small_gain_check(_need(tc.gamma1, "task.gamma1"), _need(tc.gamma2, "task.gamma2"))
        return "ok", {"tau": tau}
    if len(tc.subsystems) != 2:
        raise InputError("task.subsystems must list exactly two subsystems")
    fams, certs = [], []
    for k, sub in enumerate(tc.subsystems):
        path = f"task.subsystems.{k}"
        fam = _open_family(sub, path)
        supply = _supply(sub.supply, fam.m_y, fam.m_u)
        lam = sub.lam if sub.lam is not None else _need(tc.lam, f"{path}.lam")
        eps = sub.epsilon if sub.epsilon is not None else tc.epsilon
        fams.append(fam)
        certs.append(ds.solve_dissipativity(fam, supply, lam, eps, tc.norm_bound))
    H = np.asarray(_need(tc.H, "task.H"), dtype=float)
    composed = ic.compose_supplies([c.supply for c in certs], H)
    closed = ic.build_closed_loop_family(fams[0], fams[1], H)
    agg = ic.aggregate_certificates(certs[0], certs[1], H, closed)
    return "ok", {
        "subsystem_certificates": [c.to_dict() for c in certs],
        "composed_supply": composed.to_dict(),
        "closed_loop_vertices": [A.tolist() for A in closed],
        "certificate": agg.to_dict(),
    }


def task_simulate(cfg: AnalysisConfig, out_dir: Path) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    model = _builtin(mc)
    traj = ms.integrate(model, _need(tc.x0, "task.x0"), tc.dt, tc.T)
    att = ms.classify_attractor(traj, tc.tail_fraction)
    name = cfg.output.trajectory or f"{model.name}_trajectory.csv"
    path = plotdata.write(out_dir / name, traj.to_csv())
    return "ok", {"attractor": att.to_dict(), "final_state": traj.final.tolist(),
                  "trajectory_csv": str(path)}


def _load_certificate(spec, base: Path) -> dict:
    if isinstance(spec, dict):
        return spec
    path = Path(spec)
    if not path.is_absolute():
        path = base / path
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read certificate {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"certificate {path} is not valid JSON: {exc}") from None
    if "result" in data:  # a full report
        data = data["result"].get("certificate", data)
    return data


def task_verify(cfg: AnalysisConfig, out_dir: Path, base: Path = Path(".")) -> tuple[str, dict]:
    mc, tc = _model(cfg), cfg.task
    d = _load_certificate(_need(tc.certificate, "task.certificate"), base)
    try:
        n = int(d["n"])
        P = SymMatrix(np.asarray(d["P"], dtype=float).reshape(n, n))
        p, lam = int(d["p"]), float(d["lambda"])
        eps = float(d.get("epsilon", tc.epsilon))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"task.certificate is malformed: {exc}") from None
    if "supply" in d:
        fam = _open_family(mc)
        problem = ds.dissipativity_problem(fam, ds.SupplyRate.from_dict(d["supply"]), lam, eps,
                                           tc.norm_bound)
    else:
        problem = dm.lyapunov_problem(_closed_family(mc), lam, eps, tc.norm_bound)
    residuals = sdp.verify_solution(P.entries, problem)
    tol = tc.tol if tc.tol is not None else DEFAULTS["residual_tol"] * problem.scale()
    inertia = inertia_of(P)
    worst = max(residuals)
    ok = worst <= tol and inertia.neg == p and inertia.zero == 0
    result = {"residuals": residuals, "worst": worst, "tol": tol,
              "inertia": list(inertia), "expected_p": p}
    return ("ok" if ok else "infeasible"), result


RUNNERS = {
    "scan": task_scan, "analyze": task_analyze, "dissipate": task_dissipate,
    "gain": task_gain, "compose": task_compose, "simulate": task_simulate,
    "verify": task_verify,
}


# --- entry points ---------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def run(task: str, config_path, overrides=(), out=None) -> tuple[int, dict]:
    """Execute one task; returns (exit code, report dict). Never raises for task failures."""
    t0 = time.perf_counter()
    report = {"task": task, "version": __version__, "config": None,
              "overrides": list(overrides), "defaults": DEFAULTS}
    try:
        if task not in TASKS:
            raise InputError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
        raw, cfg = load_config(config_path, overrides)
        report["config"] = copy.deepcopy(raw)
        if cfg.task.type is not None and cfg.task.type != task:
            raise InputError(f"task.type is {cfg.task.type!r} but {task!r} was requested")
        base = Path(config_path).resolve().parent
        out_dir = Path(out).resolve().parent if out else Path.cwd()
        if task == "verify":
            status, result = task_verify(cfg, out_dir, base)
        else:
            status, result = RUNNERS[task](cfg, out_dir)
        report.update(status=status, result=result)
    except Infeasible as exc:
        report.update(status="infeasible", message=str(exc), detail=exc.detail)
    except DomcertError as exc:
        report.update(status="error", error=type(exc).__name__, message=str(exc),
                      detail=getattr(exc, "detail", {}))
    except Exception as exc:  # unexpected failure: still emit a report
        report.update(status="error", error=type(exc).__name__, message=str(exc))
    report["timings"] = {"total_s": time.perf_counter() - t0}
    return EXIT_CODES[report["status"]], _jsonable(report)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"usage error: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="domcert", description="Dominance and dissipativity analysis.")
    ap.add_argument("task", help=" | ".join(TASKS))
    ap.add_argument("--config", required=True, help="TOML file with [model], [task], [output]")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry, e.g. task.lam=2")
    ap.add_argument("--out", help="write the JSON report here instead of stdout")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        parser.print_usage(sys.stderr)
        report = {"task": None, "version": __version__, "status": "error",
                  "error": "InputError", "message": str(exc)}
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
        return EXIT_CODES["error"]
    code, report = run(args.task, args.config, args.overrides, args.out)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        try:
            atomic_write_text(args.out, text)
        except OSError as exc:
            print(f"domcert: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            sys.stdout.write(text)
            return 1
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
