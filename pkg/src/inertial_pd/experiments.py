"""Reproducible runs: configuration, artifacts and the preset figure sweeps."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .dynamics import FlowState, SystemVariant
from .integrator import StepperConfig, Trajectory, integrate
from .problem import (ConstrainedProblem, SaddleCertificate, example2_problem, generate_random_qp,
                      minimal_norm_solution, solve_saddle_point)
from .schedules import ParameterSet, PowerSchedule, RegimeReport, classify_regime

log = logging.getLogger(__name__)

DEFAULT_SEED = 7
LONG_HORIZON = 1e3
# Tolerances used for the figure presets: at the library defaults the
# controller's noise floor (~rtol * |y|) masks the decay of the residuals.
FIGURE_STEPPER = StepperConfig(rtol=1e-8, atol=1e-11, max_steps=10**8)
FIT_NAMES = ("feasibility", "obj_residual", "gap", "speed", "dist_min_norm", "kkt_stationarity")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    name: str
    problem: dict
    params: ParameterSet
    beta: PowerSchedule
    eps: PowerSchedule
    variant: SystemVariant = SystemVariant.TIKHONOV_SCALED
    initial: object = "ones"
    t_end: float = 100.0
    stepper: StepperConfig = field(default_factory=StepperConfig)
    samples: int = 400
    allow_long: bool = False

    def __post_init__(self):
        if self.t_end <= self.params.t0:
            raise ConfigError("t_end must exceed t0")
        if self.t_end > LONG_HORIZON and not self.allow_long:
            raise ConfigError(f"t_end > {LONG_HORIZON:g} needs allow_long (forcing grows like t^(r2+1))")
        if self.samples < 3:
            raise ConfigError("need at least 3 samples")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "problem": dict(self.problem),
            "alpha": self.params.alpha,
            "theta": self.params.theta,
            "rho": self.params.rho,
            "t0": self.params.t0,
            "beta": self.beta.to_dict(),
            "eps": self.eps.to_dict(),
            "variant": self.variant.value,
            "initial": self.initial,
            "t_end": self.t_end,
            "stepper": {
                "rtol": self.stepper.rtol, "atol": self.stepper.atol, "h_init": self.stepper.h_init,
                "h_max": self.stepper.h_max, "safety": self.stepper.safety,
                "max_steps": self.stepper.max_steps,
            },
            "samples": self.samples,
            "allow_long": self.allow_long,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            params = ParameterSet(float(d["alpha"]), float(d["theta"]), float(d["rho"]),
                                  float(d.get("t0", 1.0)))
            stepper = StepperConfig(**d.get("stepper", {}))
            return cls(
                name=str(d.get("name", "run")),
                problem=dict(d["problem"]),
                params=params,
                beta=PowerSchedule.from_dict(d["beta"]),
                eps=PowerSchedule.from_dict(d["eps"]),
                variant=SystemVariant.parse(d.get("variant", "TikhonovScaled")),
                initial=d.get("initial", "ones"),
                t_end=float(d.get("t_end", 100.0)),
                stepper=stepper,
                samples=int(d.get("samples", 400)),
                allow_long=bool(d.get("allow_long", False)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid run config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build_problem(spec: dict) -> ConstrainedProblem:
    kind = spec.get("kind")
    try:
        if kind == "random":
            return generate_random_qp(int(spec["n"]), int(spec["m"]), int(spec.get("seed", DEFAULT_SEED)),
                                      spec.get("mode", "general"))
        if kind == "example2":
            return example2_problem(float(spec["d"]), float(spec["e"]), float(spec["v"]))
        if kind == "file":
            return ConstrainedProblem.load(spec["path"])
    except (KeyError, OSError, ValueError) as exc:
        raise ConfigError(f"cannot build problem {spec}: {exc}") from exc
    raise ConfigError(f"unknown problem kind {kind!r}")


def initial_state(spec, problem: ConstrainedProblem, t0: float, saddle: SaddleCertificate) -> FlowState:
    n, m = problem.n, problem.m
    if spec == "ones":
        return FlowState(t0, np.ones(n), np.ones(m), np.ones(n), np.ones(m))
    if spec == "saddle":
        return FlowState(t0, saddle.x.copy(), saddle.lam.copy(), np.zeros(n), np.zeros(m))
    if isinstance(spec, dict):
        try:
            s = FlowState(t0, *(np.asarray(spec[k], dtype=float).reshape(-1)
                                for k in ("x", "lambda", "vx", "vlambda")))
        except KeyError as exc:
            raise ConfigError(f"initial state misses {exc}") from exc
        if s.dims != (n, m) or s.vx.size != n or s.vlam.size != m:
            raise ConfigError("initial state dimensions do not match the problem")
        return s
    raise ConfigError(f"unknown initial state {spec!r}")


def sample_grid(config: RunConfig) -> np.ndarray:
    return np.geomspace(config.params.t0, config.t_end, config.samples)


@dataclass
class RunResult:
    config: RunConfig
    problem: ConstrainedProblem
    regime: RegimeReport
    saddle: SaddleCertificate
    min_norm: np.ndarray
    trajectory: Trajectory
    records: list
    fits: dict
    elapsed: float

    def column(self, name: str) -> np.ndarray:
        return dg.column(self.records, name)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")


def _fits(records, t_end: float) -> dict:
    t = dg.column(records, "t")
    out = {}
    for name in FIT_NAMES:
        try:
            fit = dg.fit_rate(t, dg.column(records, name), (t_end / 10.0, t_end), use_envelope=True)
        except ValueError as exc:
            out[name] = {"error": str(exc)}
        else:
            out[name] = fit.to_dict()
    return out


def simulate(config: RunConfig, problem: ConstrainedProblem | None = None) -> RunResult:
    """Integrate one configuration and evaluate diagnostics on its sample grid."""
    start = time.perf_counter()
    if problem is None:
        problem = build_problem(config.problem)
    regime = classify_regime(config.params, config.beta, config.eps)
    if not regime.assumption1:
        log.warning("%s: base parameter conditions (assumption1) do not hold; running anyway", config.name)
    saddle = solve_saddle_point(problem)
    rho_oracle = config.params.rho if config.params.rho > 0 else 1.0
    xbar = minimal_norm_solution(problem, rho=rho_oracle, saddle=saddle)
    init = initial_state(config.initial, problem, config.params.t0, saddle)
    traj = integrate(problem, config.params, config.beta, config.eps, config.variant, init,
                     config.t_end, config.stepper, sample_grid(config))
    records = dg.trajectory_records(traj, problem, config.params, config.beta, config.eps,
                                    config.variant, saddle.point, xbar)
    fits = _fits(records, config.t_end)
    return RunResult(config, problem, regime, saddle, xbar, traj, records, fits,
                     time.perf_counter() - start)


def metadata(result: RunResult) -> dict:
    cfg = result.config
    return {
        "config": cfg.to_dict(),
        "regime": result.regime.to_dict(),
        "saddle": {
            "x": result.saddle.x.tolist(),
            "lambda": result.saddle.lam.tolist(),
            "stationarity_residual": result.saddle.stationarity_residual,
            "feasibility_residual": result.saddle.feasibility_residual,
            "rank_deficient": result.saddle.rank_deficient,
        },
        "min_norm_solution": result.min_norm.tolist(),
        "seed": cfg.problem.get("seed"),
        "integration": {k: result.trajectory.stats[k] for k in ("accepted", "rejected", "backend")},
    }


@dataclass(frozen=True)
class RunArtifact:
    name: str
    csv_path: Path
    meta_path: Path
    fits_path: Path
    result: RunResult


def write_artifact(result: RunResult, out_dir) -> RunArtifact:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.meta.json"
    fits_path = out / f"{name}.fits.json"
    dg.write_csv(result.records, csv_path)
    meta_path.write_text(json.dumps(metadata(result), indent=2) + "\n")
    fits_path.write_text(json.dumps(result.fits, indent=2) + "\n")
    return RunArtifact(name, csv_path, meta_path, fits_path, result)


def cmd_run(config: RunConfig, out_dir) -> RunArtifact:
    return write_artifact(simulate(config), out_dir)


def cmd_check(config: RunConfig) -> RegimeReport:
    return classify_regime(config.params, config.beta, config.eps)


COMPARE_COLUMNS = ("obj_residual", "feasibility", "dist_min_norm")


def _same_problem(a: ConstrainedProblem, b: ConstrainedProblem) -> bool:
    return (a.n == b.n and a.m == b.m and np.array_equal(a.Q, b.Q) and np.array_equal(a.q, b.q)
            and np.array_equal(a.A, b.A) and np.array_equal(a.b, b.b))


def cmd_compare(configs: list[RunConfig], out_path=None, workers: int | None = None) -> tuple[list, np.ndarray]:
    """Run several configurations on one problem and grid; return header and table."""
    if not configs:
        raise ConfigError("nothing to compare")
    problems = [build_problem(c.problem) for c in configs]
    for c, p in zip(configs[1:], problems[1:]):
        if not _same_problem(problems[0], p):
            raise ConfigError(f"{c.name}: problem differs from {configs[0].name}")
        if (c.params.t0, c.t_end, c.samples) != (configs[0].params.t0, configs[0].t_end, configs[0].samples):
            raise ConfigError(f"{c.name}: sample grid differs from {configs[0].name}")
    results = run_many(configs, workers, problems)
    header = ["t"]
    labels = []
    for i, c in enumerate(configs):
        label = c.name if c.name not in labels else f"{c.name}#{i}"
        labels.append(label)
        header += [f"{label}:{col}" for col in COMPARE_COLUMNS]
    cols = [results[0].times]
    for r in results:
        cols += [r.column(col) for col in COMPARE_COLUMNS]
    table = np.column_stack(cols)
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in table:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    return header, table


def run_many(configs: list[RunConfig], workers: int | None = None, problems=None) -> list[RunResult]:
    """One integration per worker thread; the compiled kernel releases the GIL."""
    if problems is None:
        problems = [None] * len(configs)
    workers = workers or min(len(configs), os.cpu_count() or 1)
    if workers <= 1:
        return [simulate(c, p) for c, p in zip(configs, problems)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(simulate, configs, problems))


# presets -------------------------------------------------------------------

def example1_config(r2: float = 1.5, *, variant="TikhonovScaled", n: int = 50, m: int = 20,
                    seed: int = DEFAULT_SEED, mode: str = "general", t_end: float = 100.0,
                    samples: int = 400, stepper: StepperConfig = FIGURE_STEPPER,
                    name: str | None = None) -> RunConfig:
    variant = SystemVariant.parse(variant)
    tag = "zavd" if variant is SystemVariant.Z_AVD else f"z2_r2={r2:g}"
    return RunConfig(
        name=name or f"ex1_{mode}_n{n}_m{m}_{tag}",
        problem={"kind": "random", "n": n, "m": m, "seed": seed, "mode": mode},
        params=ParameterSet(15.0, 1.0 / 13.0, 1.0, 1.0),
        beta=PowerSchedule(1.0, r2),
        eps=PowerSchedule.decaying(1.0, 4.0),
        variant=variant,
        t_end=t_end,
        stepper=stepper,
        samples=samples,
    )


EXAMPLE2_INITIAL = {"x": [1.0, 1.0, -1.0], "lambda": [1.0], "vx": [1.0, 1.0, 1.0], "vlambda": [1.0]}


def example2_config(r1: float = 1.0, *, d: float = 5.0, e: float = 1.0, v: float = 1.0,
                    variant="TikhonovScaled", t_end: float = 100.0, samples: int = 400,
                    stepper: StepperConfig = StepperConfig(), name: str | None = None) -> RunConfig:
    variant = SystemVariant.parse(variant)
    tag = "hnavd" if variant is SystemVariant.HN_AVD else f"z2_r1={r1:g}"
    return RunConfig(
        name=name or f"ex2_d{d:g}_e{e:g}_v{v:g}_{tag}",
        problem={"kind": "example2", "d": d, "e": e, "v": v},
        params=ParameterSet(13.0, 1.0 / 8.0, 1.0, 1.0),
        beta=PowerSchedule(1.0, 0.9),
        eps=PowerSchedule.decaying(2.8, r1),
        variant=variant,
        initial=EXAMPLE2_INITIAL,
        t_end=t_end,
        stepper=stepper,
        samples=samples,
    )


def preset_configs(example: str, t_end: float = 100.0, samples: int = 400, seed: int = DEFAULT_SEED,
                   rtol: float | None = None) -> list[RunConfig]:
    fig = FIGURE_STEPPER if rtol is None else replace(FIGURE_STEPPER, rtol=rtol)
    ex2 = StepperConfig(max_steps=10**8) if rtol is None else StepperConfig(rtol=rtol, max_steps=10**8)
    kw = dict(t_end=t_end, samples=samples)
    if example == "1a":
        cfgs = [example1_config(r2, seed=seed, stepper=fig, **kw) for r2 in (1.0, 1.5, 1.8)]
        cfgs.append(example1_config(1.5, variant="Z_AVD", seed=seed, stepper=fig, **kw))
        return cfgs
    if example == "1b":
        return [example1_config(r2, n=k, m=k, mode="orthogonal-square", seed=seed, stepper=fig, **kw)
                for k in (10, 50) for r2 in (1.0, 1.5, 1.8)]
    if example == "2a":
        return [example2_config(r1, stepper=ex2, **kw) for r1 in (1.0, 1.9, 2.4)]
    if example == "2b":
        return [example2_config(1.0, d=d, e=e, v=v, variant=var, stepper=ex2, **kw)
                for (d, e, v) in ((5.0, 1.0, 1.0), (120.0, 5.0, 25.0))
                for var in ("TikhonovScaled", "HN_AVD")]
    raise ConfigError(f"unknown example {example!r}; expected one of 1a, 1b, 2a, 2b")


def cmd_reproduce(example: str, out_dir, workers: int | None = None, **kw) -> list[RunArtifact]:
    configs = preset_configs(example, **kw)
    return [write_artifact(r, out_dir) for r in run_many(configs, workers)]
