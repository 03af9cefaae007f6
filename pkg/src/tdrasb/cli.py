"""Command-line driver: ``tdrasb run <config.json>`` and ``tdrasb tables <config.json>``.

Exit status: 0 on success, 2 for an invalid configuration, 3 when time
propagation fails, 1 for any other error.  ``TDRASB_MAX_WORKERS`` caps the
BLAS thread pool and the number of parallel table cells (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from threadpoolctl import threadpool_limits

from .dvr import Interaction, Model, Trap, build_grid
from .errors import PropagationError
from .fock import FockSpace, RasSpec, Scheme, cost_delta, dim_fci, dim_ras
from .observables import NoOscillationError, breathing_frequency, breathing_omega, density_profile
from .propagator import IntegratorSpec, initial_guess, propagate, relax, sample_observables
from .secondq import FockOperators

log = logging.getLogger("tdrasb")

WORKERS_ENV = "TDRASB_MAX_WORKERS"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = Field(101, ge=2)

    @model_validator(mode="after")
    def _box(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self


class InteractionConfig(_Strict):
    kind: Literal["contact", "harmonic"] = "contact"
    strength: float = 0.0


class IntegratorConfig(_Strict):
    method: Literal["rk4", "rk45"] = "rk45"
    dt: float = Field(1e-3, gt=0)
    abs_tol: float = Field(1e-10, gt=0)
    rel_tol: float = Field(1e-10, gt=0)
    max_dt: float = Field(0.05, gt=0)


class RelaxConfig(_Strict):
    method: Literal["rk4", "rk45"] = "rk4"
    dt: float = Field(0.01, gt=0)
    tol_energy: float = Field(1e-10, gt=0)
    max_steps: int = Field(200_000, ge=1)
    sample_every: int = Field(10, ge=1)


class RelaxTask(_Strict):
    kind: Literal["relax"]


class QuenchTask(_Strict):
    kind: Literal["quench"]
    strength: float
    interaction: Optional[Literal["contact", "harmonic"]] = None
    t_final: float = Field(15.0, gt=0)
    sample_interval: float = Field(0.05, gt=0)


class DimsTask(_Strict):
    kind: Literal["dims"]


class CostTask(_Strict):
    kind: Literal["cost"]


class OutputConfig(_Strict):
    directory: str = "."
    prefix: str = "run"


class RunConfig(_Strict):
    particles: int = Field(ge=1)
    orbitals: int = Field(1, ge=1)
    m1: Optional[int] = Field(None, ge=1)
    scheme: str = "full"
    grid: GridConfig = GridConfig()
    trap_omega: float = Field(1.0, gt=0)
    interaction: InteractionConfig = InteractionConfig()
    task: Union[RelaxTask, QuenchTask, DimsTask, CostTask] = Field(RelaxTask(kind="relax"), discriminator="kind")
    integrator: IntegratorConfig = IntegratorConfig()
    relax: RelaxConfig = RelaxConfig()
    seed: int = 0
    output: OutputConfig = OutputConfig()

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v):
        Scheme.parse(v)
        return v

    @model_validator(mode="after")
    def _spec(self):
        self.ras_spec()
        return self

    def ras_spec(self) -> RasSpec:
        scheme = Scheme.parse(self.scheme)
        m1 = self.m1 if self.m1 is not None else (self.orbitals if scheme.kind == "full" else 1)
        if m1 > self.orbitals:
            raise ValueError("m1 cannot exceed orbitals")
        return RasSpec(self.particles, m1, self.orbitals - m1, scheme)


class CellConfig(_Strict):
    label: Optional[str] = None
    orbitals: int = Field(ge=1)
    m1: Optional[int] = Field(None, ge=1)
    scheme: str = "full"


class TablesConfig(RunConfig):
    cells: list[CellConfig] = []
    task: Union[RelaxTask, QuenchTask, DimsTask, CostTask] = Field(RelaxTask(kind="relax"), discriminator="kind")


class ConfigError(ValueError):
    pass


def load_config(path: str, cls=RunConfig):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return cls.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{loc}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from exc


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _model(cfg: RunConfig, interaction: Optional[InteractionConfig] = None) -> Model:
    inter = interaction or cfg.interaction
    return Model(
        build_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_points),
        Trap(cfg.trap_omega),
        Interaction(inter.kind, inter.strength),
    )


def _dims_summary(spec: RasSpec) -> dict:
    return {
        "dim": dim_ras(spec),
        "dim_full": dim_fci(spec.n_particles, spec.m),
        "shell_dims": {str(k): d1 * d2 for k, (d1, d2) in spec.shell_dims().items()},
        "scheme": str(spec.scheme),
        "m1": spec.m1,
        "m2": spec.m2,
    }


def _write_series(path: Path, samples, m: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "norm", "rho0"] + [f"n{k + 1}" for k in range(m)])
        for s in samples:
            occ = list(s.occupations) + [0.0] * (m - len(s.occupations))
            w.writerow([f"{x:.17g}" for x in [s.t, s.energy, s.norm, s.rho0] + occ])


def _write_density(path: Path, x: np.ndarray, rho: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho"])
        for a, b in zip(x, rho):
            w.writerow([f"{a:.17g}", f"{b:.17g}"])


def execute(cfg: RunConfig) -> dict:
    """Run one configuration, write its output files and return the summary."""
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = out_dir / cfg.output.prefix
    spec = cfg.ras_spec()
    summary: dict = {"task": cfg.task.kind, "particles": spec.n_particles, "orbitals": spec.m, "seed": cfg.seed}
    summary.update(_dims_summary(spec))
    start = time.perf_counter()
    kind = cfg.task.kind
    if kind == "cost":
        summary["cost_delta"] = cost_delta(spec.n_particles, spec.m1, spec.m2, spec.scheme, cfg.grid.n_points)
    elif kind in ("relax", "quench"):
        model = _model(cfg)
        space = FockSpace(spec)
        ops = FockOperators(space)
        rc = cfg.relax
        relax_int = IntegratorSpec(rc.method, rc.dt, cfg.integrator.abs_tol, cfg.integrator.rel_tol, cfg.integrator.max_dt)
        relax_samples = []

        def record(state, _e, counter=[0]):
            counter[0] += 1
            if counter[0] % rc.sample_every == 0:
                relax_samples.append(sample_observables(state, model, space, ops))

        rel = relax(initial_guess(model, space, cfg.seed), model, space, relax_int,
                    tol_energy=rc.tol_energy, max_steps=rc.max_steps, callback=record)
        summary["relax"] = {"energy": rel.energy, "converged": rel.converged, "steps": rel.steps}
        flags = rel.flags
        if not rel.converged:
            summary.setdefault("warnings", []).append("relaxation did not reach the energy-rate tolerance")
        if kind == "relax":
            samples = relax_samples + [sample_observables(rel.state, model, space, ops)]
            final_state, final_model = rel.state, model
            summary["energy"] = rel.energy
        else:
            task = cfg.task
            new_inter = InteractionConfig(kind=task.interaction or cfg.interaction.kind, strength=task.strength)
            quenched = _model(cfg, new_inter)
            state = rel.state.copy()
            state.time = 0.0
            ic = cfg.integrator
            res = propagate(state, quenched, space, IntegratorSpec(ic.method, ic.dt, ic.abs_tol, ic.rel_tol, ic.max_dt),
                            task.t_final, task.sample_interval)
            samples, final_state, final_model = res.samples, res.final_state, quenched
            flags += res.flags
            energies = res.column("energy")
            summary["energy"] = float(energies[-1])
            summary["energy_drift"] = float(np.max(np.abs(energies - energies[0])))
            summary["norm_drift"] = float(np.max(np.abs(res.column("norm") - 1.0)))
            try:
                bf = breathing_frequency(res.column("t"), res.column("rho0"))
                summary["breathing_frequency"] = bf.frequency
            except NoOscillationError:
                summary["breathing_frequency"] = None
            if new_inter.kind == "harmonic":
                summary["breathing_frequency_analytic"] = breathing_omega(spec.n_particles, new_inter.strength, cfg.trap_omega)
        occ = samples[-1].occupations
        summary["natural_occupations_percent"] = [float(100.0 * n / spec.n_particles) for n in occ]
        summary["regularization_flags"] = flags
        _write_series(prefix.with_name(prefix.name + "_series.csv"), samples, spec.m)
        rho = density_profile(final_state, final_model.grid, space, ops)
        _write_density(prefix.with_name(prefix.name + "_density.csv"), final_model.grid.points, rho)
    summary["wall_time_s"] = time.perf_counter() - start
    with open(prefix.with_name(prefix.name + "_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _cell_config(base: TablesConfig, cell: CellConfig, index: int) -> RunConfig:
    data = base.model_dump(exclude={"cells"})
    data.update(orbitals=cell.orbitals, m1=cell.m1, scheme=cell.scheme, task={"kind": "relax"})
    data["output"] = {"directory": base.output.directory, "prefix": f"{base.output.prefix}_cell{index}"}
    return RunConfig.model_validate(data)


def _run_cell(args):
    base, cell, index = args
    label = cell.label or f"M={cell.orbitals} {cell.scheme}"
    row = {"label": label, "orbitals": cell.orbitals, "m1": cell.m1, "scheme": cell.scheme,
           "energy": None, "dim": None, "status": "ok"}
    try:
        cfg = _cell_config(base, cell, index)
        row["m1"] = cfg.ras_spec().m1
        row["dim"] = dim_ras(cfg.ras_spec())
        # cells parallelize over processes; one BLAS thread each keeps results independent of the worker count
        with threadpool_limits(limits=1):
            summary = execute(cfg)
        row["energy"] = summary.get("energy")
        if summary.get("warnings"):
            row["status"] = "not converged"
    except (ValidationError, ValueError, PropagationError) as exc:
        row["status"] = f"failed: {exc}".replace("\n", " ")
    return row


def table_mode(cfg: TablesConfig) -> list[dict]:
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, cell, k) for k, cell in enumerate(cfg.cells)]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    path = out_dir / f"{cfg.output.prefix}_table.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "orbitals", "m1", "scheme", "energy", "dim", "status"])
        for r in rows:
            e = "" if r["energy"] is None else f"{r['energy']:.17g}"
            w.writerow([r["label"], r["orbitals"], r["m1"], r["scheme"], e, r["dim"], r["status"]])
    with open(out_dir / f"{cfg.output.prefix}_table.json", "w") as fh:
        json.dump(rows, fh, indent=2)
    return rows


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="tdrasb", description="Restricted-active-space boson dynamics")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")
    p_tab = sub.add_parser("tables", help="relax a list of cells and tabulate energies")
    p_tab.add_argument("config")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, RunConfig if args.command == "run" else TablesConfig)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=_workers()):
            if args.command == "run":
                summary = execute(cfg)
                print(json.dumps({k: summary[k] for k in ("task", "dim", "energy") if k in summary}))
            else:
                rows = table_mode(cfg)
                for r in rows:
                    print(f"{r['label']}\t{r['energy']}\t({r['dim']})\t{r['status']}")
    except PropagationError as exc:
        print(f"propagation failed: {exc}; last good time {exc.last_good_time}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
