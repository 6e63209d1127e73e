"""Batch drivers behind the ``mdicke run`` command."""

import json
from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from . import __version__
from .cache import GroundStateCache
from .config import RunConfig
from .errors import FitError, LanczosConvergenceError, MdickeError, SectorChangeError
from .meanfield import critical_coupling, minimize_meanfield
from .model import ModelParams
from .observables import energy_second_derivative, fidelity_susceptibility, observable_record
from .scaling import (
    ScalingDataset,
    collapse_on_grid,
    collapse_quality,
    extrapolate_c_infinity,
    locate_fs_peak,
    loglog_slope_fit,
    optimize_collapse_exponent,
)
from .solver import ground_state
from .tools.fs import atomic_write_text, write_csv, write_json

console = Console(stderr=True)

RESULT_COLUMNS = (
    "N", "j", "lambda", "Omega", "n_tr_used", "converged", "energy", "energy_per_atom",
    "d2E_dlambda2", "photons_per_atom", "fs_avg", "concurrence", "scaled_concurrence",
)
# Exponent rows: value is the local slope extrapolated to 1/N -> 0, least_squares the
# plain log-log slope and stderr its standard error.
FIT_COLUMNS = ("Omega", "quantity", "value", "least_squares", "stderr")
COLLAPSE_COLUMNS = ("Omega", "N", "x", "y")
FORCED_COLUMNS = ("N", "lambda", "Omega", "energy", "energy_jmax")

# Scaling runs without an explicit lambda grid sample this window around lambda_c.
SCALING_HALF_WIDTH = 0.15
SCALING_POINTS = 41
COLLAPSE_EXPONENTS = (2.0 / 3.0, 1.0 / 3.0, 1.0)


class ResultRow(BaseModel):
    """One grid point of a result CSV; None is written as an empty field."""

    model_config = ConfigDict(frozen=True)

    N: int
    j: Optional[float] = None
    lam: float = Field(..., description="lambda")
    Omega: float
    n_tr_used: Optional[int] = None
    converged: bool = False
    energy: Optional[float] = None
    energy_per_atom: Optional[float] = None
    d2E_dlambda2: Optional[float] = None
    photons_per_atom: Optional[float] = None
    fs_avg: Optional[float] = None
    concurrence: Optional[float] = None
    scaled_concurrence: Optional[float] = None

    def cells(self) -> Tuple:
        return (self.N, self.j, self.lam, self.Omega, self.n_tr_used, self.converged,
                self.energy, self.energy_per_atom, self.d2E_dlambda2, self.photons_per_atom,
                self.fs_avg, self.concurrence, self.scaled_concurrence)

    def as_record(self) -> Dict[str, object]:
        return dict(zip(RESULT_COLUMNS, self.cells()))


class PointTask(BaseModel):
    """Indexed grid point handed to a worker."""

    model_config = ConfigDict(frozen=True)

    index: int
    n_atoms: int
    lam: float
    capital_omega: float
    with_fs: bool = True


class PointOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    row: ResultRow
    energy_jmax: Optional[float] = None


def solve_point(task: PointTask, run: RunConfig) -> PointOutcome:
    """Ground state and observables of one grid point; failures leave empty fields."""
    params = ModelParams(omega=run.omega, delta=run.delta, lam=task.lam,
                         capital_omega=task.capital_omega, n_atoms=task.n_atoms)
    base = {"N": task.n_atoms, "lam": task.lam, "Omega": task.capital_omega}
    cache = GroundStateCache(run.cache_dir)

    try:
        gs = cache.fetch(params, run.solver, ground_state)
    except LanczosConvergenceError as e:
        console.print(f"[yellow]Warning: {e} (N={task.n_atoms}, lambda={task.lam}, "
                      f"Omega={task.capital_omega})[/yellow]")
        return PointOutcome(index=task.index, row=ResultRow(**base, energy=e.energy))

    row = {**base, "j": gs.j, "n_tr_used": gs.n_tr_used, "converged": gs.converged,
           "energy": gs.energy, "energy_per_atom": gs.energy / task.n_atoms}
    if gs.converged:
        fs = None
        if task.with_fs:
            try:
                fs = fidelity_susceptibility(params, run.delta_lambda, run.solver, center=gs)
            except (SectorChangeError, LanczosConvergenceError) as e:
                console.print(f"[dim]No fidelity susceptibility at lambda={task.lam}: {e}[/dim]")
        record = observable_record(gs, fs_avg=fs)
        row.update(photons_per_atom=record.photons_per_atom, fs_avg=record.fs_avg,
                   concurrence=record.concurrence, scaled_concurrence=record.scaled_concurrence)

    return PointOutcome(index=task.index, row=ResultRow(**row),
                        energy_jmax=gs.sector_energies.get(params.j_max))


def execute_tasks(tasks: Sequence[PointTask], run: RunConfig, label: str) -> List[PointOutcome]:
    """Run tasks on ``run.width`` processes; results come back sorted by index."""
    worker: Callable[[PointTask], PointOutcome] = partial(solve_point, run=run)
    outcomes: List[PointOutcome] = []
    columns = (TextColumn("[dim]{task.description}[/dim]"), BarColumn(), MofNCompleteColumn(),
               TimeElapsedColumn())

    with Progress(*columns, console=console, transient=True) as progress:
        bar = progress.add_task(label, total=len(tasks))
        if run.width > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=run.width) as pool:
                futures = [pool.submit(worker, task) for task in tasks]
                for future in as_completed(futures):
                    outcomes.append(future.result())
                    progress.advance(bar)
        else:
            for task in tasks:
                outcomes.append(worker(task))
                progress.advance(bar)

    return sorted(outcomes, key=lambda o: o.index)


def _with_curvature(outcomes: List[PointOutcome]) -> Tuple[List[ResultRow], List[Dict[str, float]]]:
    """Fill d2E/dlambda2 along every (N, Omega) lambda line; collect flagged spikes."""
    lines: Dict[Tuple[int, float], List[int]] = {}
    for i, o in enumerate(outcomes):
        lines.setdefault((o.row.N, o.row.Omega), []).append(i)

    rows = [o.row for o in outcomes]
    spikes = []
    for (n_atoms, cap), members in lines.items():
        energies = [rows[i].energy for i in members]
        if len(members) < 3 or any(e is None for e in energies):
            continue
        profile = energy_second_derivative([rows[i].lam for i in members], energies)
        for i, value in zip(members, profile.values):
            if np.isfinite(value):
                rows[i] = rows[i].model_copy(update={"d2E_dlambda2": float(value)})
        for lam, value in profile.spikes:
            console.print(f"[dim]N={n_atoms} Omega={cap!r}: first-order spike at lambda={lam!r}[/dim]")
            spikes.append({"N": n_atoms, "Omega": cap, "lambda": lam, "d2E_dlambda2": value})
    return rows, spikes


def _sidecar(run: RunConfig, outputs: List[Path], extra: Optional[Dict] = None) -> Path:
    meta = {
        "mdicke_version": __version__,
        "command": run.command,
        "config": run.model_dump(mode="json"),
        "outputs": [str(p) for p in outputs],
    }
    meta.update(extra or {})
    return write_json(outputs[0].with_name(outputs[0].name + ".meta.json"), meta)


def _companion(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


def _line_tasks(run: RunConfig, with_fs: bool) -> List[PointTask]:
    tasks = []
    for n_atoms in run.n_atoms:
        for cap in run.omega_values(n_atoms):
            for lam in run.lam.values():
                tasks.append(PointTask(index=len(tasks), n_atoms=n_atoms, lam=float(lam),
                                       capital_omega=float(cap), with_fs=with_fs))
    return tasks


def run_point(run: RunConfig) -> List[Path]:
    """Single JSON record on stdout, also written to ``out`` (.json)."""
    target = run.out.with_suffix(".json") if run.out.suffix == ".csv" else run.out
    n_atoms = run.n_atoms[0]
    task = PointTask(index=0, n_atoms=n_atoms, lam=float(run.lam.values()[0]),
                     capital_omega=float(run.omega_values(n_atoms)[0]))
    outcome = solve_point(task, run)
    record = outcome.row.as_record()
    text = json.dumps(record, indent=2)
    # stdout is reserved for this record.
    print(text)
    atomic_write_text(target, text + "\n")
    return [target]


def run_sweep(run: RunConfig, forced: bool = True) -> Tuple[List[Path], Dict]:
    """lambda lines per (N, Omega); ``forced`` adds the j = N/2 energies as a companion CSV."""
    outcomes = execute_tasks(_line_tasks(run, with_fs=True), run, run.command)
    rows, spikes = _with_curvature(outcomes)
    outputs = [write_csv(run.out, RESULT_COLUMNS, (r.cells() for r in rows))]
    if forced:
        table = ((o.row.N, o.row.lam, o.row.Omega, o.row.energy, o.energy_jmax) for o in outcomes)
        outputs.append(write_csv(_companion(run.out, "forced"), FORCED_COLUMNS, table))
    return outputs, {"spikes": spikes}


def run_phase_diagram(run: RunConfig) -> Tuple[List[Path], Dict]:
    outcomes = execute_tasks(_line_tasks(run, with_fs=False), run, "phase-diagram")
    rows, spikes = _with_curvature(outcomes)
    return [write_csv(run.out, RESULT_COLUMNS, (r.cells() for r in rows))], {"spikes": spikes}


def _scaling_window(run: RunConfig, n_atoms: int, cap: float) -> np.ndarray:
    if run.lam.count > 1:
        return run.lam.values()
    lam_c = critical_coupling(ModelParams(omega=run.omega, delta=run.delta,
                                          capital_omega=cap, n_atoms=n_atoms))
    return np.linspace(max(0.0, lam_c - SCALING_HALF_WIDTH), lam_c + SCALING_HALF_WIDTH,
                       SCALING_POINTS)


def _fit_rows(cap: float, quantity: str, fit_call: Callable[[], Tuple]) -> List[Tuple]:
    try:
        return [(cap, quantity) + tuple(fit_call())]
    except MdickeError as e:
        console.print(f"[yellow]Warning: {quantity} at Omega={cap!r}: {e}[/yellow]")
        return [(cap, quantity, None, None, None)]


def run_scaling(run: RunConfig) -> Tuple[List[Path], Dict]:
    """FS curves around lambda_c plus observables at lambda_c, then the fits per Omega."""
    caps = sorted({float(c) for n in run.n_atoms for c in run.omega_values(n)})
    tasks: List[PointTask] = []
    for cap in caps:
        for n_atoms in run.n_atoms:
            for lam in _scaling_window(run, n_atoms, cap):
                tasks.append(PointTask(index=len(tasks), n_atoms=n_atoms, lam=float(lam),
                                       capital_omega=cap, with_fs=True))
            lam_c = critical_coupling(ModelParams(omega=run.omega, delta=run.delta,
                                                  capital_omega=cap, n_atoms=n_atoms))
            tasks.append(PointTask(index=len(tasks), n_atoms=n_atoms, lam=lam_c,
                                   capital_omega=cap, with_fs=False))

    outcomes = execute_tasks(tasks, run, "scaling")
    rows = [o.row for o in outcomes]
    points_path = write_csv(_companion(run.out, "points"), RESULT_COLUMNS, (r.cells() for r in rows))

    fits: List[Tuple] = []
    collapsed: List[Tuple] = []
    for cap in caps:
        lam_c = critical_coupling(ModelParams(omega=run.omega, delta=run.delta, capital_omega=cap))
        at_lc = {r.N: r for t, r in zip(tasks, rows)
                 if r.Omega == cap and not t.with_fs}
        curves = {}
        for n_atoms in run.n_atoms:
            line = [r for t, r in zip(tasks, rows)
                    if t.with_fs and r.Omega == cap and r.N == n_atoms and r.fs_avg is not None]
            if len(line) >= 5:
                curves[n_atoms] = ([r.lam for r in line], [r.fs_avg for r in line])

        fits.append((cap, "lambda_c", lam_c, None, None))
        fits.append((cap, "meanfield_photons_per_atom",
                     minimize_meanfield(ModelParams(omega=run.omega, delta=run.delta, lam=lam_c,
                                                    capital_omega=cap)).photons_per_atom, None, None))

        dataset = None
        try:
            dataset = ScalingDataset.from_arrays(curves)
        except ValueError as e:
            console.print(f"[yellow]Warning: no FS collapse at Omega={cap!r}: {e}[/yellow]")

        if dataset is not None:
            try:
                peaks = {n: locate_fs_peak(*curves[n]) for n in dataset.sizes}
            except MdickeError as e:
                console.print(f"[yellow]Warning: FS peaks at Omega={cap!r}: {e}[/yellow]")
                peaks = None
            if peaks is not None:
                for n in dataset.sizes:
                    fits.append((cap, f"lambda_max_N{n}", peaks[n][0], None, None))
                fits += _fit_rows(cap, "fs_max_exponent", lambda: _exponent(
                    [(n, peaks[n][1]) for n in dataset.sizes]))
                for nu in COLLAPSE_EXPONENTS:
                    fits += _fit_rows(cap, f"collapse_quality_nu_{nu:.6g}",
                                      lambda nu=nu: (collapse_quality(dataset, nu, peaks), None, None))
                fits += _fit_rows(cap, "nu_optimal",
                                  lambda: (optimize_collapse_exponent(dataset, peaks=peaks)[0], None, None))
                try:
                    grid, table = collapse_on_grid(dataset, 2.0 / 3.0, peaks)
                    for n in dataset.sizes:
                        collapsed += [(cap, n, float(x), float(y)) for x, y in zip(grid, table[n])]
                except MdickeError as e:
                    console.print(f"[yellow]Warning: collapse data at Omega={cap!r}: {e}[/yellow]")

        photons = [(n, r.photons_per_atom) for n, r in sorted(at_lc.items())
                   if r.photons_per_atom is not None]
        fits += _fit_rows(cap, "photons_exponent", lambda: _exponent(photons))

        concurrence = [(n, r.scaled_concurrence) for n, r in sorted(at_lc.items())
                       if r.scaled_concurrence is not None]
        c_inf: List[float] = []

        def _concurrence_fit():
            value, fit = extrapolate_c_infinity(concurrence)
            c_inf.append(value)
            return fit.extrapolated_intercept, fit.exponent, fit.stderr

        fits += _fit_rows(cap, "concurrence_exponent", _concurrence_fit)
        if c_inf:
            fits.append((cap, "c_infinity", c_inf[0], None, None))

    outputs = [write_csv(run.out, FIT_COLUMNS, fits),
               write_csv(_companion(run.out, "collapse"), COLLAPSE_COLUMNS, collapsed),
               points_path]
    return outputs, {}


def _exponent(points: List[Tuple[float, float]]) -> Tuple[float, float, float]:
    if not points:
        raise FitError("no data points")
    fit = loglog_slope_fit(points)
    return fit.extrapolated_intercept, fit.exponent, fit.stderr


def run_command(run: RunConfig) -> int:
    """Execute one configured command and write its outputs; returns the exit status."""
    if run.command == "point":
        outputs, extra = run_point(run), {}
    elif run.command == "sweep":
        outputs, extra = run_sweep(run)
    elif run.command == "fs-scan":
        outputs, extra = run_sweep(run, forced=False)
    elif run.command == "phase-diagram":
        outputs, extra = run_phase_diagram(run)
    else:
        outputs, extra = run_scaling(run)

    _sidecar(run, outputs, extra)
    console.print(f"[green]{run.command} finished:[/green] {len(outputs)} output file(s)")
    return 0
