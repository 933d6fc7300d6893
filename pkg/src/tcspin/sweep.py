"""Finite-size and perturbation campaigns with deterministic, replayable output.

A sweep plan fixes a grid of (N, J) points, an observable, a time grid,
solver settings and optional perturbation families; every grid point runs
spectrum -> correlator -> oscillation report and lands in one record. Rows
are pure functions of their inputs, so a plan rerun reproduces the results
CSV byte for byte. Wall times are kept out of the deterministic outputs.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    TimeGrid,
    correlator_krylov,
    correlator_krylov_general,
    correlator_spectral,
    extract_oscillation,
    gap_frequency_consistency,
)
from .errors import PlanError, TcspinError
from .models import PerturbationSpec, TCModelConfig, build_perturbation, build_tc_hamiltonian, magnetization_operator
from .oscillator import OscillatorConfig, cm_correlator_numeric
from .pauli import StateVector, dense_cap
from .spectra import dense_spectrum, ghz_overlap_report, lanczos_extremal


@dataclass(frozen=True)
class SolverSettings:
    """Route selection and iterative-solver knobs for sweep rows.

    Rows at N <= dense_max_sites use the dense spectrum and the spectral
    correlator; larger rows use Lanczos plus Krylov propagation.
    """

    dense_max_sites: int = 10
    lanczos_k: int = 6
    lanczos_tol: float = 1e-10
    lanczos_max_iter: int = 40000
    lanczos_seed: int = 7
    krylov_dim: int = 30
    step_tol: float = 1e-12
    max_peaks: int = 8

    def to_dict(self) -> dict:
        return {
            "dense_max_sites": self.dense_max_sites,
            "lanczos_k": self.lanczos_k,
            "lanczos_tol": self.lanczos_tol,
            "lanczos_max_iter": self.lanczos_max_iter,
            "lanczos_seed": self.lanczos_seed,
            "krylov_dim": self.krylov_dim,
            "step_tol": self.step_tol,
            "max_peaks": self.max_peaks,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverSettings":
        return cls(**data)


@dataclass(frozen=True)
class PerturbationFamily:
    """One perturbation kind swept over strengths (and seeds, for disorder)."""

    kind: str
    strengths: tuple[float, ...]
    axis: str = "z"
    distribution: str = "uniform_pm1"
    seeds: tuple[int, ...] = (0,)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strengths": list(self.strengths),
            "axis": self.axis,
            "distribution": self.distribution,
            "seeds": list(self.seeds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PerturbationFamily":
        return cls(
            kind=data["kind"],
            strengths=tuple(float(s) for s in data["strengths"]),
            axis=data.get("axis", "z"),
            distribution=data.get("distribution", "uniform_pm1"),
            seeds=tuple(int(s) for s in data.get("seeds", [0])),
        )


@dataclass(frozen=True)
class OscillatorControl:
    """Oscillator amplitudes computed on the same N grid, through the same pipeline."""

    n_values: tuple[int, ...]
    m0: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0
    cutoff: int = 2

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "m0": self.m0,
            "omega": self.omega,
            "hbar": self.hbar,
            "cutoff": self.cutoff,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OscillatorControl":
        return cls(
            n_values=tuple(int(n) for n in data["n_values"]),
            m0=float(data.get("m0", 1.0)),
            omega=float(data.get("omega", 1.0)),
            hbar=float(data.get("hbar", 1.0)),
            cutoff=int(data.get("cutoff", 2)),
        )


@dataclass(frozen=True)
class SweepPlan:
    n_values: tuple[int, ...]
    j_values: tuple[float, ...]
    grid: TimeGrid
    axis: str = "z"
    initial_state: str = "ground"
    boundary: str = "periodic"
    perturbations: tuple[PerturbationFamily, ...] = ()
    solver: SolverSettings = field(default_factory=SolverSettings)
    oscillator_control: OscillatorControl | None = None

    def __post_init__(self) -> None:
        if not self.n_values or not self.j_values:
            raise PlanError("plan needs non-empty N and J grids")
        if len(set(self.n_values)) != len(self.n_values):
            raise PlanError(f"duplicate N values in plan: {self.n_values}")
        if len(set(self.j_values)) != len(self.j_values):
            raise PlanError(f"duplicate J values in plan: {self.j_values}")
        if any(n < 4 for n in self.n_values):
            raise PlanError("plan N values must be >= 4")
        if self.initial_state not in ("ground", "ghz_pair"):
            raise PlanError(f"initial_state must be 'ground' or 'ghz_pair', got {self.initial_state!r}")
        if self.axis not in ("x", "y", "z"):
            raise PlanError(f"axis must be one of x/y/z, got {self.axis!r}")
        cap = dense_cap()
        for n in self.n_values:
            if n > cap and n <= self.solver.dense_max_sites:
                raise PlanError(
                    f"N={n} exceeds the dense cap {cap} but the plan routes it dense; "
                    "set solver.dense_max_sites below it"
                )
        if self.solver.lanczos_k < 2:
            raise PlanError("solver.lanczos_k must be >= 2 (the energy gap needs two pairs)")
        for fam in self.perturbations:
            if len(set(fam.strengths)) != len(fam.strengths):
                raise PlanError(f"duplicate strengths in perturbation family {fam.kind}")
            if len(set(fam.seeds)) != len(fam.seeds):
                raise PlanError(f"duplicate seeds in perturbation family {fam.kind}")
            if not fam.strengths:
                raise PlanError(f"perturbation family {fam.kind} has no strengths")
            # constructing a spec validates kind/axis/distribution
            PerturbationSpec(
                kind=fam.kind, strength=fam.strengths[0], axis=fam.axis,
                seed=fam.seeds[0], distribution=fam.distribution,
            )

    def to_dict(self) -> dict:
        doc = {
            "n_values": list(self.n_values),
            "j_values": list(self.j_values),
            "time_grid": self.grid.to_dict(),
            "axis": self.axis,
            "initial_state": self.initial_state,
            "boundary": self.boundary,
            "perturbations": [f.to_dict() for f in self.perturbations],
            "solver": self.solver.to_dict(),
        }
        if self.oscillator_control is not None:
            doc["oscillator_control"] = self.oscillator_control.to_dict()
        return doc

    @classmethod
    def from_dict(cls, data: dict) -> "SweepPlan":
        control = data.get("oscillator_control")
        return cls(
            n_values=tuple(int(n) for n in data["n_values"]),
            j_values=tuple(float(j) for j in data["j_values"]),
            grid=TimeGrid.from_dict(data["time_grid"]),
            axis=data.get("axis", "z"),
            initial_state=data.get("initial_state", "ground"),
            boundary=data.get("boundary", "periodic"),
            perturbations=tuple(
                PerturbationFamily.from_dict(f) for f in data.get("perturbations", [])
            ),
            solver=SolverSettings.from_dict(data["solver"]) if "solver" in data else SolverSettings(),
            oscillator_control=OscillatorControl.from_dict(control) if control else None,
        )


@dataclass
class SweepRecord:
    """One executed grid point: all inputs plus the measured diagnostics.

    ``wall_time_s`` is informational only and excluded from the deterministic
    CSV serialization.
    """

    n_sites: int
    j_coupling: float
    boundary: str
    axis: str
    initial_state: str
    pert_kind: str  # "none" for baseline rows
    pert_strength: float
    pert_axis: str
    pert_distribution: str
    pert_seed: int | None
    solver: str
    ground_energy: float | None = None
    energy_gap: float | None = None
    ghz_gap: float | None = None
    ghz_overlap_plus: float | None = None
    ghz_overlap_minus: float | None = None
    dominant_frequency: float | None = None
    dominant_amplitude: float | None = None
    residual_fraction: float | None = None
    gap_consistent: bool | None = None
    status: str = "ok"
    error: str = ""
    wall_time_s: float = 0.0

    @property
    def key(self) -> tuple:
        return (
            self.n_sites,
            self.j_coupling,
            self.pert_kind,
            self.pert_strength,
            -1 if self.pert_seed is None else self.pert_seed,
        )


SWEEP_COLUMNS = [
    "n_sites",
    "j_coupling",
    "boundary",
    "axis",
    "initial_state",
    "pert_kind",
    "pert_strength",
    "pert_axis",
    "pert_distribution",
    "pert_seed",
    "solver",
    "ground_energy",
    "energy_gap",
    "ghz_gap",
    "ghz_overlap_plus",
    "ghz_overlap_minus",
    "dominant_frequency",
    "dominant_amplitude",
    "residual_fraction",
    "gap_consistent",
    "status",
    "error",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: list[SweepRecord], header_comment: str | None = None) -> str:
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.append(",".join(SWEEP_COLUMNS))
    for rec in records:
        lines.append(",".join(_cell(getattr(rec, col)) for col in SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def _enumerate_points(plan: SweepPlan) -> list[SweepRecord]:
    """Blank records for every grid point, in canonical row order."""
    rows: list[SweepRecord] = []
    for n in plan.n_values:
        solver = "dense" if n <= plan.solver.dense_max_sites else "lanczos"
        for j in plan.j_values:
            base = SweepRecord(
                n_sites=n,
                j_coupling=j,
                boundary=plan.boundary,
                axis=plan.axis,
                initial_state=plan.initial_state,
                pert_kind="none",
                pert_strength=0.0,
                pert_axis="",
                pert_distribution="",
                pert_seed=None,
                solver=solver,
            )
            rows.append(base)
            for fam in plan.perturbations:
                for strength in fam.strengths:
                    if fam.kind == "random_onsite_field":
                        for seed in fam.seeds:
                            rows.append(
                                replace(
                                    base,
                                    pert_kind=fam.kind,
                                    pert_strength=strength,
                                    pert_axis=fam.axis,
                                    pert_distribution=fam.distribution,
                                    pert_seed=seed,
                                )
                            )
                    else:
                        rows.append(
                            replace(base, pert_kind=fam.kind, pert_strength=strength)
                        )
    return rows


def _execute_row(row: SweepRecord, plan: SweepPlan) -> SweepRecord:
    t0 = time.perf_counter()
    try:
        cfg = TCModelConfig(n_sites=row.n_sites, j_coupling=row.j_coupling, boundary=row.boundary)
        op = build_tc_hamiltonian(cfg)
        if row.pert_kind != "none":
            spec = PerturbationSpec(
                kind=row.pert_kind,
                strength=row.pert_strength,
                axis=row.pert_axis or "z",
                seed=0 if row.pert_seed is None else row.pert_seed,
                distribution=row.pert_distribution or "uniform_pm1",
            )
            op = (op + build_perturbation(row.n_sites, spec, row.boundary)).canonicalize()

        settings = plan.solver
        if row.solver == "dense":
            spectrum = dense_spectrum(op)
        else:
            spectrum = lanczos_extremal(
                op,
                k=settings.lanczos_k,
                tol=settings.lanczos_tol,
                max_iter=settings.lanczos_max_iter,
                seed=settings.lanczos_seed,
            )
            if spectrum.n_converged < settings.lanczos_k:
                raise TcspinError(
                    f"Lanczos converged {spectrum.n_converged}/{settings.lanczos_k} pairs"
                )
        row.ground_energy = float(spectrum.eigenvalues[0])
        row.energy_gap = float(spectrum.eigenvalues[1] - spectrum.eigenvalues[0])
        ghz = ghz_overlap_report(spectrum, row.n_sites)
        row.ghz_gap = ghz.ghz_gap
        row.ghz_overlap_plus = ghz.entries[ghz.best_plus_index].overlap_plus
        row.ghz_overlap_minus = ghz.entries[ghz.best_minus_index].overlap_minus

        observable = magnetization_operator(row.n_sites, row.axis)
        if row.initial_state == "ground":
            psi = spectrum.state(0).normalized()
            if row.solver == "dense":
                series = correlator_spectral(op, observable, observable, psi, plan.grid)
            else:
                series = correlator_krylov(
                    op,
                    observable,
                    observable,
                    psi,
                    row.ground_energy,
                    plan.grid,
                    krylov_dim=settings.krylov_dim,
                    step_tol=settings.step_tol,
                )
        else:
            pair = spectrum.vectors[ghz.best_plus_index] + spectrum.vectors[ghz.best_minus_index]
            psi = StateVector(row.n_sites, pair).normalized()
            series = correlator_krylov_general(
                op,
                observable,
                observable,
                psi,
                plan.grid,
                krylov_dim=settings.krylov_dim,
                step_tol=settings.step_tol,
            )
        report = extract_oscillation(series, max_peaks=settings.max_peaks)
        row.dominant_frequency = report.dominant_frequency
        row.dominant_amplitude = report.dominant_amplitude
        row.residual_fraction = report.residual_fraction
        if row.solver == "dense":
            row.gap_consistent = gap_frequency_consistency(spectrum, report, tol=1e-6)
        row.status = "ok"
    except Exception as exc:  # per-row failures are recorded, not fatal
        row.status = "failed"
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_time_s = time.perf_counter() - t0
    return row


def run_sweep(plan: SweepPlan, workers: int = 1) -> list[SweepRecord]:
    """Execute every grid point; deterministic output order and values.

    Individual row failures are recorded in-row and the sweep continues; the
    sweep itself fails only if every row fails.
    """
    rows = _enumerate_points(plan)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda r: _execute_row(r, plan), rows))
    else:
        rows = [_execute_row(r, plan) for r in rows]
    if rows and all(r.status == "failed" for r in rows):
        raise TcspinError("sweep failed: every row failed; first error: " + rows[0].error)
    return rows


def fit_power_law(points: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares fit y = prefactor * x^exponent on log-log axes.

    Returns (exponent, prefactor, r_squared). Requires at least 3 strictly
    positive points.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("power-law fit requires strictly positive x and y")
    lx = np.log(xs)
    ly = np.log(ys)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), res, *_ = np.linalg.lstsq(design, ly, rcond=None)
    fitted = design @ np.array([slope, intercept])
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-28 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(math.exp(intercept)), r2


def oscillator_control_table(control: OscillatorControl, grid: TimeGrid, max_peaks: int = 4) -> list[tuple[int, float]]:
    """Oscillator amplitudes measured through the same extraction pipeline."""
    table = []
    for n in control.n_values:
        cfg = OscillatorConfig(n_particles=n, m0=control.m0, omega=control.omega, hbar=control.hbar)
        series = cm_correlator_numeric(cfg, control.cutoff, grid)
        report = extract_oscillation(series, max_peaks=max_peaks)
        table.append((n, report.dominant_amplitude))
    return table


@dataclass
class StabilityRow:
    """A perturbed row normalized against its unperturbed reference."""

    n_sites: int
    j_coupling: float
    pert_kind: str
    pert_strength: float
    pert_seed: int | None
    statistic: str  # "row", "mean" or "std"
    rel_frequency_shift: float
    rel_amplitude_shift: float
    ghz_overlap_retention: float
    ground_gap_shift: float


def _relative(value: float, reference: float) -> float:
    if reference != 0.0:
        return (value - reference) / reference
    return value - reference


def stability_report(
    plan: SweepPlan | None = None,
    records: list[SweepRecord] | None = None,
    workers: int = 1,
) -> list[StabilityRow]:
    """Shift table for every perturbed row against its unperturbed reference.

    Accepts a plan (executed here) or the records of one already run.
    Disorder families additionally get mean and sample-std rows per strength.
    """
    if records is None:
        if plan is None:
            raise PlanError("stability_report needs a plan or sweep records")
        records = run_sweep(plan, workers=workers)
    references = {
        (r.n_sites, r.j_coupling): r
        for r in records
        if r.pert_kind == "none" and r.status == "ok"
    }
    rows: list[StabilityRow] = []
    perturbed = [r for r in records if r.pert_kind != "none" and r.status == "ok"]
    for rec in perturbed:
        ref = references.get((rec.n_sites, rec.j_coupling))
        if ref is None:
            raise PlanError(
                f"no unperturbed reference row for N={rec.n_sites}, J={rec.j_coupling}"
            )
        ref_overlap = (ref.ghz_overlap_plus or 0.0) + (ref.ghz_overlap_minus or 0.0)
        overlap = (rec.ghz_overlap_plus or 0.0) + (rec.ghz_overlap_minus or 0.0)
        rows.append(
            StabilityRow(
                n_sites=rec.n_sites,
                j_coupling=rec.j_coupling,
                pert_kind=rec.pert_kind,
                pert_strength=rec.pert_strength,
                pert_seed=rec.pert_seed,
                statistic="row",
                rel_frequency_shift=_relative(rec.dominant_frequency, ref.dominant_frequency),
                rel_amplitude_shift=_relative(rec.dominant_amplitude, ref.dominant_amplitude),
                ghz_overlap_retention=overlap / ref_overlap if ref_overlap else 0.0,
                ground_gap_shift=rec.energy_gap - ref.energy_gap,
            )
        )
    # aggregate disorder rows (those with seeds) per (N, J, kind, strength)
    groups: dict[tuple, list[StabilityRow]] = {}
    for row in rows:
        if row.pert_seed is not None:
            key = (row.n_sites, row.j_coupling, row.pert_kind, row.pert_strength)
            groups.setdefault(key, []).append(row)
    aggregates: list[StabilityRow] = []
    for key in sorted(groups):
        members = groups[key]
        for stat, func in (("mean", np.mean), ("std", _sample_std)):
            aggregates.append(
                StabilityRow(
                    n_sites=key[0],
                    j_coupling=key[1],
                    pert_kind=key[2],
                    pert_strength=key[3],
                    pert_seed=None,
                    statistic=stat,
                    rel_frequency_shift=float(func([m.rel_frequency_shift for m in members])),
                    rel_amplitude_shift=float(func([m.rel_amplitude_shift for m in members])),
                    ghz_overlap_retention=float(func([m.ghz_overlap_retention for m in members])),
                    ground_gap_shift=float(func([m.ground_gap_shift for m in members])),
                )
            )
    return rows + aggregates


def _sample_std(values) -> float:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return 0.0
    return float(np.std(arr, ddof=1))


def stability_monotonicity_flags(rows: list[StabilityRow]) -> list[dict]:
    """Flag shift magnitudes that fail to grow monotonically with strength.

    A non-monotone sequence is flagged, never failed: at small strengths the
    shifts can legitimately cross through zero. Deterministic perturbations
    contribute their per-row shifts, disorder families their seed means.
    """
    groups: dict[tuple, list[StabilityRow]] = {}
    for r in rows:
        is_deterministic_row = r.statistic == "row" and r.pert_seed is None
        if is_deterministic_row or r.statistic == "mean":
            groups.setdefault((r.n_sites, r.j_coupling, r.pert_kind), []).append(r)
    flags: list[dict] = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda r: r.pert_strength)
        if len(members) < 2:
            continue
        for metric in ("rel_frequency_shift", "rel_amplitude_shift", "ground_gap_shift"):
            seq = [abs(getattr(m, metric)) for m in members]
            monotone = all(b >= a - 1e-15 for a, b in zip(seq, seq[1:]))
            flags.append(
                {
                    "n_sites": key[0],
                    "j_coupling": key[1],
                    "kind": key[2],
                    "metric": metric,
                    "strengths": [m.pert_strength for m in members],
                    "monotone_in_strength": monotone,
                }
            )
    return flags


def summarize_sweep(plan: SweepPlan, records: list[SweepRecord]) -> dict:
    """Deterministic JSON-ready summary: amplitude table, fits, stability."""
    ok_baseline = [r for r in records if r.pert_kind == "none" and r.status == "ok"]
    amplitude_table = [
        {
            "n_sites": r.n_sites,
            "j_coupling": r.j_coupling,
            "dominant_frequency": r.dominant_frequency,
            "dominant_amplitude": r.dominant_amplitude,
        }
        for r in ok_baseline
    ]
    summary: dict = {
        "plan": plan.to_dict(),
        "n_rows": len(records),
        "n_failed": sum(1 for r in records if r.status == "failed"),
        "amplitude_vs_n": amplitude_table,
    }
    if plan.oscillator_control is not None:
        table = oscillator_control_table(plan.oscillator_control, plan.grid)
        control: dict = {"amplitudes": [{"n": n, "amplitude": a} for n, a in table]}
        if len(table) >= 3:
            exponent, prefactor, r2 = fit_power_law([(float(n), a) for n, a in table])
            control["fit"] = {"exponent": exponent, "prefactor": prefactor, "r_squared": r2}
        summary["oscillator_control"] = control
    if plan.perturbations:
        stability = stability_report(records=records)
        summary["stability_monotonicity"] = stability_monotonicity_flags(stability)
        summary["stability"] = [
            {
                "n_sites": s.n_sites,
                "j_coupling": s.j_coupling,
                "kind": s.pert_kind,
                "strength": s.pert_strength,
                "seed": s.pert_seed,
                "statistic": s.statistic,
                "rel_frequency_shift": s.rel_frequency_shift,
                "rel_amplitude_shift": s.rel_amplitude_shift,
                "ghz_overlap_retention": s.ghz_overlap_retention,
                "ground_gap_shift": s.ground_gap_shift,
            }
            for s in stability
        ]
    return summary
