"""Sweep harness: determinism, dense-oracle agreement, stability normalization."""

import numpy as np
import pytest

from tcspin.dynamics import TimeGrid
from tcspin.errors import PlanError, TcspinError
from tcspin.models import TCModelConfig, build_tc_hamiltonian
from tcspin.spectra import dense_spectrum
from tcspin.sweep import (
    OscillatorControl,
    PerturbationFamily,
    SolverSettings,
    SweepPlan,
    fit_power_law,
    oscillator_control_table,
    records_to_csv,
    run_sweep,
    stability_report,
    summarize_sweep,
)

GRID = TimeGrid(0.0, 150.0, 192)


def small_plan(**overrides) -> SweepPlan:
    kwargs = dict(n_values=(6,), j_values=(0.5,), grid=GRID)
    kwargs.update(overrides)
    return SweepPlan(**kwargs)


class TestPlanValidation:
    def test_empty_grids_rejected(self):
        with pytest.raises(PlanError):
            small_plan(n_values=())
        with pytest.raises(PlanError):
            small_plan(j_values=())

    def test_duplicate_rows_rejected(self):
        with pytest.raises(PlanError):
            small_plan(n_values=(6, 6))
        with pytest.raises(PlanError):
            small_plan(j_values=(0.5, 0.5))

    def test_small_chain_rejected(self):
        with pytest.raises(PlanError):
            small_plan(n_values=(3,))

    def test_duplicate_strengths_and_seeds_rejected(self):
        with pytest.raises(PlanError):
            small_plan(
                perturbations=(
                    PerturbationFamily(kind="heisenberg_exchange", strengths=(0.1, 0.1)),
                )
            )
        with pytest.raises(PlanError):
            small_plan(
                perturbations=(
                    PerturbationFamily(
                        kind="random_onsite_field", strengths=(0.1,), seeds=(1, 1)
                    ),
                )
            )

    def test_dense_routing_beyond_cap_rejected(self, monkeypatch):
        monkeypatch.setenv("TCSPIN_DENSE_CAP", "8")
        with pytest.raises(PlanError):
            small_plan(n_values=(10,), solver=SolverSettings(dense_max_sites=10))

    def test_round_trips_through_dict(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="random_onsite_field", strengths=(0.01,), seeds=(1, 2)),
            ),
            oscillator_control=OscillatorControl(n_values=(2, 4, 8)),
        )
        again = SweepPlan.from_dict(plan.to_dict())
        assert again == plan


class TestRunSweep:
    def test_single_row_against_dense_oracle(self):
        records = run_sweep(small_plan())
        assert len(records) == 1
        row = records[0]
        assert row.status == "ok"
        spec = dense_spectrum(build_tc_hamiltonian(TCModelConfig(6, 0.5)))
        assert row.ground_energy == pytest.approx(float(spec.eigenvalues[0]), abs=1e-10)
        assert row.energy_gap == pytest.approx(
            float(spec.eigenvalues[1] - spec.eigenvalues[0]), abs=1e-10
        )
        # for the ground-state z correlator the dominant frequency is the
        # splitting of the GHZ-like pair
        assert row.dominant_frequency == pytest.approx(row.ghz_gap, abs=1e-6)
        assert row.gap_consistent is True

    def test_baseline_row_has_empty_perturbation_columns(self):
        row = run_sweep(small_plan())[0]
        assert row.pert_kind == "none"
        assert row.pert_strength == 0.0
        assert row.pert_axis == "" and row.pert_distribution == ""
        assert row.pert_seed is None
        assert row.dominant_amplitude is not None

    def test_rerun_is_byte_identical(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(
                    kind="random_onsite_field", strengths=(0.02,), seeds=(5, 6)
                ),
            )
        )
        a = records_to_csv(run_sweep(plan))
        b = records_to_csv(run_sweep(plan))
        assert a == b

    def test_worker_pool_does_not_change_output(self):
        plan = small_plan(n_values=(4, 6))
        serial = records_to_csv(run_sweep(plan, workers=1))
        pooled = records_to_csv(run_sweep(plan, workers=3))
        assert serial == pooled

    def test_iterative_route_matches_dense_route(self):
        dense_rows = run_sweep(small_plan())
        iter_rows = run_sweep(
            small_plan(solver=SolverSettings(dense_max_sites=4, lanczos_k=2, step_tol=1e-12))
        )
        assert iter_rows[0].solver == "lanczos"
        assert iter_rows[0].ground_energy == pytest.approx(dense_rows[0].ground_energy, abs=1e-9)
        assert iter_rows[0].dominant_frequency == pytest.approx(
            dense_rows[0].dominant_frequency, abs=1e-6
        )
        assert iter_rows[0].dominant_amplitude == pytest.approx(
            dense_rows[0].dominant_amplitude, abs=1e-6
        )

    def test_ghz_pair_initial_state_runs(self):
        rows = run_sweep(small_plan(initial_state="ghz_pair"))
        assert rows[0].status == "ok"
        assert rows[0].dominant_amplitude is not None

    def test_all_rows_failing_raises(self, monkeypatch):
        import tcspin.sweep as sweep_mod

        def boom(*args, **kwargs):
            raise RuntimeError("forced failure")

        monkeypatch.setattr(sweep_mod, "build_tc_hamiltonian", boom)
        with pytest.raises(TcspinError):
            run_sweep(small_plan())

    def test_partial_failure_is_recorded_in_row(self, monkeypatch):
        import tcspin.sweep as sweep_mod

        real = sweep_mod.build_tc_hamiltonian

        def sometimes(cfg):
            if cfg.n_sites == 4:
                raise RuntimeError("forced failure")
            return real(cfg)

        monkeypatch.setattr(sweep_mod, "build_tc_hamiltonian", sometimes)
        rows = run_sweep(small_plan(n_values=(4, 6)))
        by_n = {r.n_sites: r for r in rows}
        assert by_n[4].status == "failed"
        assert "forced failure" in by_n[4].error
        assert by_n[6].status == "ok"


class TestFitPowerLaw:
    def test_exact_inverse_law(self):
        exponent, prefactor, r2 = fit_power_law([(2, 0.25), (4, 0.125), (8, 0.0625)])
        assert exponent == pytest.approx(-1.0, abs=1e-14)
        assert prefactor == pytest.approx(0.5, abs=1e-14)
        assert r2 == pytest.approx(1.0, abs=1e-15)

    def test_constant_series(self):
        exponent, prefactor, r2 = fit_power_law([(1, 3.0), (2, 3.0), (4, 3.0)])
        assert exponent == pytest.approx(0.0, abs=1e-14)
        assert prefactor == pytest.approx(3.0, abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            fit_power_law([(1, 1.0), (2, 0.5)])
        with pytest.raises(ValueError):
            fit_power_law([(1, 1.0), (2, -0.5), (3, 0.2)])
        with pytest.raises(ValueError):
            fit_power_law([(0.0, 1.0), (2, 0.5), (3, 0.2)])


class TestOscillatorControl:
    def test_pipeline_reproduces_inverse_scaling(self):
        control = OscillatorControl(n_values=(2, 4, 8, 16, 32))
        table = oscillator_control_table(control, TimeGrid(0.0, 60.0, 512))
        exponent, prefactor, _ = fit_power_law([(float(n), a) for n, a in table])
        assert exponent == pytest.approx(-1.0, abs=1e-10)
        assert prefactor == pytest.approx(0.5, rel=1e-8)


class TestStability:
    def test_zero_strength_shifts_are_exactly_zero(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="heisenberg_exchange", strengths=(0.0, 0.02)),
                PerturbationFamily(
                    kind="random_onsite_field", strengths=(0.0,), axis="z", seeds=(3,)
                ),
            )
        )
        rows = stability_report(plan)
        zero_rows = [r for r in rows if r.pert_strength == 0.0 and r.statistic == "row"]
        assert zero_rows
        for row in zero_rows:
            assert row.rel_frequency_shift == 0.0
            assert row.rel_amplitude_shift == 0.0
            assert row.ghz_overlap_retention == 1.0
            assert row.ground_gap_shift == 0.0

    def test_nonzero_strength_produces_finite_shifts(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="heisenberg_exchange", strengths=(0.05,)),
            )
        )
        rows = stability_report(plan)
        assert len(rows) == 1
        assert rows[0].statistic == "row"
        assert np.isfinite(rows[0].rel_frequency_shift)
        assert rows[0].ground_gap_shift != 0.0

    def test_disorder_rows_aggregate(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(
                    kind="random_onsite_field", strengths=(0.02,), seeds=(1, 2, 3)
                ),
            )
        )
        rows = stability_report(plan)
        stats = {r.statistic for r in rows}
        assert stats == {"row", "mean", "std"}
        means = [r for r in rows if r.statistic == "mean"]
        assert len(means) == 1
        per_seed = [r.rel_frequency_shift for r in rows if r.statistic == "row"]
        assert means[0].rel_frequency_shift == pytest.approx(np.mean(per_seed), abs=1e-15)

    def test_missing_reference_rejected(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="heisenberg_exchange", strengths=(0.02,)),
            )
        )
        records = [r for r in run_sweep(plan) if r.pert_kind != "none"]
        with pytest.raises(PlanError):
            stability_report(records=records)

    def test_requires_plan_or_records(self):
        with pytest.raises(PlanError):
            stability_report()


class TestMonotonicityFlags:
    @staticmethod
    def _row(strength, freq_shift, seed=None, statistic="row"):
        from tcspin.sweep import StabilityRow

        return StabilityRow(
            n_sites=8,
            j_coupling=1.0,
            pert_kind="heisenberg_exchange",
            pert_strength=strength,
            pert_seed=seed,
            statistic=statistic,
            rel_frequency_shift=freq_shift,
            rel_amplitude_shift=freq_shift / 2,
            ghz_overlap_retention=1.0,
            ground_gap_shift=freq_shift * 3,
        )

    def test_monotone_sequence_is_clean(self):
        from tcspin.sweep import stability_monotonicity_flags

        rows = [self._row(0.01, 0.001), self._row(0.05, 0.004)]
        flags = stability_monotonicity_flags(rows)
        assert flags and all(f["monotone_in_strength"] for f in flags)

    def test_non_monotone_sequence_is_flagged_not_failed(self):
        from tcspin.sweep import stability_monotonicity_flags

        rows = [self._row(0.01, 0.004), self._row(0.05, 0.001)]
        flags = stability_monotonicity_flags(rows)
        freq_flags = [f for f in flags if f["metric"] == "rel_frequency_shift"]
        assert freq_flags[0]["monotone_in_strength"] is False

    def test_real_fixture_grid_produces_flags(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="heisenberg_exchange", strengths=(0.01, 0.05)),
            )
        )
        records = run_sweep(plan)
        summary = summarize_sweep(plan, records)
        assert "stability_monotonicity" in summary
        assert all("monotone_in_strength" in f for f in summary["stability_monotonicity"])


class TestSummary:
    def test_contains_fit_and_stability_sections(self):
        plan = small_plan(
            perturbations=(
                PerturbationFamily(kind="heisenberg_exchange", strengths=(0.02,)),
            ),
            oscillator_control=OscillatorControl(n_values=(2, 4, 8)),
        )
        records = run_sweep(plan)
        summary = summarize_sweep(plan, records)
        assert summary["n_rows"] == 2
        assert summary["n_failed"] == 0
        assert summary["oscillator_control"]["fit"]["exponent"] == pytest.approx(-1.0, abs=1e-9)
        assert len(summary["stability"]) == 1
        assert summary["amplitude_vs_n"][0]["n_sites"] == 6
