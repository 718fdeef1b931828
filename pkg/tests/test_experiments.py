"""Experiment suite tests: density generation, runners, reporting."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from logmink.errors import ConvergenceFailure, InvalidParameter
from logmink.experiments import (
    ExperimentReport,
    ExperimentSpec,
    gen_density,
    run_bound,
    run_diagnostics,
    run_experiment,
    run_uniqueness,
    solve_with_inits,
)
from logmink.grid import build_grid
from logmink.solver import ma_residual


@pytest.fixture(scope="module")
def grid():
    return build_grid(16)


# ---------------------------------------------------------------------------
# density generation


def test_gen_density_exact_sup(grid):
    for seed in range(5):
        f = gen_density(seed, eps=0.05, lam=2.0, grid=grid)
        dev = np.max(np.abs(f.values_on(grid) - 1.0))
        assert abs(dev - 0.05) < 1e-12
        assert f.lam_lo == 0.5 and f.lam_hi == 2.0


def test_gen_density_deterministic(grid):
    a = gen_density(42, eps=0.05, lam=2.0, grid=grid)
    b = gen_density(42, eps=0.05, lam=2.0, grid=grid)
    assert np.array_equal(a.coeffs.values, b.coeffs.values)
    c = gen_density(43, eps=0.05, lam=2.0, grid=grid)
    assert not np.array_equal(a.coeffs.values, c.coeffs.values)


def test_gen_density_zero_eps(grid):
    f = gen_density(0, eps=0.0, lam=2.0, grid=grid)
    assert_allclose(f.values_on(grid), 1.0, atol=1e-14)


def test_gen_density_shrinks_to_fit_bounds(grid):
    # eps = 1.5 cannot sit inside (0.5, 2), so the amplitude backs off by
    # factors of 0.8 until the band fits
    f = gen_density(3, eps=1.5, lam=2.0, grid=grid)
    dev = np.max(np.abs(f.values_on(grid) - 1.0))
    assert 0.3 < dev < 0.5


def test_gen_density_validation(grid):
    with pytest.raises(InvalidParameter):
        gen_density(0, eps=-0.1, lam=2.0, grid=grid)
    with pytest.raises(InvalidParameter):
        gen_density(0, eps=0.05, lam=1.0, grid=grid)


# ---------------------------------------------------------------------------
# spec plumbing


def test_spec_validation():
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="nope")
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="bound", count=0)
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="bound", eps=-1.0)
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="bound", lam=1.0)
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="bound", L="16")
    with pytest.raises(InvalidParameter):
        ExperimentSpec(kind="bound", inits=())


def test_spec_seeds_and_description():
    spec = ExperimentSpec(kind="uniqueness", count=3, seed=7)
    assert spec.sample_seed(0) == 7 * 100003
    assert spec.sample_seed(2) == 7 * 100003 + 2
    text = spec.describe()
    assert text.startswith("kind=uniqueness count=3 seed=7 ")
    assert "inits=const:0.7|const:1.0|const:1.4|perturb|flow" in text


def test_runner_kind_checks():
    with pytest.raises(InvalidParameter):
        run_uniqueness(ExperimentSpec(kind="bound", count=1))
    with pytest.raises(InvalidParameter):
        run_bound(ExperimentSpec(kind="uniqueness", count=1))
    with pytest.raises(InvalidParameter):
        run_diagnostics(ExperimentSpec(kind="bound", count=1))


# ---------------------------------------------------------------------------
# solving from several starts


def test_all_inits_recover_translated_ball(grid):
    from logmink.solver import DensityFunction

    f = DensityFunction.from_harmonics([(1, 0, 0.1)], base=1.0, grid=grid)
    inits = ExperimentSpec(kind="uniqueness", count=1).inits
    solutions, failures = solve_with_inits(f, inits, grid)
    assert failures == []
    assert len(solutions) == len(inits) == 5
    exact = 1.0 + 0.1 * grid.nodes[:, 2]
    for strategy, result in solutions:
        err = np.max(np.abs(result.h.values - exact))
        assert err < 1e-6, f"strategy {strategy} missed by {err:g}"


def test_bad_init_strategy_reported(grid):
    from logmink.solver import DensityFunction

    f = DensityFunction.constant(1.0)
    solutions, failures = solve_with_inits(f, ("const:1.0", "const:-2.0"), grid)
    assert len(solutions) == 1
    assert len(failures) == 1
    assert failures[0][0] == "const:-2.0"


# ---------------------------------------------------------------------------
# suite runs (small counts to stay quick)


def test_uniqueness_small_run(grid):
    spec = ExperimentSpec(kind="uniqueness", count=2, seed=1,
                          inits=("const:0.7", "const:1.4", "perturb"))
    report = run_uniqueness(spec)
    assert report.aggregates["n_samples"] == 2
    assert report.aggregates["n_failures"] == 0
    assert report.aggregates["max_pairwise"] <= 1e-6
    assert report.aggregates["worst_residual"] <= 1e-10
    for rec in report.records:
        assert rec["n_solved"] == 3
        # stored solutions really solve their stored density
        strategy, result = rec["_solutions"][0]
        res = ma_residual(result.h, rec["_f"])
        assert np.max(np.abs(res.values)) <= 1e-10


def test_bound_small_run(grid):
    spec = ExperimentSpec(kind="bound", count=2, seed=2)
    report = run_bound(spec)
    agg = report.aggregates
    assert agg["n_failures"] == 0
    # eps = 0.05 solutions stay within a few percent of the unit sphere
    assert 1.0 < agg["c_lambda"] < 1.2
    assert 0.8 < agg["min_h"] < 1.0
    assert 1.0 <= agg["max_ratio_32"] < 1.5
    assert 1.0 <= agg["max_ratio_21"] < 1.5


def test_diagnostics_run_and_cap(grid):
    spec = ExperimentSpec(kind="diagnostics", count=1, seed=4)
    report = run_diagnostics(spec)
    rec = report.records[0]
    assert abs(rec["ratio_32"] - 1.0) < 0.2
    assert abs(rec["ratio_21"] - 1.0) < 0.2
    # an impossible cap (below 1) must trip the failure path
    with pytest.raises(ConvergenceFailure):
        run_diagnostics(spec, ratio_cap=0.5)


def test_run_experiment_dispatch(grid):
    report = run_experiment(ExperimentSpec(kind="bound", count=1, seed=5))
    assert report.spec.kind == "bound"
    assert len(report.records) == 1


# ---------------------------------------------------------------------------
# reporting


def test_report_csv_schema(grid):
    spec = ExperimentSpec(kind="bound", count=2, seed=3)
    report = run_bound(spec)
    lines = report.to_csv().splitlines()
    assert lines[0] == f"# spec: {spec.describe()}"
    assert lines[1] == ",".join(report.columns)
    body = [l for l in lines[2:] if not l.startswith("#")]
    tail = [l for l in lines[2:] if l.startswith("#")]
    assert len(body) == 2
    for row in body:
        cells = row.split(",")
        assert len(cells) == len(report.columns)
        for cell in cells[2:]:
            float(cell)
    assert all(t.startswith("# aggregate ") for t in tail)
    keys = [t.split()[2].split("=")[0] for t in tail]
    assert keys == sorted(keys)


def test_report_aggregates_consistent(grid):
    spec = ExperimentSpec(kind="bound", count=2, seed=3)
    report = run_bound(spec)
    assert report.aggregates == report.recompute_aggregates()


def test_report_deterministic(grid):
    spec = ExperimentSpec(kind="bound", count=2, seed=3)
    a = run_bound(spec).to_csv()
    b = run_bound(spec).to_csv()
    assert a == b
