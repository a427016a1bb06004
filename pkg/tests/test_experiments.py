import math

import numpy as np
import pytest

from mlbp.datagen import GeneratedInstance, InstanceSpec
from mlbp.experiments import (
    ConfigError,
    ExperimentConfig,
    ReferenceNotConverged,
    expand_grid,
    run_bound_audit,
    run_lambda_sweep,
    run_mu_sweep,
    run_solver_race,
)

SMALL = {"n": 12, "m1": 16, "m2": 14, "s1": 10, "s2": 8, "snr": 10.0, "seed": 3}


def cfg(**kw):
    return ExperimentConfig.from_dict(kw)


class TestGrids:
    def test_number_and_list(self):
        assert expand_grid(0.5) == (0.5,)
        assert expand_grid([1, 2]) == (1.0, 2.0)

    def test_logspace(self):
        g = expand_grid({"logspace": [-3, 0, 4]})
        np.testing.assert_allclose(g, [1e-3, 1e-2, 1e-1, 1.0])

    def test_mixed(self):
        g = expand_grid([0, {"logspace": [-4, -1, 10]}])
        assert g[0] == 0 and len(g) == 11

    @pytest.mark.parametrize("bad", [[], {"linspace": [0, 1, 2]}, {"logspace": [0, 1]}, "x", {"logspace": [0, 1, 0]}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            expand_grid(bad)


class TestConfig:
    def test_defaults_per_kind(self):
        c = cfg(kind="lambda-sweep")
        assert len(c.lambda2_grid) == 20 and len(c.lambda1_grid) == 11 and c.lambda1_grid[0] == 0
        m = cfg(kind="mu-sweep")
        assert len(m.mu_grid) == 6
        assert m.mu_grid[0] == 1.0 and m.mu_grid[-1] == pytest.approx(10**-2.5)
        a = cfg(kind="bound-audit")
        assert a.eps_grid == (1e-2, 1e-4, 1e-6, 1e-8)

    @pytest.mark.parametrize(
        "doc",
        [
            {"kind": "nope"},
            {},
            {"kind": "mu-sweep", "bogus": 1},
            {"kind": "mu-sweep", "trials": 0},
            {"kind": "mu-sweep", "mu_grid": [1.2]},
            {"kind": "mu-sweep", "t_factor": 1.0},
            {"kind": "mu-sweep", "lambdas": [0.1]},
            {"kind": "mu-sweep", "lambda2_grid": [-1]},
            {"kind": "solver-race", "solvers": ["newton"]},
            {"kind": "solver-race", "params": {"foo": 1}},
            {"kind": "solver-race", "params": {"admm_rho": -1}},
            {"kind": "bound-audit", "radius": -2},
            {"kind": "bound-audit", "instance": {"n": 5, "m1": 10, "m2": 8, "s1": 2, "s2": 3}},
            {"kind": "bound-audit", "instance": {}, "instance_path": "x"},
            {"kind": "bound-audit", "instance_path": "x", "trials": 2},
        ],
    )
    def test_rejects(self, doc):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_from_file(self, tmp_path):
        (tmp_path / "c.json").write_text('{"kind": "mu-sweep", "instance_path": "inst"}')
        c = ExperimentConfig.from_file(tmp_path / "c.json")
        assert c.instance_path == str(tmp_path / "inst")

    def test_bad_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "c.json")

    def test_trial_seeds(self):
        c = cfg(kind="lambda-sweep", instance=SMALL, trials=3)
        assert [i.spec.seed for i in c.instances()] == [3, 4, 5]


class TestLambdaSweep:
    def test_zero_only_grid(self, tmp_path):
        c = cfg(kind="lambda-sweep", instance=SMALL, lambda2_grid=[0.1], lambda1_grid=[0.0])
        r = run_lambda_sweep(c, tmp_path)
        (row,) = r.summary["rows"]
        assert row[1] == row[2] and row[4] == row[5]

    def test_noiseless_toy(self, tmp_path):
        m = 8
        g2 = np.zeros(m)
        g2[[1, 4, 6]] = [1.0, -0.5, 2.0]
        eye = np.eye(m)
        spec = InstanceSpec(n=m, m1=m, m2=m, s1=m, s2=3, snr=math.inf)
        inst = GeneratedInstance(spec, eye, eye, g2, g2, g2, g2.copy(), np.zeros(m))
        c = cfg(kind="lambda-sweep", lambda2_grid=[1e-6], lambda1_grid=[0.0, 1e-6], tol=1e-12, max_iter=10_000)
        r = run_lambda_sweep(c, tmp_path, instances=[inst])
        (row,) = r.summary["rows"]
        assert max(row[1], row[2], row[4], row[5]) < 1e-5

    def test_outputs_and_determinism(self, tmp_path):
        c = cfg(kind="lambda-sweep", instance=SMALL, trials=2, lambda2_grid=[0.05, 0.2], lambda1_grid=[0, 0.01])
        a = run_lambda_sweep(c, tmp_path / "a")
        b = run_lambda_sweep(c, tmp_path / "b")
        for pa, pb in zip(a.tables + a.figures, b.tables + b.figures):
            assert pa.read_bytes() == pb.read_bytes()
        assert a.tables[0].read_text().splitlines()[0].startswith("lambda2,bp_gamma2,mlbp_gamma2")

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        c = cfg(kind="lambda-sweep", instance=SMALL, trials=2, lambda2_grid=[0.1], lambda1_grid=[0, 0.01])
        a = run_lambda_sweep(c, tmp_path / "a")
        monkeypatch.setenv("MLBP_THREADS", "2")
        b = run_lambda_sweep(c, tmp_path / "b")
        assert a.tables[0].read_bytes() == b.tables[0].read_bytes()

    def test_bad_threads(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MLBP_THREADS", "many")
        c = cfg(kind="lambda-sweep", instance=SMALL, trials=2, lambda2_grid=[0.1], lambda1_grid=[0])
        with pytest.raises(ConfigError):
            run_lambda_sweep(c, tmp_path)


@pytest.fixture(scope="module")
def race(tmp_path_factory):
    c = cfg(kind="solver-race", instance={**SMALL, "n": 50, "m1": 70, "m2": 60, "s1": 42, "s2": 30, "seed": 7},
            max_iter=3000, tol=1e-10)
    return run_solver_race(c, tmp_path_factory.mktemp("race"))


class TestSolverRace:
    def test_final_not_below_reference(self, race):
        F_opt = race.summary["F_opt"]
        for tr in race.summary["traces"].values():
            assert tr.final_objective >= F_opt - 1e-9

    def test_fista_settles_sooner(self, race):
        # the layered iterates do not minimise F, so compare settling on the own limit
        def settle(tr, tol=1e-6):
            err = np.abs(tr.objective - tr.objective[-1])
            bad = np.flatnonzero(err > tol)
            return bad[-1] + 1 if bad.size else 0

        traces = race.summary["traces"]
        assert settle(traces["ml_fista"]) < settle(traces["ml_ista"])

    @pytest.mark.xfail(strict=True, reason="ML-ISTA approaches its limit from below, so its F stays under ML-FISTA's")
    def test_fista_lower_objective_pointwise(self, race):
        a = race.summary["traces"]["ml_ista"].objective
        b = race.summary["traces"]["ml_fista"].objective
        n = min(len(a), len(b))
        assert np.all(b[100:n] <= a[100:n] + 1e-12)

    def test_admm_fista_inner_faster(self, race):
        F_opt = race.summary["F_opt"]
        traces = race.summary["traces"]

        def time_to(tr):
            hit = np.flatnonzero(tr.objective - F_opt <= 1e-9)
            return tr.time_s[hit[0]] if hit.size else math.inf

        assert time_to(traces["admm_fista"]) < time_to(traces["admm_ista"])

    def test_files(self, race):
        names = [p.name for p in race.tables]
        assert names[0] == "solver_race_curves.csv" or names[0].endswith("_curves.csv")
        trace_files = [n for n in names if n.startswith("ml_fista_seed7_")]
        assert len(trace_files) == 1
        header = next(p for p in race.tables if p.name == trace_files[0]).read_text().splitlines()[0]
        assert header == "k,objective,time_s,residual,dist_ref"
        assert all(p.exists() for p in race.figures)

    def test_reference_failure(self, tmp_path):
        c = cfg(kind="solver-race", instance=SMALL, reference={"max_iter": 2})
        with pytest.raises(ReferenceNotConverged):
            run_solver_race(c, tmp_path)


class TestMuSweep:
    def test_single_point(self, tmp_path):
        c = cfg(kind="mu-sweep", instance=SMALL, mu_grid=[0.5])
        r = run_mu_sweep(c, tmp_path)
        assert len(r.tables[0].read_text().splitlines()) == 2

    def test_trend(self, tmp_path):
        c = cfg(kind="mu-sweep", instance=SMALL, mu_grid=[1.0, 0.1, 0.01])
        rows = run_mu_sweep(c, tmp_path).summary["rows"]
        gaps = [r[3] for r in rows]
        iters = [r[5] for r in rows]
        assert gaps[0] >= gaps[1] >= gaps[2] > 0
        assert iters[0] == min(iters)
        assert all(r[7] for r in rows)


class TestBoundAudit:
    def test_passes_small(self, tmp_path):
        c = cfg(kind="bound-audit", instance=SMALL, mu_grid=[1.0, 0.1], eps_grid=[1e-3, 1e-10])
        r = run_bound_audit(c, tmp_path)
        assert r.passed
        assert r.tables[0].read_text().splitlines()[0].endswith("slack,pass")

    def test_zero_first_weight(self):
        c = cfg(kind="bound-audit", instance=SMALL, lambdas=[0.0, 0.05], mu_grid=[1.0], eps_grid=[1e-6])
        assert run_bound_audit(c).passed

    def test_tiny_eps_limit(self):
        c = cfg(kind="bound-audit", instance=SMALL, mu_grid=[0.5], eps_grid=[1e-10])
        (row,) = run_bound_audit(c).summary["rows"]
        mu, t, eps, gap, bound = row[4], row[5], row[6], row[9], row[10]
        assert gap <= bound

    def test_unreached_target_fails(self):
        c = cfg(kind="bound-audit", instance=SMALL, mu_grid=[1.0], eps_grid=[1e-8], max_iter=2)
        assert not run_bound_audit(c).passed

    def test_fixed_radius(self):
        c = cfg(kind="bound-audit", instance=SMALL, mu_grid=[1.0], eps_grid=[1e-4], radius=5.0)
        r = run_bound_audit(c)
        assert r.summary["rows"][0][2] == 5.0 and r.passed
