"""End-to-end acceptance criteria, each checked at its stated tolerance.

Every test prints (and adds to the terminal summary) one line of the form
``ACCEPTANCE <n> PASS|FAIL <title>: <details>`` before asserting. The shipped
experiment configs are run once per session into a temporary directory and
shared between the criteria that inspect their output.
"""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mlbp.cli import main as cli_main
from mlbp.datagen import InstanceSpec, generate_instance
from mlbp.experiments import ExperimentConfig, run_experiment
from mlbp.linalg import spectral_norm
from mlbp.model import (
    QuadraticData,
    default_radius,
    gradient_mapping,
    sample_ball,
    theorem_constants,
)
from mlbp.prox import nonneg_soft_threshold, prox_l1_ball, soft_threshold
from mlbp.solvers import (
    admm,
    default_steps,
    feed_forward,
    fista,
    ista,
    ml_fista,
    ml_ista_canonical,
    ml_ista_layered,
    s_fista,
)
from oracles import brute_nonneg_threshold, brute_soft_threshold, dual_bisection_prox_l1_ball

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
EXPERIMENTS = ("bound_audit", "lambda_sweep", "mu_sweep", "solver_race")
LAMS = (0.02, 0.05)


def record(log, n, title, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    print(line)
    log.append(line)
    return ok


class _Run:
    def __init__(self, result, out, seconds):
        self.result, self.out, self.seconds = result, out, seconds


@pytest.fixture(scope="session")
def shipped(tmp_path_factory):
    """Lazily run each shipped experiment config once; cached by name."""
    root = tmp_path_factory.mktemp("shipped")
    cache = {}

    def get(name):
        if name not in cache:
            config = ExperimentConfig.from_file(CONFIGS / f"{name}.json")
            out = root / name
            t0 = time.perf_counter()
            result = run_experiment(config, out)
            cache[name] = _Run(result, out, time.perf_counter() - t0)
        return cache[name]

    return get


@pytest.fixture(scope="module")
def fixture7():
    return generate_instance(InstanceSpec(seed=7))


class TestAcceptance:
    def test_01_prox_oracles(self, acceptance_log):
        r = np.random.default_rng(1)
        t0 = time.perf_counter()
        worst = {"soft": 0.0, "nonneg": 0.0, "ball": 0.0}
        active = 0
        for _ in range(200):
            d = int(r.integers(1, 21))
            x = 2.0 * r.standard_normal(d)
            tau = float(r.uniform(0.01, 2.0))
            R = float(r.uniform(0.1, 1.5) * (np.linalg.norm(x) + 0.1))
            worst["soft"] = max(worst["soft"], np.max(np.abs(soft_threshold(x, tau) - brute_soft_threshold(x, tau))))
            worst["nonneg"] = max(worst["nonneg"],
                                  np.max(np.abs(nonneg_soft_threshold(x, tau) - brute_nonneg_threshold(x, tau))))
            p = prox_l1_ball(x, tau, R)
            active += np.linalg.norm(soft_threshold(x, tau)) > R
            worst["ball"] = max(worst["ball"], np.max(np.abs(p - dual_bisection_prox_l1_ball(x, tau, R))))
        secs = time.perf_counter() - t0
        ok = max(worst.values()) <= 1e-6 and secs < 10
        detail = ", ".join(f"{k} max err {v:.1e}" for k, v in worst.items())
        record(acceptance_log, 1, "prox oracle equivalence", ok,
               f"{detail}; ball constraint active in {active}/200; {secs:.1f}s (< 10s)")
        assert ok

    def test_02_gradient_mapping_bound(self, fixture7, acceptance_log):
        t0 = time.perf_counter()
        inst = fixture7
        model = inst.model(LAMS)
        ref = admm(model, inst.y, K=50_000, stop=1e-10)
        R = default_radius(ref.gamma)
        c = theorem_constants(model, inst.y, R=R)
        quad = QuadraticData.from_dictionary(inst.D1, inst.y)
        mu, _ = default_steps(model)
        pts = sample_ball(np.random.default_rng(2), model.code_dim, R, 1000)
        norms = np.array([np.linalg.norm(gradient_mapping(quad, LAMS[0], mu, inst.D2 @ g)) for g in pts])
        limit = c.M + c.lg1
        violations = int(np.sum(norms > limit * (1 + 1e-9)))
        secs = time.perf_counter() - t0
        ok = violations == 0 and secs < 30
        record(acceptance_log, 2, "gradient mapping bound", ok,
               f"R={R:.3f}, max ||G||={norms.max():.4g} <= M+lg1={limit:.4g}, {violations} violations; "
               f"{secs:.1f}s (< 30s)")
        assert ok

    def test_03_bound_audit(self, shipped, acceptance_log):
        run = shipped("bound_audit")
        res = run.result
        h = {k: i for i, k in enumerate(res.summary["header"])}
        rows = res.summary["rows"]
        grid = {(r[h["trial"]], r[h["mu_factor"]], r[h["eps"]]): r for r in rows}
        trials = sorted({r[h["trial"]] for r in rows})
        n_mu = len({r[h["mu_factor"]] for r in rows})
        n_eps = len({r[h["eps"]] for r in rows})
        ratios = []
        for tr in trials:
            for big, small in ((1.0, 0.1), (0.3, 0.03)):
                ratios.append(grid[(tr, big, 1e-8)][h["gap"]] / grid[(tr, small, 1e-8)][h["gap"]])
        ok = (res.passed and len(trials) == 3 and n_mu == 4 and n_eps == 4 and min(ratios) >= 2.0
              and run.seconds < 600)
        record(acceptance_log, 3, "suboptimality bound audit", ok,
               f"{len(rows)} grid points, passed={res.passed}, min slack {res.summary['min_slack']:.3e}; "
               f"gap ratio for 10x smaller mu at eps=1e-8: min {min(ratios):.2f} (>= 2); "
               f"{run.seconds:.0f}s (< 600s)")
        assert ok

    def test_04_reduction_identities(self, fixture7, acceptance_log):
        inst = fixture7
        K = 50
        errs = {}
        m0 = inst.model((0.0, LAMS[1]))
        mu, t = default_steps(m0)
        a = ml_ista_canonical(m0, inst.y, mu, t, K=K)
        b = ista(inst.D1 @ inst.D2, inst.y, LAMS[1], step=t, K=K)
        errs["ml_ista(lam1=0) vs ista"] = np.max(np.abs(a.gamma - b.gamma))

        model = inst.model(LAMS)
        mu, t = default_steps(model)
        a = ml_ista_layered(model, inst.y, mus=(mu, t / mu), K=K)
        b = ml_ista_canonical(model, inst.y, mu, t, K=K)
        errs["layered vs canonical"] = np.max(np.abs(a.gamma - b.gamma))

        nn = inst.model(LAMS, nonnegative_mode=True)
        mu, t = default_steps(nn)
        first = ml_ista_canonical(nn, inst.y, mu, t, K=1).gamma
        errs["nonneg first iterate vs t*feed_forward"] = np.max(np.abs(first - t * feed_forward(nn, inst.y)))

        a = ml_fista(model, inst.y, K=1).gamma
        b = ml_ista_layered(model, inst.y, K=1).gamma
        errs["first ml_fista vs first ml_ista"] = np.max(np.abs(a - b))
        ok = max(errs.values()) <= 1e-12
        record(acceptance_log, 4, "reduction identities", ok,
               "; ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (<= 1e-12)")
        assert ok

    def test_05_solver_consensus(self, acceptance_log):
        t0 = time.perf_counter()
        worst_rel, worst_admm, failures = 0.0, -math.inf, []
        for seed in range(100, 105):
            inst = generate_instance(InstanceSpec(seed=seed))
            model = inst.model(LAMS)
            ref = admm(model, inst.y, rho=1.0, K=50_000, stop=1e-10, inner="fista")
            if ref.stop_reason != "residual":
                failures.append(f"seed {seed}: ADMM residual {ref.final_residual:.1e}")
            sf = s_fista(model, inst.y, smoothing=1e-4, K=20_000)
            mu = 1e-3
            t = 0.99 * 4 * mu / (3 * spectral_norm(inst.D2))
            mf = ml_fista(model, inst.y, (mu, t / mu), K=500_000, stop=1e-9)
            vals = [ref.final_objective, sf.final_objective, mf.final_objective]
            worst_rel = max(worst_rel, max(abs(v - vals[0]) / abs(vals[0]) for v in vals))
            worst_admm = max(worst_admm, vals[0] - min(vals))
        secs = time.perf_counter() - t0
        ok = not failures and worst_rel <= 1e-3 and worst_admm <= 1e-9 and secs < 300
        record(acceptance_log, 5, "solver consensus", ok,
               f"5 seeds, max relative spread vs ADMM {worst_rel:.2e} (<= 1e-3), "
               f"ADMM - min {worst_admm:.1e} (<= 1e-9){'; ' + ', '.join(failures) if failures else ''}; "
               f"{secs:.0f}s (< 300s)")
        assert ok

    def test_06_lambda_sweep(self, shipped, acceptance_log):
        run = shipped("lambda_sweep")
        rows = run.result.summary["rows"]
        lam2 = np.array([r[0] for r in rows])
        parts, ok = [], run.seconds < 900
        for name, bp_col, ml_col in (("gamma2", 1, 2), ("gamma1", 4, 5)):
            bp = np.array([r[bp_col] for r in rows])
            ml = np.array([r[ml_col] for r in rows])
            mask = bp > 0.05
            worse = np.flatnonzero(mask & (ml > bp))
            i = int(np.argmin(bp))
            gain = 1 - ml[i] / bp[i]
            ok &= worse.size == 0 and gain >= 0.02
            deficit = f", max excess {np.max(ml[worse] - bp[worse]):.1e} at lambda2 >= {lam2[worse].min():.3g}" \
                if worse.size else ""
            parts.append(f"{name}: worse at {worse.size}/{int(mask.sum())} points{deficit}; "
                         f"gain {100 * gain:.1f}% at lambda2={lam2[i]:.3g} (>= 2%)")
        record(acceptance_log, 6, "recovery error vs lambda", ok, "; ".join(parts) + f"; {run.seconds:.0f}s (< 900s)")
        assert ok

    def test_07_acceleration_and_mu_trend(self, fixture7, shipped, acceptance_log):
        t0 = time.perf_counter()
        model = fixture7.model(LAMS)

        def settle(tr, tol=1e-4):
            bad = np.flatnonzero(np.abs(tr.objective - tr.final_objective) > tol)
            return int(tr.k[bad[-1] + 1]) if bad.size else 0

        slow = ml_ista_layered(model, fixture7.y, K=200_000, stop=1e-10)
        fast = ml_fista(model, fixture7.y, K=200_000, stop=1e-10)
        k_slow, k_fast = settle(slow), settle(fast)
        run = shipped("mu_sweep")
        rows = run.result.summary["rows"]
        order = np.argsort([-r[1] for r in rows])  # decreasing mu
        growth = []
        for col in (3, 4):
            g = np.array([rows[i][col] for i in order])
            growth.append(float(np.max(g[1:] / g[:-1])) if len(g) > 1 else 0.0)
        secs = time.perf_counter() - t0 + run.seconds
        ok = (slow.stop_reason == fast.stop_reason == "residual" and k_fast <= 0.5 * k_slow
              and max(growth) <= 1.05 and secs < 600)
        record(acceptance_log, 7, "acceleration and mu trend", ok,
               f"within 1e-4 of limit: ml_fista k={k_fast}, ml_ista k={k_slow} (ratio {k_fast / k_slow:.2f} <= 0.5); "
               f"largest gap growth as mu decreases: ml_ista x{growth[0]:.3f}, ml_fista x{growth[1]:.3f} "
               f"(<= 1.05); {secs:.0f}s (< 600s)")
        assert ok

    def test_08_fista_rate(self, acceptance_log):
        worst_ratio, worst_gap = 0.0, 0.0
        for seed in range(10):
            r = np.random.default_rng(300 + seed)
            D = r.standard_normal((15, 30)) / np.sqrt(15)
            y = r.standard_normal(15)
            lam = 0.1
            step = 1.0 / np.linalg.norm(D, 2) ** 2
            ref = fista(D, y, lam, step, K=1_000_000, stop=1e-13)
            g = ref.gamma
            res = y - D @ g
            scale = min(1.0, lam / np.max(np.abs(D.T @ res)))
            primal = 0.5 * res @ res + lam * np.abs(g).sum()
            dual = 0.5 * y @ y - 0.5 * np.sum((y - scale * res) ** 2)
            worst_gap = max(worst_gap, primal - dual)
            tr = fista(D, y, lam, step, K=500)
            bound = 2 * np.sum(g**2) / (step * (tr.k + 1) ** 2)
            worst_ratio = max(worst_ratio, float(np.max((tr.objective - dual) / bound)))
        ok = worst_gap <= 1e-10 and worst_ratio <= 1.0
        record(acceptance_log, 8, "FISTA rate certificate", ok,
               f"10 instances, F* duality gap <= {worst_gap:.1e} (<= 1e-10), "
               f"max (F_k - F*)/bound over k <= 500: {worst_ratio:.3f} (<= 1)")
        assert ok

    def test_09_determinism(self, shipped, tmp_path, acceptance_log):
        mismatched, compared = [], 0
        for name in EXPERIMENTS:
            first = shipped(name).out
            again = tmp_path / name
            assert cli_main(["run", "--config", str(CONFIGS / f"{name}.json"), "--out", str(again)]) == 0
            for f in sorted(first.glob("*.csv")):
                compared += 1
                if not filecmp.cmp(f, again / f.name, shallow=False):
                    mismatched.append(f"{name}/{f.name}")
        gen = []
        for i in range(2):
            d = tmp_path / f"gen{i}"
            assert cli_main(["gen", "--spec", str(CONFIGS / "instance.json"), "--out", str(d)]) == 0
            gen.append(d)
        for f in sorted(gen[0].iterdir()):
            compared += 1
            if not filecmp.cmp(f, gen[1] / f.name, shallow=False):
                mismatched.append(f"instance/{f.name}")
        ok = not mismatched
        record(acceptance_log, 9, "determinism", ok,
               f"{compared} files compared byte for byte, {len(mismatched)} differ"
               + (f" ({', '.join(mismatched)})" if mismatched else ""))
        assert ok
