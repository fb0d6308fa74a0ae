import warnings

import numpy as np
import pytest

from augrec.cs_solver import (
    CsProblem,
    criticality_residual_cs,
    cs_schedule,
    default_lambda_cs,
    energy_cs,
    solve_cs,
    solve_cs_discrepancy,
    stationarity_residual_cs,
)
from augrec.harness import ExperimentConfig, gen_cs_instance
from augrec.penalty import PenaltyParams, psi
from augrec.trace import LambdaSchedule
from oracles import ista_weighted_lasso

LASSO = PenaltyParams(0.5, 0.0)
AUG = PenaltyParams(0.5, 0.1)


def instance(n=32, p=64, k=1, seed=0, sigma=None):
    cfg = ExperimentConfig(mode="cs", n=n, p=p, k=k, sigma=sigma)
    return gen_cs_instance(cfg, seed)


class TestProblem:
    def test_validation(self, rng):
        A = rng.standard_normal((4, 8))
        with pytest.raises(ValueError):
            CsProblem(A, np.zeros(5), 1.0)
        with pytest.raises(ValueError):
            CsProblem(A, np.zeros(4), 0.0)
        with pytest.raises(ValueError):
            CsProblem(A, np.zeros(4), 1.0, rho=0.0)

    def test_overdetermined_warns(self, rng):
        with pytest.warns(UserWarning):
            CsProblem(rng.standard_normal((8, 4)), np.zeros(8), 1.0)

    def test_threshold(self, rng):
        prob = CsProblem(rng.standard_normal((4, 8)), np.zeros(4), 0.2, rho=2.0, penalty=AUG)
        assert prob.tau == pytest.approx(0.2 * 1.05 / 2.0)
        assert CsProblem(prob.A, prob.y, 0.2, 2.0, LASSO).tau == pytest.approx(0.1)


class TestEnergy:
    def test_zero_point(self, rng):
        y = rng.standard_normal(4)
        prob = CsProblem(rng.standard_normal((4, 8)), y, 0.3)
        assert energy_cs(np.zeros(8), np.zeros(8), prob) == pytest.approx(0.5 * y @ y)

    def test_lasso_objective(self, rng):
        A, y = rng.standard_normal((4, 8)), rng.standard_normal(4)
        x = rng.standard_normal(8)
        prob = CsProblem(A, y, 0.3, penalty=LASSO)
        expected = 0.5 * np.sum((A @ x - y) ** 2) + 0.3 * np.abs(x).sum()
        assert energy_cs(x, x, prob) == pytest.approx(expected, rel=1e-14)

    def test_two_summation_orders(self, rng):
        A, y = rng.standard_normal((6, 10)), rng.standard_normal(6)
        x, w = rng.standard_normal(10), rng.standard_normal(10)
        prob = CsProblem(A, y, 0.7, rho=1.3, penalty=AUG)
        lam, a, b, rho = 0.7, 0.5, 0.1, 1.3
        # phi-based form: lam * (||w||_1 + alpha beta (||w||_1 - ||x||_1) + beta Phi(x))
        phi_sum = np.sum(0.5 * np.abs(x) / (1 + 0.5 * np.abs(x)))
        alt = (
            sum(0.5 * r * r for r in (A @ x - y))
            + lam * np.abs(w).sum()
            + lam * a * b * (np.abs(w).sum() - np.abs(x).sum())
            + lam * b * phi_sum
            + sum(rho / 2 * d * d for d in (x - w))
        )
        assert abs(energy_cs(x, w, prob) - alt) <= 1e-12 * max(1.0, abs(alt))

    def test_shape_mismatch(self, rng):
        prob = CsProblem(rng.standard_normal((4, 8)), np.zeros(4), 0.3)
        with pytest.raises(ValueError):
            energy_cs(np.zeros(7), np.zeros(8), prob)


class TestSolver:
    def test_zero_data(self, rng):
        prob = CsProblem(rng.standard_normal((5, 10)), np.zeros(5), 0.1)
        sol = solve_cs(prob)
        assert sol.trace.iterations == 1 and sol.trace.converged
        assert np.all(sol.x == 0) and np.all(sol.w == 0)

    def test_lasso_one_sparse(self):
        inst = instance(k=1)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=LASSO)
        sol = solve_cs(prob)
        assert np.linalg.norm(sol.x - inst.x0) / np.linalg.norm(inst.x0) <= 1e-3

    def test_lasso_matches_reference_proximal_gradient(self):
        # eliminating x leaves a Lasso in w with data weight (I + A A^T / rho)^-1
        inst = instance(k=3, seed=4)
        A, y, rho = inst.A, inst.y, 1.0
        lam = default_lambda_cs(A, y, rho)
        prob = CsProblem(A, y, lam, rho, LASSO)
        sol = solve_cs(prob, tol=1e-12, maxit=20000)
        M = np.linalg.inv(np.eye(A.shape[0]) + A @ A.T / rho)
        w_ref = ista_weighted_lasso(A, y, lam, M)
        assert np.linalg.norm(sol.w - w_ref) <= 1e-6 * np.linalg.norm(w_ref)

    def test_lasso_optimality_conditions(self):
        inst = instance(k=3, seed=2)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=LASSO)
        sol = solve_cs(prob, tol=1e-12, maxit=20000)
        assert prob.tau == pytest.approx(prob.lam / prob.rho)
        assert stationarity_residual_cs(sol.x, sol.w, prob) <= 1e-6
        # x is the data-term minimizer coupled to w
        grad_x = prob.A.adjoint(prob.A.apply(sol.x) - prob.y) + prob.rho * (sol.x - sol.w)
        assert np.linalg.norm(grad_x, np.inf) <= 1e-6

    def test_augmented_fixed_point(self):
        inst = instance(n=48, p=96, k=6, seed=3)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
        sol = solve_cs(prob, tol=1e-12, maxit=20000)
        assert stationarity_residual_cs(sol.x, sol.w, prob) <= 1e-6

    def test_setting1_k20_median(self):
        cfg = ExperimentConfig(mode="cs", p=512, n=128, k=20)
        errs = []
        for seed in range(10):
            inst = gen_cs_instance(cfg, seed)
            prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
            sol = solve_cs(prob)
            errs.append(np.linalg.norm(sol.x - inst.x0) / np.linalg.norm(inst.x0))
        assert np.median(errs) <= 1e-2

    def test_monotone_energy_and_summability(self):
        for seed in range(5):
            inst = instance(n=40, p=80, k=5, seed=seed)
            prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
            tr = solve_cs(prob).trace
            assert tr.monotone_violations(1e-10) == []
            assert tr.converged and tr.tail_fraction(0.1) <= 0.01
            assert tr.cg_failures == 0

    def test_energy_start_matches_previous_energy_without_continuation(self):
        inst = instance(seed=1)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
        tr = solve_cs(prob, continuation=False).trace
        assert np.allclose(tr.energy_start[1:], tr.energy[:-1], rtol=0, atol=0)

    def test_converged_residual_bound(self):
        for seed in range(5):
            inst = instance(n=40, p=80, k=5, seed=seed)
            prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
            sol = solve_cs(prob)
            assert sol.trace.converged
            assert sol.trace.residual[-1] <= 10 * prob.rho * 1e-4 * np.linalg.norm(sol.x)

    def test_residual_zero_for_equal_iterates(self, rng):
        prob = CsProblem(rng.standard_normal((4, 8)), rng.standard_normal(4), 0.1, penalty=AUG)
        x = rng.standard_normal(8)
        assert criticality_residual_cs(x, x, x, prob) == 0.0

    def test_huge_lambda_stress(self):
        inst = instance(seed=5)
        prob = CsProblem(inst.A, inst.y, 1e12, penalty=AUG)
        sol = solve_cs(prob, continuation=False, maxit=20)
        assert np.all(np.isfinite(sol.trace.residual))
        assert np.all(sol.w == 0)

    def test_deterministic_traces(self):
        inst = instance(k=4, seed=7)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
        t1, t2 = solve_cs(prob).trace, solve_cs(prob).trace
        for key, arr in t1.as_arrays().items():
            assert np.array_equal(arr, t2.as_arrays()[key]), key

    @pytest.mark.parametrize("rho", [0.1, 1.0, 10.0])
    def test_rho_insensitivity(self, rho):
        inst = instance(n=64, p=128, k=8, seed=11)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y, rho), rho, AUG)
        sol = solve_cs(prob, maxit=2000)
        assert np.linalg.norm(sol.x - inst.x0) / np.linalg.norm(inst.x0) <= 1e-2

    def test_maxit_termination(self):
        inst = instance(k=4)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
        tr = solve_cs(prob, maxit=3).trace
        assert tr.termination == "maxit" and tr.iterations == 3

    def test_bad_inputs(self, rng):
        prob = CsProblem(rng.standard_normal((4, 8)), rng.standard_normal(4), 0.1)
        with pytest.raises(ValueError):
            solve_cs(prob, tol=0)
        with pytest.raises(ValueError):
            solve_cs(prob, x0=np.zeros(3))

    def test_nan_data_aborts(self, rng):
        y = rng.standard_normal(4)
        y[0] = np.nan
        prob = CsProblem(rng.standard_normal((4, 8)), y, 0.1)
        with pytest.raises(FloatingPointError):
            solve_cs(prob, continuation=False)


class TestSchedule:
    def test_continuation_reaches_target(self):
        inst = instance(k=3)
        prob = CsProblem(inst.A, inst.y, default_lambda_cs(inst.A, inst.y), penalty=AUG)
        sched = cs_schedule(prob)
        assert sched.start > prob.lam
        assert sched.value(1) == sched.start
        assert sched.value(21) == pytest.approx(sched.start / 2)
        s_end = next(s for s in range(1, 10**4) if sched.at_target(s))
        assert sched.value(s_end) == prob.lam and sched.value(s_end + 100) == prob.lam

    def test_constant(self):
        s = LambdaSchedule.constant(0.3)
        assert s.value(1) == 0.3 and s.at_target(1)

    def test_default_lambda_scaling(self, rng):
        A, y = rng.standard_normal((5, 10)), rng.standard_normal(5)
        c = 1.0 / (1.0 + np.linalg.norm(A, 2) ** 2)
        assert default_lambda_cs(A, y) == pytest.approx(1e-3 * np.abs(A.T @ y).max() * c)
        assert default_lambda_cs(A, np.zeros(5)) > 0


class TestDiscrepancy:
    def test_fit_matches_noise_level(self):
        inst = instance(n=16, p=32, k=2, seed=1, sigma=0.05)
        eps = np.linalg.norm(inst.noise)
        sol, lam = solve_cs_discrepancy(inst.A, inst.y, eps, AUG)
        res = np.linalg.norm(inst.A @ sol.w - inst.y)
        assert res <= eps * (1 + 1e-12)
        assert res >= 0.99 * eps
        assert lam > 0
