import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from augrec.penalty import (
    PenaltyParams,
    big_phi_mat,
    big_phi_vec,
    big_psi_mat,
    grad_big_psi_mat,
    grad_psi_vec,
    phi,
    psi,
    psi_prime,
)

P = PenaltyParams(0.5, 0.1)
reals = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def central_diff(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2 * h)


class TestParams:
    def test_defaults_validated(self):
        assert P.validated
        assert P.beta_max == pytest.approx(0.1)

    def test_boundary_is_valid(self):
        assert PenaltyParams(50.0, 1e-3).validated

    def test_large_beta_warns(self):
        with pytest.warns(UserWarning):
            p = PenaltyParams(0.5, 0.2)
        assert not p.validated

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_alpha_positive(self, alpha):
        with pytest.raises(ValueError):
            PenaltyParams(alpha, 0.0)

    def test_beta_nonnegative(self):
        with pytest.raises(ValueError):
            PenaltyParams(0.5, -0.1)


class TestScalar:
    def test_phi_values(self):
        assert phi(0.0, P) == 0.0
        assert phi(1.0, P) == pytest.approx(1 / 3, abs=1e-15)
        assert abs(phi(1e6, P) - 1.0) <= 1e-5

    def test_psi_values(self):
        assert psi(0.0, P) == 0.0
        assert psi(1.0, P) == pytest.approx(1 / 3 - 0.5, abs=1e-15)

    def test_psi_prime_values(self):
        assert psi_prime(0.0, P) == 0.0
        assert psi_prime(1.0, P) == pytest.approx(0.5 / 2.25 - 0.5, rel=1e-12)
        assert psi_prime(-1.0, P) == pytest.approx(-(0.5 / 2.25 - 0.5), rel=1e-12)

    def test_psi_prime_matches_central_difference(self):
        f = lambda t: float(psi(t, P))
        assert abs(central_diff(f, 0.0)) < 1e-9
        fd = central_diff(f, 1.0)
        assert abs(psi_prime(1.0, P) - fd) <= 1e-6 * abs(fd)

    @given(reals)
    def test_phi_range_and_symmetry(self, t):
        v = phi(t, P)
        assert 0.0 <= v < 1.0
        assert phi(-t, P) == v
        assert (v == 0.0) == (t == 0.0)

    @given(reals)
    def test_split_identity(self, t):
        assert phi(t, P) - P.alpha * abs(t) == pytest.approx(psi(t, P), abs=1e-9 * max(1.0, abs(t)))

    @given(st.floats(0, 1e3), st.floats(0, 1e3))
    def test_phi_nondecreasing_in_abs(self, a, b):
        lo, hi = sorted((a, b))
        assert phi(lo, P) <= phi(hi, P)

    @given(st.floats(-1e3, 1e3).filter(lambda t: t != 0), st.floats(1e-3, 1e2), st.floats(1e-3, 1e2))
    def test_phi_nondecreasing_in_alpha(self, t, a1, a2):
        lo, hi = sorted((a1, a2))
        assert phi(t, PenaltyParams(lo, 0.0)) <= phi(t, PenaltyParams(hi, 0.0)) + 1e-15

    def test_psi_concave_nonincreasing_on_halfline(self):
        t = np.linspace(0, 50, 5001)
        d = psi_prime(t, P)
        assert np.all(d <= 0)
        assert np.all(np.diff(d) <= 1e-15)

    @given(st.floats(-100, 100))
    def test_psi_prime_odd(self, t):
        assert psi_prime(-t, P) == -psi_prime(t, P)


class TestVector:
    def test_examples(self):
        assert big_phi_vec(np.zeros(5), P) == 0.0
        assert big_phi_vec([1.0, -1.0], P) == pytest.approx(2 / 3)

    def test_small_alpha_limit_is_l1(self, rng):
        x = rng.uniform(-1, 1, 8)
        a = 1e-6
        val = big_phi_vec(x, PenaltyParams(a, 0.0)) / a
        assert abs(val - np.abs(x).sum()) <= 1e-4 * np.abs(x).sum()

    def test_large_alpha_limit_is_count(self, rng):
        x = np.zeros(20)
        idx = rng.choice(20, 7, replace=False)
        x[idx] = rng.choice([-1, 1], 7) * rng.uniform(0.01, 2, 7)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val = big_phi_vec(x, PenaltyParams(1e6, 0.0))
        assert abs(val - 7) <= 1e-4 * 7

    def test_grad_examples(self):
        assert np.all(grad_psi_vec(np.zeros(4), P) == 0)
        assert grad_psi_vec([1.0], P)[0] == pytest.approx(-0.2777777777777778)

    def test_grad_matches_central_difference(self, rng):
        x = rng.standard_normal(10)
        g = grad_psi_vec(x, P)
        f = lambda v: float(np.sum(psi(v, P)))
        h = 1e-6
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(10)])
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def random_matrix_with_gaps(rng, shape, gap=0.1):
    m = min(shape)
    while True:
        s = np.sort(rng.uniform(0.2, 3.0, m))[::-1]
        if np.all(-np.diff(s) >= gap):
            break
    U = ortho_group.rvs(shape[0], random_state=rng)[:, :m]
    V = ortho_group.rvs(shape[1], random_state=rng)[:, :m]
    return (U * s) @ V.T


class TestSpectral:
    def test_examples(self):
        assert big_phi_mat(np.zeros((3, 2)), P) == 0.0
        assert big_phi_mat(np.eye(2), P) == pytest.approx(2 / 3)
        assert big_psi_mat(np.zeros((3, 2)), P) == 0.0
        assert big_psi_mat(np.eye(2), P) == pytest.approx(-1 / 3)

    def test_psi_mat_two_paths(self, rng):
        for _ in range(20):
            X = rng.standard_normal((4, 3))
            s = np.linalg.svd(X, compute_uv=False)
            assert abs(big_psi_mat(X, P) - float(np.sum(psi(s, P)))) <= 1e-12

    def test_unitary_invariance(self, rng):
        for _ in range(20):
            X = rng.standard_normal((5, 3))
            U = ortho_group.rvs(5, random_state=rng)
            V = ortho_group.rvs(3, random_state=rng)
            assert abs(big_phi_mat(U @ X @ V.T, P) - big_phi_mat(X, P)) <= 1e-10

    def test_grad_zero(self):
        assert np.all(grad_big_psi_mat(np.zeros((3, 4)), P) == 0)

    def test_grad_diagonal_closed_form(self):
        G = grad_big_psi_mat(np.diag([2.0, 1.0]), P)
        expected = np.diag([0.5 / 4 - 0.5, 0.5 / 2.25 - 0.5])
        assert np.allclose(G, expected, atol=1e-14)

    def test_grad_shape_nonsquare(self, rng):
        for shape in [(5, 4), (3, 7)]:
            assert grad_big_psi_mat(rng.standard_normal(shape), P).shape == shape

    def test_grad_directional_derivative(self, rng):
        h = 1e-5
        for _ in range(10):
            X = random_matrix_with_gaps(rng, (5, 4))
            G = grad_big_psi_mat(X, P)
            for _ in range(10):
                H = rng.standard_normal((5, 4))
                fd = (big_psi_mat(X + h * H, P) - big_psi_mat(X - h * H, P)) / (2 * h)
                assert abs(np.vdot(G, H) - fd) <= 1e-5 * abs(fd)

    def test_grad_degenerate_spectrum_is_well_defined(self):
        # repeated and zero singular values: any SVD gives psi'(1) * I on the range
        G = grad_big_psi_mat(np.diag([1.0, 1.0, 0.0]), P)
        assert np.allclose(G, np.diag([psi_prime(1.0, P)] * 2 + [0.0]), atol=1e-14)
