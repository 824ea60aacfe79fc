import math

import numpy as np
import pytest

from duffing_qdyn import perturb, renorm
from duffing_qdyn.errors import DegeneracyError, InvalidInputError, MissingOrderError
from duffing_qdyn.model import Branch, ModelParams, solve_attractor
from duffing_qdyn.perturb import (
    PerturbationInput,
    double_perturbation,
    exact_level_spacings,
    has_matrix_elements,
    level_spacings,
    perturbed_state,
    state_table,
)

LAM, BETA = 0.016, 4.0 / 75.0


def random_hermitian(rng, d, scale=1.0):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (m + m.conj().T) / (2.0 * math.sqrt(d))


def standard_rs_oracle(e0, v, order=4):
    """Plain-loop Rayleigh-Schroedinger series for H0 + g V (independent path)."""
    d = len(e0)
    eps = np.zeros((d, 5))
    eps[:, 0] = e0
    xi = [np.zeros((d, d), complex) for _ in range(4)]
    for n in range(d):
        delta = np.array([e0[n] - e0[k] for k in range(d)])
        eps[n, 1] = v[n, n].real
        for k in range(d):
            if k != n:
                xi[0][k, n] = v[k, n] / delta[k]
        eps[n, 2] = sum(v[n, k] * xi[0][k, n] for k in range(d) if k != n).real
        for k in range(d):
            if k != n:
                acc = sum(v[k, l] * xi[0][l, n] for l in range(d) if l != n)
                xi[1][k, n] = (acc - eps[n, 1] * xi[0][k, n]) / delta[k]
        eps[n, 3] = sum(v[n, l] * xi[1][l, n] for l in range(d) if l != n).real
        for k in range(d):
            if k != n:
                acc = sum(v[k, l] * xi[1][l, n] for l in range(d) if l != n)
                xi[2][k, n] = (
                    acc - eps[n, 1] * xi[1][k, n] - eps[n, 2] * xi[0][k, n]
                ) / delta[k]
        eps[n, 4] = sum(v[n, l] * xi[2][l, n] for l in range(d) if l != n).real
    return eps


class TestDoublePerturbation:
    def test_two_level_closed_form(self):
        # H0 = diag(0,1), H1 = sigma_x: eps0(g) = 1/2 - sqrt(1/4+g^2)
        inp = PerturbationInput(
            h0_diag=np.array([0.0, 1.0]),
            h1=np.array([[0.0, 1.0], [1.0, 0.0]], complex),
            h2=np.zeros((2, 2), complex),
            gamma=0.1,
        )
        res = double_perturbation(inp)
        np.testing.assert_allclose(res.eps[0], [0.0, 0.0, -1.0, 0.0, 1.0], atol=1e-14)

    def test_diagonal_h2_with_zero_h1(self, rng):
        d = 6
        h2 = np.diag(rng.standard_normal(d)).astype(complex)
        inp = PerturbationInput(
            h0_diag=np.arange(d, dtype=float), h1=np.zeros((d, d), complex),
            h2=h2, gamma=0.05,
        )
        res = double_perturbation(inp)
        np.testing.assert_allclose(res.eps[:, 2], np.diag(h2).real, atol=1e-14)
        assert np.max(np.abs(res.xi[0])) == 0

    def test_series_matches_dense_eigensolver(self):
        # Dense-eigensolver oracle over many random instances.
        gamma = 1e-2
        for seed in range(50):
            rng = np.random.default_rng(seed)
            e0 = np.arange(8, dtype=float) + 0.05 * rng.standard_normal(8)
            h1 = random_hermitian(rng, 8)
            h2 = random_hermitian(rng, 8)
            inp = PerturbationInput(h0_diag=e0, h1=h1, h2=h2, gamma=gamma)
            res = double_perturbation(inp)
            series = res.eigenvalues()
            h = np.diag(e0) + gamma * h1 + gamma**2 * h2
            exact = np.linalg.eigvalsh(h)
            order = np.argsort(e0)
            assert np.max(np.abs(np.sort(exact) - series[order])) <= 100 * gamma**5

    def test_reduces_to_standard_rs(self, rng):
        e0 = np.arange(7, dtype=float)
        v = random_hermitian(rng, 7)
        inp = PerturbationInput(
            h0_diag=e0, h1=v, h2=np.zeros((7, 7), complex), gamma=0.01
        )
        res = double_perturbation(inp)
        oracle = standard_rs_oracle(e0, v)
        np.testing.assert_allclose(res.eps, oracle, atol=1e-12)

    def test_third_order_closed_form(self, rng):
        # Textbook closed form for eps3 of H0 + gV.
        e0 = np.arange(6, dtype=float)
        v = random_hermitian(rng, 6)
        inp = PerturbationInput(h0_diag=e0, h1=v, h2=np.zeros((6, 6), complex), gamma=0.01)
        res = double_perturbation(inp)
        n = 2
        delta = e0[n] - e0
        eps3 = 0.0
        for k in range(6):
            if k == n:
                continue
            for l in range(6):
                if l == n:
                    continue
                eps3 += (v[n, k] * v[k, l] * v[l, n] / (delta[k] * delta[l])).real
        eps3 -= v[n, n].real * sum(
            (abs(v[n, k]) ** 2 / delta[k] ** 2) for k in range(6) if k != n
        )
        assert res.eps[n, 3] == pytest.approx(eps3, abs=1e-12)

    def test_finite_difference_consistency(self, rng):
        # d^2 eps / d gamma^2 |_0 / 2 from central differences.
        e0 = np.arange(6, dtype=float)
        h1 = random_hermitian(rng, 6)
        h2 = random_hermitian(rng, 6)
        h = 1e-3

        def levels(g):
            return np.linalg.eigvalsh(np.diag(e0) + g * h1 + g * g * h2)

        second = (
            -levels(2 * h) + 16 * levels(h) - 30 * levels(0.0)
            + 16 * levels(-h) - levels(-2 * h)
        ) / (12 * h * h)
        inp = PerturbationInput(h0_diag=e0, h1=h1, h2=h2, gamma=h)
        res = double_perturbation(inp)
        np.testing.assert_allclose(second / 2.0, res.eps[:, 2], atol=1e-6)

    def test_degeneracy_detected(self):
        inp = PerturbationInput(
            h0_diag=np.array([0.0, 1e-9, 1.0]),
            h1=np.zeros((3, 3), complex),
            h2=np.zeros((3, 3), complex),
            gamma=0.1,
        )
        with pytest.raises(DegeneracyError) as err:
            double_perturbation(inp)
        assert err.value.level_pair == (0, 1)

    def test_hermiticity_enforced(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]], complex)
        inp = PerturbationInput(
            h0_diag=np.array([0.0, 1.0]), h1=bad, h2=np.zeros((2, 2), complex), gamma=0.1
        )
        with pytest.raises(InvalidInputError):
            double_perturbation(inp)

    def test_xi_zero_self_component(self, rng):
        e0 = np.arange(6, dtype=float)
        inp = PerturbationInput(
            h0_diag=e0, h1=random_hermitian(rng, 6), h2=random_hermitian(rng, 6),
            gamma=0.02,
        )
        res = double_perturbation(inp)
        for xi in res.xi:
            assert np.max(np.abs(np.diag(xi))) == 0


class TestPerturbedState:
    def test_gamma_zero_is_bare(self, rng):
        e0 = np.arange(5, dtype=float)
        inp = PerturbationInput(
            h0_diag=e0, h1=random_hermitian(rng, 5), h2=random_hermitian(rng, 5),
            gamma=0.1,
        )
        res = double_perturbation(inp)
        coeffs, norm = perturbed_state(res, 2, gamma=0.0)
        expected = np.zeros(5)
        expected[2] = 1.0
        np.testing.assert_allclose(coeffs, expected, atol=1e-15)
        assert norm == pytest.approx(1.0)

    def test_two_level_overlap(self):
        gamma = 0.1
        inp = PerturbationInput(
            h0_diag=np.array([0.0, 1.0]),
            h1=np.array([[0.0, 1.0], [1.0, 0.0]], complex),
            h2=np.zeros((2, 2), complex),
            gamma=gamma,
        )
        res = double_perturbation(inp)
        coeffs, norm = perturbed_state(res, 0)
        h = np.diag([0.0, 1.0]) + gamma * inp.h1
        _, vecs = np.linalg.eigh(h)
        overlap = abs(np.vdot(vecs[:, 0], coeffs / norm)) ** 2
        assert overlap >= 1.0 - 10 * gamma**6

    def test_norm_deviation_order(self, rng):
        e0 = np.arange(6, dtype=float)
        h1 = random_hermitian(rng, 6)
        inp = PerturbationInput(
            h0_diag=e0, h1=h1, h2=np.zeros((6, 6), complex), gamma=0.01
        )
        res = double_perturbation(inp)
        coeffs, norm = perturbed_state(res, 3, order=1)
        leading = 0.5 * inp.gamma**2 * np.sum(np.abs(res.xi[0][:, 3]) ** 2)
        assert abs((norm - 1.0) - leading) <= 1e-7

    def test_missing_order(self, rng):
        inp = PerturbationInput(
            h0_diag=np.arange(4, dtype=float),
            h1=random_hermitian(rng, 4),
            h2=random_hermitian(rng, 4),
            gamma=0.1,
            max_order=2,
        )
        res = double_perturbation(inp)
        with pytest.raises(MissingOrderError):
            perturbed_state(res, 0, order=3)


class TestHasMatrixElements:
    def test_selection_rules(self, fig2_params, has_solution):
        sol = has_solution
        for k in range(8):
            for l in range(12):
                h1, h2 = has_matrix_elements(k, l, sol.alpha, sol.pair, LAM)
                if abs(l - k) not in (1, 3):
                    assert h1 == 0
                if abs(l - k) not in (0, 2, 4):
                    assert h2 == 0
        # |l - k| = 2 is a pure h2 coupling
        h1, _ = has_matrix_elements(5, 3, has_solution.alpha, has_solution.pair, LAM)
        assert h1 == 0

    def test_diagonal_h2_closed_form(self, has_solution):
        u2 = abs(has_solution.pair.u) ** 2
        v2 = abs(has_solution.pair.v) ** 2
        for k in (0, 3, 7):
            _, h2 = has_matrix_elements(k, k, has_solution.alpha, has_solution.pair, LAM)
            expected = -(
                2 * (2 * u2 * v2 + u2 * u2) * k + (u2 * u2 + v2 * v2 + 4 * u2 * v2) * k * k
            )
            assert h2 == pytest.approx(expected, rel=1e-12)

    def test_against_numeric_matrices(self, fig2_params, has_solution):
        # Numeric-matrix oracle; dim large enough that the squeeze spread
        # exp(2|xi|)(k+4) stays inside the basis for k < 20.
        dim = 160
        oh = renorm.ordered_hamiltonian(
            fig2_params, has_solution.alpha, has_solution.pair, Branch.HAS, dim
        )
        h1n, h2n = oh.term("h1"), oh.term("h2")
        for k in range(20):
            for l in range(20):
                c1, c2 = has_matrix_elements(
                    k, l, has_solution.alpha, has_solution.pair, LAM
                )
                assert abs(c1 - h1n[l, k]) <= 1e-8
                assert abs(c2 - h2n[l, k]) <= 1e-8

    def test_assembled_matrices_hermitian(self, has_solution):
        n = 16
        h1 = np.zeros((n, n), complex)
        h2 = np.zeros((n, n), complex)
        for k in range(n):
            for l in range(n):
                h1[l, k], h2[l, k] = has_matrix_elements(
                    k, l, has_solution.alpha, has_solution.pair, LAM
                )
        assert np.max(np.abs(h1 - h1.conj().T)) <= 1e-12
        assert np.max(np.abs(h2 - h2.conj().T)) <= 1e-12


class TestLevelSpacings:
    def test_order_zero_constant(self, fig2_params, has_solution):
        sp = level_spacings(fig2_params, Branch.HAS, 6, 0)
        np.testing.assert_allclose(sp, sp[0], atol=1e-12)
        oh = renorm.ordered_hamiltonian(
            fig2_params, has_solution.alpha, has_solution.pair, Branch.HAS, 30
        )
        coeff = np.diag(oh.term("h0")).real[1]
        assert sp[0] == pytest.approx(abs(coeff), rel=1e-12)

    def test_fourth_order_vs_exact_diagonalization(self, fig2_params):
        exact = exact_level_spacings(fig2_params, Branch.HAS, 5, dim=300)
        o4 = level_spacings(fig2_params, Branch.HAS, 5, 4)
        assert np.max(np.abs(o4 - exact)) <= 2 * LAM**2

    def test_harmonic_limit_orders_coincide(self):
        lam = 1e-6
        p = ModelParams(delta_omega=1.0 + lam, chi=-lam, epsilon=-0.3)
        sp = {o: level_spacings(p, Branch.LAS, 3, o) for o in (0, 2, 4)}
        assert np.max(np.abs(sp[0] - sp[4])) <= 1e-4
        assert np.max(np.abs(sp[2] - sp[4])) <= 1e-4


class TestStateTable:
    def test_orthonormal(self, fig2_params):
        table = state_table(fig2_params, Branch.HAS, order=2, n_max=8)
        gram = table.coeffs.conj().T @ table.coeffs
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)

    def test_level_out_of_range(self, fig2_params):
        table = state_table(fig2_params, Branch.HAS, order=2, n_max=4)
        with pytest.raises(MissingOrderError):
            table.state(7)


class TestExactWellLevels:
    def test_anchor_overlap(self, fig2_params):
        energies, overlaps = perturb.exact_well_levels(
            fig2_params, Branch.HAS, 6, dim=300
        )
        assert overlaps[0] > 0.5  # DS|0> anchors the well unambiguously
        assert np.all(np.diff(energies) < 0)  # inverted ladder

    def test_las_levels(self, fig2_params):
        energies, overlaps = perturb.exact_well_levels(
            fig2_params, Branch.LAS, 3, dim=300
        )
        assert np.all(overlaps > 0.5)
        assert np.all(np.diff(energies) > 0)
