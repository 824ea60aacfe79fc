import numpy as np
import pytest

from duffing_qdyn import liouville as lv
from duffing_qdyn import perturb, renorm
from duffing_qdyn.errors import (
    InvalidInputError,
    ReducibleRatesError,
    UndefinedExtractionError,
)
from duffing_qdyn.fock import displacement, ladder, number_operator, pair_unitary
from duffing_qdyn.model import Branch, ModelParams, rwa_hamiltonian, solve_attractor
from duffing_qdyn.perturb import StateTable

LAM, BETA = 0.016, 4.0 / 75.0


def random_density(rng, dim):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, dim):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (m + m.conj().T) / 2


class TestGeneralizedLindblad:
    def test_reduces_to_dissipator(self, rng):
        dim = 6
        a, adag = ladder(dim)
        gen = lv.generalized_lindblad(a, adag)
        diss = lv.dissipator_superop(a)
        assert abs(gen.matrix - diss).max() <= 1e-12

    def test_linearity_in_second_argument(self, rng):
        dim = 5
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        b = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        c = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        lhs = lv.generalized_superop(a, b + c)
        rhs = lv.generalized_superop(a, b) + lv.generalized_superop(a, c)
        assert abs(lhs - rhs).max() <= 1e-12

    def test_linearity_in_first_argument(self, rng):
        dim = 5
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        b = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        c = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        lhs = lv.generalized_superop(a + b, c)
        rhs = lv.generalized_superop(a, c) + lv.generalized_superop(b, c)
        assert abs(lhs - rhs).max() <= 1e-12

    def test_adjoint_identity(self, rng):
        # (L[A;B] rho)^dag = L[B^dag; A^dag] rho^dag on random inputs.
        dim = 5
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        b = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        left = lv.unvectorize(lv.generalized_superop(a, b) @ lv.vectorize(rho), dim)
        right = lv.unvectorize(
            lv.generalized_superop(b.conj().T, a.conj().T) @ lv.vectorize(rho.conj().T),
            dim,
        )
        assert np.max(np.abs(left.conj().T - right)) <= 1e-12

    def test_dimension_mismatch(self):
        a, _ = ladder(4)
        b, _ = ladder(5)
        with pytest.raises(InvalidInputError):
            lv.generalized_lindblad(a, b)


class TestBuildLiouvillian:
    def test_thermal_steady_state(self):
        dim, nbar, kappa = 25, 0.7, 0.1
        a, adag = ladder(dim)
        h = np.diag(np.arange(dim)).astype(complex)
        liouv = lv.build_liouvillian(h, lv.thermal_channels(a, kappa, nbar))
        rho = lv.steady_state(liouv)
        pn = np.diag(rho).real
        ratios = pn[1:20] / pn[:19]
        np.testing.assert_allclose(ratios, nbar / (1 + nbar), atol=1e-10)
        assert np.trace(adag @ a @ rho).real == pytest.approx(nbar, abs=1e-8)

    def test_vacuum_dark_state(self):
        dim = 12
        a, _ = ladder(dim)
        n = number_operator(dim)
        h = n + 0.3 * (n @ n)  # any chi, no drive
        liouv = lv.build_liouvillian(h, lv.thermal_channels(a, 0.2, 0.0))
        rho = lv.steady_state(liouv)
        expected = np.zeros((dim, dim))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(rho, expected, atol=1e-10)

    def test_trace_preservation(self, rng):
        dim = 8
        a, adag = ladder(dim)
        liouv = lv.build_liouvillian(
            random_hermitian(rng, dim),
            [
                ("dissipator", a, 0.2),
                ("anomalous", a, 0.05 - 0.02j),
                ("generalized", (a, adag), 0.01),
            ],
        )
        worst = 0.0
        for i in range(dim):
            for j in range(dim):
                e = np.zeros((dim, dim), complex)
                e[i, j] = 1.0
                worst = max(worst, abs(np.trace(liouv.apply(e))))
        assert worst <= 1e-10

    def test_hermiticity_preservation(self, rng):
        dim = 7
        a, _ = ladder(dim)
        liouv = lv.build_liouvillian(
            random_hermitian(rng, dim),
            [("dissipator", a, 0.3), ("anomalous", a, 0.1 + 0.07j)],
        )
        for _ in range(5):
            rho = random_hermitian(rng, dim)
            out = liouv.apply(rho)
            assert np.max(np.abs(out - out.conj().T)) <= 1e-10


class TestSteadyState:
    def test_positivity_and_idempotence(self, fig2_params, has_solution):
        p = fig2_params.with_(kappa=0.05 * fig2_params.unit)
        sol = solve_attractor(p, Branch.HAS)
        liouv = lv.renormalized_liouvillian(p, sol, 25)
        rho = lv.steady_state(liouv)
        assert np.linalg.eigvalsh(rho).min() >= -1e-8
        later = lv.evolve(liouv, rho, 10.0 / p.kappa, method="expm")
        assert np.max(np.abs(later - rho)) <= 1e-8


class TestEvolve:
    def test_t_zero(self, rng):
        dim = 6
        a, _ = ladder(dim)
        liouv = lv.build_liouvillian(number_operator(dim), [("dissipator", a, 0.1)])
        rho0 = random_density(rng, dim)
        np.testing.assert_allclose(lv.evolve(liouv, rho0, 0.0), rho0)

    def test_damped_coherent_oscillation(self):
        dim, kappa, delta = 30, 0.1, 1.0
        a, _ = ladder(dim)
        liouv = lv.build_liouvillian(
            delta * number_operator(dim), lv.thermal_channels(a, kappa, 0.0)
        )
        alpha0, t = 1.2, 2.0
        d = displacement(alpha0, dim)
        rho0 = np.outer(d[:, 0], d[:, 0].conj())
        for method in ("rk45", "expm"):
            rho_t = lv.evolve(liouv, rho0, t, method=method)
            expect = alpha0 * np.exp((-1j * delta - kappa / 2) * t)
            assert np.trace(a @ rho_t) == pytest.approx(expect, abs=1e-6)
            assert abs(np.trace(rho_t) - 1.0) <= 1e-8 * t
            assert np.max(np.abs(rho_t - rho_t.conj().T)) <= 1e-8
            assert np.linalg.eigvalsh(rho_t).min() >= -1e-8


class TestEmissionSpectrum:
    def _linear_setup(self, dim=25, delta=1.0, kappa=0.1, nbar=0.5):
        a, _ = ladder(dim)
        liouv = lv.build_liouvillian(
            delta * number_operator(dim), lv.thermal_channels(a, kappa, nbar)
        )
        return liouv, lv.steady_state(liouv), a

    def test_lorentzian_line(self):
        delta, kappa, nbar = 1.0, 0.1, 0.5
        liouv, rho, a = self._linear_setup(delta=delta, kappa=kappa, nbar=nbar)
        w = np.linspace(delta - 0.5, delta + 0.5, 501)
        s = lv.emission_spectrum(liouv, rho, a, w)
        peak = w[np.argmax(s)]
        assert abs(peak - delta) <= 0.02 * delta
        assert s.max() == pytest.approx(4 * nbar / kappa, rel=0.02)
        half = s.max() / 2
        above = w[s >= half]
        fwhm = above[-1] - above[0]
        assert fwhm == pytest.approx(kappa, rel=0.02)

    def test_sum_rule(self):
        delta, kappa, nbar = 1.0, 0.1, 0.5
        liouv, rho, a = self._linear_setup(dim=18, delta=delta, kappa=kappa, nbar=nbar)
        # dense sampling under the line, sparse over the Lorentzian tails
        w = np.unique(np.concatenate([
            np.linspace(delta - 12.8, delta + 12.8, 257),
            np.linspace(delta - 1.0, delta + 1.0, 801),
        ]))
        s = lv.emission_spectrum(liouv, rho, a, w)
        integral = np.trapezoid(s, w) / (2 * np.pi)
        n_st = np.trace(a.conj().T @ a @ rho).real
        assert integral == pytest.approx(n_st, rel=0.01)

    def test_time_mode_matches_resolvent(self):
        liouv, rho, a = self._linear_setup()
        w = np.linspace(0.6, 1.4, 81)
        s_res = lv.emission_spectrum(liouv, rho, a, w)
        s_time = lv.emission_spectrum(
            liouv, rho, a, w, method="time", t_max=400.0, n_times=8192
        )
        assert np.max(np.abs(s_time - s_res)) <= 0.02 * s_res.max()

    def test_incomplete_decay_warning(self):
        liouv, rho, a = self._linear_setup(kappa=0.01)
        with pytest.warns(UserWarning, match="not decayed"):
            lv.emission_spectrum(
                liouv, rho, a, np.linspace(0.9, 1.1, 11), method="time", t_max=5.0
            )

    def test_positivity(self):
        liouv, rho, a = self._linear_setup()
        w = np.linspace(-1.0, 3.0, 301)
        s = lv.emission_spectrum(liouv, rho, a, w)
        assert s.min() >= -1e-6 * s.max()


class TestBalance:
    def test_harmonic_ladder_ratio(self, fig2_params, has_solution):
        # With bare ladder states the rates reduce to the thermal ladder in
        # the effective occupation.
        dim = 30
        coeffs = renorm.bath_coefficients(fig2_params, has_solution.pair)
        eye_table = StateTable(
            coeffs=np.eye(dim, 8, dtype=complex),
            order=0,
            gamma=0.0,
            solution=has_solution,
        )
        w = lv.balance_rates(eye_table, coeffs)
        nb = coeffs.nbar_eff
        for n in range(6):
            up = w[n + 1, n]
            down = w[n, n + 1]
            assert up / down == pytest.approx(nb / (1 + nb), rel=1e-12)
            assert up == pytest.approx(nb * (n + 1), rel=1e-12)
            assert down == pytest.approx((1 + nb) * (n + 1), rel=1e-12)

    def test_thermal_ladder_geometric(self):
        nbar = 0.6
        n = 8
        w = np.zeros((n, n))
        for k in range(n - 1):
            w[k + 1, k] = nbar * (k + 1)
            w[k, k + 1] = (1 + nbar) * (k + 1)
        dist = lv.balance_steady(w)
        ratios = dist.p[1:] / dist.p[:-1]
        np.testing.assert_allclose(ratios, nbar / (1 + nbar), rtol=1e-10)

    def test_balance_vs_full_liouvillian(self, fig2_params):
        # Cross-method oracle at weak damping (criterion-4 regime).
        p = ModelParams.from_dimensionless(LAM, BETA, kappa_ratio=0.005)
        sol = solve_attractor(p, Branch.HAS)
        liouv = lv.renormalized_liouvillian(p, sol, 40)
        rho = lv.steady_state(liouv, check_unique=False)
        states = perturb.state_table(p, Branch.HAS, order=2, n_max=10)
        coeffs = renorm.bath_coefficients(p, sol.pair)
        w = lv.balance_rates(states, coeffs)
        p_bal = lv.balance_steady(w)
        p_full = lv.steady_populations(rho, states)
        rel = np.abs(p_bal.p - p_full.p) / p_full.p
        assert np.all(rel < 1.0)  # grows with n but stays below 1
        assert np.max(rel[:2]) < 0.05

    def test_rates_equal_lab_frame_elements(self, fig2_params, has_solution):
        # W_{n,m} equals |<N|a|M>|^2 at nbar=0 (orthonormalized states).
        from duffing_qdyn.observables import a_matrix_element

        states = perturb.state_table(fig2_params, Branch.HAS, order=2, n_max=6)
        coeffs = renorm.bath_coefficients(fig2_params, has_solution.pair)
        w = lv.balance_rates(states, coeffs)
        sol = states.solution
        for n in range(6):
            for m in range(6):
                if n == m:
                    continue
                elem = a_matrix_element(n, m, states, sol.alpha, sol.pair)
                assert abs(w[n, m] - abs(elem) ** 2) <= 1e-6

    def test_reducible_rejected(self):
        w = np.zeros((4, 4))
        w[1, 0] = w[0, 1] = 1.0
        w[3, 2] = w[2, 3] = 1.0
        with pytest.raises(ReducibleRatesError):
            lv.balance_steady(w)


class TestRenormalizedLiouvillian:
    def test_steady_residual_at_reference_parameters(self):
        p = ModelParams.from_dimensionless(LAM, BETA, kappa_ratio=0.005)
        sol = solve_attractor(p, Branch.HAS)
        liouv = lv.renormalized_liouvillian(p, sol, 40)
        rho = lv.steady_state(liouv)  # includes the kernel-uniqueness check
        resid = np.linalg.norm(liouv.matrix @ lv.vectorize(rho))
        assert resid <= 1e-10 * abs(liouv.matrix).max()


    def test_matches_direct_conjugation(self):
        # End-to-end algebra check: the assembled renormalized generator
        # equals the frame-conjugated bare generator on the inner block.
        # Small displacement so the frame unitaries are clean at dim 60.
        p = ModelParams.from_dimensionless(0.05, 0.01, kappa_ratio=0.02, nbar=0.3)
        sol = solve_attractor(p, Branch.LAS)
        dim = 60
        bare = lv.bare_liouvillian(p, dim)
        w_frame = displacement(sol.alpha, dim) @ pair_unitary(
            sol.pair, dim, check_truncation=False
        )
        assembled = lv.renormalized_liouvillian(p, sol, dim)
        block = 12
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(4):
            rho_small = np.zeros((dim, dim), complex)
            m = rng.standard_normal((block, block)) + 1j * rng.standard_normal((block, block))
            rho_small[:block, :block] = (m + m.conj().T) / 2
            # frame-transformed action: W^dag L[W rho W^dag] W
            rho_bare = w_frame @ rho_small @ w_frame.conj().T
            via_bare = w_frame.conj().T @ bare.apply(rho_bare) @ w_frame
            direct = assembled.apply(rho_small)
            worst = max(worst, np.max(np.abs((via_bare - direct)[:block, :block])))
        assert worst <= 1e-8
