"""Order-by-order damping parametrix: construction, oracles, residuals."""
import numpy as np
import pytest
from scipy.integrate import quad

from dampwave.errors import ConfigError, QuadratureError
from dampwave.jets import ConstJet, fd_jet
from dampwave.parametrix import (
    DampingIntegralJet,
    build_parametrix,
    composition_terms_M,
    conjugated_parametrix,
    parametrix_apply,
    parametrix_residual_norm,
)
from dampwave.quantize import Grid, WaveField, dealias_two_thirds, wave_packet
from dampwave.solver import IVPProblem, evolve
from dampwave.symbols import (
    AssumptionParams,
    build_cutoff_b,
    hyperbolic_a,
    multiplier_b,
    shipped_cutoff_family,
    zero_symbol,
)


def _random_field(grid, seed=1, z=0.0):
    rng = np.random.default_rng(seed)
    return WaveField(grid, z, rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points))


@pytest.fixture(scope="module")
def cutoff_prob(cutoff_b, params_unit, grid128):
    return IVPProblem(b_model=cutoff_b, params=params_unit, grid=grid128, dz=1e-3)


@pytest.fixture(scope="module")
def cutoff_ps2(cutoff_prob):
    return build_parametrix(cutoff_prob, J=2, quad_dz=1e-2, z_targets=[0.0, 0.5, 1.0])


class TestMultiplierCase:
    def test_corrections_vanish_and_factor_is_exact(self, b_multiplier, params_unit, grid128):
        prob = IVPProblem(b_model=b_multiplier, params=params_unit, grid=grid128, dz=1e-3)
        ps = build_parametrix(prob, J=2, quad_dz=1e-2)
        tab = ps.table_at(1.0)
        assert np.max(np.abs(tab["K1"])) == 0.0
        assert np.max(np.abs(tab["K2"])) == 0.0
        expected = np.exp(-0.5 * (1.0 + grid128.freqs[None, :] ** 2) ** 0.5)
        np.testing.assert_allclose(np.real(tab["W"]),
                                   np.broadcast_to(expected, (128, 128)), rtol=1e-12)

    def test_matches_direct_solver(self, b_multiplier, params_unit, grid128):
        prob = IVPProblem(b_model=b_multiplier, params=params_unit, grid=grid128, dz=1e-3)
        ps = build_parametrix(prob, J=0, quad_dz=1e-2)
        u0 = _random_field(grid128)
        v = parametrix_apply(ps, prob, u0, 1.0)
        ud = evolve(prob, u0, 1.0).fields[-1]
        rel = np.linalg.norm(v.values - ud.values) / np.linalg.norm(ud.values)
        assert rel <= 1e-6

    def test_zero_damping_reduces_to_free_data(self, params_unit, grid128):
        prob = IVPProblem(b_model=multiplier_b(0.0, 1.0), params=params_unit,
                          grid=grid128, dz=1e-3)
        ps = build_parametrix(prob, J=1, quad_dz=1e-2)
        u0 = _random_field(grid128, 2)
        v = parametrix_apply(ps, prob, u0, 1.0)
        assert np.max(np.abs(v.values - u0.values)) <= 1e-10


class TestIdentityAtStart:
    def test_table_is_one(self, cutoff_ps2):
        tab = cutoff_ps2.table_at(0.0)
        assert np.max(np.abs(tab["W"] - 1.0)) <= 1e-12

    def test_pointwise_is_one(self, cutoff_ps2):
        vals = cutoff_ps2.assembled(0.0, np.linspace(0, 6, 7), 11.0)
        np.testing.assert_allclose(vals, 1.0, atol=1e-12)


class TestFirstCorrectionOracle:
    def test_k1_by_independent_quadrature(self, cutoff_b, cutoff_ps2):
        # K^(1)(z) = -int_z0^z i b_xi(z') Ix(z') dz' with Ix from its own
        # quadrature; oracle uses adaptive quadrature over FD jets of b
        z, x, xi = 1.0, 1.35, 12.0

        def b_xi(zp):
            return float(fd_jet(cutoff_b.value_fn, zp, x, xi, 0, 1, 0))

        def b_x(zp):
            return float(fd_jet(cutoff_b.value_fn, zp, x, xi, 1, 0, 0))

        def integrand(zp):
            ix = quad(b_x, 0.0, zp, epsabs=1e-12)[0] if zp > 0 else 0.0
            return b_xi(zp) * ix

        oracle = -1j * quad(integrand, 0.0, z, epsabs=1e-12)[0]
        got = complex(cutoff_ps2._pointwise(z, x, xi)["K"][0][()])
        assert got == pytest.approx(oracle, rel=1e-6)

    def test_k1_closed_form_z_independent(self, cutoff_b, cutoff_ps2, grid128):
        # z-independent b: K1 = -(i/2) z^2 b_xi b_x
        z = 0.5
        X = grid128.x[:, None]
        K = grid128.freqs[None, :]
        expected = -0.5j * z ** 2 * cutoff_b.jet(z, X, K, 0, 1, 0) * cutoff_b.jet(z, X, K, 1, 0, 0)
        got = cutoff_ps2.table_at(0.5)["K1"]
        np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_k2_closed_form_z_independent(self, cutoff_b, cutoff_ps2, grid128):
        z = 1.0
        X = grid128.x[:, None]
        K = grid128.freqs[None, :]
        j = lambda ax, bxi: cutoff_b.jet(z, X, K, ax, bxi, 0)
        bx, bxi_, bxx, bxix, bxixi = j(1, 0), j(0, 1), j(2, 0), j(1, 1), j(0, 2)
        r12_int = -0.5 * bxixi * (bx ** 2 * z ** 3 / 3.0 - bxx * z ** 2 / 2.0)
        m21_int = 0.5 * (bxi_ ** 2 * bx ** 2 * z ** 4 / 4.0
                         - bxi_ * (bxix * bx + bxi_ * bxx) * z ** 3 / 3.0)
        expected = -(r12_int + m21_int)
        got = cutoff_ps2.table_at(1.0)["K2"]
        np.testing.assert_allclose(got, expected, atol=1e-8)


class TestVanishingRegion:
    def test_corrections_vanish_where_damping_is_zero(self, cutoff_ps2):
        tab = cutoff_ps2.table_at(1.0)
        mask = tab["I"] == 0.0
        assert mask.sum() > 1000  # the shipped family has a genuine zero region
        assert np.max(np.abs(tab["K1"][mask])) <= 1e-10
        assert np.max(np.abs(tab["K2"][mask])) <= 1e-10

    def test_ledger_offdiagonal_cancellation(self, cutoff_ps2):
        led = cutoff_ps2.ledger
        scale = np.max(np.abs(led.r_table[(1, 1)]["table"]))
        assert np.max(np.abs(led.r_table[(1, 0)]["table"])) <= 1e-8 * scale
        assert np.max(np.abs(led.r_table[(2, 1)]["table"])) <= 1e-8 * scale
        assert led.r_table[(2, 1)]["by_construction"]

    def test_m_tables_recorded(self, cutoff_ps2):
        assert set(cutoff_ps2.ledger.M_table) == {(1, 0), (1, 1), (1, 2), (2, 0), (2, 1)}


class TestResidualDecay:
    def test_residual_decreases_with_order(self, cutoff_prob, grid128, boundary_x):
        u = dealias_two_thirds(wave_packet(grid128, 24, boundary_x))
        norms = []
        for J in (0, 1, 2):
            ps = build_parametrix(cutoff_prob, J=J, quad_dz=1e-2)
            norms.append(parametrix_residual_norm(ps, cutoff_prob, u, 1.0))
        assert norms[1] < norms[0]
        assert norms[2] <= norms[1] * 1.05

    def test_order_improvement_on_packets(self, jslope_data):
        errs = jslope_data["errors"]
        assert all(e1 < e0 for e0, e1 in zip(errs[0], errs[1]))


class TestPointwiseVsTables:
    def test_pointwise_matches_grid_table(self, cutoff_ps2, grid128):
        tab = cutoff_ps2.table_at(1.0)
        xs = grid128.x[5:8]
        ks = np.array([7.0, -13.0])
        got = cutoff_ps2.assembled(1.0, xs[:, None], ks[None, :])
        jidx = [5, 6, 7]
        kidx = [np.where(grid128.freqs == k)[0][0] for k in ks]
        expected = tab["W"][np.ix_(jidx, kidx)]
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_i_evaluator(self, cutoff_ps2, cutoff_b):
        x, xi = 1.4, 9.0
        got = float(cutoff_ps2.I_evaluator(0.75, x, xi)[()])
        expected = 0.75 * float(np.real(cutoff_b.value(0.0, x, xi)))
        assert got == pytest.approx(expected, rel=1e-10)

    def test_k_components_list(self, cutoff_ps2):
        comps = cutoff_ps2.K_components
        assert len(comps) == 2
        v = comps[0](1.0, 1.35, 12.0)
        assert np.iscomplexobj(v)


class TestValidation:
    def test_rejects_a_term(self, cutoff_b, a_shipped, params_unit, grid128):
        prob = IVPProblem(b_model=cutoff_b, a_model=a_shipped,
                          params=params_unit, grid=grid128, dz=1e-3)
        with pytest.raises(ConfigError):
            build_parametrix(prob, J=0)

    def test_rejects_large_J(self, cutoff_prob):
        with pytest.raises(ConfigError):
            build_parametrix(cutoff_prob, J=3)

    def test_off_ladder_target(self, cutoff_prob):
        with pytest.raises(QuadratureError):
            build_parametrix(cutoff_prob, J=0, quad_dz=1e-2, z_targets=[0.505])

    def test_untabulated_depth(self, cutoff_ps2):
        with pytest.raises(QuadratureError):
            cutoff_ps2.table_at(0.77)


class TestCompositionTerms:
    def test_order_zero_is_product(self, cutoff_b, b_multiplier):
        M0 = composition_terms_M(b_multiplier, cutoff_b, None, 0)
        x, xi = 1.2, 9.0
        got = M0.jet(0.5, x, xi)
        expected = cutoff_b.value(0.5, x, xi) * b_multiplier.value(0.5, x, xi)
        assert complex(got[()]) == pytest.approx(complex(expected))

    def test_order_one_on_unit_symbol(self, cutoff_b):
        M1 = composition_terms_M(ConstJet(1.0), cutoff_b, None, 1)
        z, x, xi = 0.5, 1.2, 9.0
        expected = 1j * cutoff_b.jet(z, x, xi, 0, 1, 0) * (z * cutoff_b.jet(z, x, xi, 1, 0, 0))
        assert complex(M1.jet(z, x, xi)[()]) == pytest.approx(complex(expected), rel=1e-10)

    def test_x_independent_higher_terms_vanish(self, b_multiplier):
        for k in (1, 2):
            Mk = composition_terms_M(b_multiplier, b_multiplier, None, k)
            assert abs(complex(Mk.jet(0.5, 0.7, 5.0)[()])) <= 1e-14

    def test_subprincipal_enters_first_order(self, cutoff_b, b_multiplier):
        M1 = composition_terms_M(ConstJet(1.0), cutoff_b, b_multiplier, 1)
        z, x, xi = 0.5, 1.2, 9.0
        base = 1j * cutoff_b.jet(z, x, xi, 0, 1, 0) * (z * cutoff_b.jet(z, x, xi, 1, 0, 0))
        expected = base + b_multiplier.value(z, x, xi)
        assert complex(M1.jet(z, x, xi)[()]) == pytest.approx(complex(expected), rel=1e-10)

    def test_rejects_high_order(self, cutoff_b):
        with pytest.raises(ConfigError):
            composition_terms_M(ConstJet(1.0), cutoff_b, None, 4)


class TestDampingIntegralJet:
    def test_differentiation_under_integral(self, cutoff_b):
        I = DampingIntegralJet(cutoff_b, 0.0)
        z, x, xi = 0.8, 1.3, 11.0
        got = float(np.real(I.jet(z, x, xi, 1, 0, 0)))
        h = 1e-5
        fd = (float(np.real(I.jet(z, x + h, xi, 0, 0, 0)))
              - float(np.real(I.jet(z, x - h, xi, 0, 0, 0)))) / (2 * h)
        assert got == pytest.approx(fd, rel=1e-7)

    def test_z_derivative_is_integrand(self, cutoff_b):
        I = DampingIntegralJet(cutoff_b, 0.0)
        z, x, xi = 0.8, 1.3, 11.0
        assert float(np.real(I.jet(z, x, xi, 0, 0, 1))) == pytest.approx(
            float(np.real(cutoff_b.value(z, x, xi))))

    def test_z_dependent_family_quadrature(self):
        fam = shipped_cutoff_family(s=0.3)
        b = build_cutoff_b(fam)
        I = DampingIntegralJet(b, 0.0, quad_dz=1e-3)
        z, x, xi = 0.9, 1.3, 11.0
        oracle = quad(lambda zp: float(np.real(b.value(zp, x, xi))), 0.0, z,
                      epsabs=1e-12)[0]
        assert float(np.real(I.jet(z, x, xi))) == pytest.approx(oracle, abs=1e-9)


class TestConjugated:
    def test_commuting_case_matches_direct(self, b_multiplier, params_unit, grid128):
        prob = IVPProblem(b_model=b_multiplier, a_model=hyperbolic_a(0.7, 0.0),
                          params=params_unit, grid=grid128, dz=1e-3)
        cp = conjugated_parametrix(prob, J=0)
        u0 = dealias_two_thirds(_random_field(grid128, 3))
        v = cp.apply(u0, 1.0)
        ud = evolve(prob, u0, 1.0).fields[-1]
        rel = np.linalg.norm(v.values - ud.values) / np.linalg.norm(ud.values)
        assert rel <= 1e-6

    def test_trivial_flow_reduces_to_plain_build(self, cutoff_b, params_unit, grid64):
        freeze = hyperbolic_a(0.0, 0.0)  # zero transport: flow is the identity
        prob_a = IVPProblem(b_model=cutoff_b, a_model=freeze,
                            params=params_unit, grid=grid64, dz=1e-3)
        prob_0 = IVPProblem(b_model=cutoff_b, params=params_unit, grid=grid64, dz=1e-3)
        # leading order: bit-exact reduction
        cp0 = conjugated_parametrix(prob_a, J=0, quad_dz=1e-2)
        ps0 = build_parametrix(prob_0, J=0, quad_dz=1e-2)
        assert np.max(np.abs(cp0.tilde_table(1.0).table
                             - ps0.assembled_table(1.0).table)) == 0.0
        # with corrections: the transported-table jets difference the integer
        # frequency ladder, which is only approximate at the lowest bands
        cp1 = conjugated_parametrix(prob_a, J=1, quad_dz=1e-2)
        ps1 = build_parametrix(prob_0, J=1, quad_dz=1e-2)
        d = np.abs(cp1.tilde_table(1.0).table - ps1.assembled_table(1.0).table)
        away = np.broadcast_to(np.abs(grid64.freqs[None, :]) >= 8, d.shape)
        assert d[away].max() <= 1e-2
        assert d.max() <= 5e-2

    def test_requires_a_term(self, cutoff_prob):
        with pytest.raises(ConfigError):
            conjugated_parametrix(cutoff_prob, J=0)

    def test_error_decays_with_band(self, cutoff_b, a_shipped, params_unit, grid256,
                                    boundary_x):
        prob = IVPProblem(b_model=cutoff_b, a_model=a_shipped,
                          params=params_unit, grid=grid256, dz=1e-3)
        cp = conjugated_parametrix(prob, J=0, quad_dz=1e-2, flow_dz=2e-3)
        errs = []
        for K in (8, 16, 32, 64):
            u = dealias_two_thirds(wave_packet(grid256, K, boundary_x))
            ud = evolve(prob, u, 1.0).fields[-1]
            v = cp.apply(u, 1.0)
            errs.append(np.linalg.norm(v.values - ud.values) / np.linalg.norm(ud.values))
        slope = np.polyfit(np.log2([8, 16, 32, 64]), np.log2(errs), 1)[0]
        assert slope <= -0.5, errs
