import math

import numpy as np
import pytest

from oscibath.coefficients import (
    ConstantProvider,
    OutOfRange,
    PhenomenologicalParams,
    PhenomenologicalProvider,
    TabulatedCoefficients,
    TabulatedProvider,
)
from oscibath.integrator import (
    IntegratorError,
    StepSizeUnderflow,
    convergence_order,
    integrate_coupled,
    integrate_single_first_order,
    integrate_single_second_order,
    rk4_fixed,
)
from oscibath.model import (
    CoefficientSample,
    CouplingNetwork,
    OscillatorSpec,
    ProviderConfig,
    SimulationConfig,
)

STANDARD = PhenomenologicalParams(
    mean_lambda=0.1, amp_lambda=0.05, mean_D=0.05, amp_D=0.04,
    osc_freq=1.0, phase_lambda=0.0, phase_D=math.pi, ramp_time=0.5)


def relaxation_exact(t, lam, diff, n0):
    """Closed form of dn/dt = -2 lam n + 2 diff with constant coefficients."""
    return diff / lam + (n0 - diff / lam) * np.exp(-2.0 * lam * t)


def coupled_config(osc1, osc2, beta, t_end, output_dt=0.01,
                   rtol=1e-9, atol=1e-12):
    return SimulationConfig(
        oscillators=(osc1, osc2),
        provider_config=(ProviderConfig("custom"),) * 2,
        coupling=CouplingNetwork.uniform(2, beta),
        t_end=t_end, output_dt=output_dt, rtol=rtol, atol=atol)


class TestFirstOrder:
    def test_zero_coefficients_keep_initial_value(self):
        ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.7),
                                          ConstantProvider(0.0, 0.0), t_end=10.0)
        assert np.abs(ts.n[0] - 0.7).max() == 0.0

    def test_constant_coefficients_match_closed_form(self):
        ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                          ConstantProvider(0.5, 0.25), t_end=20.0)
        exact = relaxation_exact(ts.t, 0.5, 0.25, 0.0)
        assert np.abs(ts.n[0] - exact).max() <= 1e-8
        i1 = int(round(1.0 / ts.output_dt))
        assert ts.n[0][i1] == pytest.approx(0.5 * (1.0 - math.exp(-1.0)),
                                            abs=1e-8)
        assert ts.n[0][-1] == pytest.approx(0.5, abs=1e-6)

    def test_grid_shape_and_rate_channel(self):
        ts = integrate_single_first_order(OscillatorSpec(1.0),
                                          ConstantProvider(0.5, 0.25),
                                          t_end=50.0, output_dt=0.01)
        assert ts.t.size == 5001
        assert ts.t[-1] == pytest.approx(50.0, abs=1e-9)
        # the rate channel is the right-hand side evaluated on the grid
        expected_v = -2.0 * ts.friction * ts.n + 2.0 * ts.diffusion
        assert np.abs(ts.v - expected_v).max() == 0.0

    def test_positivity_preserved(self):
        for provider in (ConstantProvider(0.5, 0.25),
                         PhenomenologicalProvider(STANDARD)):
            ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                              provider, t_end=30.0)
            assert ts.n.min() >= -10.0 * 1e-12
            assert ts.diagnostics["negative_excursions"]["count"] == 0

    def test_linearity_affine_superposition(self):
        provider = PhenomenologicalProvider(STANDARD)
        runs = {}
        for n0 in (0.2, 0.8, 0.5):
            ts = integrate_single_first_order(OscillatorSpec(1.0, n0=n0),
                                              provider, t_end=30.0,
                                              rtol=1e-11, atol=1e-14)
            runs[n0] = ts.n[0]
        average = (runs[0.2] + runs[0.8]) / 2.0
        assert np.abs(runs[0.5] - average).max() <= 1e-8

    def test_tolerance_monotonicity(self):
        errors = []
        for rtol in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9):
            ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                              ConstantProvider(0.5, 0.25),
                                              t_end=20.0, rtol=rtol,
                                              atol=rtol * 1e-3)
            exact = relaxation_exact(ts.t, 0.5, 0.25, 0.0)
            errors.append(np.abs(ts.n[0] - exact).max())
        assert all(a >= b for a, b in zip(errors, errors[1:]))


class TestSecondOrder:
    def test_consistent_slope_matches_closed_form(self):
        # consistent slope with constant coefficients: v0 = 2 D(0) - 2 lam(0) n0
        ts = integrate_single_second_order(OscillatorSpec(1.0, n0=0.0, v0=0.5),
                                           ConstantProvider(0.5, 0.25),
                                           t_end=20.0)
        exact = relaxation_exact(ts.t, 0.5, 0.25, 0.0)
        assert np.abs(ts.n[0] - exact).max() <= 1e-8
        assert ts.diagnostics["consistency_residuals"][0] == 0.0

    def test_matches_first_order_with_vanishing_initial_coefficients(self):
        provider = PhenomenologicalProvider(STANDARD)
        first = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                             provider, t_end=50.0,
                                             rtol=1e-12, atol=1e-14)
        second = integrate_single_second_order(OscillatorSpec(1.0, n0=0.0, v0=0.0),
                                               provider, t_end=50.0,
                                               rtol=1e-12, atol=1e-14)
        assert np.abs(first.n[0] - second.n[0]).max() <= 1e-8

    def test_inconsistent_slope_reported_and_solved(self):
        # With constant coefficients the general solution is
        # n = (n0 + v0/(2 lam)) - v0/(2 lam) exp(-2 lam t); v0 = 1 is a valid
        # trajectory of the second-order form but not of the first-order one.
        ts = integrate_single_second_order(OscillatorSpec(1.0, n0=0.0, v0=1.0),
                                           ConstantProvider(0.5, 0.25),
                                           t_end=10.0)
        assert ts.diagnostics["consistency_residuals"][0] == pytest.approx(0.5)
        exact = 1.0 - np.exp(-ts.t)
        assert np.abs(ts.n[0] - exact).max() <= 1e-8
        first_order = relaxation_exact(ts.t, 0.5, 0.25, 0.0)
        assert np.abs(ts.n[0] - first_order).max() > 0.1

    def test_agrees_with_scipy_reference(self):
        # independent implementation check on a problem with no closed form
        from scipy.integrate import solve_ivp

        provider = PhenomenologicalProvider(STANDARD)
        ts = integrate_single_second_order(OscillatorSpec(1.0, n0=0.3, v0=0.0),
                                           provider, t_end=30.0,
                                           rtol=1e-10, atol=1e-13)

        def rhs(t, y):
            s = provider(t)
            return [y[1], 2.0 * s.ddiffusion_dt - 2.0 * s.friction * y[1]
                    - 2.0 * s.dfriction_dt * y[0]]

        ref = solve_ivp(rhs, (0.0, 30.0), [0.3, 0.0], method="DOP853",
                        rtol=1e-11, atol=1e-13, t_eval=ts.t)
        assert np.abs(ts.n[0] - ref.y[0]).max() <= 1e-7


class TestCoupled:
    def test_zero_coupling_decouples(self):
        p1 = PhenomenologicalProvider(STANDARD)
        p2 = PhenomenologicalProvider(PhenomenologicalParams(
            0.2, 0.05, 0.05, 0.05, osc_freq=1.5, phase_lambda=math.pi,
            phase_D=0.0, ramp_time=0.5))
        osc1 = OscillatorSpec(1.0, n0=0.0, v0=0.0)
        osc2 = OscillatorSpec(1.5, n0=0.0, v0=0.0)
        config = coupled_config(osc1, osc2, 0.0, t_end=30.0,
                                rtol=1e-12, atol=1e-14)
        both = integrate_coupled(config, [p1, p2])
        for i, (osc, provider) in enumerate(((osc1, p1), (osc2, p2))):
            alone = integrate_single_second_order(osc, provider, t_end=30.0,
                                                  rtol=1e-12, atol=1e-14)
            assert np.abs(both.n[i] - alone.n[0]).max() <= 1e-9

    def test_symmetric_manifold_stays_symmetric(self):
        provider = PhenomenologicalProvider(STANDARD)
        osc = OscillatorSpec(1.0, n0=0.2, v0=0.0)
        config = coupled_config(osc, osc, 0.7, t_end=30.0)
        ts = integrate_coupled(config, [provider, provider])
        assert np.abs(ts.n[0] - ts.n[1]).max() <= 1e-9

    def test_normal_mode_oracle(self):
        # lam = D = 0, beta = 1, n = (1, 0), v = (0, 0):
        # sum obeys s'' = 0, difference obeys d'' = -2 beta d, so
        # n1 = (1 + cos(sqrt(2) t))/2 and n2 = (1 - cos(sqrt(2) t))/2.
        half_period = math.pi / math.sqrt(2.0)
        config = SimulationConfig(
            oscillators=(OscillatorSpec(1.0, n0=1.0), OscillatorSpec(1.0, n0=0.0)),
            provider_config=(ProviderConfig("constant", {"lambda": 0.0, "D": 0.0}),) * 2,
            coupling=CouplingNetwork.uniform(2, 1.0),
            t_end=2.0 * half_period, output_dt=half_period / 100.0)
        providers = [ConstantProvider(0.0, 0.0)] * 2
        ts = integrate_coupled(config, providers)
        exact1 = 0.5 * (1.0 + np.cos(math.sqrt(2.0) * ts.t))
        exact2 = 0.5 * (1.0 - np.cos(math.sqrt(2.0) * ts.t))
        assert np.abs(ts.n[0] - exact1).max() <= 1e-7
        assert np.abs(ts.n[1] - exact2).max() <= 1e-7
        assert abs(ts.n[0][100]) <= 1e-7  # n1(pi/sqrt(2)) = 0
        assert abs(ts.n[1][100] - 1.0) <= 1e-7

    def test_zero_dissipation_sum_is_linear(self):
        config = SimulationConfig(
            oscillators=(OscillatorSpec(1.0, n0=1.0, v0=0.3),
                         OscillatorSpec(1.0, n0=0.0, v0=-0.1)),
            provider_config=(ProviderConfig("constant", {"lambda": 0.0, "D": 0.0}),) * 2,
            coupling=CouplingNetwork.uniform(2, 1.0),
            t_end=10.0)
        ts = integrate_coupled(config, [ConstantProvider(0.0, 0.0)] * 2)
        total = ts.n.sum(axis=0)
        quad = np.polyfit(ts.t, total, 2)
        assert abs(quad[0]) <= 1e-9

    def test_negative_excursions_reported_not_clamped(self):
        # strong inconsistent slope drives n negative; the trace keeps the
        # excursion and the diagnostics report it
        config = coupled_config(OscillatorSpec(1.0, n0=0.0, v0=-1.0),
                                OscillatorSpec(1.0, n0=0.0, v0=0.0),
                                0.1, t_end=10.0)
        providers = [ConstantProvider(0.2, 0.0), ConstantProvider(0.2, 0.0)]
        ts = integrate_coupled(config, providers)
        neg = ts.diagnostics["negative_excursions"]
        assert neg["count"] > 0
        assert neg["most_negative"] == pytest.approx(ts.n.min())
        assert ts.n.min() < 0


class TestErrorHandling:
    def test_step_size_underflow_on_nan(self):
        class GoesBad:
            def __call__(self, t):
                bad = math.nan if t > 1.0 else 0.1
                return CoefficientSample(bad, 0.0, 0.0, 0.0)

        with pytest.raises(StepSizeUnderflow):
            integrate_single_first_order(OscillatorSpec(1.0, n0=0.5),
                                         GoesBad(), t_end=5.0)

    def test_nonfinite_at_start_rejected(self):
        class BadAtZero:
            def __call__(self, t):
                return CoefficientSample(math.nan, 0.0, 0.0, 0.0)

        with pytest.raises(IntegratorError, match="not finite"):
            integrate_single_first_order(OscillatorSpec(1.0, n0=0.5),
                                         BadAtZero(), t_end=5.0)

    def test_provider_errors_propagate(self):
        grid = np.linspace(0.0, 5.0, 11)
        table = TabulatedCoefficients(grid=grid, lambda_values=0.1 * grid,
                                      D_values=0.05 * grid)
        with pytest.raises(OutOfRange):
            integrate_single_first_order(OscillatorSpec(1.0),
                                         TabulatedProvider(table), t_end=10.0)


class TestConvergence:
    def test_rk4_order_on_relaxation_problem(self):
        lam, diff = 0.5, 0.25

        def f(t, y):
            return np.array([-2.0 * lam * y[0] + 2.0 * diff])

        exact = [relaxation_exact(2.0, lam, diff, 0.0)]
        orders = convergence_order(f, (0.0, 2.0), [0.0], exact, (20, 40, 80))
        assert np.all(np.abs(orders - 4.0) <= 0.2)

    def test_rk4_order_on_normal_mode_problem(self):
        def f(t, y):
            return np.array([y[2], y[3], -(y[0] - y[1]), -(y[1] - y[0])])

        t_end = math.pi / math.sqrt(2.0)
        exact = [0.0, 1.0, 0.0, 0.0]
        orders = convergence_order(f, (0.0, t_end), [1.0, 0.0, 0.0, 0.0],
                                   exact, (40, 80, 160))
        assert np.all(np.abs(orders - 4.0) <= 0.2)

    def test_halving_reduces_error_by_at_least_14x(self):
        def f(t, y):
            return np.array([-y[0] + 0.5])

        exact = np.array([relaxation_exact(2.0, 0.5, 0.25, 0.0)])
        errors = []
        for n in (20, 40, 80):
            y = rk4_fixed(f, 0.0, 2.0, np.array([0.0]), n)
            errors.append(np.abs(y - exact).max())
        assert all(a / b >= 14.0 for a, b in zip(errors, errors[1:]))
