"""Adaptive Runge-Kutta integration of the occupation-number master equations.

Three solve paths share one embedded Dormand-Prince 5(4) core with dense
output (output samples come from the step interpolant, never from
re-integration):

* first-order single oscillator:   dn/dt = -2 lam(t) n + 2 D(t)
* second-order single oscillator:  n'' + 2 lam n' + 2 lam' n = 2 D'
* coupled second-order system:     n_i'' + 2 lam_i n_i' + 2 lam_i' n_i
                                     + sum_j beta_ij (n_i - n_j) = 2 D_i'

A fixed-step classical RK4 mode backs convergence studies.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .coefficients import CoefficientProvider, describe_provider
from .model import (
    CouplingNetwork,
    OscillatorSpec,
    SimulationConfig,
    TimeSeries,
    validate_config,
)

__all__ = [
    "IntegratorError",
    "StepSizeUnderflow",
    "integrate_single_first_order",
    "integrate_single_second_order",
    "integrate_coupled",
    "rk4_fixed",
    "convergence_order",
]


class IntegratorError(RuntimeError):
    """Integration could not be completed."""


class StepSizeUnderflow(IntegratorError):
    """Error control drove the step size below the resolvable limit."""


# Dormand-Prince 5(4) tableau.  The fifth-order solution propagates; the
# embedded fourth-order difference (E) drives step-size control; P holds the
# quartic dense-output weights.  First-same-as-last: stage 7 seeds the next
# step.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_MAX_STEPS = 10_000_000

RHS = Callable[[float, np.ndarray], np.ndarray]


def _error_norm(e: np.ndarray, scale: np.ndarray) -> float:
    return float(np.sqrt(np.mean((e / scale) ** 2)))


def _initial_step(f: RHS, t0: float, y0: np.ndarray, f0: np.ndarray,
                  rtol: float, atol: float, span: float) -> float:
    """Hairer-style starting step estimate."""
    scale = atol + rtol * np.abs(y0)
    d0 = _error_norm(y0, scale)
    d1 = _error_norm(f0, scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = _error_norm(f1 - f0, scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _rk45_solve(f: RHS, y0: np.ndarray, grid: np.ndarray,
                rtol: float, atol: float) -> tuple[np.ndarray, dict]:
    """Integrate from grid[0] to grid[-1]; sample the interpolant on the grid."""
    t = float(grid[0])
    t_final = float(grid[-1])
    y = np.array(y0, dtype=float)
    dim = y.size

    out = np.empty((grid.size, dim))
    out[0] = y
    next_idx = 1

    k = np.empty((7, dim))
    f0 = f(t, y)
    nfev = 1
    if not np.all(np.isfinite(f0)):
        raise IntegratorError(f"right-hand side not finite at t={t!r}")
    h = _initial_step(f, t, y, f0, rtol, atol, t_final - t)
    nfev += 1

    accepted = 0
    rejected = 0
    while t < t_final:
        h = min(h, t_final - t)
        tiny = 10.0 * np.finfo(float).eps * max(abs(t), abs(t_final))
        if h < tiny:
            raise StepSizeUnderflow(f"step size underflow at t={t!r}")
        if accepted + rejected > _MAX_STEPS:
            raise IntegratorError("step budget exceeded")

        k[0] = f0
        for i in range(1, 6):
            k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
        y_new = y + h * (_B @ k[:6])
        t_new = t + h
        k[6] = f(t_new, y_new)
        nfev += 6

        if np.all(np.isfinite(k)) and np.all(np.isfinite(y_new)):
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _error_norm(h * (_E @ k), scale)
        else:
            err = math.inf

        if err <= 1.0:
            # Fill output samples covered by this step from the quartic
            # interpolant.
            hi = next_idx
            limit = t_new + 4.0 * np.finfo(float).eps * max(abs(t_new), 1.0)
            while hi < grid.size and grid[hi] <= limit:
                hi += 1
            if hi > next_idx:
                theta = np.clip((grid[next_idx:hi] - t) / h, 0.0, 1.0)
                powers = np.vstack([theta, theta**2, theta**3, theta**4])
                out[next_idx:hi] = (y[None, :]
                                    + h * (powers.T @ (_P.T @ k)))
                next_idx = hi
            t = t_new
            y = y_new
            f0 = k[6]
            accepted += 1
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
            h *= factor
        else:
            rejected += 1
            factor = 0.1 if math.isinf(err) else max(
                _MIN_FACTOR, _SAFETY * err ** -0.2)
            h *= factor

    if next_idx != grid.size:
        raise IntegratorError("internal error: output grid not fully covered")
    stats = {"steps_accepted": accepted, "steps_rejected": rejected,
             "rhs_evaluations": nfev}
    return out, stats


def rk4_fixed(f: RHS, t0: float, t1: float, y0: np.ndarray,
              n_steps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta with n_steps equal steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = (t1 - t0) / n_steps
    y = np.array(y0, dtype=float)
    for i in range(n_steps):
        t = t0 + i * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def convergence_order(f: RHS, t_span: tuple[float, float], y0: Sequence[float],
                      exact_final: Sequence[float],
                      step_counts: Sequence[int]) -> np.ndarray:
    """Observed RK4 convergence orders from a step-refinement sequence.

    Runs the fixed-step solver at each step count, measures the sup-norm
    error against the supplied exact final state, and returns the observed
    order between consecutive refinements
    (log(err ratio) / log(step ratio); plain log2 ratios when halving).
    """
    y0 = np.asarray(y0, dtype=float)
    exact = np.asarray(exact_final, dtype=float)
    errors = []
    for n in step_counts:
        y = rk4_fixed(f, t_span[0], t_span[1], y0, int(n))
        errors.append(float(np.abs(y - exact).max()))
    orders = []
    for (n_a, e_a), (n_b, e_b) in zip(zip(step_counts, errors),
                                      zip(step_counts[1:], errors[1:])):
        orders.append(math.log(e_a / e_b) / math.log(n_b / n_a))
    return np.asarray(orders)


def _output_grid(t_end: float, output_dt: float) -> np.ndarray:
    m = int(math.floor(t_end / output_dt + 1e-9))
    if m < 1:
        raise IntegratorError("output_dt exceeds t_end")
    return np.arange(m + 1) * output_dt


def _sample_coefficients(providers, grid) -> tuple[np.ndarray, np.ndarray]:
    lam = np.empty((len(providers), grid.size))
    dif = np.empty((len(providers), grid.size))
    for i, provider in enumerate(providers):
        for j, t in enumerate(grid):
            s = provider(t)
            lam[i, j] = s.friction
            dif[i, j] = s.diffusion
    return lam, dif


def _negative_excursions(n: np.ndarray) -> dict:
    count = int((n < 0).sum())
    most_negative = float(min(0.0, n.min())) if n.size else 0.0
    return {"count": count, "most_negative": most_negative}


def _single_config(osc: OscillatorSpec, provider: CoefficientProvider,
                   t_end: float, output_dt: float, rtol: float,
                   atol: float) -> SimulationConfig:
    return validate_config(SimulationConfig(
        oscillators=(osc,),
        provider_config=(describe_provider(provider),),
        coupling=CouplingNetwork.none(1),
        t_end=t_end, output_dt=output_dt, rtol=rtol, atol=atol,
    ))


def integrate_single_first_order(osc: OscillatorSpec,
                                 provider: CoefficientProvider,
                                 t_end: float, output_dt: float = 0.01,
                                 rtol: float = 1e-9,
                                 atol: float = 1e-12) -> TimeSeries:
    """Solve dn/dt = -2 lam(t) n + 2 D(t) from n(0) = n0.

    When the provider keeps D(t) >= 0 (checked at the output samples) and
    n0 >= 0, the exact flow preserves n >= 0 and the result is checked to
    stay above -10 * atol.
    """
    config = _single_config(osc, provider, t_end, output_dt, rtol, atol)
    grid = _output_grid(t_end, output_dt)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        s = provider(t)
        return np.array([-2.0 * s.friction * y[0] + 2.0 * s.diffusion])

    out, stats = _rk45_solve(f, np.array([osc.n0]), grid, rtol, atol)
    n = out[:, 0][None, :]
    lam, dif = _sample_coefficients([provider], grid)
    v = -2.0 * lam * n + 2.0 * dif

    if osc.n0 >= 0 and (dif >= 0).all():
        assert n.min() >= -10.0 * atol, (
            f"positivity violated: min n = {n.min():g}")

    diagnostics = dict(stats)
    diagnostics["formulation"] = "first_order"
    diagnostics["negative_excursions"] = _negative_excursions(n)
    return TimeSeries(t=grid, n=n, v=v, friction=lam, diffusion=dif,
                      config=config, diagnostics=diagnostics)


def _second_order_rhs(provider: CoefficientProvider) -> RHS:
    def f(t: float, y: np.ndarray) -> np.ndarray:
        s = provider(t)
        return np.array([
            y[1],
            2.0 * s.ddiffusion_dt - 2.0 * s.friction * y[1]
            - 2.0 * s.dfriction_dt * y[0],
        ])
    return f


def _consistency_residual(osc: OscillatorSpec,
                          provider: CoefficientProvider) -> float:
    # The second-order form is the time derivative of the first-order one;
    # its solution matches only when the initial slope satisfies
    # v0 = -2 lam(0) n0 + 2 D(0).  The residual is reported, never enforced.
    s0 = provider(0.0)
    return abs(osc.v0 + 2.0 * s0.friction * osc.n0 - 2.0 * s0.diffusion)


def integrate_single_second_order(osc: OscillatorSpec,
                                  provider: CoefficientProvider,
                                  t_end: float, output_dt: float = 0.01,
                                  rtol: float = 1e-9,
                                  atol: float = 1e-12) -> TimeSeries:
    """Solve n'' + 2 lam n' + 2 lam' n = 2 D' from (n0, v0)."""
    config = _single_config(osc, provider, t_end, output_dt, rtol, atol)
    grid = _output_grid(t_end, output_dt)
    residual = _consistency_residual(osc, provider)

    out, stats = _rk45_solve(_second_order_rhs(provider),
                             np.array([osc.n0, osc.v0]), grid, rtol, atol)
    n = out[:, 0][None, :]
    v = out[:, 1][None, :]
    lam, dif = _sample_coefficients([provider], grid)

    diagnostics = dict(stats)
    diagnostics["formulation"] = "second_order"
    diagnostics["consistency_residuals"] = (residual,)
    diagnostics["negative_excursions"] = _negative_excursions(n)
    return TimeSeries(t=grid, n=n, v=v, friction=lam, diffusion=dif,
                      config=config, diagnostics=diagnostics)


def integrate_coupled(config: SimulationConfig,
                      providers: Sequence[CoefficientProvider]) -> TimeSeries:
    """Solve the coupled second-order system for all oscillators at once.

    The pairwise coupling enters as sum_j beta_ij (n_i - n_j); with two
    oscillators this is exactly the two-equation system, and beta = 0
    decouples every channel.
    """
    config = validate_config(config)
    n_osc = config.n_oscillators
    if len(providers) != n_osc:
        raise ValueError("one provider per oscillator required")
    grid = _output_grid(config.t_end, config.output_dt)

    beta = config.coupling.beta
    rowsum = beta.sum(axis=1)
    providers = list(providers)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        n = y[:n_osc]
        v = y[n_osc:]
        out = np.empty(2 * n_osc)
        out[:n_osc] = v
        coupling = rowsum * n - beta @ n
        for i, provider in enumerate(providers):
            s = provider(t)
            out[n_osc + i] = (2.0 * s.ddiffusion_dt - 2.0 * s.friction * v[i]
                              - 2.0 * s.dfriction_dt * n[i] - coupling[i])
        return out

    y0 = np.concatenate([[o.n0 for o in config.oscillators],
                         [o.v0 for o in config.oscillators]])
    out, stats = _rk45_solve(f, y0, grid, config.rtol, config.atol)
    n = out[:, :n_osc].T
    v = out[:, n_osc:].T
    lam, dif = _sample_coefficients(providers, grid)

    diagnostics = dict(stats)
    diagnostics["formulation"] = "coupled_second_order"
    diagnostics["consistency_residuals"] = tuple(
        _consistency_residual(o, p)
        for o, p in zip(config.oscillators, providers))
    diagnostics["negative_excursions"] = _negative_excursions(n)
    return TimeSeries(t=grid, n=n, v=v, friction=lam, diffusion=dif,
                      config=config, diagnostics=diagnostics)
