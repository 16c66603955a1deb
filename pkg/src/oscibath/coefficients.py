"""Friction/diffusion coefficient providers.

A provider is any callable ``t -> CoefficientSample`` that is deterministic
and defined on the whole integration interval.  Three implementations ship
here: an analytic phenomenological model (ramp times mean-plus-cosine), a
natural-cubic-spline interpolator over tabulated samples, and a constant
provider used as a test oracle.  Externally computed coefficient tables come
in through a three-column CSV (``t,lambda,D``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
from scipy.interpolate import CubicSpline

from .model import CoefficientSample, InvalidConfig, ProviderConfig

__all__ = [
    "OutOfRange",
    "CoefficientProvider",
    "PhenomenologicalParams",
    "PhenomenologicalProvider",
    "ConstantProvider",
    "TabulatedCoefficients",
    "TabulatedProvider",
    "eval_phenomenological",
    "eval_tabulated",
    "eval_constant",
    "check_derivatives",
    "read_coefficient_csv",
    "make_provider",
    "describe_provider",
]

TWO_PI = 2.0 * math.pi


class OutOfRange(ValueError):
    """A tabulated provider was queried outside its grid; no extrapolation."""


class CoefficientProvider(Protocol):
    """Evaluator contract: deterministic map from time to a CoefficientSample."""

    def __call__(self, t: float) -> CoefficientSample: ...


@dataclass(frozen=True)
class PhenomenologicalParams:
    """Parameters of the analytic coefficient model.

    The model is ``ramp(t) * (mean + amp * cos(osc_freq * t + phase))`` for
    both coefficients, with ``ramp(t) = 1 - exp(-(t/ramp_time)^2)``: zero at
    t = 0, a transient on the scale of ``ramp_time``, then a single-frequency
    periodic regime.  Negative friction intervals (amp_lambda >= mean_lambda)
    are opt-in via ``allow_negative_friction``.
    """

    mean_lambda: float
    amp_lambda: float
    mean_D: float
    amp_D: float
    osc_freq: float = 1.0
    phase_lambda: float = 0.0
    phase_D: float = 0.0
    ramp_time: float = 0.5
    allow_negative_friction: bool = False

    def __post_init__(self) -> None:
        for name in ("mean_lambda", "amp_lambda", "mean_D", "amp_D"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidConfig(f"{name} negative")
        if not (math.isfinite(self.osc_freq) and self.osc_freq > 0):
            raise InvalidConfig("osc_freq not positive")
        if not (math.isfinite(self.ramp_time) and self.ramp_time > 0):
            raise InvalidConfig("ramp_time not positive")
        for name in ("phase_lambda", "phase_D"):
            value = getattr(self, name)
            if not (0.0 <= value < TWO_PI):
                raise InvalidConfig(f"{name} outside [0, 2*pi)")
        if self.amp_lambda >= self.mean_lambda and self.amp_lambda > 0:
            if not self.allow_negative_friction:
                raise InvalidConfig(
                    "amp_lambda reaches mean_lambda; negative friction intervals "
                    "require allow_negative_friction"
                )


def eval_phenomenological(params: PhenomenologicalParams, t: float) -> CoefficientSample:
    """Evaluate the analytic model and its exact time derivatives.

    By construction both coefficients and both derivatives vanish at t = 0.
    """
    u = t / params.ramp_time
    gauss = math.exp(-u * u)
    ramp = 1.0 - gauss
    dramp = 2.0 * t / (params.ramp_time * params.ramp_time) * gauss

    arg_l = params.osc_freq * t + params.phase_lambda
    arg_d = params.osc_freq * t + params.phase_D
    osc_l = params.mean_lambda + params.amp_lambda * math.cos(arg_l)
    osc_d = params.mean_D + params.amp_D * math.cos(arg_d)
    dosc_l = -params.amp_lambda * params.osc_freq * math.sin(arg_l)
    dosc_d = -params.amp_D * params.osc_freq * math.sin(arg_d)

    return CoefficientSample(
        friction=ramp * osc_l,
        diffusion=ramp * osc_d,
        dfriction_dt=dramp * osc_l + ramp * dosc_l,
        ddiffusion_dt=dramp * osc_d + ramp * dosc_d,
    )


def eval_constant(lambda0: float, D0: float, t: float) -> CoefficientSample:
    """Time-independent coefficients; derivatives are exactly zero."""
    return CoefficientSample(lambda0, D0, 0.0, 0.0)


@dataclass(frozen=True)
class TabulatedCoefficients:
    """Samples of both coefficients on a strictly increasing time grid.

    At least four points are required (cubic interpolation).  Interpolation
    uses natural cubic splines; derivative samples come from the splines'
    analytic derivatives.  Queries outside the grid raise OutOfRange.
    """

    grid: np.ndarray
    lambda_values: np.ndarray
    D_values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        lam = np.asarray(self.lambda_values, dtype=float)
        dif = np.asarray(self.D_values, dtype=float)
        if grid.ndim != 1 or grid.size < 4:
            raise InvalidConfig("coefficient table needs at least 4 points")
        if lam.shape != grid.shape or dif.shape != grid.shape:
            raise InvalidConfig("coefficient table column lengths differ")
        if not (np.isfinite(grid).all() and np.isfinite(lam).all()
                and np.isfinite(dif).all()):
            raise InvalidConfig("coefficient table not finite")
        if np.diff(grid).min() <= 0:
            raise InvalidConfig("coefficient table grid not strictly increasing")
        for name, arr in (("grid", grid), ("lambda_values", lam), ("D_values", dif)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @cached_property
    def _splines(self):
        s_lam = CubicSpline(self.grid, self.lambda_values, bc_type="natural")
        s_dif = CubicSpline(self.grid, self.D_values, bc_type="natural")
        return s_lam, s_lam.derivative(), s_dif, s_dif.derivative()


def eval_tabulated(table: TabulatedCoefficients, t: float) -> CoefficientSample:
    """Spline-interpolate the table at time t (no extrapolation)."""
    lo, hi = float(table.grid[0]), float(table.grid[-1])
    slack = 1e-12 * max(abs(lo), abs(hi), 1.0)
    if t < lo - slack or t > hi + slack:
        raise OutOfRange(
            f"time {float(t):g} outside coefficient table range [{lo:g}, {hi:g}]")
    tc = min(max(t, lo), hi)
    s_lam, ds_lam, s_dif, ds_dif = table._splines
    return CoefficientSample(
        friction=float(s_lam(tc)),
        diffusion=float(s_dif(tc)),
        dfriction_dt=float(ds_lam(tc)),
        ddiffusion_dt=float(ds_dif(tc)),
    )


class PhenomenologicalProvider:
    """Provider wrapper around :func:`eval_phenomenological`."""

    def __init__(self, params: PhenomenologicalParams):
        self.params = params

    def __call__(self, t: float) -> CoefficientSample:
        return eval_phenomenological(self.params, t)

    def describe(self) -> ProviderConfig:
        p = self.params
        return ProviderConfig("phenomenological", {
            "mean_lambda": p.mean_lambda,
            "amp_lambda": p.amp_lambda,
            "mean_D": p.mean_D,
            "amp_D": p.amp_D,
            "osc_freq": p.osc_freq,
            "phase_lambda": p.phase_lambda,
            "phase_D": p.phase_D,
            "ramp_time": p.ramp_time,
            "allow_negative_friction": p.allow_negative_friction,
        })


class ConstantProvider:
    """Provider wrapper around :func:`eval_constant`."""

    def __init__(self, lambda0: float, D0: float):
        if not (math.isfinite(lambda0) and math.isfinite(D0)):
            raise InvalidConfig("constant coefficients not finite")
        self.lambda0 = float(lambda0)
        self.D0 = float(D0)

    def __call__(self, t: float) -> CoefficientSample:
        return eval_constant(self.lambda0, self.D0, t)

    def describe(self) -> ProviderConfig:
        return ProviderConfig("constant", {"lambda": self.lambda0, "D": self.D0})


class TabulatedProvider:
    """Provider wrapper around :func:`eval_tabulated`."""

    def __init__(self, table: TabulatedCoefficients, source: str | None = None):
        self.table = table
        self.source = source

    def __call__(self, t: float) -> CoefficientSample:
        return eval_tabulated(self.table, t)

    def describe(self) -> ProviderConfig:
        params = {} if self.source is None else {"path": self.source}
        return ProviderConfig("tabulated", params)


def describe_provider(provider: CoefficientProvider) -> ProviderConfig:
    """Best-effort declarative description; 'custom' for unknown callables."""
    describe = getattr(provider, "describe", None)
    if describe is not None:
        return describe()
    return ProviderConfig("custom")


def check_derivatives(provider: CoefficientProvider,
                      t_grid: Iterable[float],
                      h: float) -> float:
    """Compare reported derivatives against central finite differences.

    Returns the worst error over the grid, for both coefficient channels,
    relative to the largest finite-difference magnitude seen on the grid
    (so an identically constant provider scores exactly 0).  Every t - h
    must stay inside the provider's domain.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    ts = np.asarray(list(t_grid), dtype=float)
    reported_l = np.empty(ts.size)
    reported_d = np.empty(ts.size)
    fd_l = np.empty(ts.size)
    fd_d = np.empty(ts.size)
    for k, t in enumerate(ts):
        sample = provider(t)
        plus = provider(t + h)
        minus = provider(t - h)
        reported_l[k] = sample.dfriction_dt
        reported_d[k] = sample.ddiffusion_dt
        fd_l[k] = (plus.friction - minus.friction) / (2.0 * h)
        fd_d[k] = (plus.diffusion - minus.diffusion) / (2.0 * h)

    worst = 0.0
    for rep, fd in ((reported_l, fd_l), (reported_d, fd_d)):
        scale = float(np.abs(fd).max())
        if scale == 0.0 and float(np.abs(rep).max()) == 0.0:
            continue
        worst = max(worst, float(np.abs(rep - fd).max()) / max(scale, 1e-300))
    return worst


def read_coefficient_csv(path: str | Path) -> TabulatedCoefficients:
    """Load a ``t,lambda,D`` CSV (header required, strictly increasing t)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"coefficient csv {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    rows = [row for row in rows if row and not row[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["t", "lambda", "D"]:
        raise InvalidConfig(f"coefficient csv {path}: header must be 't,lambda,D'")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise InvalidConfig(f"coefficient csv {path}: line {lineno} not 3 columns")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise InvalidConfig(
                f"coefficient csv {path}: line {lineno} not numeric") from exc
    arr = np.asarray(data, dtype=float)
    if arr.shape[0] < 4:
        raise InvalidConfig(f"coefficient csv {path}: needs at least 4 rows")
    return TabulatedCoefficients(grid=arr[:, 0], lambda_values=arr[:, 1],
                                 D_values=arr[:, 2])


def make_provider(pc: ProviderConfig) -> CoefficientProvider:
    """Build a provider from its declarative description.

    Tabulated providers load their table from ``params['path']``, resolved
    against the working directory.
    """
    params = pc.as_dict()
    if pc.kind == "constant":
        try:
            return ConstantProvider(float(params["lambda"]), float(params["D"]))
        except KeyError as exc:
            raise InvalidConfig(f"constant provider missing key {exc}") from exc
    if pc.kind == "phenomenological":
        try:
            return PhenomenologicalProvider(PhenomenologicalParams(**params))
        except TypeError as exc:
            raise InvalidConfig(f"phenomenological provider: {exc}") from exc
    if pc.kind == "tabulated":
        if "path" not in params:
            raise InvalidConfig("tabulated provider missing key 'path'")
        table = read_coefficient_csv(params["path"])
        return TabulatedProvider(table, source=str(params["path"]))
    raise InvalidConfig(f"unknown coefficient kind '{pc.kind}'")
