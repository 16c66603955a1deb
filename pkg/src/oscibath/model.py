"""Domain types and configuration validation.

Everything downstream (coefficient providers, integrator, analysis, CLI)
exchanges the immutable types defined here.  Conventions: all quantities are
dimensionless, times in units of the inverse reference frequency, oscillator
frequencies in units of the reference frequency, pairwise couplings in units
of the reference frequency squared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

import numpy as np

__all__ = [
    "InvalidConfig",
    "BathStatistics",
    "OscillatorSpec",
    "BathSpec",
    "CoefficientSample",
    "CouplingNetwork",
    "ProviderConfig",
    "SimulationConfig",
    "TimeSeries",
    "validate_config",
]

#: Relative asymmetry of the coupling matrix that is silently symmetrized
#: by averaging; anything larger is rejected.
SYMMETRY_SLACK = 1e-12

#: Allowed drift of the output grid spacing, relative to the nominal step.
GRID_SLACK = 1e-9


class InvalidConfig(ValueError):
    """A configuration field violates an invariant; the message names it."""


class BathStatistics(str, Enum):
    FERMIONIC = "fermionic"
    BOSONIC = "bosonic"


@dataclass(frozen=True)
class OscillatorSpec:
    """One oscillator: renormalized frequency and initial occupation state.

    ``omega`` is the renormalized angular frequency (> 0), ``n0`` the initial
    occupation number (>= 0), and ``v0`` the initial rate dn/dt.
    """

    omega: float
    n0: float = 0.0
    v0: float = 0.0


@dataclass(frozen=True)
class BathSpec:
    """Metadata describing one heat bath.

    The artifact never derives friction/diffusion curves from these numbers;
    they travel with configs so tabulated or external coefficient providers
    can be keyed to the bath they were computed for.

    ``temperature`` is kT over (hbar times the reference frequency),
    ``coupling`` the dimensionless system-bath strength, ``cutoff`` the
    inverse memory time in units of the reference frequency.
    """

    statistics: BathStatistics
    temperature: float
    coupling: float
    cutoff: float


@dataclass(frozen=True)
class CoefficientSample:
    """Friction and diffusion coefficients and their time derivatives at one instant.

    All four fields must be finite; providers guarantee this by construction
    and the integrator aborts on any non-finite right-hand side.
    """

    friction: float
    diffusion: float
    dfriction_dt: float
    ddiffusion_dt: float


@dataclass(frozen=True, eq=False)
class CouplingNetwork:
    """Symmetric pairwise coupling strengths between the oscillators.

    ``beta[i][j]`` couples oscillators i and j (units: reference frequency
    squared); the diagonal is zero.  Stored dense: the intended sizes are
    small (N up to ~100).
    """

    n: int
    beta: np.ndarray

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float, copy=True)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CouplingNetwork):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.beta, other.beta)

    @classmethod
    def none(cls, n: int) -> "CouplingNetwork":
        """No coupling between any pair."""
        return cls(n=n, beta=np.zeros((n, n)))

    @classmethod
    def uniform(cls, n: int, beta: float) -> "CouplingNetwork":
        """The same coupling strength for every pair."""
        mat = np.full((n, n), float(beta))
        np.fill_diagonal(mat, 0.0)
        return cls(n=n, beta=mat)

    def with_pair(self, i: int, j: int, beta: float) -> "CouplingNetwork":
        """Copy with the (i, j) and (j, i) entries set to ``beta`` (0-based)."""
        mat = np.array(self.beta, copy=True)
        mat[i, j] = beta
        mat[j, i] = beta
        return CouplingNetwork(n=self.n, beta=mat)


@dataclass(frozen=True)
class ProviderConfig:
    """Declarative description of one oscillator's coefficient provider.

    ``kind`` is one of ``constant``, ``phenomenological``, ``tabulated`` (or
    ``custom`` for providers supplied programmatically).  ``params`` holds the
    kind-specific keys; it is stored as a sorted tuple of pairs so configs
    stay hashable and serialize deterministically.
    """

    kind: str
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        params = self.params
        if isinstance(params, Mapping):
            params = tuple(sorted(params.items()))
        else:
            params = tuple(sorted(tuple(p) for p in params))
        object.__setattr__(self, "params", params)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.params)


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one run: oscillators, providers, coupling, integration."""

    oscillators: tuple[OscillatorSpec, ...]
    provider_config: tuple[ProviderConfig, ...]
    coupling: CouplingNetwork
    t_end: float
    output_dt: float = 0.01
    rtol: float = 1e-9
    atol: float = 1e-12
    baths: tuple[tuple[BathSpec, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "oscillators", tuple(self.oscillators))
        object.__setattr__(self, "provider_config", tuple(self.provider_config))
        object.__setattr__(self, "baths", tuple(tuple(b) for b in self.baths))

    @property
    def n_oscillators(self) -> int:
        return len(self.oscillators)


@dataclass(eq=False)
class TimeSeries:
    """Uniform-grid record of a run: occupations, rates, coefficient channels.

    Channel arrays are shaped (n_oscillators, n_samples).  ``diagnostics``
    carries integrator bookkeeping (step counts, consistency residuals,
    negative-excursion report).
    """

    t: np.ndarray
    n: np.ndarray
    v: np.ndarray
    friction: np.ndarray
    diffusion: np.ndarray
    config: SimulationConfig
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.t.setflags(write=False)
        for name in ("n", "v", "friction", "diffusion"):
            arr = np.atleast_2d(np.array(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            setattr(self, name, arr)
            if arr.shape[1] != self.t.size:
                raise ValueError(f"channel {name} length does not match grid")
        if self.t.size >= 2:
            steps = np.diff(self.t)
            dt = self.config.output_dt
            if steps.min() <= 0:
                raise ValueError("grid not strictly increasing")
            if np.abs(steps - dt).max() > GRID_SLACK * max(dt, abs(self.t[-1])):
                raise ValueError("grid spacing not uniform")

    @property
    def n_oscillators(self) -> int:
        return self.n.shape[0]

    @property
    def output_dt(self) -> float:
        return self.config.output_dt


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidConfig(message)


def _finite(x: float) -> bool:
    return math.isfinite(x)


KNOWN_PROVIDER_KINDS = ("constant", "phenomenological", "tabulated", "custom")


def validate_config(config: SimulationConfig) -> SimulationConfig:
    """Check every invariant and return the (possibly normalized) config.

    The only normalization is symmetrizing the coupling matrix by averaging
    when its relative asymmetry is at most 1e-12; larger asymmetry is an
    error.  Validation is idempotent: a validated config passes unchanged.

    Raises
    ------
    InvalidConfig
        Naming the first violated invariant.
    """
    n = len(config.oscillators)
    _require(n >= 1, "no oscillators")

    for i, osc in enumerate(config.oscillators, start=1):
        where = f"oscillator {i}: "
        _require(_finite(osc.omega) and osc.omega > 0, where + "omega not positive")
        _require(_finite(osc.n0) and osc.n0 >= 0, where + "n0 negative")
        _require(_finite(osc.v0), where + "v0 not finite")

    _require(len(config.provider_config) == n, "provider_config count mismatch")
    for i, pc in enumerate(config.provider_config, start=1):
        _require(
            pc.kind in KNOWN_PROVIDER_KINDS,
            f"coefficients {i}: unknown kind '{pc.kind}'",
        )

    if config.baths:
        _require(len(config.baths) == n, "baths count mismatch")
        for i, baths in enumerate(config.baths, start=1):
            for j, bath in enumerate(baths, start=1):
                where = f"bath {i} {j}: "
                _require(isinstance(bath.statistics, BathStatistics),
                         where + "statistics must be fermionic or bosonic")
                _require(_finite(bath.temperature) and bath.temperature >= 0,
                         where + "temperature negative")
                _require(_finite(bath.coupling) and bath.coupling > 0,
                         where + "coupling not positive")
                _require(_finite(bath.cutoff) and bath.cutoff > 0,
                         where + "cutoff not positive")

    coupling = config.coupling
    beta = coupling.beta
    _require(coupling.n == n, "coupling size does not match oscillator count")
    _require(beta.shape == (n, n), "beta not an n-by-n matrix")
    _require(bool(np.isfinite(beta).all()), "beta not finite")
    _require(bool((np.diag(beta) == 0).all()), "beta diagonal not zero")
    _require(bool((beta >= 0).all()), "beta negative")

    asym = np.abs(beta - beta.T).max() if n > 1 else 0.0
    scale = max(float(np.abs(beta).max()), 1.0e-300)
    if asym > 0:
        _require(asym <= SYMMETRY_SLACK * scale, "beta not symmetric")
        coupling = CouplingNetwork(n=n, beta=(beta + beta.T) / 2.0)

    _require(_finite(config.t_end) and config.t_end > 0, "t_end not positive")
    _require(_finite(config.output_dt) and config.output_dt > 0,
             "output_dt not positive")
    _require(config.output_dt <= config.t_end, "output_dt exceeds t_end")
    _require(_finite(config.rtol) and config.rtol > 0, "rtol not positive")
    _require(_finite(config.atol) and config.atol > 0, "atol not positive")

    if coupling is not config.coupling:
        return replace(config, coupling=coupling)
    return config
