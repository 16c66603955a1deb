"""Plain-text scenario files: grammar, parsing, serialization, overrides.

A scenario is an INI-style sectioned key-value file (full-line ``#``
comments allowed):

    [oscillator <i>]        omega (required), n0, v0
    [coefficients <i>]      kind = constant | phenomenological | tabulated,
                            plus kind-specific keys; for phenomenological,
                            osc_freq defaults to the oscillator's omega
    [bath <i> <j>]          optional metadata: statistics, temperature,
                            alpha, gamma
    [coupling]              beta <i> <j> = value  (i < j; omitted pairs are 0)
    [integration]           t_end (required), output_dt, rtol, atol

Oscillator and coefficients sections must be numbered 1..N.  Serialization
is canonical (fixed section/key order, 17-significant-digit floats), so
parse -> serialize -> parse reproduces the validated config exactly.

Sweep overrides address raw scenario fields with dotted keys
(``integration.rtol``, ``oscillator.2.omega``, ``coefficients.1.mean_lambda``,
``coupling.beta`` for every pair, ``coupling.beta.1.2`` for one pair) and are
applied before the config is built, so derived defaults follow.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from pathlib import Path

import numpy as np

from .model import (
    BathSpec,
    BathStatistics,
    CouplingNetwork,
    InvalidConfig,
    OscillatorSpec,
    ProviderConfig,
    SimulationConfig,
    validate_config,
)

__all__ = [
    "Sections",
    "read_sections",
    "build_config",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "apply_override",
    "demo_fig2_scenario",
    "demo_fig4_scenario",
    "DEMO_FIG4_BETAS",
]

Sections = dict[str, dict[str, str]]

_OSC_RE = re.compile(r"^oscillator (\d+)$")
_COEF_RE = re.compile(r"^coefficients (\d+)$")
_BATH_RE = re.compile(r"^bath (\d+) (\d+)$")
_BETA_KEY_RE = re.compile(r"^beta (\d+) (\d+)$")

_OSC_KEYS = ("omega", "n0", "v0")
_PROVIDER_KEYS = {
    "constant": ("lambda", "D"),
    "phenomenological": ("mean_lambda", "amp_lambda", "mean_D", "amp_D",
                         "osc_freq", "phase_lambda", "phase_D", "ramp_time",
                         "allow_negative_friction"),
    "tabulated": ("path",),
}
_BATH_KEYS = ("statistics", "temperature", "alpha", "gamma")
_INTEGRATION_KEYS = ("t_end", "output_dt", "rtol", "atol")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    return str(value)


def _float(section: str, key: str, token: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InvalidConfig(f"[{section}] {key}: not a number: {token!r}") from None
    if not math.isfinite(value):
        raise InvalidConfig(f"[{section}] {key}: not finite")
    return value


def _bool(section: str, key: str, token: str) -> bool:
    lowered = token.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise InvalidConfig(f"[{section}] {key}: not a boolean: {token!r}")


def read_sections(text: str) -> Sections:
    """Parse scenario text into an ordered section -> key -> raw-value map."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"),
        inline_comment_prefixes=None, interpolation=None, strict=True)
    parser.optionxform = str  # keys are case-sensitive and keep their spacing
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfig(f"scenario syntax: {exc}") from exc
    return {name: dict(parser.items(name)) for name in parser.sections()}


def _contiguous_indices(found: dict[int, dict[str, str]], what: str) -> int:
    if not found:
        raise InvalidConfig(f"no {what} sections")
    n = len(found)
    if sorted(found) != list(range(1, n + 1)):
        raise InvalidConfig(f"{what} sections must be numbered 1..N")
    return n


def build_config(sections: Sections) -> SimulationConfig:
    """Assemble and validate a SimulationConfig from raw sections."""
    osc_raw: dict[int, dict[str, str]] = {}
    coef_raw: dict[int, dict[str, str]] = {}
    bath_raw: dict[int, dict[int, dict[str, str]]] = {}
    coupling_raw: dict[str, str] | None = None
    integration_raw: dict[str, str] | None = None

    for name, body in sections.items():
        if m := _OSC_RE.match(name):
            osc_raw[int(m.group(1))] = body
        elif m := _COEF_RE.match(name):
            coef_raw[int(m.group(1))] = body
        elif m := _BATH_RE.match(name):
            bath_raw.setdefault(int(m.group(1)), {})[int(m.group(2))] = body
        elif name == "coupling":
            coupling_raw = body
        elif name == "integration":
            integration_raw = body
        else:
            raise InvalidConfig(f"unknown section '{name}'")

    n = _contiguous_indices(osc_raw, "oscillator")
    if sorted(coef_raw) != sorted(osc_raw):
        raise InvalidConfig("coefficients sections must match oscillator sections")

    oscillators = []
    for i in range(1, n + 1):
        body = osc_raw[i]
        section = f"oscillator {i}"
        for key in body:
            if key not in _OSC_KEYS:
                raise InvalidConfig(f"[{section}] unknown key '{key}'")
        if "omega" not in body:
            raise InvalidConfig(f"[{section}] omega missing")
        oscillators.append(OscillatorSpec(
            omega=_float(section, "omega", body["omega"]),
            n0=_float(section, "n0", body.get("n0", "0")),
            v0=_float(section, "v0", body.get("v0", "0")),
        ))

    providers = []
    for i in range(1, n + 1):
        body = dict(coef_raw[i])
        section = f"coefficients {i}"
        kind = body.pop("kind", None)
        if kind is None:
            raise InvalidConfig(f"[{section}] kind missing")
        if kind not in _PROVIDER_KEYS:
            raise InvalidConfig(f"[{section}] unknown kind '{kind}'")
        allowed = _PROVIDER_KEYS[kind]
        for key in body:
            if key not in allowed:
                raise InvalidConfig(f"[{section}] unknown key '{key}'")
        params: dict[str, object] = {}
        for key, token in body.items():
            if key == "path":
                params[key] = token.strip()
            elif key == "allow_negative_friction":
                params[key] = _bool(section, key, token)
            else:
                params[key] = _float(section, key, token)
        if kind == "phenomenological" and "osc_freq" not in params:
            params["osc_freq"] = oscillators[i - 1].omega
        providers.append(ProviderConfig(kind, params))

    baths: tuple[tuple[BathSpec, ...], ...] = ()
    if bath_raw:
        per_osc: list[tuple[BathSpec, ...]] = []
        for i in range(1, n + 1):
            entries = bath_raw.pop(i, {})
            if entries and sorted(entries) != list(range(1, len(entries) + 1)):
                raise InvalidConfig(f"bath sections for oscillator {i} "
                                    f"must be numbered 1..K")
            row = []
            for j in sorted(entries):
                body = entries[j]
                section = f"bath {i} {j}"
                for key in body:
                    if key not in _BATH_KEYS:
                        raise InvalidConfig(f"[{section}] unknown key '{key}'")
                for key in _BATH_KEYS:
                    if key not in body:
                        raise InvalidConfig(f"[{section}] {key} missing")
                try:
                    statistics = BathStatistics(body["statistics"].strip())
                except ValueError:
                    raise InvalidConfig(
                        f"[{section}] statistics must be fermionic or bosonic"
                    ) from None
                row.append(BathSpec(
                    statistics=statistics,
                    temperature=_float(section, "temperature", body["temperature"]),
                    coupling=_float(section, "alpha", body["alpha"]),
                    cutoff=_float(section, "gamma", body["gamma"]),
                ))
            per_osc.append(tuple(row))
        if bath_raw:
            stray = sorted(bath_raw)[0]
            raise InvalidConfig(f"bath section for unknown oscillator {stray}")
        baths = tuple(per_osc)

    beta = np.zeros((n, n))
    if coupling_raw:
        seen: dict[tuple[int, int], float] = {}
        for key, token in coupling_raw.items():
            m = _BETA_KEY_RE.match(key)
            if not m:
                raise InvalidConfig(f"[coupling] unknown key '{key}'")
            i, j = int(m.group(1)), int(m.group(2))
            if i == j:
                raise InvalidConfig(f"[coupling] beta indices must differ: '{key}'")
            if not (1 <= i <= n and 1 <= j <= n):
                raise InvalidConfig(f"[coupling] oscillator index out of "
                                    f"range: '{key}'")
            value = _float("coupling", key, token)
            pair = (min(i, j), max(i, j))
            if pair in seen and seen[pair] != value:
                raise InvalidConfig(f"[coupling] conflicting entries for "
                                    f"pair {pair[0]} {pair[1]}")
            seen[pair] = value
        for (i, j), value in seen.items():
            beta[i - 1, j - 1] = value
            beta[j - 1, i - 1] = value

    if integration_raw is None:
        raise InvalidConfig("integration section missing")
    for key in integration_raw:
        if key not in _INTEGRATION_KEYS:
            raise InvalidConfig(f"[integration] unknown key '{key}'")
    if "t_end" not in integration_raw:
        raise InvalidConfig("[integration] t_end missing")
    get = integration_raw.get
    config = SimulationConfig(
        oscillators=tuple(oscillators),
        provider_config=tuple(providers),
        coupling=CouplingNetwork(n=n, beta=beta),
        t_end=_float("integration", "t_end", get("t_end")),
        output_dt=_float("integration", "output_dt", get("output_dt", "0.01")),
        rtol=_float("integration", "rtol", get("rtol", "1e-9")),
        atol=_float("integration", "atol", get("atol", "1e-12")),
        baths=baths,
    )
    return validate_config(config)


def parse_scenario(text: str) -> SimulationConfig:
    """Parse scenario text into a validated SimulationConfig."""
    return build_config(read_sections(text))


def load_scenario(path: str | Path) -> SimulationConfig:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


_SERIALIZE_PARAM_ORDER = {
    "constant": ("lambda", "D"),
    "phenomenological": _PROVIDER_KEYS["phenomenological"],
    "tabulated": ("path",),
}


def serialize_scenario(config: SimulationConfig) -> str:
    """Canonical scenario text for a validated config."""
    config = validate_config(config)
    out = io.StringIO()

    def section(name: str, items: list[tuple[str, object]]) -> None:
        out.write(f"[{name}]\n")
        for key, value in items:
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")

    for i, osc in enumerate(config.oscillators, start=1):
        section(f"oscillator {i}",
                [("omega", osc.omega), ("n0", osc.n0), ("v0", osc.v0)])
        pc = config.provider_config[i - 1]
        if pc.kind == "custom":
            raise InvalidConfig("custom providers have no scenario representation")
        params = pc.as_dict()
        items: list[tuple[str, object]] = [("kind", pc.kind)]
        for key in _SERIALIZE_PARAM_ORDER[pc.kind]:
            if key in params:
                items.append((key, params.pop(key)))
        for key in sorted(params):
            items.append((key, params[key]))
        section(f"coefficients {i}", items)
        if config.baths:
            for j, bath in enumerate(config.baths[i - 1], start=1):
                section(f"bath {i} {j}", [
                    ("statistics", bath.statistics.value),
                    ("temperature", bath.temperature),
                    ("alpha", bath.coupling),
                    ("gamma", bath.cutoff),
                ])

    n = config.n_oscillators
    if n > 1:
        items = []
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                items.append((f"beta {i} {j}", float(config.coupling.beta[i - 1, j - 1])))
        section("coupling", items)

    section("integration", [
        ("t_end", config.t_end),
        ("output_dt", config.output_dt),
        ("rtol", config.rtol),
        ("atol", config.atol),
    ])
    return out.getvalue()


def apply_override(sections: Sections, dotted: str, token: str) -> Sections:
    """Return a copy of the raw sections with one dotted-key override applied.

    The override touches the raw scenario representation, so anything derived
    during config building (for example a phenomenological osc_freq that
    tracks omega) follows the new value.
    """
    work = {name: dict(body) for name, body in sections.items()}
    parts = dotted.split(".")

    if parts[0] == "integration" and len(parts) == 2:
        work.setdefault("integration", {})[parts[1]] = token
        return work

    if parts[0] == "coupling":
        n = sum(1 for name in work if _OSC_RE.match(name))
        if parts[1:] == ["beta"]:
            body = {}
            for i in range(1, n + 1):
                for j in range(i + 1, n + 1):
                    body[f"beta {i} {j}"] = token
            work["coupling"] = body
            return work
        if len(parts) == 4 and parts[1] == "beta":
            try:
                i, j = int(parts[2]), int(parts[3])
            except ValueError:
                raise InvalidConfig(f"cannot resolve override key '{dotted}'") from None
            lo, hi = min(i, j), max(i, j)
            body = work.setdefault("coupling", {})
            body.pop(f"beta {hi} {lo}", None)
            body[f"beta {lo} {hi}"] = token
            return work
        raise InvalidConfig(f"cannot resolve override key '{dotted}'")

    if parts[0] in ("oscillator", "coefficients") and len(parts) == 3:
        name = f"{parts[0]} {parts[1]}"
        if name not in work:
            raise InvalidConfig(f"override key '{dotted}': no section [{name}]")
        work[name][parts[2]] = token
        return work

    raise InvalidConfig(f"cannot resolve override key '{dotted}'")


#: Coupling strengths bundled with the fig4 demo.
DEMO_FIG4_BETAS = ("0.05", "0.2", "0.5")

_PI = format(math.pi, ".17g")


def demo_fig2_scenario() -> str:
    """Single-oscillator demo: non-stationary late-time oscillation.

    omega, n0, v0 and the bath entries follow the reference parameter set
    this demo is named for; the coefficient magnitudes are illustrative
    defaults (no bath-model derivation ships here).  osc_freq is omitted so
    the coefficient oscillation tracks omega.
    """
    return f"""\
# oscibath demo scenario: fig2
#
# One oscillator, initially unoccupied, with phenomenological friction and
# diffusion coefficients: zero at t = 0, a transient on the ramp_time scale,
# then periodic oscillation at the oscillator frequency (osc_freq is omitted,
# so it tracks omega).  The occupation number inherits that period at late
# times instead of settling to a constant.
#
# omega, n0, v0 and the two bath entries follow the reference parameter set
# this demo is named for (the fermionic/bosonic assignment is illustrative).
# mean/amp/phase/ramp values of the coefficients are illustrative demo
# defaults, not derived quantities.

[oscillator 1]
omega = 1
n0 = 0
v0 = 0

[coefficients 1]
kind = phenomenological
mean_lambda = 0.1
amp_lambda = 0.05
mean_D = 0.05
amp_D = 0.04
phase_lambda = 0
phase_D = {_PI}
ramp_time = 0.5

[bath 1 1]
statistics = fermionic
temperature = 1
alpha = 0.1
gamma = 10

[bath 1 2]
statistics = bosonic
temperature = 0.1
alpha = 0.05
gamma = 15

[integration]
t_end = 50
output_dt = 0.01
rtol = 1e-9
atol = 1e-12
"""


def demo_fig4_scenario(beta: str) -> str:
    """Two detuned coupled oscillators; envelope modulation grows with beta."""
    float(beta)  # fail fast on a malformed bundled value
    return f"""\
# oscibath demo scenario: fig4 (beta = {beta})
#
# Two coupled oscillators, both initially unoccupied, with individual
# phenomenological coefficient providers oscillating at the owning
# oscillator's frequency and out of phase between the two oscillators.
# The second oscillator is detuned (frequency ratio 1.5) so the coupling
# shows up as beating of the oscillation envelopes; the modulation depth
# grows with beta.
#
# n0, v0 and the bath temperature/alpha/gamma entries follow the reference
# parameter set this demo is named for.  The frequencies (ratio 1.5, scale
# chosen to keep the coupling-network mode frequencies below both carriers
# for every bundled beta), coefficient magnitudes and phases are
# illustrative demo defaults.

[oscillator 1]
omega = 2
n0 = 0
v0 = 0

[coefficients 1]
kind = phenomenological
mean_lambda = 0.2
amp_lambda = 0.05
mean_D = 0.05
amp_D = 0.05
phase_lambda = 0
phase_D = {_PI}
ramp_time = 0.5

[bath 1 1]
statistics = fermionic
temperature = 0.5
alpha = 0.03
gamma = 12

[bath 1 2]
statistics = bosonic
temperature = 0.5
alpha = 0.03
gamma = 12

[oscillator 2]
omega = 3
n0 = 0
v0 = 0

[coefficients 2]
kind = phenomenological
mean_lambda = 0.2
amp_lambda = 0.05
mean_D = 0.05
amp_D = 0.05
phase_lambda = {_PI}
phase_D = 0
ramp_time = 0.5

[bath 2 1]
statistics = fermionic
temperature = 0.5
alpha = 0.03
gamma = 12

[bath 2 2]
statistics = bosonic
temperature = 0.5
alpha = 0.03
gamma = 12

[coupling]
beta 1 2 = {beta}

[integration]
t_end = 80
output_dt = 0.01
rtol = 1e-9
atol = 1e-12
"""
