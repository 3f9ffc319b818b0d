"""Hardware parameters for the two cavity/transmon subsystems.

Internal units are microseconds for times and MHz (linear frequency) for
frequencies.  JSON files carry the unit in every key name (``cav_T1_us``,
``chi_cc_kHz``, ``sigma_s_ns`` ...) and are converted on load.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

SUBSYSTEMS = ("B", "A")
SUBSYSTEM_NAMES = {"A": "Alice", "B": "Bob"}

# JSON key -> (attribute, multiplier into internal units)
_SUBSYSTEM_KEYS: dict[str, tuple[str, float]] = {
    "chi_cm_MHz": ("chi_cm", 1.0),
    "chi_cc_kHz": ("chi_cc", 1e-3),
    "cav_T1_us": ("cav_T1", 1.0),
    "cav_T2R_us": ("cav_T2R", 1.0),
    "cav_T2E_us": ("cav_T2E", 1.0),
    "cav_nth": ("cav_nth", 1.0),
    "self_kerr_kHz": ("self_kerr", 1e-3),
    "cav_freq_GHz": ("cav_freq", 1e3),
    "tr_T1_us": ("tr_T1", 1.0),
    "tr_T2R_us": ("tr_T2R", 1.0),
    "tr_T2E_us": ("tr_T2E", 1.0),
    "tr_nth": ("tr_nth", 1.0),
    "anharm_MHz": ("anharm", 1.0),
    "tr_freq_GHz": ("tr_freq", 1e3),
    "sigma_s_ns": ("sigma_s", 1e-3),
    "sigma_us_ns": ("sigma_us", 1e-3),
    "t_M_us": ("t_M", 1.0),
    "t_d_us": ("t_d", 1.0),
    "T1_RO_us": ("T1_RO", 1.0),
    "nth_RO": ("nth_RO", 1.0),
    "p_gE": ("p_gE", 1.0),
    "p_eG": ("p_eG", 1.0),
    "eps_ocp": ("eps_ocp", 1.0),
}
_OPTIONAL_SUBSYSTEM_KEYS = {"p_us": "p_us", "p_s": "p_s"}

_DUAL_RAIL_KEYS: dict[str, tuple[str, float]] = {
    "gamma_phi_ramsey_per_us": ("gamma_phi_ramsey", 1.0),
    "gamma_phi_echo_per_us": ("gamma_phi_echo", 1.0),
    "tau_ocp_us": ("tau_ocp", 1.0),
}

_TIMES = ("cav_T1", "cav_T2R", "cav_T2E", "tr_T1", "tr_T2R", "tr_T2E",
          "sigma_s", "sigma_us", "t_M", "T1_RO")
_POPULATIONS = ("cav_nth", "tr_nth", "nth_RO")
_PROBABILITIES = ("p_gE", "p_eG", "eps_ocp")


class ConfigError(ValueError):
    """Invalid or incomplete parameter file; the message names the field path."""


@dataclass(frozen=True)
class SubsystemParams:
    """Device numbers for one cavity, its transmon and readout chain."""

    chi_cm: float
    chi_cc: float
    cav_T1: float
    cav_T2R: float
    cav_T2E: float
    cav_nth: float
    self_kerr: float
    cav_freq: float
    tr_T1: float
    tr_T2R: float
    tr_T2E: float
    tr_nth: float
    anharm: float
    tr_freq: float
    sigma_s: float
    sigma_us: float
    t_M: float
    t_d: float
    T1_RO: float
    nth_RO: float
    p_gE: float
    p_eG: float
    eps_ocp: float
    # fixed unselectivity / selectivity errors; None -> computed from the pulses
    p_us: float | None = None
    p_s: float | None = None

    @property
    def t_map(self) -> float:
        return 4.0 * self.sigma_s

    @property
    def t_reset(self) -> float:
        return 4.0 * self.sigma_us

    def replace(self, **changes: Any) -> "SubsystemParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class HardwareParams:
    A: SubsystemParams
    B: SubsystemParams
    gamma_phi_ramsey: float = 0.0
    gamma_phi_echo: float = 0.0
    tau_ocp: float = 1.0
    name: str = "custom"

    def sub(self, key: str) -> SubsystemParams:
        if key not in SUBSYSTEMS:
            raise KeyError(f"unknown subsystem {key!r}")
        return self.A if key == "A" else self.B

    def replace(self, **changes: Any) -> "HardwareParams":
        return dataclasses.replace(self, **changes)

    def replace_both(self, **changes: Any) -> "HardwareParams":
        """Apply the same field changes to both subsystems."""
        return dataclasses.replace(self, A=self.A.replace(**changes), B=self.B.replace(**changes))

    def to_json_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "dual_rail": {}, "subsystems": {}}
        for key, (attr, scale) in _DUAL_RAIL_KEYS.items():
            out["dual_rail"][key] = getattr(self, attr) / scale
        for s in SUBSYSTEMS:
            sp = self.sub(s)
            d = {key: getattr(sp, attr) / scale for key, (attr, scale) in _SUBSYSTEM_KEYS.items()}
            for key, attr in _OPTIONAL_SUBSYSTEM_KEYS.items():
                if getattr(sp, attr) is not None:
                    d[key] = getattr(sp, attr)
            out["subsystems"][s] = d
        return out


def pure_dephasing_rate(T1: float, T2: float) -> float:
    """1/T_phi = 1/T2 - 1/(2 T1); infinite times count as zero rate."""
    return _rate(T2) - 0.5 * _rate(T1)


def _rate(T: float) -> float:
    return 0.0 if math.isinf(T) else 1.0 / T


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if math.isnan(value):
        raise ConfigError(f"{path}: NaN is not allowed")
    return float(value)


def _check_subsystem(sp: SubsystemParams, path: str) -> None:
    for attr in _TIMES:
        if not getattr(sp, attr) > 0:
            raise ConfigError(f"{path}.{attr}: times must be > 0 (got {getattr(sp, attr)})")
    if sp.t_d < 0:
        raise ConfigError(f"{path}.t_d: must be >= 0")
    for attr in _POPULATIONS:
        v = getattr(sp, attr)
        if not 0.0 <= v < 1.0:
            raise ConfigError(f"{path}.{attr}: thermal population must lie in [0, 1) (got {v})")
    for attr in _PROBABILITIES + ("p_us", "p_s"):
        v = getattr(sp, attr)
        if v is not None and not 0.0 <= v < 1.0:
            raise ConfigError(f"{path}.{attr}: probability must lie in [0, 1) (got {v})")
    for mode, T1, T2s in (("cavity", sp.cav_T1, ("cav_T2R", "cav_T2E")),
                          ("transmon", sp.tr_T1, ("tr_T2R", "tr_T2E"))):
        for attr in T2s:
            T2 = getattr(sp, attr)
            if pure_dephasing_rate(T1, T2) < -1e-12:
                raise ConfigError(
                    f"{path}.{attr}: {mode} T2 = {T2} us exceeds 2*T1 = {2 * T1} us "
                    "(negative derived pure-dephasing rate)")


def params_from_dict(data: Mapping[str, Any], source: str = "<dict>") -> HardwareParams:
    if not isinstance(data, Mapping) or not data:
        raise ConfigError(f"{source}: expected a non-empty JSON object")
    subs = data.get("subsystems")
    if not isinstance(subs, Mapping):
        raise ConfigError(f"{source}: missing field 'subsystems'")
    built: dict[str, SubsystemParams] = {}
    for s in SUBSYSTEMS:
        path = f"subsystems.{s}"
        raw = subs.get(s)
        if not isinstance(raw, Mapping):
            raise ConfigError(f"{source}: missing field '{path}'")
        unknown = set(raw) - set(_SUBSYSTEM_KEYS) - set(_OPTIONAL_SUBSYSTEM_KEYS)
        if unknown:
            raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)} in '{path}'")
        kwargs: dict[str, Any] = {}
        for key, (attr, scale) in _SUBSYSTEM_KEYS.items():
            if key not in raw:
                raise ConfigError(f"{source}: missing field '{path}.{key}'")
            kwargs[attr] = _number(raw[key], f"{path}.{key}") * scale
        for key, attr in _OPTIONAL_SUBSYSTEM_KEYS.items():
            if raw.get(key) is not None:
                kwargs[attr] = _number(raw[key], f"{path}.{key}")
        sp = SubsystemParams(**kwargs)
        _check_subsystem(sp, f"{source}: {path}")
        built[s] = sp
    dual = data.get("dual_rail", {})
    if not isinstance(dual, Mapping):
        raise ConfigError(f"{source}: 'dual_rail' must be an object")
    extra: dict[str, Any] = {}
    for key, (attr, scale) in _DUAL_RAIL_KEYS.items():
        if key in dual:
            extra[attr] = _number(dual[key], f"dual_rail.{key}") * scale
    for attr in ("gamma_phi_ramsey", "gamma_phi_echo"):
        if extra.get(attr, 0.0) < 0:
            raise ConfigError(f"{source}: dual_rail.{attr}: dephasing rate must be >= 0")
    if extra.get("tau_ocp", 1.0) < 0:
        raise ConfigError(f"{source}: dual_rail.tau_ocp_us: must be >= 0")
    return HardwareParams(A=built["A"], B=built["B"], name=str(data.get("name", "custom")), **extra)


def load_params(path: str | Path) -> HardwareParams:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    if not text.strip():
        raise ConfigError(f"{path}: empty file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return params_from_dict(data, str(path))


def _shipped(name: str) -> HardwareParams:
    text = resources.files("dualrail.data").joinpath(name).read_text()
    return params_from_dict(json.loads(text), name)


def paper_params() -> HardwareParams:
    """Device table of the reference experiment (shipped ``params_paper.json``)."""
    return _shipped("params_paper.json")


def zero_error_params() -> HardwareParams:
    """No decoherence, no readout or pulse errors (shipped ``params_zero.json``)."""
    return _shipped("params_zero.json")


def shipped_path(name: str) -> Path:
    return Path(str(resources.files("dualrail.data").joinpath(name)))
