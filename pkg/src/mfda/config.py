"""Experiment configuration: strict TOML schema with unit-suffixed keys.

Every physical quantity names its unit in the key (``pmax_dbm``, ``fc_hz``,
``theta_e_deg``). Unknown keys are rejected with their dotted path. Missing
keys take the default simulation parameters.
"""

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from mfda.channel import SPEED_OF_LIGHT, ArrayConfig, Scenario, dbm_to_mw, frequency_ramp
from mfda.errors import ValidationError
from mfda.majorization import SolverOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValidationError):
    pass


SCHEMES = ("PA", "FDA", "MFDA")
KINDS = ("sweep", "convergence")
PAIRINGS = ("causal", "double_sum")

# axis name -> section it modifies (None: array/scenario handled in experiment)
SWEEP_AXES = {
    "M": "array",
    "fc_hz": "array",
    "delta_f_hz": "array",
    "delta_f_ratio": "array",
    "dmax_lambda": "array",
    "dmax_m": "array",
    "theta_e_deg": "scenario",
    "r_e_m": "scenario",
    "theta_b_deg": "scenario",
    "r_b_m": "scenario",
    "pmax_dbm": "scenario",
    "brf_hz": "timing",
    "delta_theta_deg": "uncertainty",
    "delta_r_m": "uncertainty",
}

_NUM = (int, float)


@dataclass(frozen=True)
class ArraySpec:
    """Array block before it is turned into an :class:`ArrayConfig`.

    ``d0_m``/``dmax_m`` of ``None`` mean half a wavelength and 30 wavelengths.
    ``x_m``/``f_hz`` optionally give the starting point of the optimized
    schemes; whichever is missing falls back to half-wavelength spacing or
    the linear frequency ramp.
    """

    M: int = 10
    fc_hz: float = 10e9
    delta_f_hz: float = 1e9
    d0_m: Optional[float] = None
    dmax_m: Optional[float] = None
    x_m: Optional[tuple] = None
    f_hz: Optional[tuple] = None

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.fc_hz

    def template(self):
        lam = self.wavelength
        d0 = lam / 2 if self.d0_m is None else self.d0_m
        dmax = 30 * lam if self.dmax_m is None else self.dmax_m
        x = np.arange(self.M) * (lam / 2)
        return ArrayConfig(x=x, f=np.full(self.M, self.fc_hz), f_c=self.fc_hz,
                           delta_f=self.delta_f_hz, d0=d0, d_max=dmax)

    def start(self):
        """Explicit starting geometry as an :class:`ArrayConfig`, or ``None``."""
        if self.x_m is None and self.f_hz is None:
            return None
        tpl = self.template()
        x = tpl.x if self.x_m is None else np.array(self.x_m, dtype=float)
        f = frequency_ramp(self.M, self.fc_hz, self.delta_f_hz) if self.f_hz is None else np.array(self.f_hz)
        return tpl.replace(x=x, f=f)


@dataclass(frozen=True)
class TimingSpec:
    T_s: float = 1e-3
    crf_hz: float = 1e6
    brf_hz: float = 1e6


@dataclass(frozen=True)
class UncertaintySpec:
    delta_r_m: float = 0.0
    delta_theta_deg: float = 3.0
    Y: int = 1
    Z: int = 13


@dataclass(frozen=True)
class SweepSpec:
    name: str
    axis: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    kind: str = "sweep"
    seed: int = 0
    output_dir: Optional[str] = None
    schemes: tuple = SCHEMES
    csi: str = "perfect"
    pairing: str = "causal"
    starts: int = 10
    scenario: Scenario = field(default_factory=Scenario)
    array: ArraySpec = field(default_factory=ArraySpec)
    solver: SolverOptions = field(default_factory=SolverOptions)
    timing: Optional[TimingSpec] = None
    uncertainty: Optional[UncertaintySpec] = None
    sweeps: tuple = ()

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["solver"] = asdict(self.solver)
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


def _check_keys(table, allowed, path):
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key '{where}'")


def _num(table, key, path, default, positive=False, integer=False):
    if key not in table:
        return default
    v = table[key]
    where = f"{path}.{key}"
    if isinstance(v, bool) or not isinstance(v, _NUM):
        raise ConfigError(f"'{where}' must be a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"'{where}' must be an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"'{where}' must be positive, got {v!r}")
    return v


def _one_of(table, key, path, choices, default):
    v = table.get(key, default)
    if v not in choices:
        raise ConfigError(f"'{path}.{key}' must be one of {list(choices)}, got {v!r}")
    return v


_SCENARIO_KEYS = {
    "r_b_m", "theta_b_deg", "r_e_m", "theta_e_deg", "sigma2_b_dbm", "sigma2_e_dbm",
    "pmax_dbm", "pathloss_c_db", "pathloss_ref_m", "alpha_b", "alpha_e",
}


def _scenario(t):
    _check_keys(t, _SCENARIO_KEYS, "scenario")
    d = Scenario()
    p = "scenario"
    kw = dict(
        r_b=_num(t, "r_b_m", p, d.r_b),
        r_e=_num(t, "r_e_m", p, d.r_e),
        alpha_b=_num(t, "alpha_b", p, d.alpha_b),
        alpha_e=_num(t, "alpha_e", p, d.alpha_e),
        pathloss_c_db=_num(t, "pathloss_c_db", p, d.pathloss_c_db),
        pathloss_ref=_num(t, "pathloss_ref_m", p, d.pathloss_ref),
    )
    for key, attr in (("theta_b_deg", "theta_b"), ("theta_e_deg", "theta_e")):
        if key in t:
            kw[attr] = float(np.deg2rad(_num(t, key, p, None)))
    for key, attr in (("sigma2_b_dbm", "sigma2_b"), ("sigma2_e_dbm", "sigma2_e"), ("pmax_dbm", "p_max")):
        if key in t:
            kw[attr] = dbm_to_mw(_num(t, key, p, None))
    try:
        return Scenario(**kw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


_ARRAY_KEYS = {"M", "fc_hz", "delta_f_hz", "delta_f_ratio", "d0_m", "d0_lambda", "dmax_m", "dmax_lambda",
               "x_m", "f_hz"}


def _exclusive(t, a, b, path):
    if a in t and b in t:
        raise ConfigError(f"give at most one of '{path}.{a}' and '{path}.{b}'")


def _vector(t, key, path):
    if key not in t:
        return None
    v = t[key]
    if not isinstance(v, list) or not all(isinstance(e, _NUM) and not isinstance(e, bool) for e in v):
        raise ConfigError(f"'{path}.{key}' must be a list of numbers")
    return tuple(float(e) for e in v)


def _array(t):
    p = "array"
    _check_keys(t, _ARRAY_KEYS, p)
    _exclusive(t, "delta_f_hz", "delta_f_ratio", p)
    _exclusive(t, "d0_m", "d0_lambda", p)
    _exclusive(t, "dmax_m", "dmax_lambda", p)
    M = _num(t, "M", p, 10, positive=True, integer=True)
    fc = _num(t, "fc_hz", p, 10e9, positive=True)
    lam = SPEED_OF_LIGHT / fc
    if "delta_f_ratio" in t:
        dF = _num(t, "delta_f_ratio", p, None) * fc
    else:
        dF = _num(t, "delta_f_hz", p, 1e9)
    d0 = _num(t, "d0_m", p, None, positive=True)
    if "d0_lambda" in t:
        d0 = _num(t, "d0_lambda", p, None, positive=True) * lam
    dmax = _num(t, "dmax_m", p, None, positive=True)
    if "dmax_lambda" in t:
        dmax = _num(t, "dmax_lambda", p, None, positive=True) * lam
    spec = ArraySpec(M=M, fc_hz=fc, delta_f_hz=dF, d0_m=d0, dmax_m=dmax,
                     x_m=_vector(t, "x_m", p), f_hz=_vector(t, "f_hz", p))
    for key, vec in (("x_m", spec.x_m), ("f_hz", spec.f_hz)):
        if vec is not None and len(vec) != M:
            raise ConfigError(f"'{p}.{key}' has {len(vec)} entries but M = {M}")
    try:
        spec.template()
        spec.start()
    except ValidationError as exc:
        raise ConfigError(f"array: {exc}") from exc
    return spec


_SOLVER_KEYS = {
    "tol_bits", "max_sweeps", "max_outer", "step_x_m", "step_f_hz", "randomization_draws",
    "rank_one_ratio", "robust_max_outer", "fw_temperatures", "fw_max_iter", "fw_gap_tol",
}


def _solver(t):
    p = "solver"
    _check_keys(t, _SOLVER_KEYS, p)
    d = SolverOptions()
    kw = dict(
        tol=_num(t, "tol_bits", p, d.tol, positive=True),
        max_sweeps=_num(t, "max_sweeps", p, d.max_sweeps, positive=True, integer=True),
        max_outer=_num(t, "max_outer", p, d.max_outer, positive=True, integer=True),
        step_x=_num(t, "step_x_m", p, d.step_x, positive=True),
        step_f=_num(t, "step_f_hz", p, d.step_f, positive=True),
        randomization_draws=_num(t, "randomization_draws", p, d.randomization_draws, positive=True, integer=True),
        rank_one_ratio=_num(t, "rank_one_ratio", p, d.rank_one_ratio, positive=True),
        robust_max_outer=_num(t, "robust_max_outer", p, d.robust_max_outer, positive=True, integer=True),
        fw_max_iter=_num(t, "fw_max_iter", p, d.fw_max_iter, positive=True, integer=True),
        fw_gap_tol=_num(t, "fw_gap_tol", p, d.fw_gap_tol, positive=True),
    )
    temps = _vector(t, "fw_temperatures", p)
    if temps is not None:
        if not temps or any(x <= 0 for x in temps):
            raise ConfigError(f"'{p}.fw_temperatures' must be a non-empty list of positive numbers")
        kw["fw_temperatures"] = temps
    return SolverOptions(**kw)


def _timing(t):
    p = "timing"
    _check_keys(t, {"T_s", "crf_hz", "brf_hz"}, p)
    d = TimingSpec()
    return TimingSpec(
        T_s=_num(t, "T_s", p, d.T_s, positive=True),
        crf_hz=_num(t, "crf_hz", p, d.crf_hz, positive=True),
        brf_hz=_num(t, "brf_hz", p, t.get("crf_hz", d.brf_hz), positive=True),
    )


def _uncertainty(t):
    p = "uncertainty"
    _check_keys(t, {"delta_r_m", "delta_theta_deg", "Y", "Z"}, p)
    d = UncertaintySpec()
    spec = UncertaintySpec(
        delta_r_m=_num(t, "delta_r_m", p, d.delta_r_m),
        delta_theta_deg=_num(t, "delta_theta_deg", p, d.delta_theta_deg),
        Y=_num(t, "Y", p, d.Y, positive=True, integer=True),
        Z=_num(t, "Z", p, d.Z, positive=True, integer=True),
    )
    if spec.delta_r_m < 0 or spec.delta_theta_deg < 0:
        raise ConfigError("uncertainty half-widths must be non-negative")
    return spec


def _sweeps(items):
    if isinstance(items, dict):
        items = [items]
    if not isinstance(items, list):
        raise ConfigError("'sweep' must be a table or an array of tables")
    out = []
    names = set()
    for i, s in enumerate(items):
        p = f"sweep[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(f"'{p}' must be a table")
        _check_keys(s, {"name", "axis", "values"}, p)
        axis = s.get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"'{p}.axis' must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
        values = _vector(s, "values", p)
        if not values:
            raise ConfigError(f"'{p}.values' must be a non-empty list of numbers")
        if axis == "M" and any(not float(v).is_integer() or v < 1 for v in values):
            raise ConfigError(f"'{p}.values' must be positive integers for axis 'M'")
        name = str(s.get("name", axis))
        if name in names:
            raise ConfigError(f"duplicate sweep name {name!r}")
        names.add(name)
        out.append(SweepSpec(name=name, axis=axis, values=values))
    return tuple(out)


_TOP_KEYS = {"name", "kind", "seed", "output_dir", "schemes", "csi", "pairing", "starts",
             "scenario", "array", "solver", "timing", "uncertainty", "sweep"}


def parse_config(doc, source="<config>"):
    """Validate a parsed TOML document into an :class:`ExperimentConfig`."""
    _check_keys(doc, _TOP_KEYS, "")
    for sect in ("scenario", "array", "solver", "timing", "uncertainty"):
        if sect in doc and not isinstance(doc[sect], dict):
            raise ConfigError(f"'{sect}' must be a table")
    schemes = doc.get("schemes", list(SCHEMES))
    if not isinstance(schemes, list) or not schemes or any(s not in SCHEMES for s in schemes):
        raise ConfigError(f"'schemes' must be a non-empty list drawn from {list(SCHEMES)}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("'seed' must be a non-negative integer")
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("'output_dir' must be a string")
    cfg = ExperimentConfig(
        name=str(doc.get("name", Path(source).stem)),
        kind=_one_of(doc, "kind", "", KINDS, "sweep"),
        seed=seed,
        output_dir=out,
        schemes=tuple(schemes),
        csi=_one_of(doc, "csi", "", ("perfect", "imperfect"), "perfect"),
        pairing=_one_of(doc, "pairing", "", PAIRINGS, "causal"),
        starts=_num(doc, "starts", "", 10, positive=True, integer=True),
        scenario=_scenario(doc.get("scenario", {})),
        array=_array(doc.get("array", {})),
        solver=_solver(doc.get("solver", {})),
        timing=_timing(doc["timing"]) if "timing" in doc else None,
        uncertainty=_uncertainty(doc["uncertainty"]) if "uncertainty" in doc else None,
        sweeps=_sweeps(doc.get("sweep", [])),
    )
    return validate_config(cfg)


def validate_config(cfg):
    """Cross-block checks run before any solve starts."""
    from mfda.orchestrate import TimingGrid
    from mfda.robust import build_grid

    if cfg.csi == "imperfect" and cfg.uncertainty is None:
        cfg = cfg.replace(uncertainty=UncertaintySpec())
    for s in cfg.sweeps:
        section = SWEEP_AXES[s.axis]
        if section == "timing" and cfg.timing is None:
            raise ConfigError(f"sweep '{s.name}' over {s.axis} needs a [timing] block")
        if section == "uncertainty" and cfg.csi != "imperfect":
            raise ConfigError(f"sweep '{s.name}' over {s.axis} needs csi = \"imperfect\"")
        if s.axis == "M" and (cfg.array.x_m is not None or cfg.array.f_hz is not None):
            raise ConfigError("an M sweep cannot be combined with explicit x_m / f_hz")
    if cfg.timing is not None:
        T = cfg.timing
        brfs = [T.brf_hz] + [v for s in cfg.sweeps if s.axis == "brf_hz" for v in s.values]
        try:
            for b in brfs:
                TimingGrid.from_rates(T.T_s, b, T.crf_hz)
        except ValidationError as exc:
            raise ConfigError(f"timing: {exc}") from exc
    if cfg.uncertainty is not None and cfg.csi == "imperfect":
        u = cfg.uncertainty
        try:
            build_grid(cfg.scenario, u.delta_r_m, np.deg2rad(u.delta_theta_deg), u.Y, u.Z)
        except ValidationError as exc:
            raise ConfigError(f"uncertainty: {exc}") from exc
    if cfg.kind == "convergence" and "MFDA" not in cfg.schemes:
        raise ConfigError("convergence experiments trace the MFDA solver; include 'MFDA' in schemes")
    return cfg


def load_config(path):
    """Read and validate a TOML experiment file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_config(text, source=str(path))


def loads_config(text, source="<config>"):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigError(f"{source}: parse error: {exc}") from exc
    return parse_config(doc, source)


def preset_names():
    from importlib.resources import files

    root = files("mfda") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name):
    from importlib.resources import files

    res = files("mfda") / "presets" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return loads_config(res.read_text(encoding="utf-8"), source=name)
