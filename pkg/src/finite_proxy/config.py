"""Run configuration: JSON schema, validation, defaults.

A config is a single JSON document.  Unknown keys are rejected with their
location; CLI flags override config keys.  The minimal config is
``{"geometry": {"L": 3.14159}}``: everything else has defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, NonresonanceError
from .spectral import DEFAULT_SIGMA_MIN, Geometry, ModeSet, WaveBasis

KNOWN_NONLINEARITIES = ("zero", "constant", "scaled-sine", "saturating-cubic",
                        "table-spline")


@dataclass
class RunConfig:
    L: float = math.pi
    T: float | None = None
    nonlinearity_tag: str = "zero"
    nonlinearity_params: dict = field(default_factory=dict)
    margin: float = 0.5
    pinned_cutoff: int | None = None
    k_max: int | None = None
    j_max: int = 8
    fixed_point_tol: float = 1e-12
    solver_tol: float = 1e-10
    sigma_min: float = DEFAULT_SIGMA_MIN
    resolution_static: int | None = None
    resolution_wave: tuple[int, int] | None = None
    chain_n: int = 5
    total_mass: float = 1.0
    sim_dt: float = 1e-3
    sim_steps: int = 100000
    sim_stride: int = 100
    sim_initial_mode: int = 1
    sim_amplitude: float = 1.0
    output_dir: str = "out"
    seed: int = 0
    force: bool = False

    def geometry(self) -> Geometry:
        return Geometry(L=self.L, T=self.T)

    def nonlinearity(self):
        from . import nonlinearity as nl

        return nl.from_spec(self.nonlinearity_tag, self.nonlinearity_params)

    def canonical_dict(self) -> dict:
        """Stable mapping for hashing and report provenance."""
        return {
            "geometry": {"L": self.L, "T": self.T},
            "nonlinearity": {"tag": self.nonlinearity_tag,
                             **self.nonlinearity_params},
            "cutoff": ({"R": self.pinned_cutoff} if self.pinned_cutoff is not None
                       else {"margin": self.margin}),
            "tail": {"k_max": self.k_max, "j_max": self.j_max},
            "tolerances": {"fixed_point": self.fixed_point_tol,
                           "solver": self.solver_tol,
                           "sigma_min": self.sigma_min},
            "resolution": {"static": self.resolution_static,
                           "wave": list(self.resolution_wave)
                           if self.resolution_wave else None},
            "chain": {"n": self.chain_n, "total_mass": self.total_mass},
            "simulation": {"dt": self.sim_dt, "steps": self.sim_steps,
                           "stride": self.sim_stride,
                           "initial_mode": self.sim_initial_mode,
                           "amplitude": self.sim_amplitude},
            "output_dir": self.output_dir,
            "seed": self.seed,
            "force": self.force,
        }


def _require(cond: bool, message: str, location: str):
    if not cond:
        raise ConfigError(message, location=location)


def _get_number(obj: dict, key: str, location: str, *, positive=False,
                nonneg=False, default=None, allow_none=False):
    if key not in obj:
        return default
    val = obj[key]
    if val is None and allow_none:
        return None
    _require(isinstance(val, (int, float)) and not isinstance(val, bool),
             f"{key} must be a number, got {val!r}", f"{location}.{key}")
    val = float(val)
    if positive:
        _require(val > 0, f"{key} must be positive, got {val}", f"{location}.{key}")
    if nonneg:
        _require(val >= 0, f"{key} must be nonnegative, got {val}", f"{location}.{key}")
    return val


def _get_int(obj: dict, key: str, location: str, *, minimum=None, default=None,
             allow_none=False):
    if key not in obj:
        return default
    val = obj[key]
    if val is None and allow_none:
        return None
    _require(isinstance(val, int) and not isinstance(val, bool),
             f"{key} must be an integer, got {val!r}", f"{location}.{key}")
    if minimum is not None:
        _require(val >= minimum, f"{key} must be >= {minimum}, got {val}",
                 f"{location}.{key}")
    return int(val)


def _check_keys(obj: dict, allowed: set[str], location: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} (allowed: {sorted(allowed)})",
                              location=f"{location}.{key}")


def parse_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object", location="$")
    _check_keys(doc, {"geometry", "nonlinearity", "cutoff", "tail", "tolerances",
                      "resolution", "chain", "simulation", "output_dir", "seed",
                      "force"}, "$")
    cfg = RunConfig()

    geo = doc.get("geometry", {})
    _require(isinstance(geo, dict), "geometry must be an object", "$.geometry")
    _check_keys(geo, {"L", "T"}, "$.geometry")
    cfg.L = _get_number(geo, "L", "$.geometry", positive=True, default=cfg.L)
    cfg.T = _get_number(geo, "T", "$.geometry", positive=True, default=None,
                        allow_none=True)

    nl = doc.get("nonlinearity", {})
    _require(isinstance(nl, dict), "nonlinearity must be an object", "$.nonlinearity")
    tag = nl.get("tag", "zero")
    _require(tag in KNOWN_NONLINEARITIES,
             f"unknown nonlinearity tag {tag!r} (known: {KNOWN_NONLINEARITIES})",
             "$.nonlinearity.tag")
    cfg.nonlinearity_tag = tag
    allowed = {"zero": {"tag"}, "constant": {"tag", "c"},
               "scaled-sine": {"tag", "eps"},
               "saturating-cubic": {"tag", "eps", "s"},
               "table-spline": {"tag", "x", "y"}}[tag]
    _check_keys(nl, allowed, "$.nonlinearity")
    params = {}
    if tag == "constant":
        c = _get_number(nl, "c", "$.nonlinearity", default=None)
        _require(c is not None, "constant nonlinearity needs c", "$.nonlinearity.c")
        params["c"] = c
    elif tag == "scaled-sine":
        eps = _get_number(nl, "eps", "$.nonlinearity", default=None)
        _require(eps is not None, "scaled-sine needs eps", "$.nonlinearity.eps")
        params["eps"] = eps
    elif tag == "saturating-cubic":
        eps = _get_number(nl, "eps", "$.nonlinearity", default=None)
        _require(eps is not None, "saturating-cubic needs eps", "$.nonlinearity.eps")
        params["eps"] = eps
        params["s"] = _get_number(nl, "s", "$.nonlinearity", positive=True,
                                  default=1.0)
    elif tag == "table-spline":
        for key in ("x", "y"):
            vals = nl.get(key)
            _require(isinstance(vals, list) and len(vals) >= 2
                     and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                             for v in vals),
                     f"table-spline needs a numeric list {key!r} (>= 2 entries)",
                     f"$.nonlinearity.{key}")
            params[key] = [float(v) for v in vals]
    cfg.nonlinearity_params = params

    cut = doc.get("cutoff", {})
    _require(isinstance(cut, dict), "cutoff must be an object", "$.cutoff")
    _check_keys(cut, {"margin", "R"}, "$.cutoff")
    cfg.pinned_cutoff = _get_int(cut, "R", "$.cutoff", minimum=0, default=None,
                                 allow_none=True)
    margin = _get_number(cut, "margin", "$.cutoff", default=cfg.margin)
    _require(0 < margin <= 1, f"margin must lie in (0, 1], got {margin}",
             "$.cutoff.margin")
    cfg.margin = margin

    tail = doc.get("tail", {})
    _require(isinstance(tail, dict), "tail must be an object", "$.tail")
    _check_keys(tail, {"k_max", "j_max"}, "$.tail")
    cfg.k_max = _get_int(tail, "k_max", "$.tail", minimum=1, default=None,
                         allow_none=True)
    cfg.j_max = _get_int(tail, "j_max", "$.tail", minimum=1, default=cfg.j_max)

    tol = doc.get("tolerances", {})
    _require(isinstance(tol, dict), "tolerances must be an object", "$.tolerances")
    _check_keys(tol, {"fixed_point", "solver", "sigma_min"}, "$.tolerances")
    cfg.fixed_point_tol = _get_number(tol, "fixed_point", "$.tolerances",
                                      positive=True, default=cfg.fixed_point_tol)
    cfg.solver_tol = _get_number(tol, "solver", "$.tolerances", positive=True,
                                 default=cfg.solver_tol)
    cfg.sigma_min = _get_number(tol, "sigma_min", "$.tolerances", positive=True,
                                default=cfg.sigma_min)

    res = doc.get("resolution", {})
    _require(isinstance(res, dict), "resolution must be an object", "$.resolution")
    _check_keys(res, {"static", "wave"}, "$.resolution")
    cfg.resolution_static = _get_int(res, "static", "$.resolution", minimum=4,
                                     default=None, allow_none=True)
    wave_res = res.get("wave")
    if wave_res is not None:
        _require(isinstance(wave_res, list) and len(wave_res) == 2
                 and all(isinstance(v, int) and not isinstance(v, bool)
                         and v >= 4 for v in wave_res),
                 "resolution.wave must be a pair of integers >= 4",
                 "$.resolution.wave")
        cfg.resolution_wave = (wave_res[0], wave_res[1])

    chain = doc.get("chain", {})
    _require(isinstance(chain, dict), "chain must be an object", "$.chain")
    _check_keys(chain, {"n", "total_mass"}, "$.chain")
    cfg.chain_n = _get_int(chain, "n", "$.chain", minimum=1, default=cfg.chain_n)
    cfg.total_mass = _get_number(chain, "total_mass", "$.chain", positive=True,
                                 default=cfg.total_mass)

    sim = doc.get("simulation", {})
    _require(isinstance(sim, dict), "simulation must be an object", "$.simulation")
    _check_keys(sim, {"dt", "steps", "stride", "initial_mode", "amplitude"},
                "$.simulation")
    cfg.sim_dt = _get_number(sim, "dt", "$.simulation", positive=True,
                             default=cfg.sim_dt)
    cfg.sim_steps = _get_int(sim, "steps", "$.simulation", minimum=1,
                             default=cfg.sim_steps)
    cfg.sim_stride = _get_int(sim, "stride", "$.simulation", minimum=1,
                              default=cfg.sim_stride)
    cfg.sim_initial_mode = _get_int(sim, "initial_mode", "$.simulation", minimum=1,
                                    default=cfg.sim_initial_mode)
    cfg.sim_amplitude = _get_number(sim, "amplitude", "$.simulation",
                                    default=cfg.sim_amplitude)

    out = doc.get("output_dir", cfg.output_dir)
    _require(isinstance(out, str) and out, "output_dir must be a nonempty string",
             "$.output_dir")
    cfg.output_dir = out
    cfg.seed = _get_int(doc, "seed", "$", minimum=0, default=cfg.seed)
    force = doc.get("force", False)
    _require(isinstance(force, bool), "force must be a boolean", "$.force")
    cfg.force = force

    _validate_nonresonance(cfg)
    return cfg


def _validate_nonresonance(cfg: RunConfig):
    """Reject resonant time horizons as early as possible."""
    if cfg.T is None:
        return
    k_probe = cfg.k_max if cfg.k_max is not None else 16
    try:
        WaveBasis(Geometry(L=cfg.L, T=cfg.T),
                  ModeSet(k_max=k_probe, cutoff=0, j_max=cfg.j_max),
                  sigma_min=cfg.sigma_min)
    except NonresonanceError as exc:
        raise ConfigError(
            f"geometry.T = {cfg.T} is resonant: {exc}", location="$.geometry.T"
        ) from exc


def load_config(path) -> RunConfig:
    """Parse and validate a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", location=str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON: {exc.msg}",
            location=f"{path}:{exc.lineno}:{exc.colno}",
        ) from exc
    return parse_config(doc, base_dir=path.parent)
