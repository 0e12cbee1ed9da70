"""Run configuration: parsing, validation, defaults and the config hash."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Optional

from .pwl import ConvexityError, DegenerateSegmentError, PwlConvex, make_pwl
from .variational import SearchConfig

COMMANDS = ("conjugate", "solve", "discrete", "mollify", "verify", "stochastic")
DATA_KINDS = ("polynomial", "quadratic", "exp", "zero", "piecewise_constant", "brownian", "sampled")

DEFAULTS: dict[str, Any] = {
    "grid": {"x_min": -3.0, "x_max": 3.0, "points": 121, "t": [1.0]},
    "search": {"M": 1024, "eta": 1e-9, "golden_tol": 1e-12},
    "epsilons": [0.2, 0.1, 0.05, 0.025],
    "blend": "quadratic",
    "blend_width_factor": 1.0,
    "delta_mode": "eps2",
    "seed": None,
    "stochastic": {"n_paths": 256, "step": 0.01, "scale": 1.0, "margin": 0.1,
                   "x": None, "crosscheck": 8},
    "verify": {"field_file": None, "field_t": None, "tol": 1e-9, "bumps": [], "h": [0.0625, 0.03125]},
    "output": {"dir": "out", "prefix": None},
}
_TOP_KEYS = set(DEFAULTS) | {"command", "flux", "data"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    command: str
    flux: PwlConvex
    data: Optional[dict]
    grid: dict
    search: SearchConfig
    epsilons: list
    blend: str
    blend_width_factor: float
    delta_mode: Any
    seed: Optional[int]
    stochastic: dict
    verify: dict
    output: dict
    resolved: dict          # the full config with defaults filled, as echoed into outputs

    @property
    def times(self) -> list:
        return list(self.grid["t"])

    def x_grid(self):
        import numpy as np
        return np.linspace(self.grid["x_min"], self.grid["x_max"], self.grid["points"])

    def delta_for(self, eps: float) -> float:
        return eps ** 2 if self.delta_mode == "eps2" else float(self.delta_mode)

    @property
    def sha256(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: dict) -> str:
    # where the outputs go does not change what they contain
    body = {k: v for k, v in resolved.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_raw(source) -> dict:
    """Read a config from a path, an inline JSON string or a dict."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        where = "inline config"
    else:
        if not os.path.isfile(text):
            raise ConfigError(f"config: file not found: {text}")
        where = text
        with open(text) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON in {where}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config: top level must be a JSON object")
    return obj


def _merge(key: str, given, default: dict) -> dict:
    if given is None:
        return copy.deepcopy(default)
    if not isinstance(given, dict):
        raise ConfigError(f"{key}: expected an object")
    unknown = set(given) - set(default)
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}: unknown key")
    out = copy.deepcopy(default)
    out.update(given)
    return out


def _number(key, value, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _numbers(key, value, positive=False, nonempty=True):
    if not isinstance(value, list) or (nonempty and not value):
        raise ConfigError(f"{key}: expected a non-empty list of numbers")
    return [_number(f"{key}[{i}]", v, positive) for i, v in enumerate(value)]


def _flux(obj) -> PwlConvex:
    if not isinstance(obj, dict):
        raise ConfigError("flux: expected an object with breaks, slopes, anchor")
    unknown = set(obj) - {"breaks", "slopes", "anchor"}
    if unknown:
        raise ConfigError(f"flux.{sorted(unknown)[0]}: unknown key")
    breaks = _numbers("flux.breaks", obj.get("breaks"))
    slopes = _numbers("flux.slopes", obj.get("slopes"))
    anchor = _number("flux.anchor", obj.get("anchor", 0.0))
    try:
        H = make_pwl(breaks, slopes, anchor)
    except ConvexityError as exc:
        raise ConfigError(f"flux.slopes: {exc}") from None
    except DegenerateSegmentError as exc:
        raise ConfigError(f"flux.breaks: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"flux.slopes: {exc}") from None
    try:
        H.check_flux()
    except ValueError as exc:
        raise ConfigError(f"flux.slopes: {exc}") from None
    return H


def _data(obj) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError("data: expected an object with a kind")
    kind = obj.get("kind")
    if kind not in DATA_KINDS:
        raise ConfigError(f"data.kind: unknown initial data kind {kind!r} (one of {', '.join(DATA_KINDS)})")
    out = dict(obj)
    if kind == "polynomial":
        _numbers("data.coeffs", obj.get("coeffs"))
    elif kind == "piecewise_constant":
        jumps = _numbers("data.jumps", obj.get("jumps"), nonempty=False)
        vals = _numbers("data.values", obj.get("values"))
        if len(vals) != len(jumps) + 1:
            raise ConfigError("data.values: needs len(jumps) + 1 entries")
        if any(b <= a for a, b in zip(jumps, jumps[1:])):
            raise ConfigError("data.jumps: must be strictly increasing")
    elif kind == "brownian":
        for k in ("start", "end"):
            _number(f"data.{k}", obj.get(k))
        _number("data.step", obj.get("step"), positive=True)
    elif kind == "sampled":
        if not isinstance(obj.get("file"), str):
            raise ConfigError("data.file: expected a path to an x,gprime CSV")
    return out


def parse_config(source, command: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """Validate a config (path, inline JSON or dict) and fill in defaults.

    ``command`` and ``seed`` come from the command line and override the file.
    """
    raw = load_raw(source)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    cmd = command or raw.get("command")
    if raw.get("command") is not None and command is not None and raw["command"] != command:
        raise ConfigError(f"command: config says {raw['command']!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise ConfigError(f"command: unknown command {cmd!r} (one of {', '.join(COMMANDS)})")

    if "flux" not in raw:
        raise ConfigError("flux: missing")
    H = _flux(raw["flux"])
    data = None
    if cmd not in ("conjugate",):
        if "data" not in raw and cmd != "stochastic":
            raise ConfigError("data: missing")
        data = _data(raw["data"]) if "data" in raw else None

    grid = _merge("grid", raw.get("grid"), DEFAULTS["grid"])
    grid["x_min"] = _number("grid.x_min", grid["x_min"])
    grid["x_max"] = _number("grid.x_max", grid["x_max"])
    if not grid["x_min"] < grid["x_max"]:
        raise ConfigError("grid.x_max: must exceed grid.x_min")
    grid["points"] = _number("grid.points", grid["points"], positive=True, integer=True)
    if isinstance(grid["t"], (int, float)) and not isinstance(grid["t"], bool):
        grid["t"] = [grid["t"]]
    grid["t"] = _numbers("grid.t", grid["t"], positive=True)

    search = _merge("search", raw.get("search"), DEFAULTS["search"])
    search["M"] = _number("search.M", search["M"], positive=True, integer=True)
    search["eta"] = _number("search.eta", search["eta"], positive=True)
    search["golden_tol"] = _number("search.golden_tol", search["golden_tol"], positive=True)
    scfg = SearchConfig(M=search["M"], eta=search["eta"], golden_tol=search["golden_tol"])

    eps = _numbers("epsilons", raw.get("epsilons", DEFAULTS["epsilons"]), positive=True)
    blend = raw.get("blend", DEFAULTS["blend"])
    if blend not in ("quadratic", "quintic"):
        raise ConfigError(f"blend: expected 'quadratic' or 'quintic', got {blend!r}")
    width = _number("blend_width_factor", raw.get("blend_width_factor", 1.0), positive=True)
    delta_mode = raw.get("delta_mode", "eps2")
    if delta_mode != "eps2":
        delta_mode = _number("delta_mode", delta_mode, positive=True)

    if seed is None:
        seed = raw.get("seed")
    if seed is not None:
        seed = _number("seed", seed, integer=True)
        if seed < 0:
            raise ConfigError("seed: must be non-negative")

    stoch = _merge("stochastic", raw.get("stochastic"), DEFAULTS["stochastic"])
    stoch["n_paths"] = _number("stochastic.n_paths", stoch["n_paths"], integer=True)
    if stoch["n_paths"] < 2:
        raise ConfigError("stochastic.n_paths: must be at least 2")
    stoch["step"] = _number("stochastic.step", stoch["step"], positive=True)
    stoch["scale"] = _number("stochastic.scale", stoch["scale"])
    stoch["margin"] = _number("stochastic.margin", stoch["margin"])
    stoch["crosscheck"] = _number("stochastic.crosscheck", stoch["crosscheck"], integer=True)
    if stoch["x"] is not None:
        stoch["x"] = _numbers("stochastic.x", stoch["x"])

    ver = _merge("verify", raw.get("verify"), DEFAULTS["verify"])
    if ver["field_file"] is not None and not isinstance(ver["field_file"], str):
        raise ConfigError("verify.field_file: expected a path")
    ver["tol"] = _number("verify.tol", ver["tol"], positive=True)
    ver["h"] = _numbers("verify.h", ver["h"], positive=True)
    if not isinstance(ver["bumps"], list):
        raise ConfigError("verify.bumps: expected a list of [x0, t0, rx, rt]")
    for i, b in enumerate(ver["bumps"]):
        vals = _numbers(f"verify.bumps[{i}]", b)
        if len(vals) != 4 or min(vals[2:]) <= 0:
            raise ConfigError(f"verify.bumps[{i}]: expected [x0, t0, rx, rt] with positive radii")

    out = _merge("output", raw.get("output"), DEFAULTS["output"])
    if not isinstance(out["dir"], str):
        raise ConfigError("output.dir: expected a path")

    resolved = {"command": cmd, "flux": H.to_json(), "data": data, "grid": grid, "search": search,
                "epsilons": eps, "blend": blend, "blend_width_factor": width,
                "delta_mode": delta_mode, "seed": seed, "stochastic": stoch, "verify": ver,
                "output": out}
    return RunConfig(cmd, H, data, grid, scfg, eps, blend, width, delta_mode, seed, stoch, ver,
                     out, resolved)
