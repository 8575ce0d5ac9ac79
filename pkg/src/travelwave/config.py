"""JSON run configuration: parsing, defaults and validation.

Physical parameters ``k``, ``omega`` and ``V`` are required; everything
numerical has a default that is echoed into every output bundle.
"""
import copy
import json
from pathlib import Path

from .errors import ConfigError

MODES = ("te-shoot", "tm-solve", "verify", "spectrum", "orlicz-check")

DEFAULTS = {
    "grid": {"n": 128, "R": 12.0},
    "nonlinearity": {"kind": "kerr", "chi3": 1.0},
    "solver": {"tol": 1e-6, "inner_tol": 1e-10, "max_iter": 400, "states": 2, "mpa_tol": 5e-2,
               "mpa_inner_tol": 1e-8, "newton_tol": 1e-11, "newton_maxiter": 40, "basis_size": 4},
    "te": {"n": [1, 2, 3], "r_max": 30.0, "rtol": 1e-10, "atol": 1e-14, "max_step": 0.25,
           "n_scan": 120, "printed_form": False},
    "spectrum": {"n_xi": 64},
    "energy": {"a": [0.0, 0.3, 0.7], "t_periods": [0.0, 0.25, 0.5], "n_x3": 64},
    "orlicz": {"samples": 481, "t_min": 1e-6, "t_max": 1e6},
    "symmetry": "tm",
}

REQUIRED = ("k", "omega", "V")


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw):
    """Fill defaults and validate; returns a new dict."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    missing = [key for key in REQUIRED if key not in raw]
    if missing:
        raise ConfigError("missing required physical parameters", missing=missing)
    cfg = _merge(DEFAULTS, raw)
    k = cfg["k"]
    if not isinstance(k, (int, float)) or k == 0:
        raise ConfigError("k must be a nonzero number", k=k)
    if not isinstance(cfg["omega"], (int, float)) or not cfg["omega"] > 0:
        raise ConfigError("omega must be positive", omega=cfg["omega"])
    n = cfg["grid"]["n"]
    if not isinstance(n, int) or n < 16 or n % 2:
        raise ConfigError("grid.n must be an even integer >= 16", n=n)
    if not cfg["grid"]["R"] > 0:
        raise ConfigError("grid.R must be positive", R=cfg["grid"]["R"])
    states = cfg["solver"]["states"]
    if not isinstance(states, int) or states < 1:
        raise ConfigError("solver.states must be a positive integer", states=states)
    te_n = cfg["te"]["n"]
    cfg["te"]["n"] = [te_n] if isinstance(te_n, int) else list(te_n)
    return cfg


def load(path):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError("configuration file not found", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("configuration is not valid JSON", path=str(path), line=exc.lineno) from exc
    return resolve(raw)
