from __future__ import annotations

import copy
import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ...domain.errors import ConfigurationError

# Layout:
#   ProjectRoot/
#     src/
#       corrugator/
#         settings.json        <-- packaged defaults
#         infrastructure/
#           system/
#             config.py        <-- this file

_PACKAGE_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_SETTINGS_PATH = _PACKAGE_ROOT / "settings.json"

PIPELINES = ("c1", "holder", "sweep")

MIN_PRECISION_DIGITS = 15
MIN_QUADRATURE_N = 8
MIN_DECIMALS, MAX_DECIMALS = 1, 40


def _read(path: Path) -> Any:
    if not path.is_file():
        raise ConfigurationError("config file not found at: {0}".format(path))
    try:
        with path.open("r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                return yaml.safe_load(f)
            return json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError("invalid syntax in config file: {0}".format(path)) from exc


def load_settings(settings_path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Load the packaged settings.json (or the given file).

    Structure (all sections optional in user files, see docs/config.md):

        {
          "precision": {"digits": 15, "seed": 20240601},
          "sampling":  {"n": 1000, ...},
          "grid":      {"h": "0.002", "maxPoints": 400000, ...},
          "search":    {"lambdaStart": "1", "factor": "1.1", ...},
          "mollify":   {"method": "auto", "quadrature_n": 64, "tol": "1e-8"},
          "holder":    {"r": "0.001", "delta0": "5e-16", ...},
          "output":    {"dir": "out", "decimals": 17},
          "logging":   {"level": "INFO"}
        }
    """
    path = settings_path or DEFAULT_SETTINGS_PATH
    data = _read(path)
    if not isinstance(data, dict):
        raise ConfigurationError("root of settings file {0} must be an object".format(path))
    return data


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Deep merge: objects merge key by key, everything else is replaced."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_run_config(path: Path, settings: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    A user run config (.json, .yaml or .yml) merged over the settings.

    Raises
    ------
    ConfigurationError
        Missing file, invalid syntax, non-object root or unknown pipeline.
    """
    path = Path(path)
    data = _read(path)
    if not isinstance(data, dict):
        raise ConfigurationError("root of run config {0} must be an object".format(path))
    merged = merge(settings if settings is not None else load_settings(), data)
    pipeline = merged.get("pipeline")
    if pipeline is not None and pipeline not in PIPELINES:
        raise ConfigurationError(
            "pipeline must be one of {0}, got {1!r}".format(", ".join(PIPELINES), pipeline)
        )
    return merged


def settings_digest(settings: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON of the merged settings."""
    text = json.dumps(settings, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------- typed getters ----------


def lookup(settings: Dict[str, Any], dotted: str, default: Any = None) -> Any:
    node: Any = settings
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def get_exact(settings: Dict[str, Any], dotted: str, default: Any = None) -> Optional[Fraction]:
    """
    An exact real from a JSON number or decimal string.

    Goes through ``str`` so that a JSON 1e-18 stays exact.
    """
    raw = lookup(settings, dotted, default)
    if raw is None:
        return None
    return exact(raw, dotted)


def exact(raw: Any, name: str) -> Fraction:
    if isinstance(raw, bool):
        raise ConfigurationError("{0} must be a number, got {1!r}".format(name, raw))
    try:
        return Fraction(str(raw).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError("{0} must be a number, got {1!r}".format(name, raw)) from exc


def get_exact_list(settings: Dict[str, Any], dotted: str) -> Optional[List[Fraction]]:
    raw = lookup(settings, dotted)
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise ConfigurationError("{0} must be a list, got {1!r}".format(dotted, raw))
    return [exact(x, dotted) for x in raw]


def _int(settings: Dict[str, Any], dotted: str, default: int) -> int:
    raw = lookup(settings, dotted, default)
    if isinstance(raw, bool):
        raise ConfigurationError("{0} must be an integer, got {1!r}".format(dotted, raw))
    try:
        return int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError("{0} must be an integer, got {1!r}".format(dotted, raw)) from exc


def get_precision_digits(settings: Dict[str, Any]) -> int:
    digits = _int(settings, "precision.digits", MIN_PRECISION_DIGITS)
    if digits < MIN_PRECISION_DIGITS:
        raise ConfigurationError(
            "precision.digits must be >= {0}, got {1}".format(MIN_PRECISION_DIGITS, digits)
        )
    return digits


def get_seed(settings: Dict[str, Any]) -> int:
    seed = _int(settings, "precision.seed", 0)
    if seed < 0:
        raise ConfigurationError("precision.seed must be >= 0, got {0}".format(seed))
    return seed


def get_sampling_n(settings: Dict[str, Any]) -> int:
    n = _int(settings, "sampling.n", 1000)
    if n < 1:
        raise ConfigurationError("sampling.n must be >= 1, got {0}".format(n))
    return n


def get_grid_step(settings: Dict[str, Any], key: str = "grid.h") -> Fraction:
    h = get_exact(settings, key, "0.002")
    if h <= 0:
        raise ConfigurationError("{0} must be positive, got {1}".format(key, h))
    return h


def get_search_factor(settings: Dict[str, Any]) -> Fraction:
    factor = get_exact(settings, "search.factor", "1.1")
    if factor <= 1:
        raise ConfigurationError("search.factor must be > 1, got {0}".format(factor))
    return factor


def get_lambda_max(settings: Dict[str, Any]) -> Fraction:
    lam = get_exact(settings, "search.lambdaMax", 10 ** 6)
    if lam <= 0:
        raise ConfigurationError("search.lambdaMax must be positive, got {0}".format(lam))
    return lam


def get_quadrature_n(settings: Dict[str, Any]) -> int:
    n = _int(settings, "mollify.quadrature_n", 64)
    if n < MIN_QUADRATURE_N:
        raise ConfigurationError(
            "mollify.quadrature_n must be >= {0}, got {1}".format(MIN_QUADRATURE_N, n)
        )
    return n


def get_quadrature_tol(settings: Dict[str, Any]) -> Fraction:
    tol = get_exact(settings, "mollify.tol", "1e-8")
    if not 0 < tol < 1:
        raise ConfigurationError("mollify.tol must lie in (0, 1), got {0}".format(tol))
    return tol


def get_output_decimals(settings: Dict[str, Any]) -> int:
    decimals = _int(settings, "output.decimals", 17)
    if not MIN_DECIMALS <= decimals <= MAX_DECIMALS:
        raise ConfigurationError(
            "output.decimals must lie in {0}..{1}, got {2}".format(MIN_DECIMALS, MAX_DECIMALS, decimals)
        )
    return decimals


def get_max_grid_points(settings: Dict[str, Any]) -> int:
    n = _int(settings, "grid.maxPoints", 400_000)
    if n < 1:
        raise ConfigurationError("grid.maxPoints must be >= 1, got {0}".format(n))
    return n


def get_log_level(settings: Dict[str, Any]) -> str:
    """Falls back to INFO for a missing or unknown level."""
    raw = lookup(settings, "logging.level", "INFO")
    level = str(raw).upper() if isinstance(raw, str) else "INFO"
    return level if level in ("DEBUG", "INFO", "WARN", "ERROR") else "INFO"


def get_int(settings: Dict[str, Any], dotted: str, default: int, minimum: int = 0) -> int:
    value = _int(settings, dotted, default)
    if value < minimum:
        raise ConfigurationError("{0} must be >= {1}, got {2}".format(dotted, minimum, value))
    return value


def get_str(settings: Dict[str, Any], dotted: str, default: str, choices: Optional[tuple] = None) -> str:
    raw = lookup(settings, dotted, default)
    if not isinstance(raw, str):
        raise ConfigurationError("{0} must be a string, got {1!r}".format(dotted, raw))
    if choices is not None and raw not in choices:
        raise ConfigurationError("{0} must be one of {1}, got {2!r}".format(dotted, ", ".join(choices), raw))
    return raw
