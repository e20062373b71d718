"""JSON model configuration.

Schema (``schema_version`` 1)::

    {
      "schema_version": 1,
      "name": "my-model",
      "process": "X",                 # "Y" declares a chain without killing
      "down_rate": 1.0,               # number, list, or rule object
      "up_rates": {"rule": "jumps", "sizes": {"1": 1.0}},
      "killing": {"rule": "sites", "sites": {"1": 1.0}},
      "n_max": 400, "tol": 0.01, "schedule": [25, 50, 100, 200, 400]
    }

Rate rules: a number (constant), a list (values for states 1, 2, ...), or an
object with ``rule`` one of ``constant`` (value), ``power`` (coef, exponent:
coef * i**exponent), ``geometric`` (coef, ratio: coef * ratio**i), ``list``
(values, optional fill), ``sites`` ({state: value}), ``scaled``, ``sum``.

Up rates: ``none``; ``jumps`` ({size: rule}, q_{i,i+size} = rule(i));
``list`` ({state: [[target, rate], ...]}); ``geometric`` (total rule and
ratio p, q_{i,i+k} = total(i) (1-p) p**(k-1)).
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError
from .model import SingleDeathModel, TruncationWindow
from .rates import rule_from_config, up_from_config

SCHEMA_VERSION = 1
_KNOWN = {"schema_version", "name", "process", "down_rate", "up_rates", "killing", "n_max", "tol", "schedule", "description"}


def model_from_config(obj: dict) -> SingleDeathModel:
    if not isinstance(obj, dict):
        raise ConfigError("model config must be a JSON object")
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(obj) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "down_rate" not in obj:
        raise ConfigError("config needs 'down_rate'")
    return SingleDeathModel(
        down=rule_from_config(obj["down_rate"]),
        up=up_from_config(obj.get("up_rates")),
        killing=rule_from_config(obj.get("killing", 0.0)),
        name=str(obj.get("name", "custom")),
        process=str(obj.get("process", "X")),
    )


def window_from_config(obj: dict, **overrides) -> TruncationWindow:
    kw = {k: obj[k] for k in ("n_max", "tol", "schedule") if k in obj}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if "schedule" in kw and kw["schedule"] is not None:
        kw["schedule"] = tuple(kw["schedule"])
    try:
        return TruncationWindow(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def model_to_config(m: SingleDeathModel, window: TruncationWindow | None = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": m.name,
        "process": m.process,
        "down_rate": m.down.to_config(),
        "up_rates": m.up.to_config(),
        "killing": m.killing.to_config(),
    }
    if window is not None:
        out.update(n_max=window.n_max, tol=window.tol, schedule=list(window.schedule))
    return out


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
