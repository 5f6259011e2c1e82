"""JSON system configs: maps, weights, and the boundary window.

Schema::

    {
      "beta": 0.1,
      "maps": [
        {"type": "pwl", "knots": [[0, 0], [0.1, 0.5], [1, 1]]},
        {"type": "moebius", "lambda": 2.0},
        {"type": "plateau", "knots": [[0, 0], [0.4, 0.5], [0.6, 0.5], [1, 1]]}
      ],
      "probs": [0.5, 0.25, 0.25],
      "label": "optional"
    }

Parse errors name the offending field.  Floats are written with
shortest round-trip formatting so configs diff cleanly.
"""
from __future__ import annotations

import json

from .interval_maps import MoebiusMap, PiecewiseLinearMap
from .ioutil import atomic_write_text
from .system import DEFAULT_BETA, IfsSystem

__all__ = [
    "ConfigError",
    "map_from_dict",
    "map_to_dict",
    "system_from_dict",
    "system_to_dict",
    "load_system",
    "save_system",
]


class ConfigError(ValueError):
    """Config file does not describe a well-formed system."""


def map_from_dict(d, where: str = "map"):
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}: expected an object with a 'type' field")
    kind = d["type"]
    try:
        if kind in ("pwl", "plateau"):
            if "knots" not in d:
                raise ConfigError(f"{where}.knots: missing")
            m = PiecewiseLinearMap(d["knots"])
            if kind == "plateau" and m.is_homeomorphism:
                raise ConfigError(f"{where}: declared plateau but has no flat segment")
            return m
        if kind == "moebius":
            if "lambda" not in d:
                raise ConfigError(f"{where}.lambda: missing")
            return MoebiusMap(float(d["lambda"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.type: unknown map type {kind!r}")


def map_to_dict(m) -> dict:
    if isinstance(m, MoebiusMap):
        return {"type": "moebius", "lambda": m.lam}
    kind = "pwl" if m.is_homeomorphism else "plateau"
    return {"type": kind, "knots": [[float(x), float(y)] for x, y in m.knots]}


def system_from_dict(d) -> IfsSystem:
    if not isinstance(d, dict):
        raise ConfigError("top level: expected an object")
    if "maps" not in d or not isinstance(d["maps"], list) or not d["maps"]:
        raise ConfigError("maps: need a nonempty list of map descriptions")
    if "probs" not in d:
        raise ConfigError("probs: missing")
    maps = [map_from_dict(entry, f"maps[{i}]") for i, entry in enumerate(d["maps"])]
    beta = d.get("beta", DEFAULT_BETA)
    try:
        return IfsSystem(maps, d["probs"], float(beta))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def system_to_dict(system: IfsSystem, label: str | None = None) -> dict:
    d = {
        "beta": system.beta,
        "maps": [map_to_dict(m) for m in system.maps],
        "probs": [float(p) for p in system.probs],
    }
    if label is not None:
        d["label"] = label
    return d


def load_system(path) -> IfsSystem:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return system_from_dict(data)


def save_system(system: IfsSystem, path, label: str | None = None) -> None:
    text = json.dumps(system_to_dict(system, label), indent=2)
    atomic_write_text(path, text + "\n")
