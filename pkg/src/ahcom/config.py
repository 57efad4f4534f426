"""Flat ``key = value`` experiment configuration.

Grammar, one setting per line::

    # comment
    key = value        # trailing comment after whitespace

Keys are lower-case identifiers from :data:`SCHEMA`; each key may appear
once.  Lists are comma separated.  Booleans accept true/false/yes/no/1/0.
Precedence, lowest first: schema defaults, config file, environment
variables ``AHCOM_<KEY>`` (upper case), command-line flags.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

__all__ = ["ConfigError", "Setting", "SCHEMA", "ENV_PREFIX", "parse_config", "load_config",
           "defaults", "apply_overrides"]

ENV_PREFIX = "AHCOM_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Setting:
    kind: str  # int, float, str, bool, floats, choice
    default: object
    doc: str
    choices: tuple = ()


MODELS = ("hyperbolic", "kottler", "perturbed")
KAPPAS = ("none", "scalar_l1", "rotation", "momentum", "profile")
PIPELINES = ("charges", "center", "cmc", "evolve", "all")

SCHEMA = {
    "model": Setting("choice", "kottler", "base data set", MODELS),
    "n": Setting("int", 3, "dimension of the slice"),
    "mass": Setting("float", 0.5, "Kottler mass parameter m"),
    "mass_aspect": Setting("str", "2", "perturbed model: tr_sigma m as a polynomial in x1..xn"),
    "remainder": Setting("float", 0.0, "perturbed model: amplitude of the e^{-(n+1)r} term"),
    "r_min": Setting("float", 1.0, "inner boundary of the data domain"),
    "boost_rapidity": Setting("float", 0.0, "rapidity of the chart boost (0 = none)"),
    "boost_axis": Setting("floats", (1.0, 0.0, 0.0), "spatial axis of the chart boost"),
    "kappa": Setting("choice", "none", "second fundamental form family", KAPPAS),
    "kappa_amplitude": Setting("float", 1.0, "amplitude of kappa"),
    "kappa_direction": Setting("floats", (1.0, 0.0, 0.0), "direction vector of l=1 kappa families"),
    "kappa_order": Setting("float", 4.0, "scalar_l1: radial decay exponent of beta"),
    "kappa_plane": Setting("floats", (1.0, 2.0), "rotation: plane as two 1-based axes"),
    "pipeline": Setting("choice", "all", "pipeline to run", PIPELINES),
    "bandlimit": Setting("int", 16, "spherical harmonic bandlimit L"),
    "ladder": Setting("floats", (4.0, 5.0, 6.0, 7.0, 8.0), "charge radius ladder"),
    "charge_tol": Setting("float", 1e-6, "relative tail tolerance of charge extrapolation"),
    "schedule": Setting("floats", (4.0, 5.0, 6.0, 7.0, 8.0), "CMC leaf radii"),
    "cmc_tol": Setting("float", 1e-10, "pointwise Newton tolerance on H"),
    "center_tol": Setting("float", 1e-6, "Cauchy tolerance of the leaf-center limit"),
    "boost_check_tol": Setting("float", 1e-7, "distance tolerance for the boosted center check"),
    "evolution_ladder": Setting("floats", (3.0, 4.0, 5.0, 6.0, 7.0), "radius ladder of the rate charges"),
    "strict_decay": Setting("bool", False, "treat decay-ladder violations as errors"),
    "out": Setting("str", "ahcom-out", "output directory"),
}

_KEY = re.compile(r"[a-z][a-z0-9_]*")
_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def defaults():
    return {k: s.default for k, s in SCHEMA.items()}


def _convert(key, raw, where):
    s = SCHEMA[key]
    text = raw.strip()
    try:
        if s.kind == "int":
            return int(text)
        if s.kind == "float":
            return float(text)
        if s.kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if s.kind == "floats":
            items = [p for p in text.split(",") if p.strip()]
            if not items:
                raise ValueError("empty list")
            return tuple(float(p) for p in items)
        if s.kind == "choice":
            if text not in s.choices:
                raise ValueError(f"expected one of {', '.join(s.choices)}")
            return text
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None


def parse_config(text, source="<config>"):
    """Parse config text into a dict of the keys it sets."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = re.split(r"\s#", line, maxsplit=1)[0].strip()
        if not body or body.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = (p.strip() for p in body.split("=", 1))
        if not _KEY.fullmatch(key):
            raise ConfigError(f"{where}: malformed key {key!r}")
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        out[key] = _convert(key, value, where)
    return out


def apply_overrides(cfg, overrides, source):
    for key, raw in overrides.items():
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key {key!r}")
        cfg[key] = raw if not isinstance(raw, str) else _convert(key, raw, source)
    return cfg


def load_config(path=None, environ=None, overrides=None):
    """Defaults, then the file at ``path``, then ``AHCOM_*`` variables, then ``overrides``."""
    cfg = defaults()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        cfg.update(parse_config(text, str(path)))
    environ = os.environ if environ is None else environ
    env = {k[len(ENV_PREFIX):].lower(): v for k, v in environ.items() if k.startswith(ENV_PREFIX)}
    apply_overrides(cfg, env, "environment")
    apply_overrides(cfg, overrides or {}, "command line")
    return cfg
