"""Run configuration: TOML parsing, validation, canonicalization, digests.

A run is described by a small TOML document::

    seed = 20240901
    paths = 1000
    iota = 0.25
    n_levels = [2, 4, 8]            # or: n_rule = {type = "geometric", base = 2, ratio = 2}

    [lambda]
    type = "powerlaw"               # or "explicit" with values = [...]
    scale = 1.0
    exponent = 2.0
    count = 8

    [q]
    type = "powerlaw"
    scale = 1.0
    exponent = 2.0
    count = 3

    [diffusion]
    type = "additive"               # or "linear" with gamma = [...], rho = [...]
    sigma = [1.0, 0.5, 0.25]

    [xi]                            # optional; defaults to zero
    type = "powerlaw"               # xi_j = scale * j**(-exponent)
    scale = 1.0
    exponent = 1.0

Every module precondition is validated here before any computation;
diagnostics name the offending key.  The canonical form is a plain nested
dict with sorted keys whose JSON rendering is the digest input, and
canonicalization is idempotent.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python 3.10
    import tomli as _toml

from .diffusion import AdditiveDiagonal, CallbackOperator, DiffusionOperator, LinearDiagonal
from .errors import ParseError, ValidationError
from .grids import LevelGrids, build_level_grids
from .spectrum import Eigensystem, make_eigensystem

__all__ = ["RunConfig", "parse_config", "parse_config_file", "canonical_dict", "config_digest"]

_KNOWN_TOP = {
    "seed", "paths", "iota", "threads", "out_dir",
    "lambda", "q", "n_levels", "n_rule", "diffusion", "xi",
}


def _as_int(raw: dict, key: str, *, required: bool = False, default=None, minimum=None):
    if key not in raw:
        if required:
            raise ValidationError(key, "is required")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(key, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ValidationError(key, f"must be >= {minimum}, got {v}")
    return int(v)


def _as_float(raw: dict, key: str, *, required: bool = False, default=None):
    if key not in raw:
        if required:
            raise ValidationError(key, "is required")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(key, f"must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(key, "must be finite")
    return v


def _as_float_list(section: dict, key: str, parent: str):
    if key not in section:
        raise ValidationError(f"{parent}.{key}", "is required")
    v = section[key]
    if not isinstance(v, list) or not v or any(
        isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(float(x))
        for x in v
    ):
        raise ValidationError(f"{parent}.{key}", "must be a non-empty list of finite numbers")
    return [float(x) for x in v]


def _spectrum_section(raw: dict, name: str) -> dict:
    if name not in raw:
        raise ValidationError(name, "is required")
    sec = raw[name]
    if not isinstance(sec, dict):
        raise ValidationError(name, "must be a table")
    kind = sec.get("type")
    if kind == "powerlaw":
        out = {
            "type": "powerlaw",
            "scale": _as_float(sec, "scale", required=True),
            "exponent": _as_float(sec, "exponent", required=True),
            "count": _as_int(sec, "count", required=True, minimum=1),
        }
        if name == "lambda" and out["scale"] <= 0.0:
            raise ValidationError("lambda.scale", "must be positive")
        if name == "lambda" and out["exponent"] <= 0.0:
            raise ValidationError("lambda.exponent", "must be positive")
        if name == "q" and out["scale"] < 0.0:
            raise ValidationError("q.scale", "must be >= 0")
        if name == "q" and out["exponent"] <= 1.0:
            raise ValidationError("q.exponent", "must exceed 1 for a finite trace")
        return out
    if kind == "explicit":
        values = _as_float_list(sec, "values", name)
        if name == "lambda":
            if values[0] <= 0.0 or any(b <= a for a, b in zip(values, values[1:])):
                raise ValidationError(
                    "lambda.values", "must be positive and strictly increasing"
                )
        if name == "q" and any(v < 0.0 for v in values):
            raise ValidationError("q.values", "must be >= 0")
        return {"type": "explicit", "values": values}
    raise ValidationError(f"{name}.type", 'must be "powerlaw" or "explicit"')


def _diffusion_section(raw: dict, n_levels: int) -> dict:
    if "diffusion" not in raw:
        raise ValidationError("diffusion", "is required")
    sec = raw["diffusion"]
    if not isinstance(sec, dict):
        raise ValidationError("diffusion", "must be a table")
    kind = sec.get("type")
    if kind == "additive":
        sigma = _as_float_list(sec, "sigma", "diffusion")
        if len(sigma) != n_levels:
            raise ValidationError(
                "diffusion.sigma", f"must list one value per noise level ({n_levels})"
            )
        return {"type": "additive", "sigma": sigma}
    if kind == "linear":
        gamma = _as_float_list(sec, "gamma", "diffusion")
        rho = _as_float_list(sec, "rho", "diffusion")
        if len(gamma) != n_levels or len(rho) != n_levels:
            raise ValidationError(
                "diffusion.gamma", f"gamma and rho must list one value per noise level ({n_levels})"
            )
        return {"type": "linear", "gamma": gamma, "rho": rho}
    raise ValidationError("diffusion.type", 'must be "additive" or "linear"')


def _xi_section(raw: dict) -> dict:
    if "xi" not in raw:
        return {"type": "zero"}
    sec = raw["xi"]
    if not isinstance(sec, dict):
        raise ValidationError("xi", "must be a table")
    kind = sec.get("type", "zero")
    if kind == "zero":
        return {"type": "zero"}
    if kind == "powerlaw":
        return {
            "type": "powerlaw",
            "scale": _as_float(sec, "scale", required=True),
            "exponent": _as_float(sec, "exponent", required=True),
        }
    if kind == "explicit":
        return {"type": "explicit", "values": _as_float_list(sec, "values", "xi")}
    raise ValidationError("xi.type", 'must be "zero", "powerlaw" or "explicit"')


def _levels_section(raw: dict, n_levels: int) -> tuple[dict, tuple[int, ...]]:
    has_list = "n_levels" in raw
    has_rule = "n_rule" in raw
    if has_list == has_rule:
        raise ValidationError("n_levels", "exactly one of n_levels and n_rule is required")
    if has_list:
        v = raw["n_levels"]
        if (
            not isinstance(v, list)
            or not v
            or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in v)
        ):
            raise ValidationError("n_levels", "must be a non-empty list of integers >= 1")
        if len(v) != n_levels:
            raise ValidationError(
                "n_levels", f"must list one step count per noise level ({n_levels})"
            )
        return {"n_levels": [int(x) for x in v]}, tuple(int(x) for x in v)
    rule = raw["n_rule"]
    if not isinstance(rule, dict) or rule.get("type") != "geometric":
        raise ValidationError("n_rule.type", 'must be "geometric"')
    base = _as_float(rule, "base", required=True)
    ratio = _as_float(rule, "ratio", required=True)
    if base < 1.0 or ratio <= 0.0:
        raise ValidationError("n_rule", "needs base >= 1 and ratio > 0")
    counts = tuple(max(1, math.ceil(base * ratio**k)) for k in range(n_levels))
    return {"n_rule": {"type": "geometric", "base": base, "ratio": ratio}}, counts


@dataclass(frozen=True)
class RunConfig:
    """Validated run description plus factory methods for the core objects."""

    seed: int
    paths: int
    iota: float
    threads: int
    out_dir: str | None
    lam_spec: dict
    q_spec: dict
    grid_spec: dict
    n_per_level: tuple[int, ...]
    diffusion_spec: dict
    xi_spec: dict

    def eigensystem(self) -> Eigensystem:
        return make_eigensystem(
            lambdas=_expand_spectrum(self.lam_spec, descending=False),
            qs=_expand_spectrum(self.q_spec, descending=True),
        )

    def level_grids(self) -> LevelGrids:
        return build_level_grids(self.n_per_level)

    def operator(self, es: Eigensystem) -> DiffusionOperator:
        spec = self.diffusion_spec
        if spec["type"] == "additive":
            return AdditiveDiagonal(spec["sigma"], es.n_modes, iota=self.iota)
        return LinearDiagonal(spec["gamma"], spec["rho"], es.n_modes, iota=self.iota)

    def initial_state(self, es: Eigensystem) -> np.ndarray:
        spec = self.xi_spec
        if spec["type"] == "zero":
            return np.zeros(es.n_modes)
        if spec["type"] == "powerlaw":
            j = np.arange(1, es.n_modes + 1, dtype=float)
            return spec["scale"] * j ** (-spec["exponent"])
        values = np.asarray(spec["values"], dtype=float)
        if values.size != es.n_modes:
            raise ValidationError("xi.values", f"must list {es.n_modes} coefficients")
        return values


def _expand_spectrum(spec: dict, descending: bool) -> list[float]:
    if spec["type"] == "explicit":
        return spec["values"]
    k = np.arange(1, spec["count"] + 1, dtype=float)
    expo = -spec["exponent"] if descending else spec["exponent"]
    return list(spec["scale"] * k**expo)


def _validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ParseError("configuration root must be a table")
    for key in raw:
        if key not in _KNOWN_TOP:
            raise ValidationError(key, "is not a recognised configuration key")

    seed = _as_int(raw, "seed", required=True, minimum=0)
    if seed >= 2**64:
        raise ValidationError("seed", "must fit in 64 unsigned bits")
    paths = _as_int(raw, "paths", default=1, minimum=1)
    threads = _as_int(raw, "threads", default=1, minimum=1)
    iota = _as_float(raw, "iota", required=True)
    if not 0.0 <= iota <= 0.5:
        raise ValidationError("iota", "must lie in [0, 0.5]")
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ValidationError("out_dir", "must be a string path")

    lam_spec = _spectrum_section(raw, "lambda")
    q_spec = _spectrum_section(raw, "q")
    n_modes = lam_spec["count"] if lam_spec["type"] == "powerlaw" else len(lam_spec["values"])
    n_levels = q_spec["count"] if q_spec["type"] == "powerlaw" else len(q_spec["values"])
    grid_spec, n_per_level = _levels_section(raw, n_levels)
    diffusion_spec = _diffusion_section(raw, n_levels)
    xi_spec = _xi_section(raw)
    if xi_spec["type"] == "explicit" and len(xi_spec["values"]) != n_modes:
        raise ValidationError("xi.values", f"must list {n_modes} coefficients")

    cfg = RunConfig(
        seed=seed,
        paths=paths,
        iota=iota,
        threads=threads,
        out_dir=out_dir,
        lam_spec=lam_spec,
        q_spec=q_spec,
        grid_spec=grid_spec,
        n_per_level=n_per_level,
        diffusion_spec=diffusion_spec,
        xi_spec=xi_spec,
    )
    # cheap end-to-end dry build so every module precondition fires here
    es = cfg.eigensystem()
    cfg.operator(es)
    cfg.initial_state(es)
    cfg.level_grids()
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML configuration document."""
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from exc
    return _validate(raw)


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def canonical_dict(cfg: RunConfig) -> dict:
    """Plain nested dict capturing the experiment identity; feeding it back
    through validation reproduces it exactly (idempotent canonicalization).

    Execution placement (threads, out_dir) is deliberately excluded: results
    must not depend on it, so it cannot change the digest.
    """
    out = {
        "seed": cfg.seed,
        "paths": cfg.paths,
        "iota": cfg.iota,
        "lambda": cfg.lam_spec,
        "q": cfg.q_spec,
        "diffusion": cfg.diffusion_spec,
        "xi": cfg.xi_spec,
    }
    out.update(cfg.grid_spec)
    return out


def config_digest(cfg: RunConfig) -> str:
    """Stable hash of the canonical configuration."""
    blob = json.dumps(canonical_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
