"""Strict JSON experiment configuration: schema validation and builders.

Configurations are plain JSON validated against the published schema
(``config_schema.json``): unknown keys are rejected by name, numeric
bounds are enforced up front, and every experiment recipe then pulls its
typed pieces (model parameters, kernel, grid, initial field, region)
through the helpers here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .equilibria import ModelParams
from .errors import ConfigurationError
from .fields import Field, Grid, Region
from .potential import Potential

__all__ = ["Config", "load_config", "parse_config_dict", "schema"]

_SCHEMA = None


def schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files("aggrokin").joinpath("config_schema.json").read_text()
        _SCHEMA = json.loads(text)
    return _SCHEMA


def _describe(err) -> str:
    loc = "/".join(str(p) for p in err.absolute_path) or "(top level)"
    return f"config invalid at {loc}: {err.message}"


def parse_config_dict(raw: dict, base_dir: Path = None) -> "Config":
    """Validate a configuration dict and wrap it."""
    validator = Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigurationError("; ".join(_describe(e) for e in errors[:3]))
    return Config(raw, base_dir or Path.cwd())


def load_config(path) -> "Config":
    """Read and validate a JSON experiment configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    cfg = parse_config_dict(raw, base_dir=path.parent)
    cfg.source = path
    return cfg


@dataclass
class Config:
    """Validated configuration with typed accessors."""

    raw: dict
    base_dir: Path
    source: Path = None

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, *keys):
        missing = [k for k in keys if k not in self.raw]
        if missing:
            raise ConfigurationError(
                f"experiment {self.experiment!r} requires config keys: "
                + ", ".join(missing)
            )

    def params(self) -> ModelParams:
        p = self.raw["params"]
        return ModelParams(
            m=float(p["m"]),
            lam=float(p["lambda"]),
            eps=float(p.get("epsilon", 1.0)),
        )

    def potential(self) -> Potential:
        if "potential" not in self.raw:
            raise ConfigurationError(
                f"experiment {self.experiment!r} requires a 'potential' entry"
            )
        spec = dict(self.raw["potential"])
        if spec.get("kind") == "tabulated":
            if "path" not in spec:
                raise ConfigurationError("tabulated kernel needs a 'path'")
            spec["path"] = str((self.base_dir / spec["path"]).resolve())
        return Potential.from_spec(spec)

    def input_files(self) -> list:
        """Paths of every external file the config references."""
        out = []
        pot = self.raw.get("potential", {})
        if pot.get("kind") == "tabulated" and "path" in pot:
            out.append(self.base_dir / pot["path"])
        for key in ("initial", "initial_low", "initial_high"):
            spec = self.raw.get(key, {})
            if spec.get("kind") == "file" and "path" in spec:
                out.append(self.base_dir / spec["path"])
        return out

    def grid(self, default_dim: int = 1) -> Grid:
        if "grid" not in self.raw:
            raise ConfigurationError(
                f"experiment {self.experiment!r} requires a 'grid' entry"
            )
        g = self.raw["grid"]
        return Grid(
            dim=int(g.get("dim", default_dim)),
            length=float(g["length"]),
            cells=int(g["cells"]),
        )

    def region(self, dim: int = 1) -> Region:
        if "region" not in self.raw:
            raise ConfigurationError(
                f"experiment {self.experiment!r} requires a 'region' entry"
            )
        r = self.raw["region"]
        if "halfwidth" in r:
            return Region.centered(float(r["halfwidth"]), dim=int(r.get("dim", dim)))
        if "lo" not in r or "hi" not in r:
            raise ConfigurationError("region needs either 'halfwidth' or 'lo'+'hi'")
        return Region(tuple(float(v) for v in r["lo"]), tuple(float(v) for v in r["hi"]))

    def initial_field(self, grid: Grid, key: str = "initial") -> Field:
        if key not in self.raw:
            raise ConfigurationError(
                f"experiment {self.experiment!r} requires an {key!r} entry"
            )
        return build_initial(self.raw[key], grid, self.base_dir)


def build_initial(spec: dict, grid: Grid, base_dir: Path) -> Field:
    """Construct the initial density field from its config description."""
    kind = spec.get("kind")
    need = lambda *ks: _need(spec, kind, *ks)
    if kind == "constant":
        need("value")
        return Field.constant(grid, float(spec["value"]))
    x = grid.coords()
    if kind == "bump":
        need("center", "width", "height", "base")
        c, w = float(spec["center"]), float(spec["width"])
        h, b = float(spec["height"]), float(spec["base"])
        if grid.dim == 1:
            r = np.abs(x[..., 0] - c)
        else:
            r = np.sqrt(np.sum((x - c) ** 2, axis=-1))
        vals = b + h * np.cos(0.5 * math.pi * np.clip(r / w, 0.0, 1.0)) ** 2
        return Field(grid, vals)
    if kind == "step":
        need("inside", "outside", "halfwidth")
        a = float(spec["halfwidth"])
        inside = np.all(np.abs(x) <= a, axis=-1)
        vals = np.where(inside, float(spec["inside"]), float(spec["outside"]))
        return Field(grid, vals)
    if kind == "tail":
        # plateau that decays exponentially toward a base level outside
        need("inside", "base", "halfwidth", "decay")
        a = float(spec["halfwidth"])
        inside_v = float(spec["inside"])
        base = float(spec["base"])
        decay = float(spec["decay"])
        dist = np.maximum(0.0, np.max(np.abs(x), axis=-1) - a)
        vals = base + (inside_v - base) * np.exp(-dist / decay)
        return Field(grid, vals)
    if kind == "file":
        need("path")
        path = (base_dir / spec["path"]).resolve()
        if not path.is_file():
            raise ConfigurationError(f"initial-condition file not found: {path}")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        vals = np.atleast_2d(data)[:, -1]
        if vals.size != grid.cells**grid.dim:
            raise ConfigurationError(
                f"initial file has {vals.size} values; grid needs "
                f"{grid.cells**grid.dim}"
            )
        return Field(grid, vals.reshape(grid.shape))
    raise ConfigurationError(f"unknown initial-condition kind {kind!r}")


def _need(spec: dict, kind: str, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise ConfigurationError(
            f"initial condition {kind!r} requires: " + ", ".join(missing)
        )
