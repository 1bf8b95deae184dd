"""Tests for the strict JSON configuration layer."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aggrokin import ConfigurationError, Grid, load_config, parse_config_dict
from aggrokin.config import build_initial


def minimal(**extra):
    cfg = {"experiment": "equilibria", "params": {"m": 1.0, "lambda": 0.25}}
    cfg.update(extra)
    return cfg


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


# ---------------------------------------------------------------------------
# validation


def test_load_valid_config(tmp_path):
    p = write_cfg(tmp_path, minimal(seed=7, potential={"kind": "indicator",
                                                       "half_width": 0.5,
                                                       "amplitude": 1.0}))
    cfg = load_config(p)
    assert cfg.experiment == "equilibria"
    assert cfg.seed == 7
    assert cfg.source == p
    assert cfg.get("missing", "fallback") == "fallback"
    prm = cfg.params()
    assert prm.m == 1.0 and prm.lam == 0.25 and prm.eps == 1.0
    pot = cfg.potential()
    assert pot.kind == "indicator" and pot.half_width == 0.5


def test_unknown_key_rejected_by_name():
    with pytest.raises(ConfigurationError, match="lamda"):
        parse_config_dict(minimal(lamda=1.0))


def test_unknown_nested_key_rejected():
    bad = minimal()
    bad["params"]["decay"] = 1.0
    with pytest.raises(ConfigurationError, match="decay"):
        parse_config_dict(bad)


def test_missing_required_keys_rejected():
    with pytest.raises(ConfigurationError, match="experiment"):
        parse_config_dict({"params": {"m": 1.0, "lambda": 1.0}})
    with pytest.raises(ConfigurationError, match="params"):
        parse_config_dict({"experiment": "equilibria"})


def test_bounds_enforced():
    with pytest.raises(ConfigurationError, match="params"):
        parse_config_dict({"experiment": "equilibria",
                           "params": {"m": -1.0, "lambda": 1.0}})
    with pytest.raises(ConfigurationError):
        parse_config_dict(minimal(eps=1.5))
    with pytest.raises(ConfigurationError):
        parse_config_dict(minimal(bins=1))
    with pytest.raises(ConfigurationError):
        parse_config_dict(minimal(experiment="made-up-run"))


def test_bad_files_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        load_config(broken)


def test_require_names_missing_keys():
    cfg = parse_config_dict(minimal(t_end=1.0))
    cfg.require("t_end")
    with pytest.raises(ConfigurationError, match="kappa"):
        cfg.require("t_end", "kappa")


# ---------------------------------------------------------------------------
# typed accessors


def test_grid_and_region_accessors():
    cfg = parse_config_dict(minimal(
        grid={"length": 8.0, "cells": 32},
        region={"halfwidth": 1.5},
    ))
    g = cfg.grid()
    assert g.dim == 1 and g.length == 8.0 and g.cells == 32
    r = cfg.region()
    assert r.lo == (-1.5,) and r.hi == (1.5,)
    boxy = parse_config_dict(minimal(region={"lo": [-1.0, 0.0], "hi": [1.0, 2.0]}))
    r2 = boxy.region()
    assert r2.dim == 2 and r2.volume == 4.0
    with pytest.raises(ConfigurationError, match="halfwidth"):
        parse_config_dict(minimal(region={"dim": 1})).region()
    with pytest.raises(ConfigurationError, match="grid"):
        parse_config_dict(minimal()).grid()
    with pytest.raises(ConfigurationError, match="potential"):
        parse_config_dict(minimal()).potential()


def test_epsilon_passed_through():
    cfg = parse_config_dict({"experiment": "micro-run",
                             "params": {"m": 2.0, "lambda": 1.0, "epsilon": 0.5}})
    assert cfg.params().eps == 0.5


def test_tabulated_potential_path_is_relative_to_config(tmp_path):
    xs = np.linspace(-1.0, 1.0, 11)
    lines = ["x,phi"] + [f"{x},1.0" for x in xs]
    (tmp_path / "kern.csv").write_text("\n".join(lines) + "\n")
    p = write_cfg(tmp_path, minimal(
        potential={"kind": "tabulated", "path": "kern.csv", "amplitude": 2.0}
    ))
    cfg = load_config(p)
    pot = cfg.potential()
    assert pot.kind == "tabulated"
    assert_allclose(float(pot.value(0.0)), 2.0)
    assert [f.name for f in cfg.input_files()] == ["kern.csv"]


# ---------------------------------------------------------------------------
# initial fields


GRID = Grid(dim=1, length=8.0, cells=32)


def test_initial_constant_and_step():
    f = build_initial({"kind": "constant", "value": 1.25}, GRID, None)
    assert f.min() == f.max() == 1.25
    s = build_initial(
        {"kind": "step", "inside": 2.0, "outside": 0.5, "halfwidth": 1.0},
        GRID, None,
    )
    x = GRID.axis()
    assert np.all(s.values[np.abs(x) <= 1.0] == 2.0)
    assert np.all(s.values[np.abs(x) > 1.0] == 0.5)


def test_initial_bump_profile():
    f = build_initial(
        {"kind": "bump", "center": 0.0, "width": 2.0, "height": 1.0, "base": 0.5},
        GRID, None,
    )
    x = GRID.axis()
    mid = f.values[np.argmin(np.abs(x))]
    assert_allclose(mid, 0.5 + np.cos(0.5 * np.pi * np.abs(x).min() / 2.0) ** 2,
                    rtol=1e-12)
    assert np.all(f.values[np.abs(x) >= 2.0] == 0.5)
    assert f.values.max() <= 1.5 + 1e-12


def test_initial_tail_profile():
    f = build_initial(
        {"kind": "tail", "inside": 4.0, "base": 1.0, "halfwidth": 1.0,
         "decay": 0.5},
        GRID, None,
    )
    x = GRID.axis()
    inside = np.abs(x) <= 1.0
    assert np.all(f.values[inside] == 4.0)
    far = np.abs(x[~inside]) - 1.0
    assert_allclose(f.values[~inside], 1.0 + 3.0 * np.exp(-far / 0.5), rtol=1e-12)


def test_initial_from_file(tmp_path):
    vals = np.linspace(0.1, 1.0, 32)
    lines = ["cell,value"] + [f"{i},{v}" for i, v in enumerate(vals)]
    (tmp_path / "u0.csv").write_text("\n".join(lines) + "\n")
    f = build_initial({"kind": "file", "path": "u0.csv"}, GRID, tmp_path)
    assert_allclose(f.values, vals)
    with pytest.raises(ConfigurationError, match="32"):
        build_initial(
            {"kind": "file", "path": "u0.csv"},
            Grid(dim=1, length=8.0, cells=64), tmp_path,
        )
    with pytest.raises(ConfigurationError, match="not found"):
        build_initial({"kind": "file", "path": "nope.csv"}, GRID, tmp_path)


def test_initial_missing_pieces_named():
    with pytest.raises(ConfigurationError, match="value"):
        build_initial({"kind": "constant"}, GRID, None)
    with pytest.raises(ConfigurationError, match="decay"):
        build_initial({"kind": "tail", "inside": 1.0, "base": 0.5,
                       "halfwidth": 1.0}, GRID, None)
