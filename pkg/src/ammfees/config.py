"""Run configuration: TOML file with typed sections plus flag overrides.

Unknown sections or keys are rejected so typos fail loudly.  Defaults
reproduce the baseline experiment (depth 1e8, y0 1000, symmetric rates 50,
decay 2, oracle 100, horizon 1, price-spaced grid stepping the marginal
rate by 0.1).
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .market import MarketParams
from .pool import AssetGrid, PoolSpec, build_price_grid, build_uniform_grid

_DEFAULTS: dict = {
    "pool": {"depth_sq": 1e8, "y0": 1000.0},
    "grid": {"kind": "price", "n": 20, "dz": 0.1, "delta": 0.5},
    "market": {"lambda_sell": 50.0, "lambda_buy": 50.0, "k": 2.0, "zeta": 0.0,
               "s0": 100.0, "sigma": 0.0, "phi": 0.0, "horizon": 1.0},
    "solver": {"time_points": 1001, "ode_steps": 1000},
    "sim": {"n_paths": 20000, "n_steps": 1000, "seed": 12345,
            "strategies": ["optimal_fa", "linear_fa", "constant"],
            "record_paths": False, "constant_fee_time": 0.5,
            "jump_scheme": "bernoulli", "fee_clamp": [],
            "block_size": 4096},
    "limits": {"fa_ks": [0.5, 0.1, 0.02], "sa_ks": [0.25, 0.05, 0.01], "t": 0.5},
    "output": {"directory": "out"},
}

_KNOWN_STRATEGIES = ("optimal_fa", "optimal_sa", "linear_fa", "constant")


@dataclass
class RunConfig:
    """Validated configuration tree; see _DEFAULTS for the key grammar."""

    sections: dict = field(default_factory=lambda: copy.deepcopy(_DEFAULTS))

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    # ---- factories -------------------------------------------------

    def pool_spec(self) -> PoolSpec:
        p = self.sections["pool"]
        return PoolSpec(depth_sq=p["depth_sq"], y0=p["y0"])

    def grid(self, spec: PoolSpec | None = None) -> AssetGrid:
        spec = spec or self.pool_spec()
        g = self.sections["grid"]
        if g["kind"] == "price":
            return build_price_grid(spec, g["dz"], g["n"])
        if g["kind"] == "uniform":
            return build_uniform_grid(spec, g["delta"], g["n"])
        raise ConfigError(f"grid.kind must be 'price' or 'uniform', got {g['kind']!r}")

    def market_params(self, **overrides) -> MarketParams:
        m = {**self.sections["market"], **overrides}
        return MarketParams(lambda_sell=m["lambda_sell"], lambda_buy=m["lambda_buy"],
                            k=m["k"], s0=m["s0"], horizon=m["horizon"],
                            sigma=m["sigma"], phi=m["phi"], zeta=m["zeta"])

    def fee_clamp(self) -> tuple[float, float] | None:
        raw = self.sections["sim"]["fee_clamp"]
        if not raw:
            return None
        if len(raw) != 2 or raw[0] > raw[1]:
            raise ConfigError("sim.fee_clamp must be [lo, hi] with lo <= hi")
        return (float(raw[0]), float(raw[1]))

    def strategies(self) -> list[str]:
        names = self.sections["sim"]["strategies"]
        for name in names:
            if name not in _KNOWN_STRATEGIES:
                raise ConfigError(f"unknown strategy {name!r}; "
                                  f"choose from {_KNOWN_STRATEGIES}")
        return list(names)

    def out_dir(self) -> Path:
        return Path(self.sections["output"]["directory"])


def _merge(defaults: dict, user: dict) -> dict:
    out = copy.deepcopy(defaults)
    for section, table in user.items():
        if section not in defaults:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in table.items():
            if key not in defaults[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            ref = defaults[section][key]
            if isinstance(ref, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"{section}.{key} must be a boolean")
            elif isinstance(ref, (int, float)) and not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{key} must be a number")
            elif isinstance(ref, str) and not isinstance(value, str):
                raise ConfigError(f"{section}.{key} must be a string")
            elif isinstance(ref, list) and not isinstance(value, list):
                raise ConfigError(f"{section}.{key} must be a list")
            out[section][key] = value
    return out


def load_config(path: str | Path | None = None) -> RunConfig:
    """Parse and validate a TOML config file; None gives pure defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file is not valid TOML: {exc}")
    return RunConfig(sections=_merge(_DEFAULTS, user))


def apply_overrides(cfg: RunConfig, out_dir=None, seed=None, paths=None,
                    steps=None) -> RunConfig:
    if out_dir is not None:
        cfg.sections["output"]["directory"] = str(out_dir)
    if seed is not None:
        cfg.sections["sim"]["seed"] = int(seed)
    if paths is not None:
        cfg.sections["sim"]["n_paths"] = int(paths)
    if steps is not None:
        cfg.sections["sim"]["n_steps"] = int(steps)
    return cfg
