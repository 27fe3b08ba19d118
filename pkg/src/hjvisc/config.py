"""Run configuration: a small TOML file with one level of sections.

Example::

    [problem]
    a = 0.0
    b = 1.0
    p = 1.5
    grid_n = 1025
    eps = [0.1, 0.05, 0.025]

    [data]
    kind = "bump"            # zero | constant | bump | samples
    smoothness = "lipschitz_hat"
    center = 0.5
    width = 0.5
    height = 1.0

    [experiment]
    name = "rates"

    [output]
    dir = "out"

Every key is checked against the schema below; unknown keys and
out-of-range values are rejected before anything is solved.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .core import (
    DataFunction,
    DomainGeometry,
    ProblemSpec,
    c2_compact_bump,
    c2_zero_boundary_bump,
    constant_data,
    hat_bump,
    make_exponents,
    sampled_data,
    zero_data,
)

__all__ = ["ConfigError", "RunConfig", "EXPERIMENTS", "load_config", "parse_config"]

EXPERIMENTS = ("solve", "rates", "barriers", "profile", "gradient", "semiconcavity", "oracle", "cutoff")
NEEDS_SWEEP = ("rates", "gradient")
SMOOTHNESS = ("lipschitz_hat", "c2_compact", "c2_zero_boundary")


class ConfigError(ValueError):
    pass


# section -> key -> (types, default); a default of ... marks a required key
_REAL = (int, float)
SCHEMA = {
    "problem": {
        "a": (_REAL, 0.0),
        "b": (_REAL, 1.0),
        "p": (_REAL, ...),
        "grid_n": (int, 1025),
        "eps": (list, ...),
    },
    "data": {
        "kind": (str, "zero"),
        "c": (_REAL, 0.0),
        "center": (_REAL, 0.5),
        "width": (_REAL, 0.25),
        "height": (_REAL, 1.0),
        "smoothness": (str, "lipschitz_hat"),
        "xs": (list, None),
        "values": (list, None),
    },
    "experiment": {
        "name": (str, None),
        "boundary_mode": (str, "asymptotic_offset"),
        "n_ghost": (int, 2),
        "m_list": (list, None),
        "etas": (list, [0.2, 0.5]),
        "delta_shift": (_REAL, 0.0),
        "n_samples": (int, 10_000),
        "band": (list, [2.0, 10.0]),
        "dt": (_REAL, 0.01),
        "v_max": (_REAL, 4.0),
        "n_v": (int, 161),
        "refine": (bool, True),
        "kappas": (list, [0.16, 0.08, 0.04, 0.02]),
        "workers": (int, 1),
    },
    "output": {
        "dir": (str, "out"),
        "figures": (bool, True),
    },
    "tolerances": {
        "newton_tol": (_REAL, 1e-12),
        "sweep_stop_tol": (_REAL, None),
        "sc_tol": (_REAL, None),
        "rate_margin": (_REAL, 0.1),
        "profile_tol": (_REAL, None),
        "sandwich_tol": (_REAL, 1e-10),
        "oracle_tol": (_REAL, 0.05),
        "oracle_order": (_REAL, 0.7),
        "semiconcavity_window": (list, [-1.3, -0.7]),
        "semiconcavity_slack": (_REAL, 0.1),
        "gradient_spread": (_REAL, 2.0),
        "smooth_cutoff_order": (_REAL, 1.7),
    },
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    problem: dict
    data: dict
    params: dict
    output: dict
    tolerances: dict
    source: str = ""
    raw: dict = field(default_factory=dict, compare=False)

    def geometry(self) -> DomainGeometry:
        return DomainGeometry(self.problem["a"], self.problem["b"])

    def data_function(self) -> DataFunction:
        return _build_data(self.data, self.geometry())

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            geometry=self.geometry(),
            exponents=make_exponents(self.problem["p"]),
            f=self.data_function(),
            epsilons=tuple(self.problem["eps"]),
            grid_n=self.problem["grid_n"],
        )

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "problem": dict(self.problem),
            "data": dict(self.data),
            "experiment_params": dict(self.params),
            "output": dict(self.output),
            "tolerances": dict(self.tolerances),
        }


def _build_data(data: dict, geom: DomainGeometry) -> DataFunction:
    kind = data["kind"]
    if kind == "zero":
        return zero_data()
    if kind == "constant":
        return constant_data(data["c"])
    if kind == "bump":
        maker = {
            "lipschitz_hat": lambda: hat_bump(geom, data["center"], data["width"], data["height"]),
            "c2_compact": lambda: c2_compact_bump(geom, data["center"], data["width"], data["height"]),
            "c2_zero_boundary": lambda: c2_zero_boundary_bump(geom, data["height"]),
        }
        return maker[data["smoothness"]]()
    return sampled_data(geom, data["xs"], data["values"])


def _fill(section: str, given: dict, where: str) -> dict:
    schema = SCHEMA[section]
    out = {}
    for key in given:
        if key not in schema:
            raise ConfigError(f"{where}: unknown key [{section}].{key} (allowed: {', '.join(schema)})")
    for key, (types, default) in schema.items():
        if key not in given:
            if default is ...:
                raise ConfigError(f"{where}: missing required key [{section}].{key}")
            out[key] = default
            continue
        val = given[key]
        if isinstance(val, bool) and types is not bool:
            raise ConfigError(f"{where}: [{section}].{key} must not be a boolean")
        if not isinstance(val, types):
            raise ConfigError(f"{where}: [{section}].{key} has type {type(val).__name__}")
        out[key] = float(val) if types is _REAL else val
    return out


def _reals(name, seq, where):
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in seq):
        raise ConfigError(f"{where}: {name} must be a list of numbers")
    vals = [float(v) for v in seq]
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{where}: {name} must be finite")
    return vals


def _validate(cfg: dict, experiment: str, where: str):
    pr, data, ex, tol = cfg["problem"], cfg["data"], cfg["experiment"], cfg["tolerances"]
    if not 1.0 < pr["p"] <= 2.0:
        raise ConfigError(f"{where}: [problem].p = {pr['p']:g} outside the legal range (1, 2]")
    if not pr["b"] > pr["a"]:
        raise ConfigError(f"{where}: [problem] needs b > a")
    if pr["grid_n"] < 5:
        raise ConfigError(f"{where}: [problem].grid_n must be >= 5")
    eps = _reals("[problem].eps", pr["eps"], where)
    if not eps or any(not 0.0 < e < 1.0 for e in eps):
        raise ConfigError(f"{where}: [problem].eps values must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"{where}: [problem].eps must be strictly decreasing")
    if experiment in NEEDS_SWEEP and len(eps) < 3:
        raise ConfigError(f"{where}: experiment {experiment!r} needs at least 3 eps values, got {len(eps)}")
    pr["eps"] = eps

    if data["kind"] not in ("zero", "constant", "bump", "samples"):
        raise ConfigError(f"{where}: [data].kind must be zero, constant, bump or samples")
    if data["smoothness"] not in SMOOTHNESS:
        raise ConfigError(f"{where}: [data].smoothness must be one of {', '.join(SMOOTHNESS)}")
    if data["kind"] == "bump" and (data["width"] <= 0 or data["height"] < 0):
        raise ConfigError(f"{where}: [data] bump needs width > 0 and height >= 0")
    if data["kind"] == "samples":
        if data["xs"] is None or data["values"] is None:
            raise ConfigError(f"{where}: [data] samples need xs and values")
        data["xs"] = _reals("[data].xs", data["xs"], where)
        data["values"] = _reals("[data].values", data["values"], where)

    if ex["boundary_mode"] not in ("dirichlet_sweep", "asymptotic_offset"):
        raise ConfigError(f"{where}: [experiment].boundary_mode must be dirichlet_sweep or asymptotic_offset")
    if ex["n_ghost"] < 1:
        raise ConfigError(f"{where}: [experiment].n_ghost must be >= 1")
    if ex["m_list"] is not None:
        ex["m_list"] = _reals("[experiment].m_list", ex["m_list"], where)
    ex["etas"] = _reals("[experiment].etas", ex["etas"], where)
    if any(not 0.0 < e < 1.0 for e in ex["etas"]):
        raise ConfigError(f"{where}: [experiment].etas are fractions of the cap and must lie in (0, 1)")
    band = _reals("[experiment].band", ex["band"], where)
    if len(band) != 2 or not 0 < band[0] < band[1]:
        raise ConfigError(f"{where}: [experiment].band must be [c1, c2] with 0 < c1 < c2")
    ex["band"] = band
    ex["kappas"] = _reals("[experiment].kappas", ex["kappas"], where)
    if ex["n_samples"] < 100:
        raise ConfigError(f"{where}: [experiment].n_samples must be >= 100")
    if ex["dt"] <= 0 or ex["v_max"] <= 0:
        raise ConfigError(f"{where}: [experiment] dt and v_max must be positive")
    if ex["workers"] < 1:
        raise ConfigError(f"{where}: [experiment].workers must be >= 1")
    window = _reals("[tolerances].semiconcavity_window", tol["semiconcavity_window"], where)
    if len(window) != 2 or window[0] >= window[1]:
        raise ConfigError(f"{where}: [tolerances].semiconcavity_window must be [lo, hi] with lo < hi")
    tol["semiconcavity_window"] = window
    if tol["newton_tol"] <= 0:
        raise ConfigError(f"{where}: [tolerances].newton_tol must be positive")


def parse_config(text: str, experiment: str | None = None, source: str = "<string>") -> RunConfig:
    """Parse and validate config text; ``experiment`` (the subcommand) wins if given."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}] (allowed: {', '.join(SCHEMA)})")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: top-level key {section!r} must be a section")
    cfg = {s: _fill(s, raw.get(s, {}), source) for s in SCHEMA}
    named = cfg["experiment"].pop("name")
    if experiment is None:
        experiment = named
    elif named is not None and named != experiment:
        raise ConfigError(f"{source}: [experiment].name = {named!r} but the command asks for {experiment!r}")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}: experiment must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")
    _validate(cfg, experiment, source)
    rc = RunConfig(
        experiment=experiment,
        problem=cfg["problem"],
        data=cfg["data"],
        params=cfg["experiment"],
        output=cfg["output"],
        tolerances=cfg["tolerances"],
        source=source,
        raw=raw,
    )
    try:
        rc.problem_spec()
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return rc


def load_config(path, experiment: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    return parse_config(path.read_text(encoding="utf-8"), experiment, str(path))
