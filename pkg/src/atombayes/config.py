"""Experiment configuration: JSON schema validation and object builders.

One config file drives one run.  Validation happens before any computation,
rejects unknown keys, and reports the full dotted path of the offending
key.  ``normalize_config`` also injects defaults, so the config digest
embedded in artifacts covers the fully resolved settings.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .forward import (
    GaussianKernelForward,
    HelmholtzForward,
    SensorSet,
    sensor_grid,
)
from .measures import Domain
from .posterior import NoiseModel
from .priors import (
    ComplexGaussianMark,
    FixedCount,
    GaussianMark,
    LogNormalMark,
    PointLocation,
    PoissonCount,
    PriorSpec,
    TruncatedPoissonCount,
    UniformLocations,
    UnitWeights,
    geometric_weights,
)
from .sampler import SamplerConfig

CONFIG_SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "sample-prior", "invert", "evidence", "hellinger",
    "stability", "consistency", "recover",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


def _check_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}: unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}: missing required key")


def _number(obj, path, positive=False, nonnegative=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    v = float(obj)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{path}: must be > 0")
    if nonnegative and v < 0:
        raise ConfigError(f"{path}: must be >= 0")
    return v


def _integer(obj, path, minimum=None):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigError(f"{path}: expected an integer")
    if minimum is not None and obj < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return obj


def _vector(obj, path, length=None):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"{path}: expected a non-empty array of numbers")
    out = [_number(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    if length is not None and len(out) != length:
        raise ConfigError(f"{path}: expected {length} entries, got {len(out)}")
    return out


def _string(obj, path, choices=None):
    if not isinstance(obj, str):
        raise ConfigError(f"{path}: expected a string")
    if choices is not None and obj not in choices:
        raise ConfigError(f"{path}: must be one of {sorted(choices)}")
    return obj


def _complex_entry(obj, path) -> complex:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(float(obj), 0.0)
    if isinstance(obj, list) and len(obj) == 2:
        return complex(_number(obj[0], f"{path}[0]"), _number(obj[1], f"{path}[1]"))
    raise ConfigError(f"{path}: expected a number or an [re, im] pair")


# ---------------------------------------------------------------------------
# Section validators (normalize in place on a deep copy)


def _validate_domain(cfg):
    _check_keys(cfg, "domain", ("lower", "upper"))
    lo = _vector(cfg["lower"], "domain.lower")
    hi = _vector(cfg["upper"], "domain.upper", length=len(lo))
    if any(a >= b for a, b in zip(lo, hi)):
        raise ConfigError("domain.upper: must exceed domain.lower componentwise")
    return len(lo)


def _validate_prior(cfg, dim):
    _check_keys(cfg, "prior", ("count", "location", "mark"), ("weights",))
    count = cfg["count"]
    kind = _string(count.get("kind"), "prior.count.kind",
                   {"poisson", "fixed", "truncated_poisson"})
    if kind == "poisson":
        _check_keys(count, "prior.count", ("kind", "gamma"))
        _number(count["gamma"], "prior.count.gamma", positive=True)
    elif kind == "fixed":
        _check_keys(count, "prior.count", ("kind", "n"))
        _integer(count["n"], "prior.count.n", minimum=0)
    else:
        _check_keys(count, "prior.count", ("kind", "gamma"), ("k_max",))
        _number(count["gamma"], "prior.count.gamma", positive=True)
        if "k_max" in count:
            _integer(count["k_max"], "prior.count.k_max", minimum=0)

    location = cfg["location"]
    kind = _string(location.get("kind"), "prior.location.kind", {"uniform", "point"})
    if kind == "uniform":
        _check_keys(location, "prior.location", ("kind",))
    else:
        _check_keys(location, "prior.location", ("kind", "point"))
        _vector(location["point"], "prior.location.point", length=dim)

    mark = cfg["mark"]
    kind = _string(mark.get("kind"), "prior.mark.kind",
                   {"gaussian", "lognormal", "complex_gaussian"})
    if kind == "gaussian":
        _check_keys(mark, "prior.mark", ("kind", "mean", "cov"))
        mean = mark["mean"]
        if isinstance(mean, list):
            m = len(_vector(mean, "prior.mark.mean"))
        else:
            _number(mean, "prior.mark.mean")
            m = 1
        cov = mark["cov"]
        if isinstance(cov, list):
            if len(cov) != m:
                raise ConfigError("prior.mark.cov: must be m x m")
            for i, row in enumerate(cov):
                _vector(row, f"prior.mark.cov[{i}]", length=m)
        else:
            _number(cov, "prior.mark.cov", positive=True)
    elif kind == "lognormal":
        _check_keys(mark, "prior.mark", ("kind", "mu", "sigma2"))
        _number(mark["mu"], "prior.mark.mu")
        _number(mark["sigma2"], "prior.mark.sigma2", positive=True)
    else:
        _check_keys(mark, "prior.mark", ("kind", "sigma2"), ("mean", "relation"))
        _number(mark["sigma2"], "prior.mark.sigma2", positive=True)
        if "mean" in mark:
            _complex_entry(mark["mean"], "prior.mark.mean")
        if "relation" in mark:
            _complex_entry(mark["relation"], "prior.mark.relation")

    weights = cfg.setdefault("weights", {"kind": "unit"})
    kind = _string(weights.get("kind"), "prior.weights.kind", {"unit", "geometric"})
    if kind == "unit":
        _check_keys(weights, "prior.weights", ("kind",))
    else:
        _check_keys(weights, "prior.weights", ("kind", "ratio", "k_max"), ("scale",))
        r = _number(weights["ratio"], "prior.weights.ratio", positive=True)
        if r >= 1:
            raise ConfigError("prior.weights.ratio: must be < 1")
        _integer(weights["k_max"], "prior.weights.k_max", minimum=1)
        if "scale" in weights:
            _number(weights["scale"], "prior.weights.scale", positive=True)


def _validate_sensors(cfg, path, dim):
    has_list = "sensors" in cfg
    has_grid = "sensor_grid" in cfg
    if has_list == has_grid:
        raise ConfigError(f"{path}: exactly one of 'sensors'/'sensor_grid' required")
    if has_list:
        sensors = cfg["sensors"]
        if not isinstance(sensors, list) or not sensors:
            raise ConfigError(f"{path}.sensors: expected a non-empty array")
        for i, s in enumerate(sensors):
            _vector(s, f"{path}.sensors[{i}]", length=dim)
    else:
        grid = cfg["sensor_grid"]
        _check_keys(grid, f"{path}.sensor_grid", ("n",), ("lower", "upper"))
        _integer(grid["n"], f"{path}.sensor_grid.n", minimum=1)
        if "lower" in grid:
            _vector(grid["lower"], f"{path}.sensor_grid.lower", length=dim)
        if "upper" in grid:
            _vector(grid["upper"], f"{path}.sensor_grid.upper", length=dim)


def _validate_forward(cfg, dim):
    kind = _string(cfg.get("kind"), "forward.kind",
                   {"gaussian_kernel", "helmholtz", "tabulated"})
    if kind == "gaussian_kernel":
        _check_keys(cfg, "forward", ("kind", "sigma"), ("sensors", "sensor_grid"))
        _number(cfg["sigma"], "forward.sigma", positive=True)
        _validate_sensors(cfg, "forward", dim)
    elif kind == "helmholtz":
        _check_keys(cfg, "forward", ("kind", "kappa"), ("sensors", "sensor_grid"))
        _number(cfg["kappa"], "forward.kappa", positive=True)
        if dim not in (2, 3):
            raise ConfigError("forward.kind: helmholtz requires a 2-d or 3-d domain")
        _validate_sensors(cfg, "forward", dim)
    else:
        _check_keys(cfg, "forward", ("kind", "path"))
        _string(cfg["path"], "forward.path")


def _validate_noise(cfg):
    _check_keys(cfg, "noise", (), ("variance", "matrix_path"))
    if ("variance" in cfg) == ("matrix_path" in cfg):
        raise ConfigError("noise: exactly one of 'variance'/'matrix_path' required")
    if "variance" in cfg:
        _number(cfg["variance"], "noise.variance", positive=True)
    else:
        _string(cfg["matrix_path"], "noise.matrix_path")


_SAMPLER_DEFAULTS = {
    "n_iters": 10_000, "burn_in": 1_000, "thin": 1,
    "p_birth": 0.25, "p_death": 0.25, "p_move": 0.30, "p_perturb": 0.20,
}


def _validate_sampler(cfg):
    optional = tuple(_SAMPLER_DEFAULTS) + ("location_step", "amplitude_step", "k_max")
    _check_keys(cfg, "sampler", (), optional)
    for key, default in _SAMPLER_DEFAULTS.items():
        cfg.setdefault(key, default)
    _integer(cfg["n_iters"], "sampler.n_iters", minimum=0)
    _integer(cfg["burn_in"], "sampler.burn_in", minimum=0)
    _integer(cfg["thin"], "sampler.thin", minimum=1)
    total = 0.0
    for key in ("p_birth", "p_death", "p_move", "p_perturb"):
        total += _number(cfg[key], f"sampler.{key}", nonnegative=True)
    if abs(total - 1.0) > 1e-12:
        raise ConfigError("sampler.p_birth: move probabilities must sum to 1")
    for key in ("location_step", "amplitude_step"):
        if key in cfg:
            _number(cfg[key], f"sampler.{key}", positive=True)
    if "k_max" in cfg:
        _integer(cfg["k_max"], "sampler.k_max", minimum=0)


def _validate_scenario(cfg, path, dim):
    _check_keys(cfg, path, ("truth",), ("zero_noise",))
    truth = cfg["truth"]
    if truth == "sample-from-prior":
        pass
    elif isinstance(truth, dict):
        _check_keys(truth, f"{path}.truth", ("atoms",))
        atoms = truth["atoms"]
        if not isinstance(atoms, list):
            raise ConfigError(f"{path}.truth.atoms: expected an array")
        for i, atom in enumerate(atoms):
            _check_keys(atom, f"{path}.truth.atoms[{i}]", ("y", "q"))
            _vector(atom["y"], f"{path}.truth.atoms[{i}].y", length=dim)
    else:
        raise ConfigError(
            f"{path}.truth: expected 'sample-from-prior' or an atom list"
        )
    if "zero_noise" in cfg and not isinstance(cfg["zero_noise"], bool):
        raise ConfigError(f"{path}.zero_noise: expected a boolean")
    cfg.setdefault("zero_noise", False)


def _validate_data_source(cfg, path, dim):
    has_file = "data_path" in cfg
    has_scenario = "scenario" in cfg
    if has_file == has_scenario:
        raise ConfigError(f"{path}: exactly one of 'data_path'/'scenario' required")
    if has_file:
        _string(cfg["data_path"], f"{path}.data_path")
    else:
        _validate_scenario(cfg["scenario"], f"{path}.scenario", dim)


def _validate_experiment(cfg, dim):
    kind = _string(cfg.get("kind"), "experiment.kind", set(EXPERIMENT_KINDS))
    path = "experiment"
    if kind == "sample-prior":
        _check_keys(cfg, path, ("kind", "n"))
        _integer(cfg["n"], "experiment.n", minimum=1)
    elif kind == "invert":
        _check_keys(cfg, path, ("kind",),
                    ("data_path", "scenario", "intensity_grid_n"))
        _validate_data_source(cfg, path, dim)
        if "intensity_grid_n" in cfg:
            _integer(cfg["intensity_grid_n"], "experiment.intensity_grid_n", minimum=0)
    elif kind == "evidence":
        _check_keys(cfg, path, ("kind", "n_samples"), ("data_path", "scenario"))
        _integer(cfg["n_samples"], "experiment.n_samples", minimum=2)
        _validate_data_source(cfg, path, dim)
    elif kind == "hellinger":
        _check_keys(cfg, path, ("kind", "n_samples", "data_path", "data_path_b"))
        _integer(cfg["n_samples"], "experiment.n_samples", minimum=2)
        _string(cfg["data_path"], "experiment.data_path")
        _string(cfg["data_path_b"], "experiment.data_path_b")
    elif kind == "stability":
        _check_keys(cfg, path, ("kind", "n_samples"),
                    ("data_path", "scenario", "sizes", "harmonic", "axis"))
        _integer(cfg["n_samples"], "experiment.n_samples", minimum=2)
        _validate_data_source(cfg, path, dim)
        if ("sizes" in cfg) == ("harmonic" in cfg):
            raise ConfigError("experiment: exactly one of 'sizes'/'harmonic' required")
        if "sizes" in cfg:
            for i, s in enumerate(cfg["sizes"]):
                _number(s, f"experiment.sizes[{i}]", nonnegative=True)
        else:
            _integer(cfg["harmonic"], "experiment.harmonic", minimum=1)
        if "axis" in cfg:
            _integer(cfg["axis"], "experiment.axis", minimum=0)
        cfg.setdefault("axis", 0)
    elif kind == "consistency":
        _check_keys(cfg, path, ("kind", "n_samples", "grids"),
                    ("data_path", "scenario"))
        _integer(cfg["n_samples"], "experiment.n_samples", minimum=2)
        grids = cfg["grids"]
        if not isinstance(grids, list) or not grids:
            raise ConfigError("experiment.grids: expected a non-empty array")
        for i, g in enumerate(grids):
            _integer(g, f"experiment.grids[{i}]", minimum=1)
        _validate_data_source(cfg, path, dim)
    elif kind == "recover":
        _check_keys(cfg, path, ("kind", "scenario"),
                    ("top_k", "intensity_grid_n"))
        _validate_scenario(cfg["scenario"], "experiment.scenario", dim)
        if "top_k" in cfg:
            _integer(cfg["top_k"], "experiment.top_k", minimum=1)
        cfg.setdefault("top_k", 3)
        if "intensity_grid_n" in cfg:
            _integer(cfg["intensity_grid_n"], "experiment.intensity_grid_n", minimum=1)


_NO_FORWARD = ("sample-prior",)


def normalize_config(cfg: dict) -> dict:
    """Validate a raw config dict; returns a normalized deep copy."""
    import copy

    cfg = copy.deepcopy(cfg)
    _check_keys(
        cfg, "config",
        ("seed", "output_dir", "domain", "prior", "experiment"),
        ("schema_version", "forward", "noise", "sampler"),
    )
    cfg.setdefault("schema_version", CONFIG_SCHEMA_VERSION)
    if cfg["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise ConfigError("schema_version: unsupported config schema version")
    _integer(cfg["seed"], "seed", minimum=0)
    _string(cfg["output_dir"], "output_dir")
    dim = _validate_domain(cfg["domain"])
    _validate_prior(cfg["prior"], dim)
    _validate_experiment(cfg["experiment"], dim)
    kind = cfg["experiment"]["kind"]
    if kind not in _NO_FORWARD:
        if "forward" not in cfg:
            raise ConfigError("forward: missing required section for this experiment")
        if "noise" not in cfg:
            raise ConfigError("noise: missing required section for this experiment")
    if "forward" in cfg:
        _validate_forward(cfg["forward"], dim)
    if "noise" in cfg:
        _validate_noise(cfg["noise"])
    cfg.setdefault("sampler", {})
    _validate_sampler(cfg["sampler"])
    return cfg


# ---------------------------------------------------------------------------
# Builders (assume a normalized config)


def build_domain(cfg: dict) -> Domain:
    return Domain(np.array(cfg["domain"]["lower"]), np.array(cfg["domain"]["upper"]))


def build_prior(cfg: dict, domain: Domain) -> PriorSpec:
    pc = cfg["prior"]["count"]
    if pc["kind"] == "poisson":
        count = PoissonCount(pc["gamma"])
    elif pc["kind"] == "fixed":
        count = FixedCount(pc["n"])
    else:
        count = TruncatedPoissonCount(pc["gamma"], pc.get("k_max"))

    pl = cfg["prior"]["location"]
    if pl["kind"] == "uniform":
        location = UniformLocations(domain)
    else:
        location = PointLocation(domain, np.array(pl["point"]))

    pm = cfg["prior"]["mark"]
    if pm["kind"] == "gaussian":
        mean = pm["mean"] if isinstance(pm["mean"], list) else [pm["mean"]]
        cov = pm["cov"]
        if not isinstance(cov, list):
            cov = (float(cov) * np.eye(len(mean))).tolist()
        mark = GaussianMark(np.array(mean), np.array(cov))
    elif pm["kind"] == "lognormal":
        mark = LogNormalMark(pm["mu"], pm["sigma2"])
    else:
        mean = _complex_entry(pm.get("mean", 0.0), "prior.mark.mean")
        relation = _complex_entry(pm.get("relation", 0.0), "prior.mark.relation")
        mark = ComplexGaussianMark(mean, pm["sigma2"], relation)

    pw = cfg["prior"]["weights"]
    if pw["kind"] == "unit":
        weights = UnitWeights()
    else:
        weights = geometric_weights(pw["ratio"], pw["k_max"], pw.get("scale"))
    return PriorSpec(count, location, mark, weights)


def build_sensors(cfg: dict, domain: Domain) -> SensorSet:
    if "sensors" in cfg:
        return SensorSet(np.array(cfg["sensors"], dtype=float))
    grid = cfg["sensor_grid"]
    lower = np.array(grid.get("lower", domain.lower), dtype=float)
    upper = np.array(grid.get("upper", domain.upper), dtype=float)
    return SensorSet(sensor_grid(lower, upper, grid["n"]))


def build_forward(cfg: dict, domain: Domain, base_dir: Path):
    fc = cfg["forward"]
    if fc["kind"] == "gaussian_kernel":
        return GaussianKernelForward(fc["sigma"], build_sensors(fc, domain))
    if fc["kind"] == "helmholtz":
        return HelmholtzForward(fc["kappa"], build_sensors(fc, domain), domain)
    from .io import read_tabulated_csv

    return read_tabulated_csv(base_dir / fc["path"])


def build_noise(cfg: dict, forward, base_dir: Path) -> NoiseModel:
    nc = cfg["noise"]
    n = forward.n_obs * (2 if forward.output_field == "complex" else 1)
    if "variance" in nc:
        return NoiseModel.iso(nc["variance"], n)
    from .io import load_matrix_csv

    return NoiseModel(load_matrix_csv(base_dir / nc["matrix_path"]))


def build_sampler_config(cfg: dict) -> SamplerConfig:
    sc = cfg["sampler"]
    return SamplerConfig(
        n_iters=sc["n_iters"], burn_in=sc["burn_in"], thin=sc["thin"],
        p_birth=sc["p_birth"], p_death=sc["p_death"],
        p_move=sc["p_move"], p_perturb=sc["p_perturb"],
        location_step=sc.get("location_step"),
        amplitude_step=sc.get("amplitude_step"),
        k_max=sc.get("k_max"),
    )


def config_digest(cfg: dict) -> str:
    """Digest of the experiment-defining config content.

    ``output_dir`` is excluded: it locates artifacts without affecting them,
    and reruns into different directories must produce identical bytes.
    """
    from .io import dumps_canonical, sha256_of_text

    content = {k: v for k, v in cfg.items() if k != "output_dir"}
    return sha256_of_text(dumps_canonical(content))
