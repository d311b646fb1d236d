"""Config-driven entry point.

``atombayes run <config.json>`` validates the config, dispatches on
``experiment.kind`` and writes versioned artifacts under ``output_dir``;
``atombayes validate <config.json>`` stops after validation.  Every
artifact embeds the schema version and the digest of the fully resolved
config, and a fixed seed reproduces artifacts byte for byte.

Exit codes: 1 config error, 2 runtime numeric error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import io
from .config import (
    ConfigError,
    build_domain,
    build_forward,
    build_noise,
    build_prior,
    build_sampler_config,
    config_digest,
    normalize_config,
)
from .diagnostics import consistency_curve, hellinger, stability_curve, top_peaks
from .measures import COMPLEX, DiscreteMeasure, Domain
from .posterior import NoiseModel, Posterior, embed_observation
from .priors import PriorSpec, prior_mean_tv, sample_prior, sample_prior_batch
from .priors import ClosedFormUnavailable
from .sampler import SCHEMA_VERSION, run_chain
from .seeding import substream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# Scenarios


@dataclass
class Scenario:
    """Ground truth, clean observations and one noisy data vector."""

    truth: DiscreteMeasure
    clean: np.ndarray
    data: np.ndarray
    noise_seed: Optional[int]
    zero_noise: bool


def generate_scenario(
    prior: PriorSpec,
    forward,
    noise: NoiseModel,
    truth: Union[DiscreteMeasure, str],
    root_seed: int,
    zero_noise: bool = False,
) -> Scenario:
    """Build ``z = G(u) + xi`` with reproducible named substreams.

    ``truth`` is a measure or the string ``"sample-from-prior"``.
    """
    if isinstance(truth, str):
        if truth != "sample-from-prior":
            raise ValueError("truth must be a measure or 'sample-from-prior'")
        truth = sample_prior(prior, substream(root_seed, "truth"))
    clean = forward.apply(truth)
    if zero_noise:
        return Scenario(truth, clean, clean.copy(), None, True)
    noise_seed = int(substream(root_seed, "noise").integers(np.iinfo(np.int64).max))
    xi = noise.sample(np.random.default_rng(noise_seed))
    z_emb = embed_observation(clean) + xi
    if forward.output_field == COMPLEX:
        half = z_emb.size // 2
        z = z_emb[:half] + 1j * z_emb[half:]
    else:
        z = z_emb
    return Scenario(truth, clean, z, noise_seed, False)


def save_scenario(path, scenario: Scenario):
    obj = {
        "schema_version": SCHEMA_VERSION,
        "kind": "scenario",
        "truth": io.measure_to_record(scenario.truth),
        "clean": [float(x) for x in embed_observation(scenario.clean)],
        "data": [float(x) for x in embed_observation(scenario.data)],
        "noise_seed": scenario.noise_seed,
        "zero_noise": scenario.zero_noise,
    }
    with open(path, "w") as fh:
        fh.write(io.dumps_canonical(obj) + "\n")


def load_scenario(path, domain: Domain) -> Scenario:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("kind") != "scenario":
        raise ValueError(f"{path}: not a scenario file")
    truth = io.measure_from_record(obj["truth"], domain)
    clean = np.array(obj["clean"], dtype=float)
    data = np.array(obj["data"], dtype=float)
    if truth.field == COMPLEX:
        half = clean.size // 2
        clean = clean[:half] + 1j * clean[half:]
        data = data[:half] + 1j * data[half:]
    return Scenario(truth, clean, data, obj["noise_seed"], obj["zero_noise"])


def _truth_from_config(truth_cfg, prior: PriorSpec) -> DiscreteMeasure:
    atoms = truth_cfg["atoms"]
    if not atoms:
        return DiscreteMeasure.empty(prior.domain, m=prior.m, field=prior.field)
    locs = np.array([a["y"] for a in atoms], dtype=float)
    amps = []
    for a in atoms:
        q = a["q"]
        if prior.field == COMPLEX:
            rows = q if isinstance(q[0], list) else [q]
            amps.append([complex(c[0], c[1]) for c in rows])
        else:
            amps.append(q if isinstance(q, list) else [q])
    dtype = complex if prior.field == COMPLEX else float
    return DiscreteMeasure(prior.domain, locs, np.array(amps, dtype=dtype))


# ---------------------------------------------------------------------------
# Experiment dispatch


class _Run:
    """Objects and paths shared by every experiment kind."""

    def __init__(self, cfg: dict, config_dir: Path):
        self.cfg = cfg
        self.config_dir = config_dir
        self.digest = config_digest(cfg)
        self.seed = cfg["seed"]
        self.out = Path(cfg["output_dir"])
        self.domain = build_domain(cfg)
        self.prior = build_prior(cfg, self.domain)
        self.forward = None
        self.noise = None
        if "forward" in cfg and cfg["experiment"]["kind"] != "sample-prior":
            self.forward = build_forward(cfg, self.domain, config_dir)
            self.noise = build_noise(cfg, self.forward, config_dir)

    def stamp(self, obj: dict) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config_digest": self.digest,
            **obj,
        }

    def data_vector(self, exp: dict) -> np.ndarray:
        """Load z from CSV or generate (and persist) a scenario."""
        if "data_path" in exp:
            return io.load_vector_csv(
                self.config_dir / exp["data_path"],
                complex_valued=self.forward.output_field == COMPLEX,
            )
        sc_cfg = exp["scenario"]
        truth = sc_cfg["truth"]
        if truth != "sample-from-prior":
            truth = _truth_from_config(truth, self.prior)
        scenario = generate_scenario(
            self.prior, self.forward, self.noise, truth,
            self.seed, zero_noise=sc_cfg["zero_noise"],
        )
        save_scenario(self.out / "scenario.json", scenario)
        io.write_vector_csv(self.out / "data.csv", scenario.data)
        return scenario.data


def _run_sample_prior(run: _Run) -> dict:
    n = run.cfg["experiment"]["n"]
    batch = sample_prior_batch(run.prior, n, substream(run.seed, "prior"))
    io.write_measures(run.out / "samples.jsonl", [batch.measure(i) for i in range(n)])
    tvs = batch.total_variations()
    summary = {
        "n": n,
        "mean_tv": float(tvs.mean()),
        "se_tv": float(tvs.std(ddof=1) / np.sqrt(n)),
        "mean_k": float(batch.counts.mean()),
    }
    try:
        summary["mean_tv_closed_form"] = prior_mean_tv(run.prior)
    except (ClosedFormUnavailable, ValueError):
        pass
    return summary


def _run_invert(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    z = run.data_vector(exp)
    posterior = Posterior(run.prior, run.forward, run.noise, z)
    result = run_chain(
        posterior,
        build_sampler_config(run.cfg),
        substream(run.seed, "chain-0"),
        chain_path=run.out / "chain.jsonl",
        intensity_grid_n=exp.get("intensity_grid_n", 100),
    )
    return result.summary


def _run_evidence(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    z = run.data_vector(exp)
    posterior = Posterior(run.prior, run.forward, run.noise, z)
    log_z, se = posterior.estimate_evidence(
        exp["n_samples"], substream(run.seed, "evidence")
    )
    return {"log_evidence": log_z, "std_error": se, "n_samples": exp["n_samples"]}


def _run_hellinger(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    complex_valued = run.forward.output_field == COMPLEX
    z_a = io.load_vector_csv(run.config_dir / exp["data_path"], complex_valued)
    z_b = io.load_vector_csv(run.config_dir / exp["data_path_b"], complex_valued)
    p1 = Posterior(run.prior, run.forward, run.noise, z_a)
    p2 = Posterior(run.prior, run.forward, run.noise, z_b)
    est = hellinger(p1, p2, exp["n_samples"], substream(run.seed, "hellinger"))
    return {
        "hellinger": est.value,
        "std_error": est.std_error,
        "n_samples": est.n_samples,
        "common_seed": est.common_seed,
    }


def _run_stability(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    z = run.data_vector(exp)
    posterior = Posterior(run.prior, run.forward, run.noise, z)
    if "sizes" in exp:
        sizes = [float(s) for s in exp["sizes"]]
    else:
        sizes = [1.0 / k for k in range(1, exp["harmonic"] + 1)] + [0.0]
    direction = np.zeros(z.size)
    direction[exp["axis"]] = 1.0
    perturbations = [z + s * direction for s in sizes]
    curve = stability_curve(
        posterior, perturbations, exp["n_samples"], substream(run.seed, "hellinger")
    )
    io.write_curve_csv(run.out / "stability.csv", "perturbation_size", curve)
    return {
        "curve": [
            {"perturbation_size": x, "hellinger": e.value, "se": e.std_error}
            for x, e in curve
        ],
        "n_samples": exp["n_samples"],
    }


def _run_consistency(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    z = run.data_vector(exp)
    posterior = Posterior(run.prior, run.forward, run.noise, z)
    curve = consistency_curve(
        posterior, exp["grids"], exp["n_samples"], substream(run.seed, "hellinger")
    )
    io.write_curve_csv(run.out / "consistency.csv", "grid_n", curve)
    return {
        "curve": [
            {"grid_n": g, "hellinger": e.value, "se": e.std_error}
            for g, e in curve
        ],
        "n_samples": exp["n_samples"],
    }


def _run_recover(run: _Run) -> dict:
    exp = run.cfg["experiment"]
    z = run.data_vector(exp)
    posterior = Posterior(run.prior, run.forward, run.noise, z)
    grid_n = exp.get("intensity_grid_n", 200)
    result = run_chain(
        posterior,
        build_sampler_config(run.cfg),
        substream(run.seed, "chain-0"),
        chain_path=run.out / "chain.jsonl",
        intensity_grid_n=grid_n,
    )
    io.write_summary(run.out / "summary.json", run.stamp(result.summary))
    intensity = result.summary["intensity"]
    grid = run.domain.grid(intensity["grid_n"])
    values = np.array(intensity["values"])
    peaks = top_peaks(grid, values, exp["top_k"])
    scenario = load_scenario(run.out / "scenario.json", run.domain)
    true_locs = scenario.truth.locations
    distances = [
        float(np.min(np.linalg.norm(true_locs - p, axis=1))) for p in peaks
    ]
    step = result.summary["location_step"]
    return {
        "peaks": [[float(x) for x in p] for p in peaks],
        "true_atoms": io.measure_to_record(scenario.truth)["atoms"],
        "peak_to_truth_distance": distances,
        "location_step": step,
        "hits": sum(d <= 2.0 * step for d in distances),
    }


_DISPATCH = {
    "sample-prior": (_run_sample_prior, "summary.json"),
    "invert": (_run_invert, "summary.json"),
    "evidence": (_run_evidence, "evidence.json"),
    "hellinger": (_run_hellinger, "hellinger.json"),
    "stability": (_run_stability, "stability.json"),
    "consistency": (_run_consistency, "consistency.json"),
    "recover": (_run_recover, "recover.json"),
}


def run_experiment(cfg: dict, config_dir: Path) -> Path:
    """Run a normalized config; returns the output directory."""
    run = _Run(cfg, config_dir)
    run.out.mkdir(parents=True, exist_ok=True)
    io.write_summary(
        run.out / "meta.json",
        run.stamp({"experiment": cfg["experiment"]["kind"], "seed": run.seed}),
    )
    fn, artifact = _DISPATCH[cfg["experiment"]["kind"]]
    summary = fn(run)
    io.write_summary(run.out / artifact, run.stamp(summary))
    return run.out


# ---------------------------------------------------------------------------
# Entry point


def _load_config(path: Path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return raw


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="atombayes",
        description="Bayesian inversion experiments for sparse atomic measures",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "validate a config and run its experiment"),
        ("validate", "validate a config and print its digest"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path)
        p.add_argument("--output-dir", type=str, default=None,
                       help="override output_dir from the config")
        p.add_argument("--seed", type=int, default=None,
                       help="override seed from the config")
    args = parser.parse_args(argv)

    try:
        raw = _load_config(args.config)
        if args.output_dir is not None:
            raw["output_dir"] = args.output_dir
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = normalize_config(raw)
        digest = config_digest(cfg)
        if args.command == "validate":
            print(f"OK {digest}")
            return EXIT_OK
        out = run_experiment(cfg, args.config.parent)
        print(f"wrote artifacts to {out} (config digest {digest[:12]})")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
