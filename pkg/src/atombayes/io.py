"""File formats: measures, chain files, summaries, curves, CSV vectors.

All structured artifacts are JSON (one object per line for chains and
sample files) with a ``schema_version`` field; floats go through Python's
shortest-repr JSON encoding, so writing is deterministic and round-trips
are bit-exact.  Complex numbers are stored as [re, im] pairs; complex
observation vectors in CSV are stored on the real embedding, real parts
before imaginary parts.

Tabulated kernel files are CSV-like text: four header lines
(``d,N_o,m,field``; domain lower; domain upper; nodes per axis), then one
line per sensor with the row-major kernel values on the node grid
(re/im interleaved for complex kernels).
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Optional, Sequence

import numpy as np

from .forward import TabulatedForward
from .measures import COMPLEX, DiscreteMeasure, Domain
from .sampler import SCHEMA_VERSION, ChainRecord


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Measures


def measure_to_record(u: DiscreteMeasure) -> dict:
    """Canonical record {d, m, field, atoms:[{y, q}]}."""
    atoms = []
    for k in range(u.n_atoms):
        y = [float(v) for v in u.locations[k]]
        if u.field == COMPLEX:
            q = [[float(c.real), float(c.imag)] for c in u.amplitudes[k]]
        else:
            q = [float(v) for v in u.amplitudes[k]]
        atoms.append({"y": y, "q": q})
    return {"d": u.d, "m": u.m, "field": u.field, "atoms": atoms}


def measure_from_record(rec: dict, domain: Domain) -> DiscreteMeasure:
    d, m, fld = int(rec["d"]), int(rec["m"]), rec["field"]
    if d != domain.dim:
        raise ValueError(f"record dimension {d} does not match the domain")
    atoms = rec["atoms"]
    if not atoms:
        return DiscreteMeasure.empty(domain, m=m, field=fld)
    locs = np.array([a["y"] for a in atoms], dtype=float)
    if fld == COMPLEX:
        amps = np.array(
            [[complex(c[0], c[1]) for c in a["q"]] for a in atoms], dtype=complex
        )
    else:
        amps = np.array([a["q"] for a in atoms], dtype=float)
    return DiscreteMeasure(domain, locs, amps)


def write_measures(path, measures: Sequence[DiscreteMeasure]):
    with open(path, "w") as fh:
        fh.write(dumps_canonical(
            {"schema_version": SCHEMA_VERSION, "kind": "measure_list"}
        ) + "\n")
        for u in measures:
            fh.write(dumps_canonical(measure_to_record(u)) + "\n")


def read_measures(path, domain: Domain) -> List[DiscreteMeasure]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "measure_list":
            raise ValueError(f"{path}: not a measure list file")
        return [measure_from_record(json.loads(line), domain) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# Chains and summaries


def write_chain(path, records: Sequence[ChainRecord], config_digest: Optional[str] = None):
    header = {"schema_version": SCHEMA_VERSION, "kind": "chain"}
    if config_digest:
        header["config_digest"] = config_digest
    with open(path, "w") as fh:
        fh.write(dumps_canonical(header) + "\n")
        for r in records:
            fh.write(dumps_canonical({
                "iter": r.iteration,
                "measure": measure_to_record(r.measure),
                "log_likelihood": r.log_likelihood,
                "move": r.move,
                "accepted": r.accepted,
            }) + "\n")


def read_chain(path, domain: Domain):
    """Returns (records, header)."""
    records = []
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "chain":
            raise ValueError(f"{path}: not a chain file")
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(ChainRecord(
                int(obj["iter"]),
                measure_from_record(obj["measure"], domain),
                float(obj["log_likelihood"]),
                obj["move"],
                bool(obj["accepted"]),
            ))
    return records, header


def write_summary(path, summary: dict):
    with open(path, "w") as fh:
        fh.write(dumps_canonical(summary) + "\n")


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Curves and plain vectors


def write_curve_csv(path, x_name: str, rows):
    """Rows of (x, HellingerEstimate) as CSV for external plotting."""
    with open(path, "w") as fh:
        fh.write(f"{x_name},hellinger,se,n_samples\n")
        for x, est in rows:
            fh.write(f"{x!r},{est.value!r},{est.std_error!r},{est.n_samples}\n")


def write_vector_csv(path, v: np.ndarray):
    """One-row CSV; complex vectors are embedded as [real parts, imag parts]."""
    v = np.atleast_1d(np.asarray(v))
    if np.iscomplexobj(v):
        v = np.concatenate([v.real, v.imag])
    with open(path, "w") as fh:
        fh.write(",".join(repr(float(x)) for x in v) + "\n")


def load_vector_csv(path, complex_valued: bool = False) -> np.ndarray:
    """Read a one-row CSV vector; undo the real embedding when complex."""
    with open(path) as fh:
        row = fh.readline().strip()
    if not row:
        raise ValueError(f"{path}: empty data file")
    vals = np.array([float(x) for x in row.split(",")], dtype=float)
    if complex_valued:
        if vals.size % 2:
            raise ValueError(f"{path}: complex data needs an even column count")
        half = vals.size // 2
        return vals[:half] + 1j * vals[half:]
    return vals


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# Tabulated kernels


def write_tabulated_csv(path, fwd: TabulatedForward):
    vals = fwd.values
    n_obs, m = vals.shape[0], vals.shape[-1]
    with open(path, "w") as fh:
        fh.write(f"{fwd.domain.dim},{n_obs},{m},{fwd.output_field}\n")
        fh.write(",".join(repr(float(x)) for x in fwd.domain.lower) + "\n")
        fh.write(",".join(repr(float(x)) for x in fwd.domain.upper) + "\n")
        fh.write(",".join(str(len(a)) for a in fwd.axes) + "\n")
        for i in range(n_obs):
            flat = vals[i].ravel()
            if fwd.output_field == COMPLEX:
                parts = []
                for c in flat:
                    parts.append(repr(float(c.real)))
                    parts.append(repr(float(c.imag)))
            else:
                parts = [repr(float(x)) for x in flat]
            fh.write(",".join(parts) + "\n")


def read_tabulated_csv(path) -> TabulatedForward:
    with open(path) as fh:
        d, n_obs, m, fld = fh.readline().strip().split(",")
        d, n_obs, m = int(d), int(n_obs), int(m)
        lower = [float(x) for x in fh.readline().strip().split(",")]
        upper = [float(x) for x in fh.readline().strip().split(",")]
        counts = [int(x) for x in fh.readline().strip().split(",")]
        if len(lower) != d or len(counts) != d:
            raise ValueError(f"{path}: malformed tabulated kernel header")
        domain = Domain(np.array(lower), np.array(upper))
        axes = tuple(
            np.linspace(lower[i], upper[i], counts[i]) for i in range(d)
        )
        shape = (n_obs, *counts, m)
        rows = []
        for i in range(n_obs):
            raw = np.array([float(x) for x in fh.readline().strip().split(",")])
            if fld == COMPLEX:
                raw = raw[0::2] + 1j * raw[1::2]
            rows.append(raw.reshape(*counts, m))
        values = np.stack(rows)
        assert values.shape == shape
    return TabulatedForward(domain, axes, values)
