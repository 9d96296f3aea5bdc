"""File formats: CSV sequences, JSON reservoirs/maps/readouts/reports, kernel text, config.

All JSON is written with sorted keys and two-space indent, so equal
content gives byte-identical files. Floats go through ``repr`` and
round-trip exactly.
"""

from __future__ import annotations

import contextlib
import copy
import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .jl import JlMap
from .random_sas import RandomSasReservoir
from .readout import Readout
from .volterra import (TargetFilter, VolterraKernelSet, custom_kernels, exponential_filter,
                       fir_linear, fir_quadratic)

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """Malformed or out-of-range file content; ``row`` is 1-based over data rows."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def _expect(doc: dict, kind: str) -> dict:
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema version {doc.get('schema_version')!r}")
    return doc


@contextlib.contextmanager
def _writer(target):
    """Yield a text handle for a path or pass an open stream through."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


# sequences ----------------------------------------------------------------

def read_sequence_csv(path, M: Optional[float] = None) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Read column ``z`` and optional ``y_1..y_m``; returns (z, Y or None).

    With ``M`` given, any |z| > M raises :class:`FormatError` naming the row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise FormatError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        if "z" not in header:
            raise FormatError(f"{path}: header must contain a 'z' column")
        ycols = sorted((h for h in header if h.startswith("y_")), key=lambda h: int(h[2:]))
        expected = [f"y_{i}" for i in range(1, len(ycols) + 1)]
        if ycols != expected:
            raise FormatError(f"{path}: target columns must be y_1..y_m, got {ycols}")
        iz = header.index("z")
        iy = [header.index(c) for c in ycols]
        z, Y = [], []
        for row, rec in enumerate(reader, start=1):
            if not rec:
                continue
            try:
                zv = float(rec[iz])
                yv = [float(rec[i]) for i in iy]
            except (ValueError, IndexError) as exc:
                raise FormatError(f"cannot parse {rec!r}", row) from exc
            if not np.isfinite(zv):
                raise FormatError(f"non-finite input {zv}", row)
            if M is not None and abs(zv) > M:
                raise FormatError(f"input {zv} exceeds the bound M={M}", row)
            z.append(zv)
            Y.append(yv)
    return np.array(z), (np.array(Y) if ycols else None)


def write_sequence_csv(path, z, Y=None) -> None:
    z = np.asarray(z, dtype=float)
    cols = ["z"]
    if Y is not None:
        Y = np.atleast_2d(np.asarray(Y, dtype=float).reshape(len(z), -1))
        cols += [f"y_{i}" for i in range(1, Y.shape[1] + 1)]
    with _writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t, zv in enumerate(z):
            w.writerow([repr(float(zv))] + ([repr(float(v)) for v in Y[t]] if Y is not None else []))


def write_matrix_csv(path, X, prefix: str = "x") -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with _writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}_{i}" for i in range(1, X.shape[1] + 1)])
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path, prefix: str = "x") -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not all(h.strip().startswith(prefix + "_") for h in header):
            raise FormatError(f"{path}: header must be {prefix}_1..{prefix}_k")
        rows = []
        for row, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise FormatError(f"expected {len(header)} values, got {len(rec)}", row)
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise FormatError(f"cannot parse {rec!r}", row) from exc
    return np.array(rows).reshape(-1, len(header))


def write_records_csv(path, records: list[dict]) -> None:
    if not records:
        raise ValueError("no records to write")
    with _writer(path) as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})


# reservoirs, maps, readouts ---------------------------------------------------

def reservoir_to_dict(res: RandomSasReservoir) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "reservoir",
            "k": res.k, "p": res.p, "l": res.l, "M": res.M, "I0": list(res.I0),
            "delta": res.delta, "lambda0": res.lambda0, "seed": res.seed, "sign": res.sign,
            "origin": res.origin, "A": res.A.tolist(), "B": res.B.tolist(),
            "sha256": res.digest()}


def reservoir_from_dict(doc: dict) -> RandomSasReservoir:
    _expect(doc, "reservoir")
    try:
        res = RandomSasReservoir(doc["k"], doc["p"], doc["l"], doc["M"], tuple(doc["I0"]),
                                 doc["delta"], doc["lambda0"], np.array(doc["A"]),
                                 np.array(doc["B"]), doc.get("seed"), doc.get("sign", 1),
                                 doc.get("origin", "direct"))
    except KeyError as exc:
        raise FormatError(f"reservoir file lacks field {exc}") from exc
    if "sha256" in doc and doc["sha256"] != res.digest():
        raise FormatError("reservoir checksum mismatch")
    return res


def jl_map_to_dict(jl_map: JlMap) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "jl_map", "N": jl_map.N, "k": jl_map.k,
            "seed": jl_map.seed, "epsilon": jl_map.epsilon, "matrix": jl_map.matrix.tolist()}


def jl_map_from_dict(doc: dict) -> JlMap:
    _expect(doc, "jl_map")
    S = np.array(doc["matrix"], dtype=float)
    if S.shape != (doc["k"], doc["N"]):
        raise FormatError(f"matrix shape {S.shape} disagrees with header ({doc['k']}, {doc['N']})")
    return JlMap(S, seed=doc.get("seed"), epsilon=doc.get("epsilon"))


def readout_to_dict(W: Readout) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "readout", "provenance": W.provenance,
            "ridge": W.ridge, "matrix": W.matrix.tolist()}


def readout_from_dict(doc: dict) -> Readout:
    _expect(doc, "readout")
    return Readout(np.array(doc["matrix"], dtype=float), doc["provenance"], doc.get("ridge"))


# kernels ------------------------------------------------------------------------

def kernels_to_text(kernels: VolterraKernelSet) -> str:
    """Header lines ``p``, ``l``, ``m_out``; then one term per line as ``lags : coefficients``."""
    lines = [f"p {kernels.p}", f"l {kernels.l}", f"m_out {kernels.m_out}"]
    for _, lags, g in kernels.items():
        lines.append(" ".join(map(str, lags)) + " : " + " ".join(repr(float(v)) for v in g))
    return "\n".join(lines) + "\n"


def kernels_from_text(text: str) -> VolterraKernelSet:
    header, table = {}, {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            key, _, val = line.partition(" ")
            if key not in ("p", "l", "m_out"):
                raise FormatError(f"line {n}: unknown header {key!r}")
            header[key] = int(val)
            continue
        lhs, rhs = line.split(":", 1)
        try:
            lags = tuple(int(m) for m in lhs.split())
            g = np.array([float(v) for v in rhs.split()])
        except ValueError as exc:
            raise FormatError(f"line {n}: {exc}") from exc
        if not lags:
            raise FormatError(f"line {n}: a term needs at least one lag")
        table.setdefault(len(lags), {})
        table[len(lags)][lags] = table[len(lags)].get(lags, 0) + g
    missing = {"p", "l", "m_out"} - set(header)
    if missing:
        raise FormatError(f"kernel file lacks header(s) {sorted(missing)}")
    return VolterraKernelSet(header["p"], header["l"], header["m_out"], table)


# config -------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "sigsas": {"M": 0.5, "p": 2, "l": 3, "lam": 0.25, "I0": None, "sign": 1},
    "jl": {"N": 1024, "k": 333, "epsilon": 0.5, "maps": 20, "vectors": 100},
    "reservoir": {"mode": "direct", "k": 20, "p": 1, "l": 2, "M": 0.5, "delta": 0.1,
                  "epsilon": 0.9, "I0": None},
    "target": {"name": "exponential", "a": 0.5, "c": 1.0, "M": 1.0},
    "inputs": {"theta": 0.5, "envelope_rate": 0.9995, "envelope_scale": 1.0},
    "experiment": {"p": 3, "l": 3, "k": 64, "delta": 0.1, "epsilon": 0.9, "seeds": [0],
                   "washout": 200, "horizon": 2000, "ridge": None,
                   "targets": ["exponential", "fir_linear", "fir_quadratic"]},
    "audit": {"trials": 100, "contraction_pairs": 1000, "washout_tol": 1e-10,
              "law_k": 20, "law_p": 1, "law_delta": 0.1, "law_n0": [4, 16, 64],
              "n_cells": 100, "ks_alpha": 0.01, "corr_threshold": None,
              "cert_k": 50, "cert_p": 3, "cert_M": 0.5, "cert_delta": 0.05,
              "cert_trials": 1000, "cert_grid": 1001},
}


def load_config(path=None) -> dict:
    """Defaults overlaid section by section with a JSON file, if given."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return cfg
    doc = read_json(path)
    for section, values in doc.items():
        if section not in cfg:
            raise FormatError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise FormatError(f"config section {section!r} must be an object")
        unknown = set(values) - set(cfg[section]) - ({"kernels_file", "taps"} if section == "target" else set())
        if unknown:
            raise FormatError(f"unknown keys in [{section}]: {sorted(unknown)}")
        cfg[section].update(values)
    return cfg


def target_from_config(section: dict, base_dir=None) -> TargetFilter:
    name = section.get("name", "exponential")
    M = float(section.get("M", 1.0))
    if "kernels_file" in section:
        path = Path(section["kernels_file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return custom_kernels(kernels_from_text(path.read_text()), M, name=name)
    if name == "exponential":
        return exponential_filter(section.get("a", 0.5), section.get("c", 1.0), M)
    if name == "fir_linear":
        return fir_linear(section.get("taps", (0.5, 0.3, 0.2)), M)
    if name == "fir_quadratic":
        return fir_quadratic(M)
    raise FormatError(f"unknown target {name!r}")
