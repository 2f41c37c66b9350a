"""Plain-text file formats shared by the command-line tools.

* tensor: ``dims I1 I2 I3`` then one ``i j k count`` line per nonzero
* cannot-link: ``dims I2 I3`` then one ``j k`` line per pair
* factor matrix: CSV, first line ``lambda,<w1>,...,<wR>``, then one row per index
* bias: lines ``sigma,<s>``, ``u1,...``, ``u2,...``, ``u3,...``
* labels: one ``patient_index label`` line per patient
* config / reports: ``key = value`` lines, ``#`` comments

Floats are written with ``repr`` so files round-trip bit-exactly.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .objective import CannotLinkMatrix
from .tensor import BiasTerm, KruskalModel, SparseCountTensor

FACTOR_FILES = ("A.csv", "B.csv", "C.csv")
BIAS_FILE = "bias.csv"


class FormatError(ValueError):
    pass


def _fmt(v) -> str:
    return repr(float(v))


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield n, line


def _parse_dims(path, n, line, count):
    parts = line.split()
    if parts[0] != "dims" or len(parts) != count + 1:
        raise FormatError(f"{path}:{n}: expected 'dims' header with {count} sizes")
    try:
        dims = tuple(int(p) for p in parts[1:])
    except ValueError:
        raise FormatError(f"{path}:{n}: non-integer dimension") from None
    if min(dims) < 1:
        raise FormatError(f"{path}:{n}: dimensions must be positive")
    return dims


def read_tensor(path, header_only: bool = False) -> SparseCountTensor:
    lines = _data_lines(path)
    try:
        n, line = next(lines)
    except StopIteration:
        raise FormatError(f"{path}: empty tensor file") from None
    shape = _parse_dims(path, n, line, 3)
    if header_only:
        return SparseCountTensor.from_entries(shape, [])
    idx, vals = [], []
    for n, line in lines:
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}:{n}: expected 'i j k count'")
        try:
            i, j, k, c = (int(p) for p in parts)
        except ValueError:
            raise FormatError(f"{path}:{n}: non-integer field") from None
        idx.append((i, j, k))
        vals.append(c)
    try:
        return SparseCountTensor(shape, np.array(idx, dtype=np.int64).reshape(-1, 3),
                                 np.array(vals, dtype=np.int64))
    except (ValueError, IndexError) as err:
        raise FormatError(f"{path}: {err}") from None


def write_tensor(path, x: SparseCountTensor) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dims %d %d %d\n" % x.shape)
        for (i, j, k), c in zip(x.indices.tolist(), x.values.tolist()):
            fh.write(f"{i} {j} {k} {c}\n")


def read_cannot_link(path, dims=None) -> CannotLinkMatrix:
    """Read a pair file. An entirely empty file yields no pairs with ``dims``."""
    lines = _data_lines(path)
    try:
        n, line = next(lines)
    except StopIteration:
        if dims is None:
            raise FormatError(f"{path}: empty cannot-link file and no dims given") from None
        return CannotLinkMatrix.empty(dims)
    file_dims = _parse_dims(path, n, line, 2)
    if dims is not None and tuple(dims) != file_dims:
        raise FormatError(f"{path}: dims {file_dims} do not match expected {tuple(dims)}")
    pairs = []
    for n, line in lines:
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{n}: expected 'j k'")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise FormatError(f"{path}:{n}: non-integer field") from None
    try:
        return CannotLinkMatrix(file_dims, pairs)
    except (ValueError, IndexError) as err:
        raise FormatError(f"{path}: {err}") from None


def write_cannot_link(path, m: CannotLinkMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dims %d %d\n" % m.dims)
        for j, k in m.pairs.tolist():
            fh.write(f"{j} {k}\n")


def write_factor(path, factor: np.ndarray, weights: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["lambda"] + [_fmt(w) for w in weights]) + "\n")
        for row in np.asarray(factor):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_factor(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("lambda"):
        raise FormatError(f"{path}: missing 'lambda' header line")
    try:
        weights = np.array([float(v) for v in lines[0].split(",")[1:]])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as err:
        raise FormatError(f"{path}: {err}") from None
    factor = np.array(rows, dtype=np.float64).reshape(len(rows), weights.shape[0])
    return factor, weights


def write_model(directory, model: KruskalModel) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, f in zip(FACTOR_FILES, model.factors):
        write_factor(directory / name, f, model.weights)
    bias_path = directory / BIAS_FILE
    if model.bias is None:
        if bias_path.exists():
            bias_path.unlink()
        return
    with open(bias_path, "w", encoding="utf-8") as fh:
        fh.write(f"sigma,{_fmt(model.bias.sigma)}\n")
        for n, u in enumerate(model.bias.u, start=1):
            fh.write(",".join([f"u{n}"] + [_fmt(v) for v in u]) + "\n")


def read_model(directory) -> KruskalModel:
    directory = Path(directory)
    factors, weights = [], None
    for name in FACTOR_FILES:
        f, w = read_factor(directory / name)
        if weights is not None and not np.array_equal(w, weights):
            raise FormatError(f"{directory / name}: lambda header differs from A.csv")
        weights = w
        factors.append(f)
    bias = None
    if (directory / BIAS_FILE).exists():
        rows = {}
        for n, line in _data_lines(directory / BIAS_FILE):
            key, *vals = line.split(",")
            rows[key] = np.array([float(v) for v in vals])
        try:
            bias = BiasTerm(float(rows["sigma"][0]), (rows["u1"], rows["u2"], rows["u3"]))
        except KeyError as err:
            raise FormatError(f"{directory / BIAS_FILE}: missing {err}") from None
    return KruskalModel(weights, tuple(factors), bias)


def read_labels(path, n_patients: int) -> np.ndarray:
    labels = np.full(n_patients, -1, dtype=np.int64)
    for n, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{n}: expected 'patient_index label'")
        try:
            i, lab = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{n}: non-integer field") from None
        if not 0 <= i < n_patients:
            raise FormatError(f"{path}:{n}: patient index {i} out of range")
        if lab not in (0, 1):
            raise FormatError(f"{path}:{n}: label must be 0 or 1")
        if labels[i] != -1:
            raise FormatError(f"{path}:{n}: duplicate patient index {i}")
        labels[i] = lab
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise FormatError(f"{path}: no label for patient(s) {missing[:5].tolist()}")
    return labels


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, lab in enumerate(np.asarray(labels).tolist()):
            fh.write(f"{i} {int(lab)}\n")


def read_keyvalue(path) -> dict:
    out = {}
    for n, line in _data_lines(path):
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError(f"{path}:{n}: empty key")
        if key in out:
            raise FormatError(f"{path}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def format_report(items: dict) -> str:
    lines = []
    for key, val in items.items():
        if isinstance(val, (float, np.floating)):
            val = _fmt(val)
        elif isinstance(val, (list, tuple)):
            val = " ".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v)
                           for v in val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_hash(items: dict) -> str:
    canonical = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
