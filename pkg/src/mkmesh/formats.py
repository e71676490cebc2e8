"""CSV artifacts: weight dumps, ray curves, fusion tables, error series, spectra, fields.

All writers use full double precision (``repr`` of the float) so that a
file read back reproduces the in-memory values exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .nodeset import NodeSet, StencilSet
from .respower import MKCombination, RayCurve
from .weights import OperatorKind, WeightSet

__all__ = [
    "config_hash",
    "write_rows",
    "read_rows",
    "write_weights",
    "read_weights",
    "write_ray_curves",
    "write_combination",
    "write_error_series",
    "write_spectrum",
    "write_field",
]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration mapping."""
    text = json.dumps(config, sort_keys=True, default=_fmt, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_rows(path):
    """Header and rows of a CSV file (comment lines starting with '#' skipped)."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


# --------------------------------------------------------------------------
# weights


WEIGHT_COLUMNS = ["node", "count", "neighbours", "weights", "condition"]


def write_weights(path, ws: WeightSet) -> Path:
    """One record per node; neighbour indices and weights are space-separated lists."""
    st = ws.stencils
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# method={ws.method} operator={ws.operator} m={ws.m} kernel={ws.kernel}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEIGHT_COLUMNS)
        for i in range(len(st)):
            m = st.mask[i]
            w.writerow([
                int(st.centers[i]),
                int(m.sum()),
                " ".join(str(int(j)) for j in st.indices[i][m]),
                " ".join(repr(float(x)) for x in ws.weights[i][m]),
                repr(float(ws.condition[i])),
            ])
    return path


def _weight_meta(path) -> dict:
    with Path(path).open() as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    return dict(item.split("=", 1) for item in first[1:].split() if "=" in item)


def read_weights(path, nodes: NodeSet) -> WeightSet:
    """Rebuild a :class:`WeightSet` from a dump; offsets come from ``nodes``."""
    meta = _weight_meta(path)
    header, rows = read_rows(path)
    if header != WEIGHT_COLUMNS:
        raise ValueError(f"not a weight dump: columns {header}")
    centers, nbrs, offs, wts, cond = [], [], [], [], []
    pos = nodes.positions
    for row in rows:
        i = int(row[0])
        nb = np.array([int(v) for v in row[2].split()], dtype=np.int64)
        if len(nb) != int(row[1]):
            raise ValueError(f"node {i}: neighbour count does not match")
        centers.append(i)
        nbrs.append(nb)
        offs.append(nodes.domain.min_image(pos[nb] - pos[i]))
        wts.append([float(v) for v in row[3].split()])
        cond.append(float(row[4]))
    st = StencilSet.from_lists(centers, nbrs, offs)
    weights = np.zeros(st.indices.shape)
    for i, w in enumerate(wts):
        weights[i, :len(w)] = w
    return WeightSet(meta.get("method", ""), OperatorKind.parse(meta.get("operator", "ddx")),
                     int(meta.get("m", 0)), weights, st, np.array(cond), meta.get("kernel", ""))


# --------------------------------------------------------------------------
# analysis outputs


def write_ray_curves(path, curves) -> Path:
    """Columns k_hat, re_keff_mean, im_keff_mean, ray_slope (slope signed by the ray's k_y sign)."""
    rows = []
    for c in curves if not isinstance(curves, RayCurve) else [curves]:
        for k, r in zip(c.k_hat, c.response):
            rows.append((float(k), float(np.real(r)), float(np.imag(r)), c.sign * c.slope))
    return write_rows(path, ["k_hat", "re_keff_mean", "im_keff_mean", "ray_slope"], rows)


def write_combination(path, comb: MKCombination, nodes=None) -> Path:
    """Columns node, c_hat, E_opt, E_sk1, E_sk2."""
    ids = np.arange(len(comb.c_hat)) if nodes is None else np.asarray(nodes)
    rows = zip(ids, comb.c_hat, comb.e_opt, comb.e_hat, comb.e_bar)
    return write_rows(path, ["node", "c_hat", "E_opt", "E_sk1", "E_sk2"], rows)


def write_error_series(path, report) -> Path:
    """Columns time, l2_sk, l2_mk, R."""
    return write_rows(path, ["time", "l2_sk", "l2_mk", "R"], report.rows())


def write_spectrum(path, eigenvalues) -> Path:
    ev = np.asarray(eigenvalues)
    return write_rows(path, ["re", "im"], zip(ev.real, ev.imag))


def write_field(path, x, y, value) -> Path:
    return write_rows(path, ["x", "y", "value"], zip(x, y, value))
