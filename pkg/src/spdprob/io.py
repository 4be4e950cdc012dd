"""Datasets, synthetic generators and JSON serialization of fitted objects.

Every matrix is flattened row-major and every JSON document carries a
``version`` field.  Dataset files come in two encodings:

JSON::

    {"version": 1, "d": 2, "matrices": [[a, b, b, c], ...],
     "labels": [0, 1, ...], "meta": {"source": "..."}}

CSV (first line is a header, then one matrix per line, optionally
followed by an integer label)::

    d=2,labeled=1
    a,b,b,c,0
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .classify import ClassModel
from .dimred import PcaProjector
from .distributions import (
    IsotropicGaussian,
    WrappedGaussian,
    ZetaTable,
    iso_sample,
    wg_sample,
)
from .errors import DatasetError, NotSPDError
from .outlier import PotatoState

FORMAT_VERSION = 1


@dataclass
class LabeledDataset:
    """Stack of SPD matrices with optional integer labels and metadata."""

    matrices: np.ndarray
    labels: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            M = geo.as_spd(self.matrices, "matrix")
        except NotSPDError as exc:
            raise DatasetError(str(exc), "not_spd", index=exc.index) from exc
        if M.ndim == 2:
            M = M[None]
        self.matrices = M
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(M),):
                raise DatasetError(
                    f"{len(labels)} labels for {len(M)} matrices", "length_mismatch"
                )
            if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
                raise DatasetError("labels must be non-negative integers", "parse")
            self.labels = labels.astype(int)
        self.meta = {str(k): str(v) for k, v in (self.meta or {}).items()}

    @property
    def dim(self):
        return self.matrices.shape[-1]

    def __len__(self):
        return len(self.matrices)

    def subset(self, idx):
        labels = None if self.labels is None else self.labels[idx]
        return LabeledDataset(self.matrices[idx], labels, dict(self.meta))


def _flat(M):
    M = np.asarray(M, float)
    return M.reshape(M.shape[0], -1).tolist() if M.ndim == 3 else M.reshape(-1).tolist()


def _unflat(rows, d):
    A = np.asarray(rows, float)
    return A.reshape(-1, d, d) if A.ndim == 2 else A.reshape(d, d)


# -- datasets ---------------------------------------------------------------


def dataset_to_dict(ds):
    out = {"version": FORMAT_VERSION, "d": ds.dim, "matrices": _flat(ds.matrices)}
    if ds.labels is not None:
        out["labels"] = ds.labels.tolist()
    if ds.meta:
        out["meta"] = dict(sorted(ds.meta.items()))
    return out


def dataset_from_dict(data):
    try:
        d = int(data["d"])
        rows = data["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed dataset document: {exc}", "parse") from exc
    if data.get("version") != FORMAT_VERSION:
        raise DatasetError(f"unsupported dataset version {data.get('version')!r}", "parse")
    for i, row in enumerate(rows):
        if len(row) != d * d:
            raise DatasetError(
                f"matrix {i} has {len(row)} values, expected {d * d}", "length_mismatch",
                index=i,
            )
    try:
        M = np.asarray(rows, float).reshape(-1, d, d)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"non-numeric matrix entries: {exc}", "parse") from exc
    return LabeledDataset(M, data.get("labels"), data.get("meta") or {})


def _csv_text(ds):
    labeled = ds.labels is not None
    lines = [f"d={ds.dim},labeled={int(labeled)}"]
    for i, M in enumerate(ds.matrices):
        vals = [repr(float(v)) for v in M.reshape(-1)]
        if labeled:
            vals.append(str(int(ds.labels[i])))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def _parse_csv(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetError("empty CSV file", "parse")
    try:
        header = dict(part.split("=", 1) for part in lines[0].split(","))
        d = int(header["d"])
        labeled = int(header["labeled"]) == 1
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"bad CSV header {lines[0]!r}", "parse") from exc
    width = d * d + int(labeled)
    rows, labels = [], []
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != width:
            raise DatasetError(
                f"row {i} has {len(parts)} fields, expected {width}", "length_mismatch",
                index=i,
            )
        try:
            rows.append([float(v) for v in parts[: d * d]])
            if labeled:
                labels.append(int(parts[-1]))
        except ValueError as exc:
            raise DatasetError(f"row {i}: {exc}", "parse", index=i) from exc
    M = np.asarray(rows, float).reshape(-1, d, d)
    return LabeledDataset(M, labels if labeled else None)


def _guess_format(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "json"


def load_dataset(path, fmt=None):
    """Read a dataset; ``fmt`` is ``"json"`` or ``"csv"`` (guessed from the suffix)."""
    fmt = _guess_format(path, fmt)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}", "io") from exc
    if fmt == "csv":
        return _parse_csv(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON in {path}: {exc}", "parse") from exc
    return dataset_from_dict(data)


def save_dataset(ds, path, fmt=None):
    fmt = _guess_format(path, fmt)
    with open(path, "w") as fh:
        if fmt == "csv":
            fh.write(_csv_text(ds))
        else:
            json.dump(dataset_to_dict(ds), fh)


# -- synthetic data ---------------------------------------------------------


def _class_seeds(seed, k):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def generate(config, seed=0):
    """Sample a labeled dataset from per-class Gaussian models.

    ``config`` has the form::

        {"d": 3, "classes": [
            {"kind": "iso", "center": [...], "sigma": 0.2, "count": 100},
            {"kind": "wrapped", "base": [...], "mu": [...], "cov": [...], "count": 50}]}

    Matrices are row-major lists (``center``/``base`` default to the
    identity, ``mu`` to zero).  Class ``k`` gets label ``k``.
    """
    try:
        d = int(config["d"])
        classes = config["classes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"generator config needs 'd' and 'classes': {exc}") from exc
    if d < 1 or not classes:
        raise ValueError("generator config needs d >= 1 and at least one class")
    m = geo.coords_dim(d)
    mats, labels = [], []
    for k, (spec, s) in enumerate(zip(classes, _class_seeds(seed, len(classes)))):
        count = int(spec.get("count", 0))
        if count < 1:
            raise ValueError(f"class {k} has count {count}; every class needs >= 1 sample")
        kind = spec.get("kind", "iso")
        if kind == "iso":
            center = _unflat(spec.get("center", np.eye(d).reshape(-1)), d)
            X = iso_sample(IsotropicGaussian(center, float(spec["sigma"])), count, seed=s)
        elif kind == "wrapped":
            base = _unflat(spec.get("base", np.eye(d).reshape(-1)), d)
            mu = np.asarray(spec.get("mu", np.zeros(m)), float)
            cov = np.asarray(spec["cov"], float).reshape(m, m)
            X = wg_sample(WrappedGaussian(base, mu, cov), count, seed=s)
        else:
            raise ValueError(f"unknown class kind {kind!r}")
        mats.append(X)
        labels.append(np.full(count, k))
    meta = {"generator": json.dumps(config, sort_keys=True), "seed": str(seed)}
    return LabeledDataset(np.concatenate(mats), np.concatenate(labels), meta)


def separable_fixture(d=3, n_per_class=100, n_classes=2, separation=4.0, sigma=0.2):
    """Generator config of well separated isotropic classes.

    Class 0 sits at the identity and class ``k >= 1`` at
    ``Exp_I(separation * E_k)`` for orthonormal diagonal directions ``E_k``,
    so every center is ``separation`` away from class 0.
    """
    if n_classes - 1 > d:
        raise ValueError("at most d + 1 classes fit on orthogonal diagonal directions")
    m = geo.coords_dim(d)
    classes = []
    for k in range(n_classes):
        c = np.zeros(m)
        if k:
            c[k - 1] = separation
        center = geo.exp_coords(np.eye(d), c)
        classes.append({"kind": "iso", "center": center.reshape(-1).tolist(),
                        "sigma": sigma, "count": n_per_class})
    return {"d": d, "classes": classes}


# -- fitted objects ---------------------------------------------------------


def to_dict(obj):
    """JSON-ready dictionary of a fitted object, tagged with its ``kind``."""
    if isinstance(obj, ZetaTable):
        return {"kind": "zeta_table", **obj.to_dict()}
    if isinstance(obj, LabeledDataset):
        return {"kind": "dataset", **dataset_to_dict(obj)}
    head = {"version": FORMAT_VERSION}
    if isinstance(obj, IsotropicGaussian):
        return {"kind": "isotropic_gaussian", **head, "d": obj.dim,
                "center": _flat(obj.center), "sigma": obj.sigma,
                "degenerate": obj.degenerate}
    if isinstance(obj, WrappedGaussian):
        return {"kind": "wrapped_gaussian", **head, "d": obj.dim,
                "base": _flat(obj.base), "mu": obj.mu.tolist(), "cov": _flat(obj.cov)}
    if isinstance(obj, ClassModel):
        out = {"kind": "class_model", **head, "d": obj.dim, "variant": obj.variant,
               "priors": np.asarray(obj.priors, float).tolist(),
               "bases": _flat(obj.bases), "sigma": float(obj.sigma)}
        if obj.means is not None:
            out["means"] = np.asarray(obj.means, float).tolist()
            out["covs"] = _flat(obj.covs)
        return out
    if isinstance(obj, PotatoState):
        return {"kind": "potato_state", **head, "d": obj.reference.shape[0],
                "reference": _flat(obj.reference), "mu": obj.mu, "sigma": obj.sigma,
                "count": obj.count, "z_th": obj.z_th}
    if isinstance(obj, PcaProjector):
        return {"kind": "pca_projector", **head, "d": obj.d, "p": obj.p,
                "w": obj.w.reshape(-1).tolist(), "objective": obj.objective}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(data):
    """Inverse of :func:`to_dict`."""
    kind = data.get("kind")
    if kind == "zeta_table":
        return ZetaTable.from_dict(data)
    if kind == "dataset":
        return dataset_from_dict(data)
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported version {data.get('version')!r} for {kind}")
    d = int(data.get("d", 0))
    if kind == "isotropic_gaussian":
        return IsotropicGaussian(_unflat(data["center"], d), data["sigma"],
                                 bool(data.get("degenerate", False)))
    if kind == "wrapped_gaussian":
        m = geo.coords_dim(d)
        return WrappedGaussian(_unflat(data["base"], d), np.asarray(data["mu"], float),
                               _unflat(data["cov"], m))
    if kind == "class_model":
        means = covs = None
        if "means" in data:
            m = geo.coords_dim(d)
            means = np.asarray(data["means"], float)
            covs = _unflat(data["covs"], m)
        return ClassModel(data["variant"], np.asarray(data["priors"], float),
                          _unflat(data["bases"], d), means, covs, float(data["sigma"]))
    if kind == "potato_state":
        return PotatoState(_unflat(data["reference"], d), data["mu"], data["sigma"],
                           int(data["count"]), data["z_th"])
    if kind == "pca_projector":
        w = np.asarray(data["w"], float).reshape(d, int(data["p"]))
        return PcaProjector(w, data.get("objective", float("nan")))
    raise ValueError(f"unknown artifact kind {kind!r}")


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(to_dict(obj), fh)


def load_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}", "io") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON in {path}: {exc}", "parse") from exc
    if "kind" not in data and "matrices" in data:
        return dataset_from_dict(data)
    return from_dict(data)
