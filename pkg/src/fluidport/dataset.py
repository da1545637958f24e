"""Supervised datasets for port prediction.

Each sample is one channel realization: the input is the sequence of observed
ports in ascending index order, one feature vector [SINR in dB, port position
n/(N-1)] per step, standardized with statistics fit on the training split; the
target is an N-dim multi-hot mask of the M highest-SINR ports.  The full
ground-truth SINR vector is kept alongside each sample so selection policies
can be scored on the splits without regenerating channels.
"""

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_int, rng_from
from .channel import factorize_correlation, build_correlation_matrix, generate_gain_batch
from .fama import sinr_per_port_batch
from .selection import observed_indices, top_k_indices

__all__ = [
    "Sample",
    "SplitArrays",
    "DatasetSplit",
    "FeatureNormalizer",
    "DatasetFormatError",
    "top_m_labels",
    "sequence_features",
    "build_dataset",
    "save_dataset",
    "load_dataset",
    "export_csv",
]

FORMAT_NAME = "fluidport-dataset"
FORMAT_VERSION = 1

# Floor on linear SINR before the dB conversion; ground-truth SINR is positive
# almost surely, this only guards against exact zeros.
_DB_FLOOR = 1e-30

SPLIT_NAMES = ("train", "validation", "test")


class DatasetFormatError(Exception):
    """Raised on version, checksum, truncation, or shape mismatches."""


@dataclass(frozen=True)
class Sample:
    """One supervised example (sequence features, multi-hot labels, true SINR)."""

    features: np.ndarray
    labels: np.ndarray
    sinr: np.ndarray


@dataclass(frozen=True)
class SplitArrays:
    """Column store for one split: features (B, T, F), labels (B, N), sinr (B, N)."""

    features: np.ndarray
    labels: np.ndarray
    sinr: np.ndarray

    def __len__(self):
        return self.features.shape[0]

    def sample(self, i):
        return Sample(self.features[i], self.labels[i], self.sinr[i])


@dataclass(frozen=True)
class DatasetSplit:
    """70/15/15 split plus the metadata needed to reproduce and consume it."""

    train: SplitArrays
    validation: SplitArrays
    test: SplitArrays
    normalizer: "FeatureNormalizer"
    meta: dict

    def split(self, name):
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, "validation" if name == "validation" else name)

    @property
    def observed(self):
        return np.asarray(self.meta["observed_indices"], dtype=int)


def top_m_labels(sinr, m_labels):
    """Multi-hot mask of the ``m_labels`` largest SINR entries (ties to lower index)."""
    sinr = np.asarray(sinr, dtype=float)
    n = sinr.shape[-1]
    m_labels = check_int("m_labels", m_labels, minimum=1, maximum=n)
    values = np.atleast_2d(sinr)
    labels = np.zeros(values.shape, dtype=np.uint8)
    np.put_along_axis(labels, top_k_indices(values, m_labels), 1, axis=-1)
    return labels[0] if sinr.ndim == 1 else labels.reshape(sinr.shape)


def sequence_features(sinr_observed, observed, n_ports):
    """Raw (B, m, 2) feature sequences: [SINR in dB, port position n/(N-1)]."""
    sinr_observed = np.atleast_2d(np.asarray(sinr_observed, dtype=float))
    observed = np.asarray(observed, dtype=int)
    db = 10.0 * np.log10(np.maximum(sinr_observed, _DB_FLOOR))
    pos = observed / (n_ports - 1)
    feats = np.empty(sinr_observed.shape + (2,), dtype=float)
    feats[..., 0] = db
    feats[..., 1] = pos
    return feats


class FeatureNormalizer(BaseEstimator, TransformerMixin):
    """Standardize sequence features; optionally project to a PCA basis.

    Statistics are fit on the training split only.  With ``with_pca`` the
    standardized sequences are flattened, projected onto the components
    explaining at least ``pca_variance`` of the variance, and returned as
    single-step sequences (B, 1, C) for the dense baseline.
    """

    def __init__(self, with_pca=False, pca_variance=0.95):
        self.with_pca = with_pca
        self.pca_variance = pca_variance

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3:
            raise ValueError(f"expected (B, T, F) features, got shape {X.shape}")
        flat = X.reshape(-1, X.shape[-1])
        self.mean_ = flat.mean(axis=0)
        self.std_ = np.maximum(flat.std(axis=0), 1e-12)
        self.seq_shape_ = X.shape[1:]
        if self.with_pca:
            z = ((X - self.mean_) / self.std_).reshape(X.shape[0], -1)
            self.pca_mean_ = z.mean(axis=0)
            _, sing, vt = np.linalg.svd(z - self.pca_mean_, full_matrices=False)
            var = sing**2
            ratio = np.cumsum(var) / max(var.sum(), 1e-300)
            n_comp = int(np.searchsorted(ratio, self.pca_variance) + 1)
            self.components_ = vt[:n_comp]
        else:
            self.pca_mean_ = None
            self.components_ = None
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureNormalizer must be fit before transform")
        X = np.asarray(X, dtype=float)
        z = (X - self.mean_) / self.std_
        if self.components_ is None:
            return z
        flat = z.reshape(X.shape[0], -1) - self.pca_mean_
        return (flat @ self.components_.T)[:, np.newaxis, :]

    def inverse_transform(self, Z):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureNormalizer must be fit before inverse_transform")
        Z = np.asarray(Z, dtype=float)
        if self.components_ is None:
            return Z * self.std_ + self.mean_
        flat = Z[:, 0, :] @ self.components_ + self.pca_mean_
        z = flat.reshape((Z.shape[0],) + tuple(self.seq_shape_))
        return z * self.std_ + self.mean_

    def state_dict(self):
        state = {"with_pca": self.with_pca, "pca_variance": self.pca_variance}
        if hasattr(self, "mean_"):
            state["mean"] = self.mean_.tolist()
            state["std"] = self.std_.tolist()
            state["seq_shape"] = list(self.seq_shape_)
            if self.components_ is not None:
                state["pca_mean"] = self.pca_mean_.tolist()
                state["components"] = self.components_.tolist()
        return state

    @classmethod
    def from_state(cls, state):
        norm = cls(with_pca=state["with_pca"], pca_variance=state["pca_variance"])
        if "mean" in state:
            norm.mean_ = np.asarray(state["mean"], dtype=float)
            norm.std_ = np.asarray(state["std"], dtype=float)
            norm.seq_shape_ = tuple(state["seq_shape"])
            if "components" in state:
                norm.pca_mean_ = np.asarray(state["pca_mean"], dtype=float)
                norm.components_ = np.asarray(state["components"], dtype=float)
            else:
                norm.pca_mean_ = None
                norm.components_ = None
        return norm


def _split_counts(count):
    n_train = int(np.floor(count * 0.70))
    n_val = int(np.floor(count * 0.15))
    return n_train, n_val, count - n_train - n_val


def build_dataset(system, antenna, params, m_observed, m_labels, count, seed):
    """Generate ``count`` realizations and package them as a 70/15/15 dataset.

    Features come from the uniformly placed observed ports, labels from the
    full ground-truth SINR.  The normalizer is fit on the training split and
    applied to every split; membership is a seeded shuffle.
    """
    count = check_int("count", count, minimum=10)
    check_int("m_labels", m_labels, minimum=1, maximum=antenna.n_ports)
    observed = np.asarray(observed_indices(antenna.n_ports, m_observed), dtype=int)
    factor = factorize_correlation(build_correlation_matrix(antenna))

    rng = rng_from(seed, 0)
    sinr = np.empty((count, antenna.n_ports), dtype=float)
    done = 0
    while done < count:
        batch = min(8192, count - done)
        gains = generate_gain_batch(system, antenna, params, factor, rng, batch)
        sinr[done : done + batch] = sinr_per_port_batch(gains, system)
        done += batch

    # Label from the float32-rounded SINR that the file will carry, so stored
    # labels and stored SINR never disagree on near-ties.
    sinr = sinr.astype(np.float32).astype(float)
    features = sequence_features(sinr[:, observed], observed, antenna.n_ports)
    labels = top_m_labels(sinr, m_labels)

    order = rng_from(seed, 1).permutation(count)
    n_train, n_val, n_test = _split_counts(count)
    parts = np.split(order, [n_train, n_train + n_val])

    normalizer = FeatureNormalizer().fit(features[parts[0]])
    splits = [
        SplitArrays(
            features=normalizer.transform(features[part]).astype(np.float32),
            labels=labels[part],
            sinr=sinr[part].astype(np.float32),
        )
        for part in parts
    ]
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_ports": antenna.n_ports,
        "aperture": antenna.aperture,
        "m_observed": int(m_observed),
        "m_labels": int(m_labels),
        "alpha": params.alpha,
        "mu": params.mu,
        "rhat": params.rhat,
        "n_users": system.n_users,
        "signal_power": system.signal_power,
        "noise_power": system.noise_power,
        "gamma_th_db": system.gamma_th_db,
        "interference_mode": system.interference_mode,
        "seed": int(seed),
        "counts": {"train": n_train, "validation": n_val, "test": n_test},
        "observed_indices": observed.tolist(),
        "normalizer": normalizer.state_dict(),
    }
    return DatasetSplit(splits[0], splits[1], splits[2], normalizer, meta)


def relabel(dataset, m_labels):
    """Same dataset with labels recomputed for a different class count M."""
    new_splits = {}
    for name in SPLIT_NAMES:
        part = dataset.split(name)
        new_splits[name] = SplitArrays(
            features=part.features,
            labels=top_m_labels(part.sinr.astype(float), m_labels),
            sinr=part.sinr,
        )
    meta = dict(dataset.meta, m_labels=int(m_labels))
    return DatasetSplit(
        new_splits["train"],
        new_splits["validation"],
        new_splits["test"],
        dataset.normalizer,
        meta,
    )


def _payload_arrays(dataset):
    for name in SPLIT_NAMES:
        yield f"{name}/features", dataset.split(name).features.astype("<f4")
    for name in SPLIT_NAMES:
        yield f"{name}/labels", dataset.split(name).labels.astype(np.uint8)
    for name in SPLIT_NAMES:
        yield f"{name}/sinr", dataset.split(name).sinr.astype("<f4")


def save_dataset(dataset, path):
    """Write header JSON line + raw little-endian arrays; sha256 over the payload."""
    blobs, layout = [], []
    for name, arr in _payload_arrays(dataset):
        blobs.append(arr.tobytes(order="C"))
        layout.append([name, list(arr.shape), str(arr.dtype)])
    payload = b"".join(blobs)
    header = dict(dataset.meta)
    header["layout"] = layout
    header["checksum"] = "sha256:" + hashlib.sha256(payload).hexdigest()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def load_dataset(path, expect=None):
    """Read a dataset file back; ``expect`` maps header keys to required values."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"unreadable dataset header: {exc}") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset format {header.get('format')!r} "
            f"version {header.get('version')!r}"
        )
    digest = "sha256:" + hashlib.sha256(payload).hexdigest()
    if digest != header["checksum"]:
        raise DatasetFormatError("dataset payload failed its checksum (corrupt file?)")
    if expect:
        for key, value in expect.items():
            if header.get(key) != value:
                raise DatasetFormatError(
                    f"dataset {key} mismatch: file has {header.get(key)!r}, "
                    f"expected {value!r}"
                )

    arrays = {}
    offset = 0
    for name, shape, dtype in header["layout"]:
        n_bytes = int(np.prod(shape)) * np.dtype(dtype).itemsize
        chunk = payload[offset : offset + n_bytes]
        if len(chunk) != n_bytes:
            raise DatasetFormatError("dataset payload truncated")
        arrays[name] = np.frombuffer(chunk, dtype=dtype).reshape(shape)
        offset += n_bytes
    if offset != len(payload):
        raise DatasetFormatError("dataset payload has trailing bytes")

    normalizer = FeatureNormalizer.from_state(header["normalizer"])
    splits = {
        name: SplitArrays(
            features=arrays[f"{name}/features"],
            labels=arrays[f"{name}/labels"],
            sinr=arrays[f"{name}/sinr"],
        )
        for name in SPLIT_NAMES
    }
    meta = {k: v for k, v in header.items() if k not in ("layout", "checksum")}
    return DatasetSplit(splits["train"], splits["validation"], splits["test"], normalizer, meta)


def export_csv(dataset, path):
    """Mirror the dataset content as CSV for inspection."""
    seq_len, n_feat = dataset.train.features.shape[1:]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["split", "index"]
            + [f"f{t}_{j}" for t in range(seq_len) for j in range(n_feat)]
            + ["labels"]
        )
        for name in SPLIT_NAMES:
            part = dataset.split(name)
            for i in range(len(part)):
                flat = [f"{v:.7g}" for v in part.features[i].reshape(-1)]
                mask = "".join(str(int(b)) for b in part.labels[i])
                writer.writerow([name, i] + flat + [mask])
