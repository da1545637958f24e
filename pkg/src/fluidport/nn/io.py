"""Weights-file serialization.

A model file is one JSON header line followed by a little-endian float64 blob
holding every parameter array in the canonical layer order (``param_layout``:
LTC input kernel, recurrent kernel, bias, amplitude, tau, then dense kernels
and biases in depth order, then the output layer).  The header records the
architecture, the feature pipeline, training metadata, and a sha256 checksum
of the blob.
"""

import hashlib
import json

import numpy as np

from ..dataset import DatasetFormatError, FeatureNormalizer
from .classifier import PortPredictor
from .core import ModelSpec, param_layout

__all__ = ["save_model", "load_model", "load_predictor"]

FORMAT_NAME = "fluidport-weights"
FORMAT_VERSION = 1


def save_model(path, spec, weights, pipeline, seed=0, training=None):
    """Persist a trained model plus the pipeline needed to serve it.

    ``pipeline`` holds observed indices, the port count, the class count, and
    the normalizer states applied before the model.
    """
    layout = param_layout(spec)
    blob = b"".join(np.ascontiguousarray(weights[name], dtype="<f8").tobytes() for name, _ in layout)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "ltc_units": spec.ltc_units,
            "dense_layers": list(spec.dense_layers),
            "output_dim": spec.output_dim,
            "activation": spec.activation,
            "dt": spec.dt,
            "tau_init": spec.tau_init,
        },
        "params": [[name, list(shape)] for name, shape in layout],
        "pipeline": pipeline,
        "seed": int(seed),
        "training": training or {},
        "checksum": "sha256:" + hashlib.sha256(blob).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(blob)


def load_model(path):
    """Read a weights file; returns (spec, weights, pipeline, header)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"unreadable weights header: {exc}") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported weights format {header.get('format')!r} "
            f"version {header.get('version')!r}"
        )
    if "sha256:" + hashlib.sha256(blob).hexdigest() != header["checksum"]:
        raise DatasetFormatError("weights payload failed its checksum (corrupt file?)")

    spec_dict = dict(header["spec"])
    spec_dict["dense_layers"] = tuple(spec_dict["dense_layers"])
    spec = ModelSpec(**spec_dict)
    weights = {}
    offset = 0
    for name, shape in header["params"]:
        n_bytes = int(np.prod(shape)) * 8
        chunk = blob[offset : offset + n_bytes]
        if len(chunk) != n_bytes:
            raise DatasetFormatError("weights payload truncated")
        weights[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += n_bytes
    if offset != len(blob):
        raise DatasetFormatError("weights payload has trailing bytes")
    return spec, weights, header.get("pipeline", {}), header


def load_predictor(path):
    """Rebuild the serving-side PortPredictor from a weights file."""
    spec, weights, pipeline, header = load_model(path)
    normalizers = [FeatureNormalizer.from_state(s) for s in pipeline["normalizers"]]
    return PortPredictor(
        spec,
        weights,
        normalizers,
        observed=pipeline["observed_indices"],
        n_ports=pipeline["n_ports"],
        m_labels=pipeline.get("m_labels", 3),
    )
