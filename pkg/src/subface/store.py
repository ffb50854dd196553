"""Lossless, byte-deterministic model serialization.

A trained model writes as a small self-describing container: a magic
line, a sorted-key JSON header naming scalars and array layouts, then the
raw little-endian buffers in header order.  Unlike zip-based formats the
bytes depend only on the content, which is what lets identical runs
produce identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ica import IcaModel
from .numerics import KernelSpec
from .subspace import SubspaceModel

MAGIC = b"SUBFACE-MODEL\n"
FORMAT_VERSION = 1


def _pack(scalars: dict, arrays: dict) -> bytes:
    layout = []
    buffers = []
    for name in sorted(arrays):
        arr = arrays[name]
        if arr is None:
            continue
        arr = np.ascontiguousarray(arr)
        dtype = "<f8" if arr.dtype.kind == "f" else "<i8"
        arr = arr.astype(dtype)
        layout.append({"name": name, "shape": list(arr.shape), "dtype": dtype})
        buffers.append(arr.tobytes())
    header = dict(scalars)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = layout
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<I", len(blob)) + blob + b"".join(buffers)


def _unpack(data: bytes):
    if not data.startswith(MAGIC):
        raise ConfigError("not a model container (bad magic)")
    offset = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset:offset + hlen].decode())
    offset += hlen
    arrays = {}
    for item in header.pop("arrays"):
        count = int(np.prod(item["shape"])) if item["shape"] else 1
        itemsize = 8
        raw = data[offset:offset + count * itemsize]
        offset += count * itemsize
        arrays[item["name"]] = np.frombuffer(raw, dtype=item["dtype"]).reshape(
            item["shape"]
        ).copy()
    return header, arrays


def _kernel_fields(spec: KernelSpec | None) -> dict:
    if spec is None:
        return {"kernel_kind": None}
    return {
        "kernel_kind": spec.kind,
        "kernel_sigma": spec.sigma,
        "kernel_offset": spec.offset,
    }


def save_model(model, path) -> None:
    """Write a SubspaceModel or IcaModel to its container file."""
    if isinstance(model, SubspaceModel):
        scalars = {
            "model_type": "subspace",
            "kind": model.kind,
            "t": model.t,
            **_kernel_fields(model.kernel_spec),
        }
        arrays = {
            "mean": model.mean,
            "eigenvalues": model.eigenvalues,
            "linear_basis": model.linear_basis,
            "train_columns": model.train_columns,
            "train_kernel": model.train_kernel,
            "coefficients": model.coefficients,
            "training_coords": model.training_coords,
        }
    elif isinstance(model, IcaModel):
        scalars = {
            "model_type": "ica",
            "architecture": model.architecture,
            "algorithm": model.algorithm,
            "rep_rule": model.rep_rule,
            "pca_kind": model.pca_pre.kind,
            "pca_t": model.pca_pre.t,
        }
        arrays = {
            "unmixing": model.unmixing,
            "mixing": model.mixing,
            "basis_images": model.basis_images,
            "rep_matrix": model.rep_matrix,
            "training_representation": model.training_representation,
            "pca_mean": model.pca_pre.mean,
            "pca_eigenvalues": model.pca_pre.eigenvalues,
            "pca_linear_basis": model.pca_pre.linear_basis,
            "pca_training_coords": model.pca_pre.training_coords,
        }
    else:
        raise ConfigError(f"cannot serialize object of type {type(model).__name__}")
    Path(path).write_bytes(_pack(scalars, arrays))


def load_model(path):
    """Read back a model container written by save_model."""
    header, arrays = _unpack(Path(path).read_bytes())
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported container version {header.get('format_version')}"
        )
    if header["model_type"] == "subspace":
        spec = None
        if header.get("kernel_kind"):
            spec = KernelSpec(
                kind=header["kernel_kind"],
                sigma=header["kernel_sigma"],
                offset=header["kernel_offset"],
            )
        return SubspaceModel(
            kind=header["kind"],
            t=header["t"],
            mean=arrays["mean"],
            eigenvalues=arrays["eigenvalues"],
            linear_basis=arrays.get("linear_basis"),
            kernel_spec=spec,
            train_columns=arrays.get("train_columns"),
            train_kernel=arrays.get("train_kernel"),
            coefficients=arrays.get("coefficients"),
            training_coords=arrays.get("training_coords"),
        )
    if header["model_type"] == "ica":
        pca = SubspaceModel(
            kind=header["pca_kind"],
            t=header["pca_t"],
            mean=arrays["pca_mean"],
            eigenvalues=arrays["pca_eigenvalues"],
            linear_basis=arrays["pca_linear_basis"],
            training_coords=arrays["pca_training_coords"],
        )
        return IcaModel(
            architecture=header["architecture"],
            algorithm=header["algorithm"],
            unmixing=arrays["unmixing"],
            mixing=arrays["mixing"],
            pca_pre=pca,
            basis_images=arrays["basis_images"],
            rep_matrix=arrays["rep_matrix"],
            rep_rule=header["rep_rule"],
            training_representation=arrays["training_representation"],
        )
    raise ConfigError(f"unknown model_type {header['model_type']!r}")
