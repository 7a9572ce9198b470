"""Named parameter storage with trainable flags and checkpoint archives.

A checkpoint is a zip archive holding a canonical-JSON manifest
(format version, per-entry name/shape/dtype/trainable flag, free-form
metadata) plus one raw little-endian block per entry. Archive writing
is fully deterministic, so load followed by save is byte-identical.
"""

from __future__ import annotations

import json
import zipfile

import numpy as np

from .autodiff import Var, check_finite

FORMAT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


class ParameterSet:
    """Ordered mapping of name -> float64 array with a trainable flag each."""

    def __init__(self):
        self._entries: dict[str, np.ndarray] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name, array, trainable=True):
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.array(array, dtype=np.float64)
        check_finite(arr, f"parameter {name!r}")
        self._entries[name] = arr
        self._trainable[name] = bool(trainable)
        return arr

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name):
        return self._entries[name]

    def set(self, name, array):
        arr = np.asarray(array, dtype=np.float64)
        if arr.shape != self._entries[name].shape:
            raise ValueError(f"shape mismatch for {name!r}")
        check_finite(arr, f"parameter {name!r}")
        self._entries[name] = arr.copy()

    def names(self):
        return list(self._entries)

    def trainable(self, name):
        return self._trainable[name]

    def trainable_names(self):
        return [n for n, t in self._trainable.items() if t]

    def freeze(self, name):
        self._trainable[name] = False

    def bind(self):
        """Wrap every entry in a Var; trainable entries track gradients."""
        return {
            n: Var(a, requires_grad=self._trainable[n])
            for n, a in self._entries.items()
        }

    def copy(self):
        out = ParameterSet()
        for n, a in self._entries.items():
            out.add(n, a.copy(), trainable=self._trainable[n])
        return out

    def state_bytes(self):
        """Concatenated raw bytes of all entries, for byte-identity checks."""
        return b"".join(
            np.ascontiguousarray(self._entries[n]).tobytes()
            for n in sorted(self._entries)
        )


def save_checkpoint(params, path, meta=None):
    """Write a ParameterSet plus metadata as a deterministic zip archive."""
    entries = []
    for name in sorted(params.names()):
        arr = params[name]
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": arr.dtype.newbyteorder("<").str,
                "trainable": params.trainable(name),
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "entries": entries,
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        _write_member(zf, "manifest.json", blob)
        for name in sorted(params.names()):
            arr = np.ascontiguousarray(params[name].astype(params[name].dtype.newbyteorder("<")))
            _write_member(zf, f"data/{name}.bin", arr.tobytes())


def _write_member(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    info.create_system = 3
    zf.writestr(info, data)


def load_checkpoint(path):
    """Read an archive back into (ParameterSet, meta dict)."""
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint format version {manifest.get('format_version')!r}"
            )
        params = ParameterSet()
        for entry in manifest["entries"]:
            raw = zf.read(f"data/{entry['name']}.bin")
            arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(
                entry["shape"]
            )
            params.add(entry["name"], arr, trainable=entry["trainable"])
    return params, manifest.get("meta", {})
