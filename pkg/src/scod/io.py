"""Binary and text file formats.

All multi-byte fields are little-endian; floats are IEEE-754 binary64.

Model file::

    8 bytes   magic b"SCODMDL1"
    u64       length n of the JSON header
    n bytes   UTF-8 JSON {"model": {"layer_sizes": [...], "activation": ...},
                          "family": {...}}  (sorted keys, no whitespace)
    N * f64   flat weight vector, layer by layer: W row-major then b

Dataset file::

    8 bytes   magic b"SCODDAT1"
    u64       rows, u64 input dim, u64 target dim
    rows * (input dim + target dim) * f64, row-major (inputs then targets)

A plain-text dataset alternative holds one row per line of whitespace
separated decimals, with an optional ``# dims <n_in> <n_target>`` header;
without the header every column is an input.

Monitor file::

    8 bytes   magic b"SCODMON1"
    u64 N, u64 k, u64 T, u64 seed, f64 eps2, u64 M
    k * f64       eigenvalues, descending
    N * k * f64   eigenvectors, column-major
    u64 n_mask, then n_mask * u64 weight indices (n_mask = 0: no mask)

Score files hold one decimal per line (``repr`` precision).
"""
import json
import struct

import numpy as np

from .distributions import family_from_dict
from .errors import ArtifactMismatch, InvalidArgument
from .model import ModelConfig, WeightMask, check_weights
from .monitor import Monitor
from .sketch import LowRankPSD

MODEL_MAGIC = b"SCODMDL1"
DATA_MAGIC = b"SCODDAT1"
MONITOR_MAGIC = b"SCODMON1"

_F64 = np.dtype("<f8")
_U64 = np.dtype("<u8")


def _read_magic(buf, magic, what):
    if buf[:8] != magic:
        raise ArtifactMismatch(f"not a {what} file (bad magic bytes)")


# --------------------------------------------------------------------- model


def model_to_bytes(config, family, w):
    w = check_weights(config, w)
    header = json.dumps(
        {"model": config.to_dict(), "family": family.to_dict()}, sort_keys=True, separators=(",", ":")
    ).encode()
    return MODEL_MAGIC + struct.pack("<Q", len(header)) + header + w.astype(_F64).tobytes()


def model_from_bytes(buf):
    _read_magic(buf, MODEL_MAGIC, "model")
    (n,) = struct.unpack_from("<Q", buf, 8)
    header = json.loads(buf[16:16 + n].decode())
    config = ModelConfig.from_dict(header["model"])
    family = family_from_dict(header["family"])
    w = np.frombuffer(buf, dtype=_F64, offset=16 + n).astype(float)
    if w.size != config.n_weights:
        raise ArtifactMismatch(f"model file holds {w.size} weights, config needs {config.n_weights}")
    return config, family, w


def save_model(path, config, family, w):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(config, family, w))


def load_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


# ------------------------------------------------------------------- dataset


def save_dataset(path, X, Y=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.zeros((X.shape[0], 0)) if Y is None else np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    rows = np.hstack([X, Y]).astype(_F64)
    with open(path, "wb") as fh:
        fh.write(DATA_MAGIC + struct.pack("<QQQ", X.shape[0], X.shape[1], Y.shape[1]))
        fh.write(rows.tobytes())


def _parse_text_dataset(text, n_in):
    dims = None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["dims"]:
                dims = (int(parts[1]), int(parts[2]))
            continue
        rows.append([float(t) for t in line.split()])
    if dims is not None:
        n_in = dims[0]
    if not rows:
        width = n_in or 0
        return np.zeros((0, width)), np.zeros((0, 0 if dims is None else dims[1]))
    arr = np.asarray(rows, dtype=float)
    n_in = arr.shape[1] if n_in is None else n_in
    if arr.shape[1] < n_in:
        raise ArtifactMismatch(f"text dataset has {arr.shape[1]} columns, expected at least {n_in}")
    return arr[:, :n_in], arr[:, n_in:]


def load_dataset(path, n_in=None):
    """Return ``(X, Y)``; binary or text is detected from the magic bytes."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != DATA_MAGIC:
        try:
            return _parse_text_dataset(buf.decode(), n_in)
        except (UnicodeDecodeError, ValueError, IndexError) as exc:
            raise ArtifactMismatch(f"{path}: unreadable dataset ({exc})") from exc
    rows, dx, dy = struct.unpack_from("<QQQ", buf, 8)
    flat = np.frombuffer(buf, dtype=_F64, offset=32)
    if flat.size != rows * (dx + dy):
        raise ArtifactMismatch(f"{path}: dataset body is truncated")
    arr = flat.reshape(rows, dx + dy).astype(float)
    if n_in is not None and dx != n_in:
        raise ArtifactMismatch(f"{path}: inputs have {dx} features, model expects {n_in}")
    return arr[:, :dx], arr[:, dx:]


# ------------------------------------------------------------------- monitor


def monitor_to_bytes(monitor):
    U, lam = monitor.basis.U, monitor.basis.lam
    N, k = U.shape
    out = [
        MONITOR_MAGIC,
        struct.pack("<QQQQdQ", N, k, monitor.T, monitor.seed, monitor.eps2, monitor.M),
        lam.astype(_F64).tobytes(),
        np.asfortranarray(U).astype(_F64).tobytes(order="F"),
    ]
    idx = np.zeros(0, dtype=np.int64) if monitor.mask is None else monitor.mask.indices
    out.append(struct.pack("<Q", idx.size) + idx.astype(_U64).tobytes())
    return b"".join(out)


def monitor_from_bytes(buf, config, family, w):
    """Rebuild a monitor; the model must match the one it was fitted on."""
    _read_magic(buf, MONITOR_MAGIC, "monitor")
    N, k, T, seed, eps2, M = struct.unpack_from("<QQQQdQ", buf, 8)
    off = 8 + 48
    lam = np.frombuffer(buf, dtype=_F64, count=k, offset=off).astype(float)
    off += 8 * k
    U = np.frombuffer(buf, dtype=_F64, count=N * k, offset=off).reshape((N, k), order="F").astype(float)
    off += 8 * N * k
    (n_mask,) = struct.unpack_from("<Q", buf, off)
    off += 8
    mask = None
    if n_mask:
        mask = WeightMask(np.frombuffer(buf, dtype=_U64, count=n_mask, offset=off).astype(np.int64))
        if mask.indices[-1] >= config.n_weights:
            raise ArtifactMismatch("monitor mask indexes past the model's weight vector")
    n_sel = config.n_weights if mask is None else len(mask)
    if N != n_sel:
        raise ArtifactMismatch(f"monitor basis has N={N} rows but the model has {n_sel} (masked) weights")
    try:
        return Monitor(config, w, family, LowRankPSD(U, lam), eps2, M, mask, T, seed)
    except InvalidArgument as exc:
        raise ArtifactMismatch(str(exc)) from exc


def save_monitor(path, monitor):
    with open(path, "wb") as fh:
        fh.write(monitor_to_bytes(monitor))


def load_monitor(path, config, family, w):
    with open(path, "rb") as fh:
        return monitor_from_bytes(fh.read(), config, family, w)


# -------------------------------------------------------------------- scores


def save_scores(path, scores):
    with open(path, "w") as fh:
        fh.writelines(f"{float(s)!r}\n" for s in scores)


def load_scores(path):
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()], dtype=float)
