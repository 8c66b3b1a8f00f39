"""Matrix files shared by every stage.

Two encodings are supported:

* CSV: one row per line, ``.`` decimal separator, no header.
* Binary: the 8-byte magic ``b"GRSM\\x00\\x00\\x00\\x01"``, then rows and
  cols as little-endian ``uint64``, then the entries as row-major
  little-endian ``float64``.

`read_matrix` / `write_matrix` pick the encoding from the file suffix
(``.csv`` means CSV, anything else binary) unless ``fmt`` is given.

A sample manifest lists trained parameters and their files, one sample per
line as ``key=value`` fields separated by spaces::

    # comment
    gamma=0.1 snapshots=snap_000.bin u=u_000.bin sigma=sigma_000.bin v=v_000.bin

``gamma`` holds comma-separated components; file paths are relative to the
manifest's directory. Every line needs ``gamma`` and at least one file.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, MatrixFormatError
from .itsgm import SampleSet

MAGIC = b"GRSM\x00\x00\x00\x01"
_HEADER = struct.Struct("<8sQQ")


def _format_for(path, fmt):
    if fmt is None:
        fmt = "csv" if Path(path).suffix.lower() == ".csv" else "bin"
    if fmt not in ("csv", "bin"):
        raise ValueError(f"unknown matrix format {fmt!r}")
    return fmt


def encode_binary(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return _HEADER.pack(MAGIC, a.shape[0], a.shape[1]) + a.tobytes()


def decode_binary(data, source="<bytes>"):
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{source}: truncated header ({len(data)} bytes)")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{source}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise MatrixFormatError(
            f"{source}: payload has {len(data)} bytes, expected {expected} for {rows}x{cols}"
        )
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape(rows, cols).astype(float)


def write_matrix(path, a, fmt=None):
    """Write a 2-D array; 1-D input is stored as a column."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    path = Path(path)
    if _format_for(path, fmt) == "bin":
        path.write_bytes(encode_binary(a))
    else:
        # repr round-trips doubles exactly
        lines = [",".join(repr(float(x)) for x in row) for row in a]
        path.write_text("\n".join(lines) + "\n")


def read_matrix(path, fmt=None):
    path = Path(path)
    if _format_for(path, fmt) == "bin":
        return decode_binary(path.read_bytes(), source=str(path))
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError as exc:
            raise MatrixFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MatrixFormatError(f"{path}: empty matrix file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise MatrixFormatError(f"{path}: ragged row {lineno} ({len(row)} != {width})")
    return np.array(rows, dtype=float)


MANIFEST_FILES = ("snapshots", "u", "sigma", "v")


def write_manifest(path, entries):
    """Write ``entries``: dicts with ``gamma`` and file names keyed as in `MANIFEST_FILES`."""
    lines = ["# grassrom sample manifest"]
    for entry in entries:
        gamma = np.atleast_1d(np.asarray(entry["gamma"], dtype=float))
        fields = ["gamma=" + ",".join(repr(float(g)) for g in gamma)]
        fields += [f"{key}={entry[key]}" for key in MANIFEST_FILES if entry.get(key)]
        lines.append(" ".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    """Parse a manifest into a list of ``{"gamma": ndarray, key: Path, ...}``."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entry = {}
        for item in line.split():
            key, sep, value = item.partition("=")
            if not sep or not value:
                raise ConfigError(f"{path}: expected key=value, got {item!r}", line=lineno)
            if key in entry:
                raise ConfigError(f"{path}: duplicate key {key!r}", line=lineno)
            if key == "gamma":
                try:
                    entry[key] = np.array([float(x) for x in value.split(",")])
                except ValueError:
                    raise ConfigError(f"{path}: bad parameter value {value!r}", line=lineno) from None
            elif key in MANIFEST_FILES:
                entry[key] = base / value
            else:
                raise ConfigError(f"{path}: unknown manifest key {key!r}", line=lineno)
        if "gamma" not in entry:
            raise ConfigError(f"{path}: sample has no gamma", line=lineno)
        if len(entry) == 1:
            raise ConfigError(f"{path}: sample lists no files", line=lineno)
        entries.append(entry)
    if not entries:
        raise ConfigError(f"{path}: manifest lists no samples")
    dims = {len(e["gamma"]) for e in entries}
    if len(dims) != 1:
        raise ConfigError(f"{path}: parameters have differing dimensions {sorted(dims)}")
    return entries


def read_samples(path):
    """Load the `SampleSet` described by a manifest.

    Every sample needs a ``u`` file; ``sigma`` and ``v`` are loaded when all
    samples list them.
    """
    entries = read_manifest(path)
    missing = [i for i, e in enumerate(entries) if "u" not in e]
    if missing:
        raise ConfigError(f"{path}: samples {missing} have no u file")
    params = np.array([e["gamma"] for e in entries])
    u = [read_matrix(e["u"]) for e in entries]
    if all("sigma" in e and "v" in e for e in entries):
        sigma = np.array([read_matrix(e["sigma"]).ravel() for e in entries])
        v = [read_matrix(e["v"]) for e in entries]
        return SampleSet(params, u, sigma, v)
    return SampleSet(params, u)
