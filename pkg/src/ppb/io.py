"""Event files, curve tables, summaries and atomic writes.

Binary event files are little-endian: a 16-byte header (magic ``PPES``,
u32 format version, u64 record count) followed by 9-byte records of
(u8 channel, u64 timestamp in ps).
"""

import hashlib
import io
import os
import tempfile
from pathlib import Path

import numpy as np
import tomli_w

from .errors import CorruptFileError, InputError
from .simulate import EventStream, PS

MAGIC = b"PPES"
VERSION = 1
HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("count", "<u8")])
RECORD = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
CSV_HEADER = "channel,timestamp_ps"

assert HEADER.itemsize == 16 and RECORD.itemsize == 9


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def merge_streams(streams):
    """Interleave streams into (channel, timestamp) records ordered by time."""
    streams = list(streams.values()) if isinstance(streams, dict) else list(streams)
    if not streams:
        return np.empty(0, dtype=np.uint8), np.empty(0, dtype=np.int64)
    ts = np.concatenate([s.timestamps for s in streams])
    ch = np.concatenate([np.full(len(s), s.channel, dtype=np.uint8) for s in streams])
    order = np.argsort(ts, kind="stable")
    return ch[order], ts[order]


def split_records(channels, timestamps, duration=None):
    """Records back to a dict channel -> EventStream.

    Without an explicit ``duration`` the acquisition is taken to end just
    after the last timestamp.
    """
    if duration is None:
        duration = (int(timestamps.max()) + 1) / PS if timestamps.size else 1.0 / PS
    out = {}
    for c in np.unique(channels):
        t = np.sort(timestamps[channels == c].astype(np.int64), kind="stable")
        out[int(c)] = EventStream(t, duration, int(c))
    return out


def encode_events(channels, timestamps):
    channels = np.asarray(channels)
    timestamps = np.asarray(timestamps)
    if channels.shape != timestamps.shape:
        raise InputError("channel and timestamp arrays differ in length")
    if timestamps.size and (timestamps.min() < 0 or channels.min() < 0 or channels.max() > 255):
        raise InputError("timestamps must be non-negative and channels fit in u8")
    header = np.array([(MAGIC, VERSION, timestamps.size)], dtype=HEADER)
    rec = np.empty(timestamps.size, dtype=RECORD)
    rec["channel"] = channels
    rec["timestamp"] = timestamps
    return header.tobytes() + rec.tobytes()


def decode_events(data, source="<bytes>"):
    """Parse a binary event file image into (channels u8, timestamps int64)."""
    if len(data) < HEADER.itemsize:
        raise CorruptFileError(f"{source}: truncated header")
    header = np.frombuffer(data, dtype=HEADER, count=1)[0]
    if header["magic"] != MAGIC:
        raise CorruptFileError(f"{source}: bad magic {bytes(header['magic'])!r}")
    if header["version"] != VERSION:
        raise CorruptFileError(f"{source}: unsupported format version {int(header['version'])}")
    count = int(header["count"])
    if len(data) != HEADER.itemsize + count * RECORD.itemsize:
        raise CorruptFileError(f"{source}: size does not match the record count {count}")
    rec = np.frombuffer(data, dtype=RECORD, offset=HEADER.itemsize, count=count)
    ts = rec["timestamp"]
    if count and ts.max() > np.iinfo(np.int64).max:
        raise CorruptFileError(f"{source}: timestamp overflows int64")
    return rec["channel"].copy(), ts.astype(np.int64)


def write_events(path, streams):
    ch, ts = merge_streams(streams)
    return atomic_write(path, encode_events(ch, ts))


def read_event_records(path):
    path = Path(path)
    return decode_events(path.read_bytes(), str(path))


def read_events(path, duration=None):
    return split_records(*read_event_records(path), duration=duration)


def events_to_csv_text(channels, timestamps):
    body = "\n".join(f"{c},{t}" for c, t in zip(channels.tolist(), timestamps.tolist()))
    return CSV_HEADER + "\n" + (body + "\n" if body else "")


def csv_text_to_events(text, source="<csv>"):
    lines = text.splitlines()
    if not lines or lines[0].replace(" ", "") != CSV_HEADER:
        raise CorruptFileError(f"{source}: expected header '{CSV_HEADER}'")
    if len(lines) == 1 or not any(line.strip() for line in lines[1:]):
        return np.empty(0, dtype=np.uint8), np.empty(0, dtype=np.int64)
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise CorruptFileError(f"{source}: {exc}") from None
    if data.shape[1] != 2:
        raise CorruptFileError(f"{source}: expected two columns")
    if np.any(data[:, 0] < 0) or np.any(data[:, 0] > 255) or np.any(data[:, 1] < 0):
        raise CorruptFileError(f"{source}: channel or timestamp out of range")
    return data[:, 0].astype(np.uint8), data[:, 1]


def write_events_csv(path, streams):
    return atomic_write(path, events_to_csv_text(*merge_streams(streams)))


def read_events_csv(path, duration=None):
    path = Path(path)
    return split_records(*csv_text_to_events(path.read_text(), str(path)), duration=duration)


def convert(src, dst=None, direction=None):
    """Binary <-> CSV, preserving record order so the round trip is exact.

    The direction is inferred from the input's magic bytes unless given as
    ``"to-csv"`` or ``"to-binary"``.
    """
    src = Path(src)
    data = src.read_bytes()
    if direction is None:
        direction = "to-csv" if data[:4] == MAGIC else "to-binary"
    if direction == "to-csv":
        ch, ts = decode_events(data, str(src))
        dst = Path(dst) if dst else src.with_suffix(".csv")
        atomic_write(dst, events_to_csv_text(ch, ts))
    elif direction == "to-binary":
        ch, ts = csv_text_to_events(data.decode(errors="replace"), str(src))
        dst = Path(dst) if dst else src.with_suffix(".ppes")
        atomic_write(dst, encode_events(ch, ts))
    else:
        raise InputError(f"unknown conversion direction {direction!r}")
    return dst


def curve_csv_text(curve):
    lines = ["tau_ps,g2,sigma"]
    for t, g, s in zip(curve.tau, curve.g2, curve.sigma_g2):
        lines.append(f"{t:.1f},{_num(g)},{_num(s)}")
    return "\n".join(lines) + "\n"


def _num(x):
    return "nan" if not np.isfinite(x) else f"{x:.9g}"


def write_curve_csv(path, curve):
    return atomic_write(path, curve_csv_text(curve))


def read_curve_csv(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def table_csv_text(columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return _num(float(v))
    return str(v)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def summary_text(sections):
    """Structured-text summary; units live in the key names (``_cps``, ``_ps``...)."""
    return tomli_w.dumps(_plain(sections))
