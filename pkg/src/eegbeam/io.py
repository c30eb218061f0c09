"""Readers and writers for EEG and lead-field files.

EEG binary (``.eegb``), all little-endian::

    45 45 47 42 01          magic "EEGB" + version 1
    u32 k, u64 N
    f64 sample_rate         0 means absent
    k*N f64                 channel-major (row after row)

Lead-field binary (``.lfb``)::

    4C 46 42 31             magic "LFB1"
    u32 k, u32 P
    P x (3 f64 position, k*3 f64 gains row-major)

EEG can also be imported from CSV with one channel per row.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .beamformer import LeadField
from .covstream import EegWindow
from .errors import DataError

EEG_MAGIC = b"EEGB\x01"
LF_MAGIC = b"LFB1"
_F64 = np.dtype("<f8")


def eeg_bytes(window: EegWindow) -> bytes:
    k, n = window.data.shape
    header = EEG_MAGIC + struct.pack("<IQd", k, n, window.sample_rate or 0.0)
    return header + np.ascontiguousarray(window.data, dtype=_F64).tobytes()


def write_eeg(path, window: EegWindow) -> None:
    Path(path).write_bytes(eeg_bytes(window))


def parse_eeg(raw: bytes) -> EegWindow:
    head = len(EEG_MAGIC) + struct.calcsize("<IQd")
    if raw[:len(EEG_MAGIC)] != EEG_MAGIC or len(raw) < head:
        raise DataError("not an EEGB version 1 file")
    k, n, rate = struct.unpack_from("<IQd", raw, len(EEG_MAGIC))
    expected = head + 8 * k * n
    if len(raw) != expected:
        raise DataError(f"EEGB payload has {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype=_F64, offset=head).reshape(k, n).astype(float)
    return EegWindow(data, rate if rate > 0 else None)


def read_eeg_csv(path, sample_rate: float | None = None) -> EegWindow:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse CSV {path}: {exc}") from None
    return EegWindow(data, sample_rate)


def read_eeg(path) -> EegWindow:
    """Read EEGB, or CSV when the file does not start with the EEGB magic."""
    raw = Path(path).read_bytes()
    if raw[:4] == EEG_MAGIC[:4]:
        return parse_eeg(raw)
    return read_eeg_csv(path)


def leadfield_bytes(lf: LeadField) -> bytes:
    P, k = len(lf), lf.k
    body = np.concatenate([lf.positions, lf.gains.reshape(P, 3 * k)], axis=1)
    return LF_MAGIC + struct.pack("<II", k, P) + np.ascontiguousarray(body, dtype=_F64).tobytes()


def write_leadfield(path, lf: LeadField) -> None:
    Path(path).write_bytes(leadfield_bytes(lf))


def parse_leadfield(raw: bytes) -> LeadField:
    head = len(LF_MAGIC) + 8
    if raw[:len(LF_MAGIC)] != LF_MAGIC or len(raw) < head:
        raise DataError("not an LFB1 file")
    k, P = struct.unpack_from("<II", raw, len(LF_MAGIC))
    width = 3 + 3 * k
    if len(raw) != head + 8 * P * width:
        raise DataError(f"LFB1 payload has {len(raw)} bytes, header implies {head + 8 * P * width}")
    body = np.frombuffer(raw, dtype=_F64, offset=head).reshape(P, width).astype(float)
    return LeadField(body[:, :3], body[:, 3:].reshape(P, k, 3))


def read_leadfield(path) -> LeadField:
    return parse_leadfield(Path(path).read_bytes())
