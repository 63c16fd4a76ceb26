"""Binary model and measurement file formats.

Everything is little-endian. Both formats end in a CRC32 of all preceding
bytes, verified before any parsing so that any single corrupted byte is
rejected. Measurement packets carry the CRC of the model that produced
them; decoding under a different model is refused unless forced.

Model file ("MSDC", version 1):
  magic 4s | version u16 | n_B u32 | m u32 | subrate f32 | phase u32 |
  enhance1_depth u32 | enhance1_width u32 | mwcnn_levels u32 |
  widths u32 x levels | convs_per_level u32 | seed u64 |
  param_count u32 | { name_len u16 | name utf-8 | rank u8 |
  dims u32 x rank | payload f32 x prod(dims) } x count | crc32 u32

Measurement file ("MSDM", version 1):
  magic 4s | version u16 | orig_h u32 | orig_w u32 | crop_top u32 |
  crop_left u32 | crop_h u32 | crop_w u32 | n_B u32 | m u32 |
  model_crc u32 | payload f32 x (m * grid_h * grid_w), ordered
  (grid row, grid col, measurement channel) | crc32 u32
"""

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import ModelParams, NetConfig, SamplingConfig, init_params

MODEL_MAGIC = b"MSDC"
MEAS_MAGIC = b"MSDM"
FORMAT_VERSION = 1


def _crc(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def _finish(body: bytearray) -> bytes:
    return bytes(body) + struct.pack("<I", _crc(bytes(body)))


def _checked_body(data: bytes, what: str) -> bytes:
    if len(data) < 8:
        raise FormatError(f"{what} too short ({len(data)} bytes)")
    stored = struct.unpack("<I", data[-4:])[0]
    body = data[:-4]
    if _crc(body) != stored:
        raise FormatError(f"{what} failed CRC32 check (stored {stored:#010x}, "
                          f"computed {_crc(body):#010x})")
    return body


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.what} truncated at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))


def save_model(params: ModelParams, path) -> int:
    """Write the model file; returns its CRC32 (the model identity)."""
    net = params.net_cfg
    body = bytearray()
    body += MODEL_MAGIC
    body += struct.pack("<H", FORMAT_VERSION)
    body += struct.pack("<IIfI", params.n_B, params.m,
                        params.sampling_cfg.subrate, params.phase)
    body += struct.pack("<III", net.enhance1_depth, net.enhance1_width,
                        net.mwcnn_levels)
    body += struct.pack(f"<{net.mwcnn_levels}I", *net.mwcnn_widths)
    body += struct.pack("<IQ", net.mwcnn_convs_per_level, params.seed)
    plist = params.named_parameters()
    body += struct.pack("<I", len(plist))
    for p in plist:
        name = p.name.encode("utf-8")
        body += struct.pack("<H", len(name)) + name
        body += struct.pack("<B", p.value.ndim)
        body += struct.pack(f"<{p.value.ndim}I", *p.value.shape)
        body += np.ascontiguousarray(p.value, dtype="<f4").tobytes()
    blob = _finish(body)
    Path(path).write_bytes(blob)
    return _crc(blob[:-4])


def load_model(path) -> tuple[ModelParams, int]:
    """Read and verify a model file; returns (params, model crc)."""
    data = Path(path).read_bytes()
    body = _checked_body(data, f"model file {path}")
    crc = _crc(body)
    r = _Reader(body, f"model file {path}")
    if r.take(4) != MODEL_MAGIC:
        raise FormatError(f"model file {path} has wrong magic")
    (version,) = r.unpack("H")
    if version != FORMAT_VERSION:
        raise FormatError(f"model file {path}: unsupported version {version}")
    n_B, m, subrate, phase = r.unpack("IIfI")
    e1_depth, e1_width, levels = r.unpack("III")
    widths = r.unpack(f"{levels}I")
    convs, seed = r.unpack("IQ")

    sampling_cfg = SamplingConfig(block_size=n_B, subrate=float(subrate))
    if sampling_cfg.m != m:
        raise FormatError(f"model file {path}: header m={m} does not match "
                          f"subrate {subrate} at block size {n_B}")
    net_cfg = NetConfig(enhance1_depth=e1_depth, enhance1_width=e1_width,
                        mwcnn_levels=levels, mwcnn_widths=tuple(widths),
                        mwcnn_convs_per_level=convs)
    params = init_params(sampling_cfg, net_cfg, seed)
    params.phase = int(phase)
    if params.phase not in (1, 2, 3):
        raise FormatError(f"model file {path}: bad phase {phase}")

    by_name = {p.name: p for p in params.named_parameters()}
    (count,) = r.unpack("I")
    if count != len(by_name):
        raise FormatError(f"model file {path}: {count} parameters in table, "
                          f"architecture defines {len(by_name)}")
    for _ in range(count):
        (name_len,) = r.unpack("H")
        name = r.take(name_len).decode("utf-8")
        (rank,) = r.unpack("B")
        dims = r.unpack(f"{rank}I")
        p = by_name.pop(name, None)
        if p is None:
            raise FormatError(f"model file {path}: unknown parameter {name!r}")
        if tuple(dims) != p.value.shape:
            raise FormatError(f"model file {path}: parameter {name!r} has dims "
                              f"{dims}, architecture expects {p.value.shape}")
        n_vals = int(np.prod(dims)) if dims else 1
        payload = r.take(4 * n_vals)
        p.value[...] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if by_name:
        raise FormatError(f"model file {path}: missing parameters "
                          f"{sorted(by_name)}")
    if r.pos != len(body):
        raise FormatError(f"model file {path}: {len(body) - r.pos} trailing bytes")
    return params, crc


@dataclass
class MeasurementPacket:
    orig_h: int
    orig_w: int
    crop_top: int
    crop_left: int
    crop_h: int
    crop_w: int
    n_B: int
    m: int
    model_crc: int
    measurements: np.ndarray  # (1, m, grid_h, grid_w) float32


def save_measurements(packet: MeasurementPacket, path) -> None:
    body = bytearray()
    body += MEAS_MAGIC
    body += struct.pack("<H", FORMAT_VERSION)
    body += struct.pack("<IIIIII", packet.orig_h, packet.orig_w,
                        packet.crop_top, packet.crop_left,
                        packet.crop_h, packet.crop_w)
    body += struct.pack("<III", packet.n_B, packet.m, packet.model_crc)
    meas = packet.measurements
    # (1, m, gh, gw) -> (gh, gw, m) so the stream orders grid row, col, channel
    body += np.ascontiguousarray(meas[0].transpose(1, 2, 0), dtype="<f4").tobytes()
    Path(path).write_bytes(_finish(body))


def load_measurements(path) -> MeasurementPacket:
    data = Path(path).read_bytes()
    body = _checked_body(data, f"measurement file {path}")
    r = _Reader(body, f"measurement file {path}")
    if r.take(4) != MEAS_MAGIC:
        raise FormatError(f"measurement file {path} has wrong magic")
    (version,) = r.unpack("H")
    if version != FORMAT_VERSION:
        raise FormatError(f"measurement file {path}: unsupported version {version}")
    orig_h, orig_w, crop_top, crop_left, crop_h, crop_w = r.unpack("IIIIII")
    n_B, m, model_crc = r.unpack("III")
    step = 2 * n_B
    if n_B < 1 or crop_h % step or crop_w % step:
        raise FormatError(f"measurement file {path}: cropped dims {crop_h}x{crop_w} "
                          f"invalid for block size {n_B}")
    gh, gw = crop_h // step, crop_w // step
    expected = 4 * m * gh * gw
    payload = r.take(expected)
    if r.pos != len(body):
        raise FormatError(f"measurement file {path}: {len(body) - r.pos} "
                          "trailing bytes")
    meas = np.frombuffer(payload, dtype="<f4").reshape(gh, gw, m)
    meas = np.ascontiguousarray(meas.transpose(2, 0, 1)).reshape(1, m, gh, gw)
    return MeasurementPacket(orig_h, orig_w, crop_top, crop_left, crop_h, crop_w,
                             n_B, m, model_crc, meas)
