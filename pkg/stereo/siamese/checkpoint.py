"""
SVLT checkpoint files.

Little-endian layout::

    b"SVLT"  u32 version
    u16 name length, name (utf-8)
    u32 conv_layers, u32 pool count, u32 pool positions...
    u32 theta, u32 in_channels
    u8 correlation mode (0 inner, 1 learned), u32 max disparity, u8 head kernel
    u32 blob count
    per blob: u16 name length, name, u8 dtype (0 float32, 1 float64),
              u8 ndim, u32 dims..., raw values

Blobs hold every trainable tensor of the branch and of the correlation head,
plus the batch-norm running moments (``<layer>.bn.running_mean`` and
``<layer>.bn.running_var``). An S7 branch with theta 64 is about
``parameter_count * 4`` bytes plus a header and moment blobs of a few KiB.
"""

import io
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from app.config import CorrelationMode
from stereo.errors import FormatError
from stereo.siamese.arch import ArchSpec
from stereo.siamese.network import SiameseNetwork, build

logger = logging.getLogger(__name__)

MAGIC = b"SVLT"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_MODES = {0: CorrelationMode.INNER, 1: CorrelationMode.LEARNED}
_MODE_CODES = {mode: code for code, mode in _MODES.items()}


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained matcher."""

    network: SiameseNetwork
    correlation: CorrelationMode = CorrelationMode.INNER
    max_disp: int = 0
    head_kernel: int = 3
    head: Dict[str, np.ndarray] = field(default_factory=dict)


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.buffer = io.BytesIO(payload)
        self.path = path

    def take(self, size: int) -> bytes:
        chunk = self.buffer.read(size)
        if len(chunk) != size:
            raise FormatError("truncated checkpoint", path=self.path)
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))
        return values if len(values) > 1 else values[0]

    def text(self) -> str:
        raw = self.take(self.unpack("H"))
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("corrupt name field", path=self.path) from exc


def _write_text(out: BinaryIO, text: str) -> None:
    raw = text.encode("utf-8")
    out.write(struct.pack("<H", len(raw)))
    out.write(raw)


def _blobs(checkpoint: Checkpoint) -> Dict[str, np.ndarray]:
    blobs = {name: t.data for name, t in checkpoint.network.parameters().items()}
    for name, moments in checkpoint.network.buffers().items():
        if moments.initialized:
            blobs[f"{name}.running_mean"] = moments.mean
            blobs[f"{name}.running_var"] = moments.var
    blobs.update(checkpoint.head)
    return blobs


def dumps(checkpoint: Checkpoint) -> bytes:
    arch = checkpoint.network.arch
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    _write_text(out, arch.name)
    out.write(struct.pack("<II", arch.conv_layers, arch.pool_count))
    out.write(struct.pack(f"<{arch.pool_count}I", *arch.pool_after))
    out.write(struct.pack("<II", arch.theta, arch.in_channels))
    out.write(
        struct.pack(
            "<BIB",
            _MODE_CODES[CorrelationMode(checkpoint.correlation)],
            checkpoint.max_disp,
            checkpoint.head_kernel,
        )
    )

    blobs = _blobs(checkpoint)
    out.write(struct.pack("<I", len(blobs)))
    for name, array in blobs.items():
        dtype = np.dtype(array.dtype)
        if dtype not in _DTYPE_CODES:
            raise FormatError(f"cannot store {name} with dtype {dtype}")
        _write_text(out, name)
        out.write(struct.pack("<BB", _DTYPE_CODES[dtype], array.ndim))
        out.write(struct.pack(f"<{array.ndim}I", *array.shape))
        out.write(np.ascontiguousarray(array, dtype=dtype.newbyteorder("<")).tobytes())
    return out.getvalue()


def save(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dumps(checkpoint)
    path.write_bytes(payload)
    logger.info("saved checkpoint %s (%d bytes)", path, len(payload))
    return path


def loads(payload: bytes, path: str = None) -> Checkpoint:
    """Parse a checkpoint; any malformed input raises FormatError and builds nothing."""
    reader = _Reader(payload, path)
    magic = reader.take(4)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", path=path)
    version = reader.unpack("I")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", path=path)

    name = reader.text()
    conv_layers, pool_count = reader.unpack("II")
    positions = [reader.unpack("I") for _ in range(pool_count)]
    theta, in_channels = reader.unpack("II")
    mode_code, max_disp, head_kernel = reader.unpack("BIB")
    if mode_code not in _MODES:
        raise FormatError(f"unknown correlation mode code {mode_code}", path=path)

    blobs: Dict[str, np.ndarray] = {}
    for _ in range(reader.unpack("I")):
        blob_name = reader.text()
        dtype_code, ndim = reader.unpack("BB")
        if dtype_code not in _DTYPES:
            raise FormatError(f"unknown dtype code {dtype_code} for {blob_name}", path=path)
        dims = [reader.unpack("I") for _ in range(ndim)]
        dtype = _DTYPES[dtype_code]
        count = int(np.prod(dims, dtype=np.int64))
        raw = reader.take(count * dtype.itemsize)
        blobs[blob_name] = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
    if reader.buffer.read(1):
        raise FormatError("trailing bytes after the last blob", path=path)

    try:
        arch = ArchSpec(
            name=name,
            conv_layers=conv_layers,
            pool_after=positions,
            theta=theta,
            in_channels=in_channels,
        )
    except ValueError as exc:
        raise FormatError(f"invalid architecture descriptor: {exc}", path=path) from exc

    network = _restore_network(arch, blobs, path)
    head = {key: value for key, value in blobs.items() if key.startswith("corr.")}
    return Checkpoint(
        network=network,
        correlation=_MODES[mode_code],
        max_disp=max_disp,
        head_kernel=head_kernel,
        head=head,
    )


def _restore_network(arch: ArchSpec, blobs: Dict[str, np.ndarray], path: str) -> SiameseNetwork:
    params_dtype = next(
        (blobs[key].dtype for key in blobs if key.endswith(".weight") and not key.startswith("corr.")),
        np.dtype(np.float32),
    )
    network = build(arch, seed=0, dtype=params_dtype)
    for name, tensor in network.parameters().items():
        if name not in blobs:
            raise FormatError(f"missing parameter blob {name}", path=path)
        if blobs[name].shape != tensor.shape:
            raise FormatError(
                f"blob {name} has shape {blobs[name].shape}, architecture needs {tensor.shape}",
                path=path,
            )
        tensor.data = blobs[name].copy()
    for name, moments in network.buffers().items():
        mean, var = blobs.get(f"{name}.running_mean"), blobs.get(f"{name}.running_var")
        if mean is not None and var is not None:
            moments.mean, moments.var = mean.copy(), var.copy()
    return network


def load(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint: {exc}", path=str(path)) from exc
    checkpoint = loads(payload, path=str(path))
    logger.info(
        "loaded checkpoint %s: arch=%s correlation=%s",
        path,
        checkpoint.network.arch.name,
        checkpoint.correlation.value,
    )
    return checkpoint
