"""
tfem/transformer/container.py
TFEM binary container for TransformerParams.

Layout (little-endian throughout, floats are f64 row-major):

    b"TFEM" | u32 version | u32 layer count L | u32 D
    per layer: u8 activation (0 softmax, 1 relu, 2 none) | u32 heads M | u32 hidden D'
               M x (V, Q, K), each D x D
               W1 (D' x D) | W2 (D x D')
    readout_left:  u32 rows | u32 cols | data
    readout_right: u32 rows | u32 cols | data
"""

import logging
import struct

import numpy as np

from tfem.errors import ArtifactIOError
from tfem.transformer.engine import Activation, AttnHead, Layer, TransformerParams

logger = logging.getLogger(__name__)

MAGIC = b"TFEM"
VERSION = 1
ACTIVATION_CODES = {Activation.SOFTMAX: 0, Activation.RELU: 1, Activation.NONE: 2}
CODE_ACTIVATIONS = {code: act for act, code in ACTIVATION_CODES.items()}


def _block(m: np.ndarray) -> bytes:
    return np.ascontiguousarray(m, dtype="<f8").tobytes()


def encode_params(params: TransformerParams) -> bytes:
    dim = params.dim
    parts = [MAGIC, struct.pack("<III", VERSION, len(params.layers), dim)]
    for layer in params.layers:
        parts.append(struct.pack("<BII", ACTIVATION_CODES[layer.activation], len(layer.heads), layer.hidden))
        for head in layer.heads:
            parts.extend((_block(head.v), _block(head.q), _block(head.k)))
        parts.extend((_block(layer.fc_w1), _block(layer.fc_w2)))
    for readout in (params.readout_left, params.readout_right):
        parts.append(struct.pack("<II", *readout.shape))
        parts.append(_block(readout))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ArtifactIOError(f"TFEM container truncated at byte {self.pos} (needed {size} more)")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(8 * rows * cols)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)


def decode_params(data: bytes) -> TransformerParams:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise ArtifactIOError("not a TFEM container (bad magic)")
    version, count, dim = reader.unpack("<III")
    if version != VERSION:
        raise ArtifactIOError(f"unsupported TFEM version {version} (expected {VERSION})")

    layers = []
    for index in range(count):
        code, heads, hidden = reader.unpack("<BII")
        if code not in CODE_ACTIVATIONS:
            raise ArtifactIOError(f"layer {index}: unknown activation code {code}")
        parsed = [
            AttnHead(v=reader.matrix(dim, dim), q=reader.matrix(dim, dim), k=reader.matrix(dim, dim))
            for _ in range(heads)
        ]
        w1 = reader.matrix(hidden, dim)
        w2 = reader.matrix(dim, hidden)
        layers.append(Layer(heads=parsed, activation=CODE_ACTIVATIONS[code], fc_w1=w1, fc_w2=w2))

    left = reader.matrix(*reader.unpack("<II"))
    right = reader.matrix(*reader.unpack("<II"))
    if reader.pos != len(data):
        raise ArtifactIOError(f"TFEM container has {len(data) - reader.pos} trailing bytes")
    return TransformerParams(layers=layers, readout_left=left, readout_right=right)


def save_params(path: str, params: TransformerParams) -> str:
    try:
        with open(path, "wb") as f:
            f.write(encode_params(params))
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}")
    logger.debug("wrote %d layers to %s", params.layer_count, path)
    return path


def load_params(path: str) -> TransformerParams:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path}: {e}")
    return decode_params(data)
