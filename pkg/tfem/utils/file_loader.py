# ================================
# tfem/utils/file_loader.py
# ================================
"""
Instance CSV files and TOML config files.

Instance CSV layout (documented in docs/FORMATS.md):

    #k,d,N,sigma,delta,alpha,seed
    <k>,<d>,<N>,<sigma>,<delta>,<alpha>,<seed>
    means
    <d lines of k comma-separated floats>
    labels
    <one line of N comma-separated 0-based labels>
    data
    <d lines of N comma-separated floats>
"""

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from tfem.errors import ArtifactIOError, ConfigError
from tfem.gmm.instance import GmmInstance

logger = logging.getLogger(__name__)

INSTANCE_HEADER = "#k,d,N,sigma,delta,alpha,seed"


def _fmt(value: float) -> str:
    return repr(float(value))


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values)


def write_instance_csv(path: str, instance: GmmInstance) -> str:
    """Write an instance; floats use shortest round-trip repr so files are byte-stable."""
    lines = [
        INSTANCE_HEADER,
        f"{instance.k},{instance.d},{instance.n},{_fmt(instance.sigma)},"
        f"{_fmt(instance.delta)},{_fmt(instance.alpha)},{instance.seed}",
        "means",
        *(_row(r) for r in instance.means),
        "labels",
        ",".join(str(int(u)) for u in instance.z),
        "data",
        *(_row(r) for r in instance.x),
    ]
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write instance file {path}: {e}")
    return path


def _parse_floats(line: str, expected: int, what: str) -> list[float]:
    parts = line.split(",")
    if len(parts) != expected:
        raise ArtifactIOError(f"{what}: expected {expected} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ArtifactIOError(f"{what}: {e}")


def _expect(lines: list[str], index: int, marker: str) -> None:
    if index >= len(lines) or lines[index].strip() != marker:
        raise ArtifactIOError(f"instance file: expected '{marker}' at line {index + 1}")


def read_instance_csv(path: str) -> GmmInstance:
    """Parse an instance file written by write_instance_csv."""
    if not os.path.exists(path):
        raise ArtifactIOError(f"instance file '{path}' not found")
    try:
        with open(path, "r") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    except OSError as e:
        raise ArtifactIOError(f"cannot read instance file {path}: {e}")

    if not lines or lines[0].strip() != INSTANCE_HEADER:
        raise ArtifactIOError(f"{path}: missing header '{INSTANCE_HEADER}'")
    head = lines[1].split(",") if len(lines) > 1 else []
    if len(head) != 7:
        raise ArtifactIOError(f"{path}: malformed parameter row")
    try:
        k, d, n = int(head[0]), int(head[1]), int(head[2])
        sigma, delta, alpha = float(head[3]), float(head[4]), float(head[5])
        seed = int(head[6])
    except ValueError as e:
        raise ArtifactIOError(f"{path}: {e}")

    cursor = 2
    _expect(lines, cursor, "means")
    means = np.array([_parse_floats(lines[cursor + 1 + r], k, "means") for r in range(d)])
    cursor += 1 + d
    _expect(lines, cursor, "labels")
    try:
        z = np.array([int(u) for u in lines[cursor + 1].split(",")], dtype=np.int64)
    except (ValueError, IndexError) as e:
        raise ArtifactIOError(f"{path}: labels: {e}")
    if z.size != n:
        raise ArtifactIOError(f"{path}: expected {n} labels, got {z.size}")
    cursor += 2
    _expect(lines, cursor, "data")
    if len(lines) < cursor + 1 + d:
        raise ArtifactIOError(f"{path}: data block truncated")
    x = np.array([_parse_floats(lines[cursor + 1 + r], n, "data") for r in range(d)])

    counts = tuple(int(c) for c in np.bincount(z, minlength=k))
    logger.debug("loaded instance %s (k=%d, d=%d, N=%d)", path, k, d, n)
    return GmmInstance(x=x, z=z, means=means, sigma=sigma, delta=delta, alpha=alpha, seed=seed, counts=counts)


def load_config(filename: str | None, section: str) -> dict:
    """
    Load one subcommand section of a TOML config file.

    Returns an empty dict when no file is given.
    """
    if filename is None:
        return {}
    if not os.path.exists(filename):
        raise ConfigError(f"config file '{filename}' not found")
    try:
        with open(filename, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {filename}: {e}")
    body = data.get(section, {})
    if not isinstance(body, dict):
        raise ConfigError(f"section [{section}] in {filename} must be a table")
    return body
