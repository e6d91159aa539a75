"""On-disk formats: DSAP tensors, PGM heatmaps and key=value run configs.

DSAP layout (all little-endian)::

    b"DSAP" | u32 version=1 | u32 rank | rank x u32 dims | float32 payload

Arrays are held as float64 in memory and stored as float32.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .encoder import VARIANTS, EncoderConfig
from .errors import ConfigError, FormatError, ShapeError

MAGIC = b"DSAP"
VERSION = 1


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise


def encode_tensor(m) -> bytes:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim < 1:
        raise ShapeError("scalars cannot be stored; use a length-1 vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor contains non-finite values")
    header = MAGIC + struct.pack(f"<II{a.ndim}I", VERSION, a.ndim, *a.shape)
    return header + np.ascontiguousarray(a, dtype="<f4").tobytes()


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}", 0)
    if len(buf) < 12:
        raise FormatError("truncated header", len(buf))
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if rank < 1:
        raise FormatError(f"rank must be >= 1, got {rank}", 8)
    dims_end = 12 + 4 * rank
    if len(buf) < dims_end:
        raise FormatError(f"truncated dims: need {dims_end} bytes, have {len(buf)}", len(buf))
    dims = struct.unpack_from(f"<{rank}I", buf, 12)
    expected = dims_end + 4 * int(np.prod(dims, dtype=np.int64))
    if len(buf) != expected:
        off = min(len(buf), expected)
        raise FormatError(
            f"payload length mismatch for dims {dims}: file is {len(buf)} bytes, expected {expected}",
            off,
        )
    data = np.frombuffer(buf, dtype="<f4", offset=dims_end)
    return data.astype(np.float64).reshape(dims)


def write_tensor(path, m) -> None:
    atomic_write(path, encode_tensor(m))


def read_tensor(path) -> np.ndarray:
    """Read a DSAP file; rank-1 files come back as vectors, rank-2 as matrices."""
    return decode_tensor(Path(path).read_bytes())


def heatmap_pixels(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.full(s.shape, 128, dtype=np.uint8)
    return np.floor((s - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def encode_heatmap(scores, grid: tuple[int, int]) -> bytes:
    """Binary PGM (P5), min-max normalized; a constant map is mid-gray."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    h, w = grid
    if h * w != scores.size:
        raise ShapeError(f"grid {h}x{w} does not hold {scores.size} scores")
    if scores.size == 0:
        raise ShapeError("cannot render an empty heatmap")
    return f"P5\n{w} {h}\n255\n".encode("ascii") + heatmap_pixels(scores).tobytes()


def emit_heatmap(scores, grid: tuple[int, int], path) -> None:
    atomic_write(path, encode_heatmap(scores, grid))


def parse_grid(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ConfigError(f"grid must look like HxW, got {text!r}") from None


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


@dataclass
class RunConfig:
    """Flat key=value run configuration.

    Blank lines and ``#`` comments are ignored.  Relative paths are resolved
    against the config file's directory.  When ``visual`` or ``text`` is not
    given, a synthetic input is drawn from the seed.
    """

    num_layers: int = 2
    num_heads: int = 2
    embed_dim: int = 16
    ffn_dim: int = 32
    num_patches: int = 16
    has_cls: bool = True
    seed: int = 0
    variant: str = "qqv"
    lam: float = 0.1
    split: float = 0.5
    total_keep: int = 4
    text_tokens: int = 6
    text_valid: int = 0  # leading non-padded text rows; 0 = all
    visual: str = ""
    text: str = ""
    grid: str = ""
    output_dir: str = "out"
    base_dir: str = "."

    KEYS = {
        "num_layers": int, "num_heads": int, "embed_dim": int, "ffn_dim": int,
        "num_patches": int, "has_cls": _parse_bool, "seed": int, "variant": str,
        "lambda": float, "split": float, "total_keep": int, "text_tokens": int,
        "text_valid": int, "visual": str, "text": str, "grid": str, "output_dir": str,
    }

    @classmethod
    def parse(cls, text: str, base_dir=".") -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, val = (p.strip() for p in line.split("=", 1))
            if key not in cls.KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                values[key] = cls.KEYS[key](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        cfg = cls(**values, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.parse(path.read_text(), base_dir=path.parent)

    def validate(self) -> None:
        self.encoder_config()
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if not 0 <= self.split <= 1:
            raise ConfigError("split must lie in [0, 1]")
        if not 1 <= self.total_keep <= self.num_patches:
            raise ConfigError(f"total_keep must lie in [1, {self.num_patches}]")
        if self.text_tokens < 1 or not 0 <= self.text_valid <= self.text_tokens:
            raise ConfigError("text_tokens must be >= 1 and 0 <= text_valid <= text_tokens")
        if self.grid:
            h, w = parse_grid(self.grid)
            if h * w != self.num_patches:
                raise ConfigError(f"grid {self.grid} does not cover {self.num_patches} patches")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.num_layers, self.num_heads, self.embed_dim, self.ffn_dim,
                             self.num_patches, self.has_cls, self.seed)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def heatmap_grid(self) -> tuple[int, int] | None:
        if self.grid:
            return parse_grid(self.grid)
        side = int(round(self.num_patches ** 0.5))
        return (side, side) if side * side == self.num_patches else None

    def dump(self) -> str:
        out = []
        for f in fields(self):
            if f.name == "base_dir":
                continue
            key = "lambda" if f.name == "lam" else f.name
            val = getattr(self, f.name)
            out.append(f"{key}={str(val).lower() if isinstance(val, bool) else val}")
        return "\n".join(out) + "\n"
