"""Authentication message: BCH protection, keyed embedding locations,
embedding/extraction and the legal/illegal verdict."""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .bch import PRESETS, get_code
from .errors import InvalidConfigError, InvalidInputError
from .layout import DEFAULT_SPEC, BarcodeSpec, as_bits


class Verdict(str, Enum):
    LEGAL = "Legal"
    ILLEGAL = "Illegal"


@dataclass(frozen=True)
class AuthConfig:
    n_a: int = 255
    k_a: int = 147
    t_a: int = 14
    strategy: int = 1
    delta: float = 0.012
    granularity: str = "bit"

    def __post_init__(self):
        if PRESETS.get((self.n_a, self.k_a)) != self.t_a:
            raise InvalidConfigError(
                f"(n_a, k_a, t_a) = ({self.n_a}, {self.k_a}, {self.t_a}) is not a supported BCH preset"
            )
        if self.strategy not in (1, 2):
            raise InvalidConfigError("strategy must be 1 or 2")
        if not 0 <= self.delta < 1:
            raise InvalidConfigError("delta must lie in [0, 1)")
        if self.granularity not in ("bit", "module"):
            raise InvalidConfigError("granularity must be 'bit' or 'module'")

    @classmethod
    def preset(cls, k_a: int, **kw) -> "AuthConfig":
        return cls(n_a=255, k_a=k_a, t_a=PRESETS[(255, k_a)], **kw)


def source_digest(s_c1) -> bytes:
    return hashlib.sha256(np.packbits(as_bits(s_c1)).tobytes()).digest()


def read_key(path) -> bytes:
    text = Path(path).read_text().strip()
    try:
        key = bytes.fromhex(text)
    except ValueError as exc:
        raise InvalidInputError(f"key file {path} is not hex") from exc
    if not key:
        raise InvalidInputError(f"key file {path} is empty")
    return key


@dataclass(frozen=True)
class SecretBundle:
    """Per-product secret shared with legal receivers.

    ``source_digest`` stands in for a robust hash of the source message so
    the receiver can regenerate the embedding locations.
    """

    key: bytes
    s_a1: np.ndarray
    source_digest: bytes

    @classmethod
    def create(cls, s_c1, s_a1, key: bytes | None = None) -> "SecretBundle":
        return cls(key if key is not None else secrets.token_bytes(16), as_bits(s_a1), source_digest(s_c1))

    def save(self, key_path, meta_path=None, write_key: bool = True, extra: dict | None = None) -> tuple[Path, Path]:
        key_path = Path(key_path)
        meta_path = Path(meta_path) if meta_path else key_path.with_suffix(key_path.suffix + ".json")
        if write_key:
            key_path.write_text(self.key.hex() + "\n")
        meta = {
            **(extra or {}),
            "s_a1_bits": len(self.s_a1),
            "s_a1": np.packbits(self.s_a1).tobytes().hex(),
            "source_digest": self.source_digest.hex(),
        }
        meta_path.write_text(json.dumps(meta, indent=1) + "\n")
        return key_path, meta_path

    @classmethod
    def load(cls, key_path, meta_path=None) -> "SecretBundle":
        key_path = Path(key_path)
        meta_path = Path(meta_path) if meta_path else key_path.with_suffix(key_path.suffix + ".json")
        key = read_key(key_path)
        meta = json.loads(meta_path.read_text())
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(meta["s_a1"]), dtype=np.uint8))[: meta["s_a1_bits"]]
        return cls(key, bits, bytes.fromhex(meta["source_digest"]))


@dataclass(frozen=True)
class EmbedLocations:
    positions: np.ndarray

    def __post_init__(self):
        if len(np.unique(self.positions)) != len(self.positions):
            raise InvalidInputError("embedding positions must be distinct")

    def __len__(self) -> int:
        return len(self.positions)


def bch_encode(s_a1, cfg: AuthConfig) -> np.ndarray:
    return get_code(cfg.n_a, cfg.k_a, cfg.t_a).encode(as_bits(s_a1, cfg.k_a, "s_a1"))


def bch_decode(word, cfg: AuthConfig) -> tuple[np.ndarray, bool]:
    msg, failed, _ = get_code(cfg.n_a, cfg.k_a, cfg.t_a).decode(as_bits(word, cfg.n_a, "word"))
    return msg, failed


def admissible_range(strategy: int, spec: BarcodeSpec = DEFAULT_SPEC) -> np.ndarray:
    """Bit indices of the coded stream a strategy may overwrite."""
    if strategy == 1:
        return np.concatenate([np.arange(lo, hi) for lo, hi in spec.parity_ranges()])
    return np.arange(spec.coded_bits)


def locations_from_digest(
    digest: bytes, key: bytes, cfg: AuthConfig, spec: BarcodeSpec = DEFAULT_SPEC, n_positions: int | None = None
) -> EmbedLocations:
    count = cfg.n_a if n_positions is None else n_positions
    seed = int.from_bytes(hashlib.sha256(key + digest).digest(), "big")
    rng = np.random.default_rng(seed)
    pool = admissible_range(cfg.strategy, spec)
    if cfg.granularity == "module":
        b = spec.bits_per_symbol
        starts = pool[pool % b == 0]
        starts = starts[np.isin(starts + b - 1, pool)]
        need = -(-count // b)
        if need > len(starts):
            raise InvalidConfigError(f"{count} bits exceed the admissible range")
        chosen = rng.choice(starts, size=need, replace=False)
        positions = (chosen[:, None] + np.arange(b)[None, :]).reshape(-1)[:count]
    else:
        if count > len(pool):
            raise InvalidConfigError(f"n_a={count} exceeds the admissible range of {len(pool)} bits")
        positions = rng.choice(pool, size=count, replace=False)
    return EmbedLocations(positions.astype(np.int64))


def derive_locations(s_c1, key: bytes, cfg: AuthConfig, spec: BarcodeSpec = DEFAULT_SPEC) -> EmbedLocations:
    return locations_from_digest(source_digest(s_c1), key, cfg, spec)


def embed(s_c2, s_a2, loc: EmbedLocations) -> np.ndarray:
    host = as_bits(s_c2, name="s_c2")
    payload = as_bits(s_a2, name="s_a2")
    if len(payload) != len(loc):
        raise InvalidInputError(f"{len(payload)} payload bits for {len(loc)} positions")
    if len(loc) and (loc.positions.min() < 0 or loc.positions.max() >= len(host)):
        raise InvalidInputError("embedding position out of range")
    out = host.copy()
    out[loc.positions] = payload
    return out


def extract(s_c2_hat, loc: EmbedLocations) -> np.ndarray:
    host = as_bits(s_c2_hat, name="s_c2_hat")
    if len(loc) and (loc.positions.min() < 0 or loc.positions.max() >= len(host)):
        raise InvalidInputError("extraction position out of range")
    return host[loc.positions].copy()


def authenticate(s_a1_hat, s_a1, delta: float) -> tuple[float, Verdict]:
    """Decoded authentication BER and the verdict: Illegal iff BER > delta."""
    a = as_bits(s_a1_hat, name="s_a1_hat")
    b = as_bits(s_a1, len(a), "s_a1")
    if not 0 <= delta < 1:
        raise InvalidInputError("delta must lie in [0, 1)")
    eps = float(np.count_nonzero(a != b)) / len(a)
    return eps, Verdict.ILLEGAL if eps > delta else Verdict.LEGAL
