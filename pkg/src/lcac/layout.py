"""Multilevel barcode construction: RS block coding, PAM-M (de)modulation and
grid assembly with header and training modules.

Bit streams are ``uint8`` numpy arrays of 0/1. Data modules are placed in
reverse raster order starting at the bottom-right corner (the QR placement
convention), header symbols first, so the last coded bits land top-left.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .reed_solomon import get_code

DATA, HEADER, TRAINING1, TRAINING2 = 0, 1, 2, 3
ROLE_NAMES = {DATA: "data", HEADER: "header", TRAINING1: "training1", TRAINING2: "training2"}

GRAY_MAP_4 = ((0, 0), (0, 1), (1, 1), (1, 0))
HEADER_MAGIC = b"LC"
HEADER_VERSION = 1


@dataclass(frozen=True)
class BarcodeSpec:
    """Static geometry and code parameters of one barcode family."""

    modulation_order: int = 4
    block_count: int = 2
    rs_codeword_bits: int = 2040
    rs_message_bits: int = 440
    header_training_bits: int = 338
    constellation: tuple[float, ...] = (40.0, 100.0, 160.0, 220.0)
    thresholds: tuple[float, ...] = (0.0, 70.0, 130.0, 190.0, 255.0)
    bit_map: tuple[tuple[int, ...], ...] = GRAY_MAP_4
    training1_count: int = 100
    training1_gray: float = 130.0
    training2_grays: tuple[float, ...] = (30.0, 50.0, 70.0, 100.0, 160.0, 180.0, 200.0, 220.0)

    def __post_init__(self):
        m = self.modulation_order
        if m < 2 or m & (m - 1):
            raise InvalidInputError(f"modulation order must be a power of two, got {m}")
        b = self.bits_per_symbol
        if self.rs_codeword_bits % 8 or self.rs_message_bits % 8:
            raise InvalidInputError("RS lengths must be whole bytes")
        if not 0 < self.rs_message_bits < self.rs_codeword_bits <= 255 * 8:
            raise InvalidInputError("RS lengths out of range")
        if self.coded_bits % b or self.header_training_bits % b:
            raise InvalidInputError("bit lengths must be divisible by log2(M)")
        if math.isqrt(self.module_count) ** 2 != self.module_count:
            raise InvalidInputError(f"L_t/log2(M) = {self.module_count} is not a perfect square")
        if len(self.constellation) != m or len(self.thresholds) != m + 1:
            raise InvalidInputError("constellation/threshold sizes do not match M")
        th = self.thresholds
        if th[0] != 0 or th[-1] != 255 or any(a >= c for a, c in zip(th, th[1:])):
            raise InvalidInputError("thresholds must increase strictly from 0 to 255")
        for i, x in enumerate(self.constellation):
            # x must demodulate to its own symbol
            if not (th[i] <= x < th[i + 1] or (i == m - 1 and x == 255)):
                raise InvalidInputError(f"constellation point {x} outside its decision cell")
        if len(self.bit_map) != m or len({tuple(p) for p in self.bit_map}) != m:
            raise InvalidInputError("bit map must be a bijection onto log2(M)-bit patterns")
        if any(len(p) != b for p in self.bit_map):
            raise InvalidInputError("bit map patterns must have log2(M) bits")
        if self.header_count < 0:
            raise InvalidInputError("training modules exceed the header/training budget")

    @classmethod
    def binary(cls) -> "BarcodeSpec":
        """Two-level variant (standard QR grays 0/255), 65x65 modules."""
        return cls(
            modulation_order=2,
            header_training_bits=145,
            constellation=(0.0, 255.0),
            thresholds=(0.0, 128.0, 255.0),
            bit_map=((0,), (1,)),
        )

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.modulation_order))

    @property
    def source_bits(self) -> int:
        return self.block_count * self.rs_message_bits

    @property
    def coded_bits(self) -> int:
        return self.block_count * self.rs_codeword_bits

    @property
    def total_bits(self) -> int:
        return self.coded_bits + self.header_training_bits

    @property
    def module_count(self) -> int:
        return self.total_bits // self.bits_per_symbol

    @property
    def side(self) -> int:
        return math.isqrt(self.module_count)

    @property
    def data_modules(self) -> int:
        return self.coded_bits // self.bits_per_symbol

    @property
    def overhead_modules(self) -> int:
        return self.header_training_bits // self.bits_per_symbol

    @property
    def header_count(self) -> int:
        return self.overhead_modules - self.training1_count - len(self.training2_grays)

    @property
    def rs_symbols(self) -> tuple[int, int]:
        return self.rs_codeword_bits // 8, self.rs_message_bits // 8

    def parity_ranges(self) -> list[tuple[int, int]]:
        """Half-open bit ranges of RS parity within the coded stream."""
        n, k = self.rs_codeword_bits, self.rs_message_bits
        return [(b * n + k, (b + 1) * n) for b in range(self.block_count)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bit_map"] = [list(p) for p in self.bit_map]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BarcodeSpec":
        d = dict(d)
        for key in ("constellation", "thresholds", "training2_grays"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        if "bit_map" in d:
            d["bit_map"] = tuple(tuple(int(b) for b in p) for p in d["bit_map"])
        return cls(**d)


DEFAULT_SPEC = BarcodeSpec()


@dataclass(frozen=True)
class SymbolStream:
    """Constellation indices (1..M) with a consistent bit view."""

    symbols: np.ndarray
    spec: BarcodeSpec = field(repr=False)

    @property
    def bits(self) -> np.ndarray:
        table = np.array(self.spec.bit_map, dtype=np.uint8)
        return table[self.symbols - 1].reshape(-1)

    @property
    def grays(self) -> np.ndarray:
        return np.asarray(self.spec.constellation, dtype=float)[self.symbols - 1]

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class ModuleGrid:
    side: int
    intensities: np.ndarray
    roles: np.ndarray
    layout_seed: int = 0

    def __post_init__(self):
        if self.intensities.shape != (self.side, self.side) or self.roles.shape != (self.side, self.side):
            raise InvalidInputError("grid arrays must be side x side")
        self.intensities.setflags(write=False)
        self.roles.setflags(write=False)

    def with_intensities(self, values: np.ndarray) -> "ModuleGrid":
        return ModuleGrid(self.side, np.array(values, dtype=float), self.roles, self.layout_seed)


def as_bits(bits, length: int | None = None, name: str = "bitstring") -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if length is not None and len(arr) != length:
        raise InvalidInputError(f"{name} must have {length} bits, got {len(arr)}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise InvalidInputError(f"{name} must contain only 0/1")
    return arr.astype(np.uint8)


def rs_encode(source, spec: BarcodeSpec = DEFAULT_SPEC) -> np.ndarray:
    bits = as_bits(source, spec.source_bits, "source")
    n_sym, k_sym = spec.rs_symbols
    code = get_code(n_sym, k_sym)
    blocks = np.packbits(bits).reshape(spec.block_count, k_sym)
    coded = np.concatenate([code.encode(b) for b in blocks]).astype(np.uint8)
    return np.unpackbits(coded)


def rs_decode(coded, spec: BarcodeSpec = DEFAULT_SPEC) -> tuple[np.ndarray, np.ndarray]:
    """Decode every block independently; returns ``(source_bits, failed)``."""
    bits = as_bits(coded, spec.coded_bits, "coded")
    n_sym, k_sym = spec.rs_symbols
    code = get_code(n_sym, k_sym)
    words = np.packbits(bits).reshape(spec.block_count, n_sym)
    out, flags = [], []
    for w in words:
        msg, failed, _ = code.decode(w)
        out.append(msg)
        flags.append(failed)
    msg_bytes = np.concatenate(out).astype(np.uint8)
    return np.unpackbits(msg_bytes), np.array(flags, dtype=bool)


def modulate(bits, spec: BarcodeSpec = DEFAULT_SPEC) -> SymbolStream:
    b = spec.bits_per_symbol
    arr = as_bits(bits)
    if len(arr) % b:
        raise InvalidInputError(f"bit length {len(arr)} not divisible by {b}")
    weights = 1 << np.arange(b - 1, -1, -1)
    codes = arr.reshape(-1, b).astype(np.int64) @ weights
    lookup = np.zeros(spec.modulation_order, dtype=np.int64)
    for idx, pattern in enumerate(spec.bit_map):
        lookup[int("".join(map(str, pattern)), 2)] = idx + 1
    return SymbolStream(lookup[codes], spec)


def symbol_cells(grays, spec: BarcodeSpec = DEFAULT_SPEC) -> np.ndarray:
    """Decision cell (1..M) for each gray value: theta_{i-1} <= v < theta_i,
    with 255 in the top cell."""
    v = np.asarray(grays, dtype=float)
    if v.size and (np.isnan(v).any() or v.min() < 0 or v.max() > 255):
        raise InvalidInputError("gray values must lie in [0, 255]")
    inner = np.asarray(spec.thresholds[1:-1], dtype=float)
    return np.searchsorted(inner, v, side="right") + 1


def demodulate(grays, spec: BarcodeSpec = DEFAULT_SPEC) -> SymbolStream:
    return SymbolStream(symbol_cells(np.ravel(grays), spec), spec)


def placement_order(side: int) -> np.ndarray:
    """Flat module indices in fill order: bottom-right first, leftwards,
    then upwards."""
    return np.arange(side * side)[::-1]


def _training2_positions(spec: BarcodeSpec) -> list[tuple[int, int]]:
    count = len(spec.training2_grays)
    cols = math.ceil(count / 2)
    c = spec.side // 2
    r0, c0 = c - 1, c - cols // 2
    cells = [(r0 + i // cols, c0 + i % cols) for i in range(count)]
    return cells


def _training1_positions(spec: BarcodeSpec, seed: int, taken: set) -> list[tuple[int, int]]:
    """Jittered stratified scatter: one module per cell of a g x g partition."""
    side, count = spec.side, spec.training1_count
    g = math.ceil(math.sqrt(count))
    rng = np.random.default_rng(seed)
    cells = []
    occupied = set(taken)
    for s in range(count):
        a, b = divmod(s, g)
        r_lo, r_hi = (a * side) // g, ((a + 1) * side) // g
        c_lo, c_hi = (b * side) // g, ((b + 1) * side) // g
        u, v = rng.random(2)
        r = r_lo + int(u * (r_hi - r_lo))
        c = c_lo + int(v * (c_hi - c_lo))
        if (r, c) in occupied:
            free = [(rr, cc) for rr in range(r_lo, r_hi) for cc in range(c_lo, c_hi) if (rr, cc) not in occupied]
            if not free:
                free = [(rr, cc) for rr in range(side) for cc in range(side) if (rr, cc) not in occupied]
            r, c = free[int(rng.integers(len(free)))]
        occupied.add((r, c))
        cells.append((r, c))
    return cells


def role_mask(spec: BarcodeSpec, layout_seed: int) -> np.ndarray:
    side = spec.side
    roles = np.full((side, side), -1, dtype=np.int8)
    t2 = _training2_positions(spec)
    for rc in t2:
        roles[rc] = TRAINING2
    for rc in _training1_positions(spec, layout_seed, set(t2)):
        roles[rc] = TRAINING1
    flat = roles.reshape(-1)
    free = [i for i in placement_order(side) if flat[i] < 0]
    flat[free[: spec.header_count]] = HEADER
    flat[free[spec.header_count :]] = DATA
    return roles


def header_symbols(spec: BarcodeSpec) -> SymbolStream:
    """Fixed format/version bytes, zero padded to the header length."""
    b = spec.bits_per_symbol
    payload = HEADER_MAGIC + bytes([HEADER_VERSION, spec.modulation_order, spec.block_count])
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    need = spec.header_count * b
    bits = np.concatenate([bits, np.zeros(max(0, need - len(bits)), dtype=np.uint8)])[:need]
    return modulate(bits, spec)


def _ordered(roles: np.ndarray, role: int) -> np.ndarray:
    order = placement_order(roles.shape[0])
    return order[roles.reshape(-1)[order] == role]


def _training_nominals(spec: BarcodeSpec, roles: np.ndarray) -> np.ndarray:
    nominal = np.full(roles.size, np.nan)
    nominal[_ordered(roles, HEADER)] = header_symbols(spec).grays
    nominal[_ordered(roles, TRAINING1)] = spec.training1_gray
    t2 = np.flatnonzero(roles.reshape(-1) == TRAINING2)  # raster order
    nominal[t2] = spec.training2_grays
    return nominal


def assemble_grid(data: SymbolStream, spec: BarcodeSpec = DEFAULT_SPEC, layout_seed: int = 0) -> ModuleGrid:
    if len(data) != spec.data_modules:
        raise InvalidInputError(f"expected {spec.data_modules} data symbols, got {len(data)}")
    roles = role_mask(spec, layout_seed)
    values = _training_nominals(spec, roles)
    values[_ordered(roles, DATA)] = data.grays
    side = spec.side
    return ModuleGrid(side, values.reshape(side, side), roles, layout_seed)


def disassemble_grid(grid: ModuleGrid, spec: BarcodeSpec = DEFAULT_SPEC):
    """Returns ``(data_grays, training_observations)``; the observations are
    ``(nominal, observed)`` pairs for every header/training module."""
    roles = grid.roles
    counts = np.bincount(roles.reshape(-1).astype(np.int64), minlength=4)
    expected_t2 = len(spec.training2_grays)
    if (
        grid.side != spec.side
        or counts[DATA] != spec.data_modules
        or counts[HEADER] != spec.header_count
        or counts[TRAINING1] != spec.training1_count
        or counts[TRAINING2] != expected_t2
    ):
        raise InvalidInputError("role mask does not match the barcode spec")
    flat = grid.intensities.reshape(-1)
    data = flat[_ordered(roles, DATA)].copy()
    nominal = _training_nominals(spec, roles)
    idx = np.flatnonzero(roles.reshape(-1) != DATA)
    observations = [(float(nominal[i]), float(flat[i])) for i in idx]
    return data, observations


def _rle(values: np.ndarray) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in values.tolist():
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def _unrle(runs) -> np.ndarray:
    return np.concatenate([np.full(n, v, dtype=np.int8) for v, n in runs])


def save_grid(grid: ModuleGrid, path, spec: BarcodeSpec = DEFAULT_SPEC) -> tuple[Path, Path]:
    """Write an 8-bit binary PGM plus a JSON sidecar (``<path>.json``)."""
    path = Path(path)
    pixels = np.clip(np.rint(grid.intensities), 0, 255).astype(np.uint8)
    header = f"P5\n{grid.side} {grid.side}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    meta = {
        "spec": spec.to_dict(),
        "side": grid.side,
        "layout_seed": grid.layout_seed,
        "roles_rle": _rle(grid.roles.reshape(-1)),
    }
    meta_path = path.with_suffix(path.suffix + ".json")
    meta_path.write_text(json.dumps(meta, indent=1) + "\n")
    return path, meta_path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise InvalidInputError("not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise InvalidInputError("only 8-bit PGM files are supported")
    body = raw[pos + 1 : pos + 1 + width * height]
    if len(body) != width * height:
        raise InvalidInputError("truncated PGM body")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def load_grid(path) -> tuple[ModuleGrid, BarcodeSpec]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    spec = BarcodeSpec.from_dict(meta["spec"])
    pixels = read_pgm(path).astype(float)
    side = int(meta["side"])
    if pixels.shape != (side, side):
        raise InvalidInputError("PGM size does not match its metadata")
    roles = _unrle(meta["roles_rle"]).reshape(side, side)
    return ModuleGrid(side, pixels, roles, int(meta["layout_seed"])), spec
