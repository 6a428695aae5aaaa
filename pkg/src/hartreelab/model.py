"""Model parameters, grid geometry, field storage, seed fields, and field file I/O.

Conventions fixed here and relied on everywhere else:

* the computational box is the periodic cube ``[-L, L)^3`` sampled on ``n``
  points per axis, spacing ``h = 2L/n``, sample ``j`` at ``x = -L + j*h``;
* field samples are complex double precision, row-major over ``(x1, x2, x3)``;
* the on-disk format is little-endian and bit-exact under round-trip.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    BadMagic,
    DimensionTooSmall,
    ExponentOutOfRange,
    GridMismatch,
    NonfiniteState,
    SupportViolation,
    TruncatedPayload,
)

FIELD_MAGIC = b"HARTF1"
_HEADER = struct.Struct("<6sIId16s")  # magic, D, n, half_length, reserved


@dataclass(frozen=True)
class ModelParams:
    """Dimension D, perturbation exponent p, and frequency omega.

    Analytic formulas accept any D >= 3; gridded operations require D = 3.
    Instances are plain records; call :func:`validate_params` to enforce the
    admissible ranges (config files may construct invalid ones).
    """

    D: int
    p: float
    omega: float = 1.0

    @property
    def p_upper(self) -> float:
        return 1.0 + 4.0 / (self.D - 2)

    @property
    def p_mass_critical(self) -> float:
        return 1.0 + 4.0 / self.D


def validate_params(params: ModelParams) -> None:
    """Check D >= 3 and 1 < p < 1 + 4/(D-2) (open interval)."""
    if int(params.D) < 3:
        raise DimensionTooSmall(f"D = {params.D}, need D >= 3")
    if not (1.0 < params.p < params.p_upper):
        raise ExponentOutOfRange(
            f"p = {params.p} outside (1, {params.p_upper}) for D = {params.D}"
        )


def validate_variational_band(params: ModelParams) -> None:
    """Stricter band 1 + 4/D <= p < 1 + 4/(D-2) required by the variational and
    dichotomy operations; checked at those call sites, not at construction."""
    validate_params(params)
    if params.p < params.p_mass_critical:
        raise ExponentOutOfRange(
            f"p = {params.p} below mass-critical bound {params.p_mass_critical}"
        )


def validate_subcritical_band(params: ModelParams) -> None:
    """Band 1 < p < 1 + 4/D used by the mass-constrained problem."""
    validate_params(params)
    if params.p >= params.p_mass_critical:
        raise ExponentOutOfRange(
            f"p = {params.p} not below mass-critical bound {params.p_mass_critical}"
        )


@dataclass(frozen=True)
class GridSpec:
    """Periodic cubic grid: n points per axis (power of two, >= 8) on [-L, L)^3.

    The spacing is always the derived quantity 2L/n, never stored separately.
    """

    n: int
    half_length: float
    dims: int = 3

    def __post_init__(self):
        n = self.n
        if n < 8 or (n & (n - 1)) != 0:
            raise GridMismatch(f"n = {n} must be a power of two >= 8")
        if not (self.half_length > 0):
            raise GridMismatch(f"half_length = {self.half_length} must be positive")
        if self.dims != 3:
            raise GridMismatch("gridded operations support dims = 3 only")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def axis(self) -> np.ndarray:
        """Sample coordinates along one axis: -L + j*h."""
        return -self.half_length + self.spacing * np.arange(self.n)


@dataclass(frozen=True)
class Field:
    """Complex field sampled on a :class:`GridSpec`.

    Values are stored C-contiguous with shape (n, n, n) and are frozen after
    construction (the array is marked read-only).  Non-finite samples are
    rejected unless the field is explicitly flagged as a failed trajectory
    state.
    """

    grid: GridSpec
    values: np.ndarray
    flagged_nonfinite: bool = dc_field(default=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise GridMismatch(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not self.flagged_nonfinite and not np.all(np.isfinite(v.view(np.float64))):
            raise NonfiniteState("field contains NaN/Inf samples")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray, flagged_nonfinite: bool = False) -> "Field":
        return Field(self.grid, values, flagged_nonfinite)

    def density(self) -> np.ndarray:
        """|psi|^2 as a real array."""
        return (self.values.real**2 + self.values.imag**2)


def zero_field(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=np.complex128))


def make_gaussian(grid: GridSpec, amplitude: float, width: float,
                  center=(0.0, 0.0, 0.0)) -> Field:
    """Sample a * exp(-|x - x0|^2 / (2 sigma^2)); purely real output.

    Requires |x0| + 4*sigma < L so the periodic wrap of the profile is
    negligible at double precision.
    """
    if not (width > 0):
        raise ValueError(f"width = {width} must be positive")
    c = np.asarray(center, dtype=float)
    if c.shape != (3,):
        raise ValueError("center must be a 3-vector")
    margin = float(np.linalg.norm(c)) + 4.0 * width
    if not (margin < grid.half_length):
        raise SupportViolation(
            f"|x0| + 4 sigma = {margin} >= L = {grid.half_length}"
        )
    ax = grid.axis()
    r2 = ((ax - c[0])[:, None, None] ** 2
          + (ax - c[1])[None, :, None] ** 2
          + (ax - c[2])[None, None, :] ** 2)
    vals = amplitude * np.exp(-r2 / (2.0 * width**2))
    return Field(grid, vals.astype(np.complex128))


def save_field(field: Field, path) -> None:
    header = _HEADER.pack(FIELD_MAGIC, 3, field.grid.n,
                          field.grid.half_length, b"\x00" * 16)
    payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:6] != FIELD_MAGIC:
        raise BadMagic(f"bad magic {raw[:6]!r}")
    magic, d, n, half_length, _reserved = _HEADER.unpack(raw[: _HEADER.size])
    if d != 3:
        raise GridMismatch(f"file dimension D = {d}, only D = 3 is supported")
    grid = GridSpec(n=int(n), half_length=float(half_length))
    payload = raw[_HEADER.size:]
    expected = 16 * n**3
    if len(payload) < expected:
        raise TruncatedPayload(f"payload {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise TruncatedPayload(f"payload {len(payload)} bytes exceeds expected {expected}")
    values = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
    return Field(grid, values.copy())
