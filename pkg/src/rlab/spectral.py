"""Periodic-box spectral engine.

The cubic box [-L/2, L/2)^3 with n points per axis stands in for free
space.  Transforms use the continuum normalization

    fhat(xi) = integral e^{-i x.xi} f(x) dx,
    f(x)     = (2 pi)^{-3} integral e^{+i x.xi} fhat(xi) dxi,

realized as a scaled DFT with the phase referenced to centered physical
coordinates.  Because x0 = -L/2 and xi_m = 2 pi m / L, the centering phase
e^{-i x0 xi_m} is exactly (-1)^m per axis, so forward/inverse round trips
reduce to numpy's ifftn(fftn(.)) and are exact to roundoff.

Transforms are stateless (numpy's pocketfft keeps no plans), so every
operation here is safe to call concurrently on distinct fields.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import SingularSymbolError

PHYSICAL = "physical"
FREQUENCY = "frequency"

_SNAPSHOT_MAGIC = b"RLAB"
_SNAPSHOT_VERSION = 1
# 32-byte header: magic, version u32, n u32, L f64, repr u8, 11 pad bytes
_SNAPSHOT_HEADER = struct.Struct("<4sIIdB11x")


@dataclass(frozen=True)
class Grid:
    """Cubic periodic lattice with centered coordinates.

    n points per axis (even power of two), physical side length ``length``;
    dx = length/n, frequencies 2 pi m / length for m in [-n/2, n/2).
    """

    n: int
    length: float

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency magnitude per axis, pi/dx."""
        return np.pi / self.dx

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def axis_coords(self) -> np.ndarray:
        """Physical coordinates along one axis, x in [-L/2, L/2)."""
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @cached_property
    def axis_freqs(self) -> np.ndarray:
        """Frequencies along one axis in FFT (unshifted) order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def freq_mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (xi1, xi2, xi3); axis 0 is x1 (slowest varying)."""
        f = self.axis_freqs
        return f[:, None, None], f[None, :, None], f[None, None, :]

    @cached_property
    def coord_mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.axis_coords
        return c[:, None, None], c[None, :, None], c[None, None, :]

    @cached_property
    def xi_squared(self) -> np.ndarray:
        x1, x2, x3 = self.freq_mesh
        return x1 * x1 + x2 * x2 + x3 * x3

    @cached_property
    def radius_squared(self) -> np.ndarray:
        """|x|^2 on the physical lattice."""
        c1, c2, c3 = self.coord_mesh
        return c1 * c1 + c2 * c2 + c3 * c3

    @cached_property
    def centering_phase(self) -> np.ndarray:
        """(-1)^(m1+m2+m3): the e^{-i x0.xi} phase for x0 = -L/2."""
        m = np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)
        sign = np.where(m % 2 == 0, 1.0, -1.0)
        return sign[:, None, None] * sign[None, :, None] * sign[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule mask: keep per-axis integer modes |m| <= n/3."""
        m = np.abs(np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64))
        keep = m <= self.n // 3
        return (
            keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
        )

    def mode_index(self, flat_index: int) -> tuple[int, ...]:
        """Integer mode numbers (m1, m2, m3) of a flattened frequency index."""
        idx = np.unravel_index(flat_index, self.shape)
        m = np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)
        return tuple(int(m[i]) for i in idx)


def make_grid(n: int, length: float) -> Grid:
    """Build a Grid, rejecting odd/tiny n and non-positive box lengths."""
    if n < 4:
        raise ValueError(f"n must be at least 4 (got n={n})")
    if n % 2 != 0:
        raise ValueError(f"odd n is not supported (got n={n})")
    if n & (n - 1) != 0:
        raise ValueError(f"n must be a power of two (got n={n})")
    if not length > 0:
        raise ValueError(f"box length must be positive (got L={length})")
    return Grid(n=int(n), length=float(length))


@dataclass(frozen=True)
class Field:
    """Complex scalar samples on a Grid, in physical or frequency form.

    Data layout is C order with x1 along axis 0 (slowest varying).
    Fields are immutable: the sample array is marked read-only at
    construction and every operation returns a new Field.
    """

    grid: Grid
    rep: str
    data: np.ndarray
    note: str | None = None

    def __post_init__(self):
        if self.rep not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown representation {self.rep!r}")
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid {self.grid.shape}"
            )
        if self.data.dtype != np.complex128:
            object.__setattr__(self, "data", self.data.astype(np.complex128))
        self.data.flags.writeable = False

    def with_data(self, data: np.ndarray, rep: str | None = None) -> "Field":
        return Field(self.grid, self.rep if rep is None else rep, data)


def field_from_function(grid: Grid, fn: Callable) -> Field:
    """Sample fn(x1, x2, x3) on the physical lattice."""
    x1, x2, x3 = grid.coord_mesh
    data = np.asarray(fn(x1, x2, x3), dtype=np.complex128)
    data = np.broadcast_to(data, grid.shape).copy()
    return Field(grid, PHYSICAL, data)


def zero_field(grid: Grid, rep: str = PHYSICAL) -> Field:
    return Field(grid, rep, np.zeros(grid.shape, dtype=np.complex128))


def forward_transform(f: Field) -> Field:
    """Discrete fhat(xi) = integral e^{-i x.xi} f(x) dx; requires physical input."""
    if f.rep != PHYSICAL:
        raise ValueError("forward_transform expects a physical-representation field")
    g = f.grid
    data = g.centering_phase * np.fft.fftn(f.data) * g.dx**3
    return Field(g, FREQUENCY, data)


def inverse_transform(f: Field) -> Field:
    """Inverse with the (2 pi)^{-3} convention; requires frequency input."""
    if f.rep != FREQUENCY:
        raise ValueError("inverse_transform expects a frequency-representation field")
    g = f.grid
    data = np.fft.ifftn(g.centering_phase * f.data) / g.dx**3
    return Field(g, PHYSICAL, data)


def as_physical(f: Field) -> Field:
    return f if f.rep == PHYSICAL else inverse_transform(f)


def as_frequency(f: Field) -> Field:
    return f if f.rep == FREQUENCY else forward_transform(f)


def l2_norm(f: Field) -> float:
    """Continuum-normalized L2 norm, computed in the field's own representation."""
    if f.rep == PHYSICAL:
        return float(np.sqrt(np.sum(np.abs(f.data) ** 2) * f.grid.dx**3))
    w = f.grid.dxi**3 / (2.0 * np.pi) ** 3
    return float(np.sqrt(np.sum(np.abs(f.data) ** 2) * w))


def inner_product(f: Field, g: Field) -> complex:
    """<f, g> = integral f conj(g) dx, evaluated in a common representation.

    If both arguments already share a representation it is used as is, so
    frequency-side products of disjointly supported fields vanish exactly.
    """
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if f.rep != g.rep:
        f, g = as_frequency(f), as_frequency(g)
    if f.rep == PHYSICAL:
        w = f.grid.dx**3
    else:
        w = f.grid.dxi**3 / (2.0 * np.pi) ** 3
    return complex(np.sum(f.data * np.conj(g.data)) * w)


@dataclass(frozen=True)
class Symbol:
    """Pure Fourier multiplier xi -> s(xi).

    ``fn`` takes the three broadcastable frequency meshes and returns the
    multiplier values; evaluation must be deterministic.
    """

    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    label: str

    def __call__(self, x1, x2, x3):
        return self.fn(x1, x2, x3)

    def __mul__(self, other: "Symbol") -> "Symbol":
        return Symbol(
            lambda a, b, c: self.fn(a, b, c) * other.fn(a, b, c),
            f"({self.label})*({other.label})",
        )


def identity_symbol() -> Symbol:
    return Symbol(lambda a, b, c: np.ones(np.broadcast_shapes(a.shape, b.shape, c.shape)), "1")


def coordinate_symbol(axis: int) -> Symbol:
    """The multiplier xi_j (axis is 0-based)."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (got {axis})")
    return Symbol(lambda a, b, c: (a, b, c)[axis] + 0.0, f"xi_{axis + 1}")


def half_derivative_symbol(axis: int) -> Symbol:
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (got {axis})")
    return Symbol(
        lambda a, b, c: np.sqrt(np.abs((a, b, c)[axis])), f"|xi_{axis + 1}|^(1/2)"
    )


def bessel_symbol(s: float) -> Symbol:
    """(1 + |xi|^2)^(s/2), the Sobolev weight of order s."""
    return Symbol(
        lambda a, b, c: (1.0 + a * a + b * b + c * c) ** (s / 2.0),
        f"(1+|xi|^2)^{s / 2:g}",
    )


def apply_symbol(f: Field, s: Symbol) -> Field:
    """Pointwise frequency multiplication fhat -> s.fhat.

    Returns a field in the caller's representation.  A non-finite symbol
    value at a mode carrying a nonzero coefficient raises
    SingularSymbolError; non-finite values at inactive modes contribute
    zero.
    """
    g = f.grid
    fhat = as_frequency(f)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.asarray(s(*g.freq_mesh))
    vals = np.broadcast_to(vals, g.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        offenders = bad & (fhat.data != 0)
        if offenders.any():
            flat = int(np.flatnonzero(offenders.ravel())[0])
            idx = np.unravel_index(flat, g.shape)
            xi = tuple(float(g.axis_freqs[i]) for i in idx)
            raise SingularSymbolError(s.label, g.mode_index(flat), xi)
        vals = np.where(bad, 0.0, vals)
    out = Field(g, FREQUENCY, vals * fhat.data)
    return out if f.rep == FREQUENCY else inverse_transform(out)


def free_propagate(f: Field, t: float) -> Field:
    """Exact free Schroedinger flow e^{i t Laplacian}: multiplier e^{-i t |xi|^2}."""
    g = f.grid
    fhat = as_frequency(f)
    out = Field(g, FREQUENCY, np.exp(-1j * t * g.xi_squared) * fhat.data)
    return out if f.rep == FREQUENCY else inverse_transform(out)


def half_derivative(f: Field, axis: int) -> Field:
    """The multiplier |xi_j|^(1/2) along one axis (0-based)."""
    return apply_symbol(f, half_derivative_symbol(axis))


def derivative(f: Field, axis: int) -> Field:
    """Spectral partial derivative, multiplier i xi_j (0-based axis)."""
    g = f.grid
    fhat = as_frequency(f)
    out = Field(g, FREQUENCY, 1j * g.freq_mesh[axis] * fhat.data)
    return out if f.rep == FREQUENCY else inverse_transform(out)


def boundary_mass_fraction(f: Field) -> float:
    """Fraction of L2 mass in the outer 10% shell of the box (sup-norm shell)."""
    p = as_physical(f)
    g = f.grid
    c = np.abs(g.axis_coords)
    edge = c >= 0.9 * (g.length / 2.0)
    shell = edge[:, None, None] | edge[None, :, None] | edge[None, None, :]
    total = float(np.sum(np.abs(p.data) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(p.data[shell]) ** 2) / total)


_REP_CODE = {PHYSICAL: 0, FREQUENCY: 1}
_REP_FROM_CODE = {v: k for k, v in _REP_CODE.items()}


def write_snapshot(path, f: Field) -> None:
    """Binary snapshot: 32-byte header + n^3 little-endian complex64 pairs."""
    header = _SNAPSHOT_HEADER.pack(
        _SNAPSHOT_MAGIC, _SNAPSHOT_VERSION, f.grid.n, f.grid.length, _REP_CODE[f.rep]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.data.astype("<c8")).tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        header = fh.read(_SNAPSHOT_HEADER.size)
        magic, version, n, length, rep_code = _SNAPSHOT_HEADER.unpack(header)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        raw = fh.read(n * n * n * 8)
    data = np.frombuffer(raw, dtype="<c8").reshape((n, n, n))
    grid = make_grid(n, length)
    return Field(grid, _REP_FROM_CODE[int(rep_code)], data.astype(np.complex128))
