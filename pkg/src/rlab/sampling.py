"""Reproducible random field classes used by the estimate harness and tests.

Two classes:

* band-flat fields: iid complex Gaussians per mode, masked to a union of
  frequency bands (flat spectrum inside each band, delocalized in space);
* localized packets: a Gaussian envelope at the origin carrying a few
  random in-band carriers, then re-projected onto the band, for
  measurements that need spatial localization (dispersive decay,
  smoothing transits, X norms).

Sample streams are derived as default_rng([seed, index]) so that serial
and parallel sample loops see identical data.
"""

from __future__ import annotations

import numpy as np

from . import bands
from .spectral import FREQUENCY, PHYSICAL, Field, Grid, inverse_transform, l2_norm


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-sample stream, independent of evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def band_mask(grid: Grid, k_lo: int, k_hi: int) -> np.ndarray:
    """Smooth mask sum_{k_lo <= k <= k_hi} P_k (telescoped lowpass difference)."""
    if k_hi < k_lo:
        raise ValueError("empty band range")
    return bands.lowpass_multiplier(grid, k_hi) - bands.lowpass_multiplier(
        grid, k_lo - 1
    )


def band_flat_field(
    grid: Grid, k_lo: int, k_hi: int, rng: np.random.Generator, normalize: bool = True
) -> Field:
    """Complex Gaussian coefficients on the bands k_lo..k_hi, flat per band."""
    mask = band_mask(grid, k_lo, k_hi)
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    f = Field(grid, FREQUENCY, mask * z)
    if normalize:
        nrm = l2_norm(f)
        if nrm > 0:
            f = Field(grid, FREQUENCY, f.data / nrm)
    return inverse_transform(f)


def localized_packet(
    grid: Grid,
    k: int,
    rng: np.random.Generator,
    width: float,
    carriers: int = 2,
    normalize: bool = True,
    axis_bias: int | None = None,
    bias_spread: float = 0.35,
) -> Field:
    """Band-k wave packet: Gaussian envelope at the origin times random
    in-band carriers, re-projected onto band k.

    With axis_bias set, carrier directions are drawn in a cone around that
    coordinate axis (spread bias_spread), giving packets whose group
    velocity points down the axis; the smoothing-transit measurements need
    this, since transverse packets never clear their slab within a finite
    horizon.
    """
    x1, x2, x3 = grid.coord_mesh
    env = np.exp(-(x1 * x1 + x2 * x2 + x3 * x3) / (2.0 * width**2))
    radius = bands.BASE**k
    data = np.zeros(grid.shape, dtype=np.complex128)
    for _ in range(carriers):
        direction = rng.standard_normal(3)
        if axis_bias is not None:
            axial = np.zeros(3)
            axial[axis_bias] = 1.0
            direction = axial + bias_spread * direction
        direction /= np.linalg.norm(direction)
        xi0 = radius * direction
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        data += amp * env * np.exp(1j * (x1 * xi0[0] + x2 * xi0[1] + x3 * xi0[2]))
    f = bands.project_band(Field(grid, PHYSICAL, data), k)
    if normalize:
        nrm = l2_norm(f)
        if nrm > 0:
            f = Field(grid, PHYSICAL, f.data / nrm)
    return f


def band_kernel_field(grid: Grid, k: int, normalize: bool = True) -> Field:
    """The band kernel itself: fhat = P_k, a canonical localized band-k datum."""
    mult = bands.band_multiplier(grid, k)
    f = Field(grid, FREQUENCY, mult.astype(np.complex128))
    if normalize:
        nrm = l2_norm(f)
        if nrm > 0:
            f = Field(grid, FREQUENCY, f.data / nrm)
    return inverse_transform(f)


def directed_band_kernel(grid: Grid, k: int, axis: int, cap_width: float = 0.35,
                         normalize: bool = True) -> Field:
    """Deterministic band-k datum beamed along one axis.

    fhat = P_k(xi) * exp(-(1 - cos theta)^2 / (2 cap_width^2)) with theta
    the angle to the axis; its group velocity points down the axis, so it
    crosses transverse slabs in a finite, k-predictable time.  Used by the
    smoothing-gain signature.
    """
    r = np.sqrt(np.broadcast_to(grid.xi_squared, grid.shape))
    with np.errstate(invalid="ignore"):
        cosq = np.where(
            r > 0,
            np.broadcast_to(grid.freq_mesh[axis], grid.shape) / np.where(r > 0, r, 1.0),
            0.0,
        )
    cap = np.exp(-((1.0 - cosq) ** 2) / (2.0 * cap_width**2))
    data = (bands.band_multiplier(grid, k) * cap).astype(np.complex128)
    f = Field(grid, FREQUENCY, data)
    if normalize:
        nrm = l2_norm(f)
        if nrm > 0:
            f = Field(grid, FREQUENCY, f.data / nrm)
    return inverse_transform(f)


def dispersive_datum(grid: Grid, k: int, advance: float = 8.0) -> Field:
    """Localized band-k pulse already `advance` time units into its free
    spreading: fhat = P_k(xi) e^{-i advance |xi|^2}, normalized in L2.

    Starting inside the dispersive regime keeps t * ||u(t)||_L6 flat over a
    finite observation window; the band kernel at its focus spends most of
    such a window crossing into the far field.
    """
    mult = bands.band_multiplier(grid, k)
    data = mult * np.exp(-1j * advance * np.broadcast_to(grid.xi_squared, grid.shape))
    f = Field(grid, FREQUENCY, data.astype(np.complex128))
    nrm = l2_norm(f)
    if nrm > 0:
        f = Field(grid, FREQUENCY, f.data / nrm)
    return inverse_transform(f)
