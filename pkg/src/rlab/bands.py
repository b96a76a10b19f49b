"""Littlewood-Paley projections at base 1.1.

A band k localizes to the annulus 1.1^k * C with
C = { 1/1.04 <= |xi| <= 1.04 * 1.1 }, built from a radial bump
phi(r) = chi(r/1.1) - chi(r) where chi is a C^2 quintic-smoothstep
lowpass (1 below 1/1.04, 0 above 1.04).  The telescoping identity
sum_j phi(1.1^{-j} r) = 1 then holds exactly for every r > 0, and
bands two or more apart have exactly disjoint supports
(1.04^2 < 1.1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import FREQUENCY, Field, Grid, as_frequency, inverse_transform

BASE = 1.1
INNER_EDGE = 1.0 / 1.04
OUTER_EDGE = 1.04 * 1.1


def _smoothstep(s: np.ndarray) -> np.ndarray:
    # quintic 6s^5 - 15s^4 + 10s^3: C^2, exactly 0/1 outside (0, 1)
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 + s * (6.0 * s - 15.0))


@dataclass(frozen=True)
class BandProfile:
    """Radial bump phi and cumulative lowpass chi for base-1.1 bands."""

    base: float
    inner: float
    outer: float
    chi: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]


def build_band_profile() -> BandProfile:
    """Construct the closed-form C^2 profile; reproducible bit for bit."""

    def chi(r):
        r = np.asarray(r, dtype=np.float64)
        return 1.0 - _smoothstep((r - INNER_EDGE) / (1.04 - INNER_EDGE))

    def phi(r):
        r = np.asarray(r, dtype=np.float64)
        return chi(r / BASE) - chi(r)

    return BandProfile(base=BASE, inner=INNER_EDGE, outer=OUTER_EDGE, chi=chi, phi=phi)


_PROFILE = build_band_profile()


def band_multiplier(grid: Grid, k: int, profile: BandProfile = _PROFILE) -> np.ndarray:
    """P_k(xi) = phi(1.1^{-k} |xi|) sampled on the grid's modes."""
    r = np.sqrt(grid.xi_squared)
    return profile.phi(r * profile.base ** (-k))


def lowpass_multiplier(grid: Grid, k: int, profile: BandProfile = _PROFILE) -> np.ndarray:
    """Cumulative lowpass sum_{j<=k} P_j(xi) = chi(1.1^{-(k+1)} |xi|).

    The extra 1/1.1 inside chi is forced by the telescoping identity
    P_{<=k} - P_{<=k-1} = P_k.
    """
    r = np.sqrt(grid.xi_squared)
    return profile.chi(r * profile.base ** (-(k + 1)))


def project_band(f: Field, k: int, profile: BandProfile = _PROFILE) -> Field:
    """Band projection f_k with fhat_k = P_k fhat, in the caller's representation.

    A band whose annulus misses every grid mode returns a zero field
    flagged with note="inert-band" rather than a silent zero.
    """
    mult = band_multiplier(f.grid, k, profile)
    fhat = as_frequency(f)
    out = Field(f.grid, FREQUENCY, mult * fhat.data)
    if not np.any(mult > 0.0):
        out = Field(f.grid, FREQUENCY, out.data, note="inert-band")
    if f.rep == FREQUENCY:
        return out
    phys = inverse_transform(Field(f.grid, FREQUENCY, out.data))
    return Field(f.grid, phys.rep, phys.data, note=out.note)


def project_leq(f: Field, k: int, profile: BandProfile = _PROFILE) -> Field:
    """Projection onto frequencies up to band k (cumulative lowpass)."""
    mult = lowpass_multiplier(f.grid, k, profile)
    fhat = as_frequency(f)
    out = Field(f.grid, FREQUENCY, mult * fhat.data)
    return out if f.rep == FREQUENCY else inverse_transform(out)


def band_indices(grid: Grid) -> range:
    """Inclusive range of band indices intersecting the resolved frequencies.

    A band is active when its inner edge 1.1^k/1.04 is at most the per-axis
    Nyquist frequency and its outer scale reaches down to the frequency
    spacing dxi.
    """
    log = math.log(BASE)
    k_min = math.ceil(math.log(grid.dxi / 1.04) / log)
    k_max = math.floor(math.log(1.04 * grid.nyquist) / log)
    if k_max < k_min:
        raise ValueError(
            f"grid resolves no frequency bands (dxi={grid.dxi:.3g}, "
            f"nyquist={grid.nyquist:.3g})"
        )
    return range(k_min, k_max + 1)


def covering_band_range(grid: Grid) -> range:
    """All k whose annulus can touch any nonzero grid mode.

    Wider than band_indices: runs from the band just below dxi to the band
    covering the corner modes at sqrt(3) * nyquist.  Used where a supremum
    or a sum over *all* bands with support is required (X norms, partition
    sums).
    """
    log = math.log(BASE)
    k_min = math.floor(math.log(grid.dxi / OUTER_EDGE) / log)
    k_max = math.ceil(math.log(1.04 * math.sqrt(3.0) * grid.nyquist) / log)
    return range(k_min, k_max + 1)
