"""Norms: Lebesgue, mixed-axis, space-time, Sobolev, the profile norms X
and X', and the potential norm Y.

Conventions.  Physical integrals are Riemann sums with weight dx^3; the
frequency-side L2 norm carries the Parseval weight dxi^3/(2 pi)^3 so both
sides agree.  L-infinity over the continuum is reported as the grid max
(a lower bound of the true sup).  Space-time norms use trapezoidal
quadrature in t.  The xi-gradient inside the X norms is realized as
multiplication by -i x in centered physical coordinates, which is exact
until mass reaches the box boundary; a wrap-around note is attached when
more than 1e-6 of the L2 mass sits in the outer 10% shell.

Everything here is pure; the per-band loop inside the X norms is the
intended parallel axis for callers that want one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import bands
from .spectral import (
    FREQUENCY,
    PHYSICAL,
    Field,
    Grid,
    as_frequency,
    as_physical,
    boundary_mass_fraction,
    inverse_transform,
)

BOUNDARY_MASS_TOL = 1e-6
WRAP_NOTE = "wrap-around warning: boundary mass fraction {frac:.3e} exceeds 1e-06"


class NormValue(float):
    """A nonnegative norm value tagged with its identity and quadrature note."""

    norm_id: str
    quadrature_note: str

    def __new__(cls, value: float, norm_id: str, quadrature_note: str = ""):
        if math.isnan(value):
            raise ValueError(f"norm {norm_id!r} evaluated to NaN")
        if value < 0:
            raise ValueError(f"norm {norm_id!r} evaluated to {value} < 0")
        obj = super().__new__(cls, value)
        obj.norm_id = norm_id
        obj.quadrature_note = quadrature_note
        return obj

    def to_json(self) -> str:
        return json.dumps(
            {
                "norm_id": self.norm_id,
                "value": float(self),
                "quadrature_note": self.quadrature_note,
            },
            sort_keys=True,
        )


@dataclass
class Trajectory:
    """Time-stamped snapshots of one evolving field.

    times is strictly increasing with t >= 1; all fields share one grid.
    """

    times: np.ndarray
    fields: list[Field]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if len(self.times) != len(self.fields) or len(self.fields) == 0:
            raise ValueError("need one field per time, at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.times[0] < 1.0 - 1e-12:
            raise ValueError("trajectories start no earlier than t = 1")
        g = self.fields[0].grid
        if any(f.grid != g for f in self.fields):
            raise ValueError("all snapshots must share one grid")

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def uniform_dt(self) -> float | None:
        if len(self.times) < 2:
            return None
        steps = np.diff(self.times)
        if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            return float(steps[0])
        return None


def _check_exponent(p, name="p"):
    if p != np.inf and p < 1:
        raise ValueError(f"{name} must satisfy {name} >= 1 (got {p})")


def lebesgue_norm(f: Field, p: float) -> NormValue:
    """(integral |f|^p dx)^(1/p); p = inf gives the grid max."""
    _check_exponent(p)
    if p == np.inf:
        val = float(np.max(np.abs(as_physical(f).data)))
        return NormValue(val, "Linf", "grid max, lower bound of the sup")
    if p == 2 and f.rep == FREQUENCY:
        w = f.grid.dxi**3 / (2.0 * np.pi) ** 3
        val = float(np.sqrt(np.sum(np.abs(f.data) ** 2) * w))
        return NormValue(val, "L2", "frequency side via Parseval")
    a = np.abs(as_physical(f).data)
    val = float(np.sum(a**p) * f.grid.dx**3) ** (1.0 / p)
    return NormValue(val, f"L{p:g}", "")


def mixed_norm(f: Field, axis: int, p_outer: float, q_inner: float) -> NormValue:
    """|| ||f||_{L^q over the two transverse axes} ||_{L^p over x_axis}."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (got {axis})")
    _check_exponent(p_outer, "p_outer")
    _check_exponent(q_inner, "q_inner")
    a = np.abs(as_physical(f).data)
    dx = f.grid.dx
    transverse = tuple(i for i in range(3) if i != axis)
    if q_inner == np.inf:
        inner = np.max(a, axis=transverse)
    else:
        inner = (np.sum(a**q_inner, axis=transverse) * dx**2) ** (1.0 / q_inner)
    if p_outer == np.inf:
        val = float(np.max(inner))
    else:
        val = float(np.sum(inner**p_outer) * dx) ** (1.0 / p_outer)
    return NormValue(val, f"L{p_outer:g}_x{axis + 1}_L{q_inner:g}_trans", "")


def spacetime_norm(tr: Trajectory, p_t: float, q_x: float) -> NormValue:
    """L^p in time (trapezoid over the sample ladder) of the L^q space norm."""
    _check_exponent(p_t, "p_t")
    _check_exponent(q_x, "q_x")
    vals = np.array([lebesgue_norm(f, q_x) for f in tr.fields])
    if p_t == np.inf:
        return NormValue(float(np.max(vals)), f"Linf_t_L{q_x:g}_x", "max over samples")
    if len(tr.fields) < 2:
        raise ValueError("finite p_t needs at least two time samples")
    val = float(np.trapezoid(vals**p_t, tr.times)) ** (1.0 / p_t)
    return NormValue(val, f"L{p_t:g}_t_L{q_x:g}_x", "trapezoid in t")


def mixed_spacetime_norm(
    tr: Trajectory, axis: int, p_outer: float, q_inner: float
) -> NormValue:
    """|| ||f||_{L^q over (t, transverse axes)} ||_{L^p over x_axis}.

    This is the smoothing-estimate norm family, e.g. (p, q) = (inf, 2)
    gives L^inf_{x_j} L^2_{t, x~j}.
    """
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (got {axis})")
    _check_exponent(p_outer, "p_outer")
    _check_exponent(q_inner, "q_inner")
    if len(tr.fields) < 2 and q_inner != np.inf:
        raise ValueError("finite inner exponent needs at least two time samples")
    dx = tr.grid.dx
    transverse = tuple(i for i in range(3) if i != axis)
    # stack of per-time transverse reductions, shape (nt, n)
    if q_inner == np.inf:
        per_t = np.stack(
            [np.max(np.abs(as_physical(f).data), axis=transverse) for f in tr.fields]
        )
        inner = np.max(per_t, axis=0)
    else:
        per_t = np.stack(
            [
                np.sum(np.abs(as_physical(f).data) ** q_inner, axis=transverse) * dx**2
                for f in tr.fields
            ]
        )
        inner = np.trapezoid(per_t, tr.times, axis=0) ** (1.0 / q_inner)
    if p_outer == np.inf:
        val = float(np.max(inner))
    else:
        val = float(np.sum(inner**p_outer) * dx) ** (1.0 / p_outer)
    return NormValue(
        val,
        f"L{p_outer:g}_x{axis + 1}_L{q_inner:g}_t_trans",
        "trapezoid in t",
    )


def sobolev_norm(f: Field, s: float) -> NormValue:
    """H^s norm ||(1+|xi|^2)^(s/2) fhat|| with the Parseval weighting."""
    fhat = as_frequency(f)
    g = f.grid
    w = g.dxi**3 / (2.0 * np.pi) ** 3
    val = float(
        np.sqrt(np.sum((1.0 + g.xi_squared) ** s * np.abs(fhat.data) ** 2) * w)
    )
    return NormValue(val, f"H{s:g}", "")


def _wrap_note(f: Field) -> str:
    frac = boundary_mass_fraction(f)
    if frac > BOUNDARY_MASS_TOL:
        return WRAP_NOTE.format(frac=frac)
    return ""


def x_norm(f: Field, profile: bands.BandProfile = bands._PROFILE) -> NormValue:
    """sup_k || grad_xi (P_k fhat) ||_L2.

    Per band, grad_xi of P_k fhat is the forward transform of -i x times
    the band-projected field, so its Parseval L2 norm equals
    || |x| P_k f ||_{L2(dx)}; the sup runs over every band with support on
    the grid.
    """
    note = _wrap_note(f)
    g = f.grid
    fhat = as_frequency(f)
    r2 = g.radius_squared
    best = 0.0
    for k in bands.covering_band_range(g):
        mult = bands.band_multiplier(g, k, profile)
        if not np.any(mult > 0.0):
            continue
        gk = inverse_transform(Field(g, FREQUENCY, mult * fhat.data))
        val = float(np.sqrt(np.sum(r2 * np.abs(gk.data) ** 2) * g.dx**3))
        best = max(best, val)
    return NormValue(best, "X", note)


def x_prime_norm(f: Field, profile: bands.BandProfile = bands._PROFILE) -> NormValue:
    """sup_k || (grad_xi fhat) P_k ||_L2: the cutoff sits outside the gradient."""
    note = _wrap_note(f)
    g = f.grid
    p = as_physical(f)
    w = g.dxi**3 / (2.0 * np.pi) ** 3
    parts = []
    for axis in range(3):
        xj = g.coord_mesh[axis]
        dj = as_frequency(Field(g, PHYSICAL, -1j * xj * p.data))
        parts.append(dj.data)
    best = 0.0
    for k in bands.covering_band_range(g):
        mult = bands.band_multiplier(g, k, profile)
        if not np.any(mult > 0.0):
            continue
        grad_sq = sum(np.abs(mult * d) ** 2 for d in parts)
        best = max(best, float(np.sqrt(np.sum(grad_sq) * w)))
    return NormValue(best, "Xprime", note)


def y_norm(w: Field) -> NormValue:
    """L1 + Linf + sum_j || || |w|^(1/2) ||_{Linf transverse} ||_{L2, x_j}."""
    a = np.abs(as_physical(w).data)
    dx = w.grid.dx
    l1 = float(np.sum(a) * dx**3)
    linf = float(np.max(a))
    mixed = 0.0
    for axis in range(3):
        transverse = tuple(i for i in range(3) if i != axis)
        sup_trans = np.max(a, axis=transverse)
        mixed += float(np.sqrt(np.sum(sup_trans) * dx))
    return NormValue(l1 + linf + mixed, "Y", "Linf parts are grid maxima")
