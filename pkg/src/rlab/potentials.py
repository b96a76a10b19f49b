"""Construction and certification of admissible small potentials.

A potential set holds the electric part V and the magnetic components
a1, a2, a3 on one grid, all real valued.  Certification measures, for
each component w (and additionally each square (a_i)^2),

    ||w||_Y,   ||<x> w||_Y,   ||(1-Delta)^5 w||_Y,

and passes iff every measured value is at most the smallness dial delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .norms import y_norm
from .spectral import (
    PHYSICAL,
    Field,
    Grid,
    as_frequency,
    as_physical,
    boundary_mass_fraction,
    inverse_transform,
    zero_field,
)

_IMAG_TOL = 1e-14


@dataclass(frozen=True)
class PotentialSet:
    """Electric potential V and magnetic components (a1, a2, a3) with target delta."""

    v: Field
    a: tuple[Field, Field, Field]
    delta_target: float

    def __post_init__(self):
        fields = (self.v, *self.a)
        g = self.v.grid
        for f in fields:
            if f.grid != g:
                raise ValueError("all potentials must share one grid")
            if f.rep != PHYSICAL:
                raise ValueError("potentials must be physical-representation fields")
            if np.max(np.abs(f.data.imag)) > _IMAG_TOL:
                raise ValueError("potentials must be real valued")
        if not self.delta_target > 0:
            raise ValueError("delta must be positive")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def is_zero(self) -> bool:
        return all(not np.any(f.data) for f in (self.v, *self.a))

    def scaled(self, lam: float) -> "PotentialSet":
        return PotentialSet(
            v=Field(self.grid, PHYSICAL, lam * self.v.data),
            a=tuple(Field(self.grid, PHYSICAL, lam * ai.data) for ai in self.a),
            delta_target=self.delta_target,
        )


def zero_potential_set(grid: Grid, delta: float = 1.0) -> PotentialSet:
    z = zero_field(grid)
    return PotentialSet(v=z, a=(z, z, z), delta_target=delta)


def gaussian_potential(grid: Grid, center, width: float, amplitude: float) -> Field:
    """amplitude * exp(-|x - center|^2 / (2 width^2)), with a wrap-around note
    when the bump carries boundary mass."""
    if not width > 0:
        raise ValueError(f"width must be positive (got {width})")
    c = np.asarray(center, dtype=np.float64)
    if c.shape != (3,):
        raise ValueError("center must be a 3-vector")
    x1, x2, x3 = grid.coord_mesh
    r2 = (x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2
    data = amplitude * np.exp(-r2 / (2.0 * width**2)) + 0j
    f = Field(grid, PHYSICAL, data)
    frac = boundary_mass_fraction(f)
    note = None
    if frac > 1e-6:
        note = f"wrap-around warning: boundary mass fraction {frac:.3e}"
    return Field(grid, PHYSICAL, data, note=note)


@dataclass(frozen=True)
class SmallnessCertificate:
    """Measured Y-norm triples per potential (and per magnetic square)."""

    delta: float
    entries: dict  # name -> {"y": float, "y_weighted": float, "y_smooth": float}
    passed: bool
    notes: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "delta": self.delta,
                "entries": self.entries,
                "pass": self.passed,
                "notes": list(self.notes),
            },
            sort_keys=True,
        )


def _smooth_weight(f: Field) -> Field:
    """(1 - Delta)^5 f via the multiplier (1 + |xi|^2)^5."""
    g = f.grid
    fhat = as_frequency(f)
    out = Field(g, "frequency", (1.0 + g.xi_squared) ** 5 * fhat.data)
    return inverse_transform(out)


def _x_weight(f: Field) -> Field:
    g = f.grid
    w = np.sqrt(1.0 + g.radius_squared)
    return Field(g, PHYSICAL, w * as_physical(f).data)


def _triple(w: Field) -> dict:
    return {
        "y": float(y_norm(w)),
        "y_weighted": float(y_norm(_x_weight(w))),
        "y_smooth": float(y_norm(_smooth_weight(w))),
    }


def _nyquist_tail_note(f: Field, name: str) -> str | None:
    # (1-Delta)^5 is under-resolved when the weighted spectrum leans on Nyquist
    g = f.grid
    fhat = as_frequency(f)
    weighted = (1.0 + g.xi_squared) ** 5 * np.abs(fhat.data) ** 2
    m = np.abs(g.axis_freqs)
    hi = m >= 0.8 * g.nyquist
    shell = hi[:, None, None] | hi[None, :, None] | hi[None, None, :]
    total = float(np.sum(weighted))
    if total == 0.0:
        return None
    frac = float(np.sum(weighted[shell]) / total)
    if frac > 1e-6:
        return (
            f"resolution warning: {name} carries fraction {frac:.3e} of its "
            f"(1-Delta)^5-weighted mass above 0.8 nyquist"
        )
    return None


def certify(ps: PotentialSet, delta: float) -> SmallnessCertificate:
    """Measure every smallness condition and compare against delta."""
    named = [("V", ps.v), ("a1", ps.a[0]), ("a2", ps.a[1]), ("a3", ps.a[2])]
    squares = [
        (f"a{i + 1}^2", Field(ps.grid, PHYSICAL, ai.data * ai.data))
        for i, ai in enumerate(ps.a)
    ]
    entries = {}
    notes = []
    for name, w in named + squares:
        entries[name] = _triple(w)
        note = _nyquist_tail_note(w, name)
        if note:
            notes.append(note)
    passed = all(v <= delta for triple in entries.values() for v in triple.values())
    return SmallnessCertificate(
        delta=float(delta), entries=entries, passed=passed, notes=tuple(notes)
    )


@dataclass(frozen=True)
class RescaleResult:
    potentials: PotentialSet
    lam: float
    certificate: SmallnessCertificate


def rescale_to_delta(ps: PotentialSet, delta: float, iterations: int = 40) -> RescaleResult:
    """Largest lambda in (0, 1] making certify pass, found by bisection.

    The Y norm mixes linear, square-root and quadratic homogeneities, so a
    closed-form scaling is not available; every certificate entry is
    monotone in lambda, which makes bisection exact.
    """
    if ps.is_zero:
        raise ValueError("cannot rescale an identically zero potential set")
    cert = certify(ps, delta)
    if cert.passed:
        return RescaleResult(ps, 1.0, cert)
    lo = 1e-12
    cert_lo = certify(ps.scaled(lo), delta)
    if not cert_lo.passed:
        raise ValueError(
            "potential set cannot be certified even at lambda = 1e-12"
        )
    hi = 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if certify(ps.scaled(mid), delta).passed:
            lo = mid
        else:
            hi = mid
    scaled = ps.scaled(lo)
    return RescaleResult(scaled, lo, certify(scaled, delta))
