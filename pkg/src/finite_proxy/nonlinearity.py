"""Pointwise Lipschitz nonlinearities and their primitives.

Each instance bundles the scalar map f, an exact (or estimated) Lipschitz
constant, and the primitive G with G(0) = 0.  The map acts on fields as a
composition operator u -> f(u(.)), evaluated on synthesis grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Nonlinearity:
    tag: str
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    primitive: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz: float
    lipschitz_estimated: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, u):
        return self.f(np.asarray(u, dtype=float))

    def G(self, u):
        return self.primitive(np.asarray(u, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.tag == "zero"


def zero() -> Nonlinearity:
    return Nonlinearity(
        tag="zero",
        f=lambda u: np.zeros_like(u),
        primitive=lambda u: np.zeros_like(u),
        lipschitz=0.0,
    )


def constant(c: float) -> Nonlinearity:
    """f(u) = c: a pure source term, Lipschitz constant 0."""
    return Nonlinearity(
        tag="constant",
        f=lambda u: np.full_like(u, float(c)),
        primitive=lambda u: float(c) * u,
        lipschitz=0.0,
        params={"c": float(c)},
    )


def scaled_sine(eps: float) -> Nonlinearity:
    """f(u) = eps sin(u), exact Lipschitz constant |eps|, G = eps (1 - cos u)."""
    e = float(eps)
    return Nonlinearity(
        tag="scaled-sine",
        f=lambda u: e * np.sin(u),
        primitive=lambda u: e * (1.0 - np.cos(u)),
        lipschitz=abs(e),
        params={"eps": e},
    )


def saturating_cubic(eps: float, s: float = 1.0) -> Nonlinearity:
    """f(u) = eps u / (1 + (u/s)^2): linear slope eps at 0, decaying tails.

    max |f'| = |eps| (attained at u = 0), so the Lipschitz constant is exact.
    G(u) = eps s^2/2 log(1 + (u/s)^2).
    """
    if not (s > 0):
        raise DomainError(f"saturation scale must be positive, got {s}")
    e, sc = float(eps), float(s)
    return Nonlinearity(
        tag="saturating-cubic",
        f=lambda u: e * u / (1.0 + (u / sc) ** 2),
        primitive=lambda u: 0.5 * e * sc * sc * np.log1p((u / sc) ** 2),
        lipschitz=abs(e),
        params={"eps": e, "s": sc},
    )


def table_spline(x_samples, y_samples) -> Nonlinearity:
    """Monotone-clamped spline through (x, y) samples.

    Uses a shape-preserving PCHIP interpolant, held constant outside the
    sampled range so f stays globally Lipschitz.  The Lipschitz constant is
    estimated from the maximum interpolant slope and flagged as such.
    """
    from scipy.interpolate import PchipInterpolator

    x = np.asarray(x_samples, dtype=float)
    y = np.asarray(y_samples, dtype=float)
    if x.ndim != 1 or x.size < 2 or x.shape != y.shape:
        raise DomainError("table nonlinearity needs matching 1-D samples, >= 2 points")
    if np.any(np.diff(x) <= 0):
        raise DomainError("table abscissae must be strictly increasing")

    interp = PchipInterpolator(x, y, extrapolate=False)
    anti = interp.antiderivative()
    x_lo, x_hi = float(x[0]), float(x[-1])
    y_lo, y_hi = float(y[0]), float(y[-1])

    dense = np.linspace(x_lo, x_hi, max(4096, 64 * x.size))
    slope = float(np.max(np.abs(interp.derivative()(dense))))

    def f(u):
        u = np.asarray(u, dtype=float)
        inside = interp(np.clip(u, x_lo, x_hi))
        return np.where(u < x_lo, y_lo, np.where(u > x_hi, y_hi, inside))

    # primitive anchored so that G(0) = 0, with linear continuation outside
    # the table range (constant f there).
    def G_raw(u):
        u = np.asarray(u, dtype=float)
        core = anti(np.clip(u, x_lo, x_hi))
        below = anti(x_lo) + y_lo * (u - x_lo)
        above = anti(x_hi) + y_hi * (u - x_hi)
        return np.where(u < x_lo, below, np.where(u > x_hi, above, core))

    g0 = float(G_raw(np.array(0.0)))

    return Nonlinearity(
        tag="table-spline",
        f=f,
        primitive=lambda u: G_raw(u) - g0,
        lipschitz=slope,
        lipschitz_estimated=True,
        params={"n_samples": int(x.size), "range": (x_lo, x_hi)},
    )


_BUILDERS = {
    "zero": lambda p: zero(),
    "constant": lambda p: constant(p["c"]),
    "scaled-sine": lambda p: scaled_sine(p["eps"]),
    "saturating-cubic": lambda p: saturating_cubic(p["eps"], p.get("s", 1.0)),
    "table-spline": lambda p: table_spline(p["x"], p["y"]),
}


def from_spec(tag: str, params: dict | None = None) -> Nonlinearity:
    """Build a nonlinearity from its tag and parameter dict (config entry)."""
    if tag not in _BUILDERS:
        raise DomainError(
            f"unknown nonlinearity tag {tag!r}; known: {sorted(_BUILDERS)}"
        )
    try:
        return _BUILDERS[tag](params or {})
    except KeyError as exc:
        raise DomainError(f"nonlinearity {tag!r} is missing parameter {exc}") from exc
