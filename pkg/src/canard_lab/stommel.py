"""Two-box thermohaline (Stommel-type) model and its reduction to the corner form.

In nondimensional variables the circulation y and forcing mu obey

    y'  = mu - y - K |1 - y| y
    mu' = eps (lam - y)

The affine change X = 1 - y, Y = mu - 1 turns this exactly into
X' = F(X) - Y, Y' = eps (X - (1 - lam)) with F(X) = (K-1) X - K X^2 for
X >= 0 and -(K+1) X + K X^2 for X <= 0.  X > 0 means y < 1, the poleward
circulation side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bifurcation import DEGENERACY_TOL
from .errors import ConfigError
from .integrator import PiecewiseField, Trajectory, integrate
from .polynomials import PolyBranch
from .system import SystemSpec


@dataclass(frozen=True)
class StommelParams:
    K: float
    epsilon: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.K) and self.K > 1):
            raise ConfigError(f"K must exceed 1 (bistable regime); got {self.K}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive; got {self.epsilon}")
        if not math.isfinite(self.lam):
            raise ConfigError("lambda must be finite")


class StommelState(NamedTuple):
    y: float
    mu: float


def stommel_field(p: StommelParams, s) -> tuple:
    y, mu = s
    return mu - y - p.K * abs(1.0 - y) * y, p.epsilon * (p.lam - y)


def critical_manifold(p: StommelParams, y: float) -> float:
    """mu on the fast nullcline: (1 + K) y - K y^2 for y < 1, (1 - K) y + K y^2 above."""
    return y + p.K * abs(1.0 - y) * y


def stommel_piecewise(p: StommelParams) -> PiecewiseField:
    """The model as a field split at y = 1, for the event-locating integrator."""
    K, eps, lam = p.K, p.epsilon, p.lam

    def below(y, mu):
        return mu - y - K * (1.0 - y) * y, eps * (lam - y)

    def above(y, mu):
        return mu - y + K * (1.0 - y) * y, eps * (lam - y)

    return PiecewiseField((1.0,), (below, above), nullcline=lam)


class CoordinateMap(NamedTuple):
    """(y, mu) <-> (X, Y) for the general form."""

    @staticmethod
    def forward(y, mu):
        return 1.0 - y, mu - 1.0

    @staticmethod
    def inverse(X, Y):
        return 1.0 - X, Y + 1.0

    @staticmethod
    def push_field(dy, dmu):
        """Velocity in (X, Y) from a velocity in (y, mu)."""
        return -dy, dmu


def to_general_form(p: StommelParams) -> tuple:
    K = p.K
    h = PolyBranch.of([0, K - 1, -K])
    g = PolyBranch.of([0, -(1 + K), K])
    spec = SystemSpec(p.epsilon, 1.0 - p.lam, g, h, name="stommel")
    return spec, CoordinateMap()


def fold_location(p: StommelParams) -> float:
    return (p.K - 1.0) / (2.0 * p.K)


@dataclass
class RegimeReport:
    regime: str  # canard | super-explosion | degenerate
    criticality: str
    threshold_K: float
    h_slope: float
    g_slope: float
    two_sqrt_eps: float
    bifurcation_lambda: float = 1.0

    def to_json(self) -> dict:
        return {
            "regime": self.regime,
            "criticality": self.criticality,
            "threshold_K": self.threshold_K,
            "h_slope": self.h_slope,
            "g_slope": self.g_slope,
            "two_sqrt_eps": self.two_sqrt_eps,
            "bifurcation_lambda": self.bifurcation_lambda,
        }


def classify_regime(p: StommelParams) -> RegimeReport:
    """Canard cycles at the corner when K - 1 < 2 sqrt(eps), a super-explosion above.

    Both cases are supercritical: |g'(0)| = K + 1 exceeds h'(0) = K - 1, and
    K + 1 > 2 sqrt(eps) whenever K - 1 does.
    """
    tse = 2.0 * math.sqrt(p.epsilon)
    h0, g0 = p.K - 1.0, -(p.K + 1.0)
    gap = h0 - tse
    if abs(gap) <= DEGENERACY_TOL:
        regime, crit = "degenerate", "degenerate"
    else:
        regime = "canard" if gap < 0 else "super-explosion"
        crit = "supercritical"
    return RegimeReport(regime, crit, 1.0 + tse, h0, g0, tse)


def circulation(y) -> np.ndarray:
    """Label per sample: poleward for y < 1, equatorward for y > 1."""
    y = np.atleast_1d(y)
    return np.where(y < 1.0, "poleward", np.where(y > 1.0, "equatorward", "none"))


def simulate(p: StommelParams, init, t_max: float, tol: float = 1e-9, **kw) -> tuple:
    """Trajectory in (y, mu) and the matching general-form trajectory from the mapped start.

    The error control is absolute by default (``rtol=0``), which makes the two
    runs take identical steps, so they agree to rounding.
    """
    kw.setdefault("rtol", 0.0)
    direct = integrate(stommel_piecewise(p), init, t_max, tol, **kw)
    spec, cmap = to_general_form(p)
    general = integrate(spec, cmap.forward(*init), t_max, tol, **kw)
    return direct, general


def conjugacy_error(direct: Trajectory, general: Trajectory, times=None) -> float:
    """Largest distance between the mapped direct run and the general-form run."""
    if times is None:
        times = np.linspace(direct.t[0], min(direct.t[-1], general.t[-1]), 2001)
    worst = 0.0
    for t in times:
        y, mu = direct.interpolate(float(t))
        X, Y = CoordinateMap.forward(y, mu)
        Xg, Yg = general.interpolate(float(t))
        worst = max(worst, math.hypot(X - Xg, Y - Yg))
    return worst
