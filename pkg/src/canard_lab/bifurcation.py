"""Equilibrium analysis and bifurcation classification at the corner and the fold."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import sympy

from .errors import HypothesisNotSatisfied, NoFold, NotFocusFocus
from .polynomials import as_sympy, max_on_interval, to_number
from .system import State, SystemSpec, geometry

DEGENERACY_TOL = 1e-12

CRITICALITY_NOTE = (
    "criticality follows |g'(0)| > h'(0) => supercritical (Lambda < 0); "
    "the opposite sign convention attributed to the nonsmooth-Hopf literature is not used"
)


def eigenpair(slope: float, epsilon: float) -> tuple:
    """Closed-form eigenvalues (mu+, mu-) of [[slope, -1], [epsilon, 0]]."""
    disc = slope * slope - 4.0 * epsilon
    root = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    return complex((slope + root) / 2), complex((slope - root) / 2)


def _kind(slope: float, epsilon: float) -> str:
    disc = slope * slope - 4.0 * epsilon
    if slope == 0 and disc < 0:
        return "center"
    stab = "stable" if slope < 0 else "unstable"
    if disc > 0:
        return f"{stab} node"
    if disc < 0:
        return f"{stab} focus"
    return f"{stab} degenerate node"


@dataclass
class EquilibriumReport:
    location: State
    slope: float
    mu_plus: complex
    mu_minus: complex
    kind: str
    strong_eigvec_slope: Optional[float] = None
    one_sided: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def c(z):
            return {"re": z.real, "im": z.imag}

        out = {
            "location": {"x": self.location.x, "y": self.location.y},
            "slope": self.slope,
            "mu_plus": c(self.mu_plus),
            "mu_minus": c(self.mu_minus),
            "kind": self.kind,
            "strong_eigvec_slope": self.strong_eigvec_slope,
        }
        if self.one_sided:
            out["one_sided"] = {
                side: {"slope": s, "mu_plus": c(p), "mu_minus": c(m), "kind": k}
                for side, (s, p, m, k) in self.one_sided.items()
            }
        return out


def equilibrium(spec: SystemSpec) -> EquilibriumReport:
    lam, eps = spec.lam, spec.epsilon
    side = "left" if lam < 0 else "right"
    slope = spec.dF(lam, side)
    mp, mm = eigenpair(slope, eps)
    kind = _kind(slope, eps)
    strong = None
    if mp.imag == 0 and mp.real != 0:
        mu2 = max((mp.real, mm.real), key=abs)
        strong = eps / mu2
    one_sided = {}
    if lam == 0:
        for sd in ("left", "right"):
            s = spec.dF(0.0, sd)
            p, m = eigenpair(s, eps)
            one_sided[sd] = (s, p, m, _kind(s, eps))
    return EquilibriumReport(State(lam, spec.F(lam)), slope, mp, mm, kind, strong, one_sided)


# -- corner ---------------------------------------------------------------------


def lambda_quantity(g_slope: float, h_slope: float, epsilon: float) -> float:
    """Focus-focus criticality quantity; negative means supercritical."""
    four_eps = 4.0 * epsilon
    if not (abs(g_slope) ** 2 < four_eps and 0 < h_slope and h_slope**2 < four_eps):
        raise NotFocusFocus(
            f"need |g'(0)| < 2 sqrt(eps) and 0 < h'(0) < 2 sqrt(eps); got {g_slope}, {h_slope}, eps={epsilon}"
        )
    return h_slope / math.sqrt(four_eps - h_slope**2) - abs(g_slope) / math.sqrt(four_eps - g_slope**2)


@dataclass
class CornerBifurcationReport:
    kind: str  # HopfLike | SuperExplosion | Degenerate
    criticality: str  # supercritical | subcritical | degenerate
    thresholds: dict
    note: str = CRITICALITY_NOTE

    def to_json(self) -> dict:
        return asdict(self)


def classify_slopes(g_slope: float, h_slope: float, epsilon: float) -> CornerBifurcationReport:
    tse = 2.0 * math.sqrt(epsilon)
    lam_q = None
    if abs(g_slope) < tse and 0 < h_slope < tse:
        lam_q = lambda_quantity(g_slope, h_slope, epsilon)
    thresholds = {"two_sqrt_eps": tse, "h_slope": h_slope, "g_slope": g_slope, "Lambda": lam_q}
    if abs(h_slope - tse) <= DEGENERACY_TOL:
        return CornerBifurcationReport("Degenerate", "degenerate", thresholds)
    if h_slope < tse:
        gap = abs(g_slope) - h_slope
        if abs(gap) <= DEGENERACY_TOL:
            crit = "degenerate"
        else:
            crit = "supercritical" if gap > 0 else "subcritical"
        return CornerBifurcationReport("HopfLike", crit, thresholds)
    crit = "supercritical" if abs(g_slope) >= tse else "subcritical"
    return CornerBifurcationReport("SuperExplosion", crit, thresholds)


def corner_classify(spec: SystemSpec) -> CornerBifurcationReport:
    return classify_slopes(spec.dF(0.0, "left"), spec.dF(0.0, "right"), spec.epsilon)


# -- smooth fold --------------------------------------------------------------


@dataclass
class FoldHopfReport:
    lambda_H: float
    criticality: str
    h3_at_fold: float
    lyapunov_coefficient: float
    eigenvalues: tuple

    def to_json(self) -> dict:
        return {
            "lambda_H": self.lambda_H,
            "criticality": self.criticality,
            "h3_at_fold": self.h3_at_fold,
            "lyapunov_coefficient": self.lyapunov_coefficient,
            "eigenvalues": [{"re": z.real, "im": z.imag} for z in self.eigenvalues],
        }


def fold_hopf(spec: SystemSpec) -> FoldHopfReport:
    """Hopf bifurcation of the smooth fold at lambda = x_M.

    With u = x - x_M, v = (y - h(x_M)) / sqrt(eps) the linear part is a pure
    rotation at rate sqrt(eps) and the only nonlinearity sits in the u'
    equation and depends on u alone, so the first Lyapunov coefficient
    reduces to h'''(x_M) / 16.
    """
    if spec.f is not None:
        raise NoFold("the manifold has a second corner, not a smooth fold")
    geo = geometry(spec)
    d3 = spec.h.deriv(3)
    h3 = float(to_number(d3.to_sympy().eval(geo.x_M_exact)))
    if abs(h3) <= DEGENERACY_TOL:
        crit = "degenerate"
    else:
        crit = "supercritical" if h3 < 0 else "subcritical"
    w = math.sqrt(spec.epsilon)
    return FoldHopfReport(geo.x_M, crit, h3, h3 / 16.0, (complex(0, w), complex(0, -w)))


# -- nonexistence of periodic orbits -----------------------------------------------


@dataclass
class NonexistenceThreshold:
    K: float
    k: float
    m: float
    x_M: float
    hypothesis_ok: bool
    K_exact: object = None
    k_at: float = 0.0

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "k": self.k,
            "m": self.m,
            "x_M": self.x_M,
            "hypothesis_ok": self.hypothesis_ok,
            "K_exact": str(self.K_exact) if self.K_exact is not None else None,
            "k_at": self.k_at,
        }


def sup_slope_left(spec: SystemSpec):
    """Exact supremum of g' on (-inf, 0); raises if g' is not bounded away from 0."""
    dg = spec.g.deriv()
    if dg.degree == 0:
        m = as_sympy(dg.exact[0])
        if m >= 0:
            raise HypothesisNotSatisfied(f"g' = {m} is not negative")
        return m
    roots = dg.real_roots(None, 0, open_hi=False)
    if roots:
        raise HypothesisNotSatisfied(f"g' vanishes at x = {roots[0]:.6g} <= 0")
    lead = dg.exact[-1]
    if dg.degree % 2 == 1 and lead < 0 or dg.degree % 2 == 0 and lead > 0:
        raise HypothesisNotSatisfied("g' is unbounded above as x -> -inf")
    sdg = dg.to_sympy()
    cands = [sympy.Integer(0)] + (dg.deriv().roots_exact(None, 0) if dg.degree > 1 else [])
    m = max((sdg.eval(c) for c in cands), key=lambda v: sympy.N(v, 40))
    if sympy.N(m, 40) >= 0:
        raise HypothesisNotSatisfied("sup of g' on x < 0 is not negative")
    return m


def nonexistence_threshold(spec: SystemSpec) -> NonexistenceThreshold:
    """K such that no periodic orbit exists for lambda < -K.

    Uses k = max h' on [0, x_M] and m = sup g' on x < 0, both exact.
    """
    geo = geometry(spec)
    m = sup_slope_left(spec)
    k, k_at = max_on_interval(spec.h.deriv(), 0, geo.x_M_exact)
    K = sympy.nsimplify(2 * k * geo.x_M_exact / abs(m))
    K_num = to_number(K)
    return NonexistenceThreshold(
        K=float(K_num),
        k=float(to_number(k)),
        m=float(to_number(m)),
        x_M=geo.x_M,
        hypothesis_ok=True,
        K_exact=K_num if isinstance(K_num, Fraction) else K,
        k_at=float(to_number(k_at)),
    )
