"""Piecewise-polynomial Liénard systems and their critical-manifold geometry.

The flow is

    x' = F(x) - y,     y' = eps * (x - lam),

with F = g on x <= 0, F = h on 0 <= x (<= split), and optionally F = f beyond a
second corner at ``split`` ('Z'-shaped manifolds).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, ContinuityViolation, NoFold, SlopeSignViolation
from .polynomials import PolyBranch, as_sympy, to_number

CONTINUITY_TOL = 1e-12
SAMPLE_POINTS = 1024


class State(NamedTuple):
    x: float
    y: float


def _lienard_piece(coeffs, eps, lam):
    rev = tuple(reversed(coeffs))

    def piece(x, y):
        acc = 0.0
        for c in rev:
            acc = acc * x + c
        return acc - y, eps * (x - lam)

    return piece


@dataclass(frozen=True)
class SystemSpec:
    epsilon: float
    lam: float
    g: PolyBranch
    h: PolyBranch
    f: Optional[PolyBranch] = None
    split: Optional[float] = None
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if (self.f is None) != (self.split is None):
            raise ConfigError("a third branch f needs its split location and vice versa")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "lam", float(self.lam))
        if self.split is not None:
            object.__setattr__(self, "split", float(self.split))

    @property
    def z_shaped(self) -> bool:
        return self.f is not None

    @property
    def breaks(self) -> tuple:
        return (0.0,) if self.split is None else (0.0, self.split)

    @property
    def branches(self) -> tuple:
        return (self.g, self.h) if self.f is None else (self.g, self.h, self.f)

    def branch_at(self, x: float, side: str = "right") -> PolyBranch:
        """Branch governing ``x``; on a split line ``side`` picks which one."""
        if x < 0 or (x == 0 and side == "left"):
            return self.g
        if self.split is not None and (x > self.split or (x == self.split and side == "right")):
            return self.f
        return self.h

    def F(self, x: float) -> float:
        return self.branch_at(x)(x)

    def dF(self, x: float, side: str = "right") -> float:
        return self.branch_at(x, side).deriv()(x)

    def with_lambda(self, lam: float) -> "SystemSpec":
        return replace(self, lam=lam)

    def with_epsilon(self, epsilon: float) -> "SystemSpec":
        return replace(self, epsilon=epsilon)

    def equilibrium(self) -> State:
        return State(self.lam, self.F(self.lam))

    def shadow(self) -> "SystemSpec":
        """Smooth system obtained by extending h across the splitting line."""
        return replace(self, g=self.h, f=None, split=None, name=None)

    def replace_g(self, g_new: PolyBranch) -> "SystemSpec":
        return replace(self, g=g_new, name=None)

    @cached_property
    def pieces(self) -> tuple:
        return tuple(_lienard_piece(b.coeffs, self.epsilon, self.lam) for b in self.branches)

    def field(self):
        from .integrator import PiecewiseField

        return PiecewiseField(self.breaks, self.pieces, nullcline=self.lam)


# -- validation ---------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed, "value": _jsonable(c.value), "detail": c.detail}
                for c in self.checks
            ],
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


_ERROR_FOR = {
    "epsilon_positive": ConfigError,
    "g_continuity": ContinuityViolation,
    "h_continuity": ContinuityViolation,
    "f_continuity": ContinuityViolation,
    "g_slope_negative": SlopeSignViolation,
    "h_slope_positive": SlopeSignViolation,
    "f_slope_negative": SlopeSignViolation,
    "h_increasing_before_corner": SlopeSignViolation,
    "fold_exists": NoFold,
    "fold_is_maximum": NoFold,
    "h_increasing_before_fold": NoFold,
}


def _fold_root(h: PolyBranch):
    dh = h.deriv()
    if dh.is_zero():
        return None
    roots = dh.roots_exact(0, None)
    return roots[0] if roots else None


def validate(spec: SystemSpec, raise_errors: bool = True) -> ValidationReport:
    """Check every structural assumption on the system.

    With ``raise_errors`` the first failing check raises its specific error
    (the full report rides along as ``err.report``).
    """
    checks = []
    checks.append(Check("epsilon_positive", spec.epsilon > 0 and np.isfinite(spec.epsilon), spec.epsilon))
    checks.append(Check("lambda_finite", bool(np.isfinite(spec.lam)), spec.lam))
    g0, h0 = spec.g(0.0), spec.h(0.0)
    checks.append(Check("g_continuity", abs(g0) <= CONTINUITY_TOL, g0, "g(0) must vanish"))
    checks.append(Check("h_continuity", abs(h0) <= CONTINUITY_TOL, h0, "h(0) must vanish"))
    dg0, dh0 = spec.g.deriv()(0.0), spec.h.deriv()(0.0)
    checks.append(Check("g_slope_negative", dg0 < 0, dg0, "g'(0) < 0"))
    checks.append(Check("h_slope_positive", dh0 > 0, dh0, "h'(0) > 0"))

    if spec.f is not None:
        s = spec.split
        jump = spec.f(s) - spec.h(s)
        checks.append(Check("split_positive", s > 0, s))
        checks.append(
            Check("f_continuity", abs(jump) <= CONTINUITY_TOL * (1 + abs(spec.h(s))), jump, "f(split) = h(split)")
        )
        df_s = spec.f.deriv()(s)
        checks.append(Check("f_slope_negative", df_s < 0, df_s, "f'(split) < 0"))
        if s > 0:
            dh = spec.h.deriv()
            inner = [] if dh.is_zero() else dh.real_roots(0, s)
            grid = np.linspace(0, s, SAMPLE_POINTS + 2)[1:-1]
            sampled = min(dh(x) for x in grid)
            checks.append(
                Check(
                    "h_increasing_before_corner",
                    not inner and sampled > 0,
                    inner[0] if inner else sampled,
                    "h' > 0 on (0, split)",
                )
            )
    else:
        root = _fold_root(spec.h)
        checks.append(Check("fold_exists", root is not None, None, "h' has a positive root"))
        if root is not None:
            xm = float(root.evalf(30))
            dh = spec.h.deriv()
            nxt = dh.real_roots(root, None)
            probe = (xm + nxt[0]) / 2 if nxt else xm + 1.0
            checks.append(Check("fold_is_maximum", dh(probe) < 0, dh(probe), "h' changes sign at x_M"))
            grid = np.linspace(0, xm, SAMPLE_POINTS + 2)[1:-1]
            sampled = min(dh(x) for x in grid)
            checks.append(Check("h_increasing_before_fold", sampled > 0, sampled, "h' > 0 on (0, x_M)"))
    report = ValidationReport(checks)
    if raise_errors and not report.ok:
        bad = report.failures()[0]
        err = _ERROR_FOR.get(bad.name, ConfigError)
        raise err(f"{bad.name} failed (value={bad.value!r}) {bad.detail}".strip(), report=report)
    return report


# -- elementary operations ----------------------------------------------------


def eval_field(spec: SystemSpec, s) -> tuple:
    x, y = s
    return spec.F(x) - y, spec.epsilon * (x - spec.lam)


def branch_derivative(spec: SystemSpec, x: float, side: str = "right") -> float:
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    return spec.dF(x, side)


@dataclass(frozen=True)
class BranchInfo:
    name: str
    lo: float
    hi: float
    stability: str  # attracting | repelling | mixed


@dataclass(frozen=True)
class ManifoldGeometry:
    x_M: float
    x_M_exact: object
    fold_kind: str  # smooth | corner
    branches: dict
    fold_value: float = 0.0

    @property
    def fold_point(self) -> State:
        return State(self.x_M, self.fold_value)


def _sign_on(p: PolyBranch, lo, hi) -> str:
    """'neg', 'pos' or 'mixed' sign of p on the open interval, certified by root isolation."""
    if p.is_zero():
        return "mixed"
    roots = p.real_roots(lo, hi)
    if roots:
        return "mixed"
    if lo is None:
        probe = float(hi) - 1.0
    elif hi is None:
        probe = float(lo) + 1.0
    else:
        probe = (float(lo) + float(hi)) / 2
    return "neg" if p(probe) < 0 else "pos"


def _tag(sign: str) -> str:
    return {"neg": "attracting", "pos": "repelling"}.get(sign, "mixed")


def geometry(spec: SystemSpec) -> ManifoldGeometry:
    if spec.f is not None:
        xm = spec.split
        xm_exact = as_sympy(xm)
        kind = "corner"
        right = spec.f
    else:
        root = _fold_root(spec.h)
        if root is None:
            raise NoFold("h' has no positive root")
        xm_exact = root
        xm = float(to_number(root))
        kind = "smooth"
        right = spec.h
    branches = {
        "l": BranchInfo("l", float("-inf"), 0.0, _tag(_sign_on(spec.g.deriv(), None, 0))),
        "m": BranchInfo("m", 0.0, xm, _tag(_sign_on(spec.h.deriv(), 0, xm_exact))),
        "r": BranchInfo("r", xm, float("inf"), _tag(_sign_on(right.deriv(), xm_exact, None))),
    }
    return ManifoldGeometry(xm, xm_exact, kind, branches, fold_value=spec.h(xm))


# -- presets and config files -------------------------------------------------


def _fig4_h() -> PolyBranch:
    return -PolyBranch.from_roots(["-1/15", "-1/15", "73/30"]) + PolyBranch.of(["-73/6750"])


def _fig6_h() -> PolyBranch:
    return -PolyBranch.from_roots(["-1", "-1", "3/2"]) + PolyBranch.of(["-3/2"])


def _vdp_g() -> PolyBranch:
    return PolyBranch.from_roots([1, 1]) + PolyBranch.of([-1])


PRESETS = {
    # g(x) = (x-1)^2 - 1 on both; h differs
    "fig4": lambda: (_vdp_g(), _fig4_h()),
    "fig6": lambda: (_vdp_g(), _fig6_h()),
    # subcritical super-explosion: shallow linear left branch, the fig6 right branch
    "fig8b": lambda: (PolyBranch.of(["-1/2"]) * PolyBranch.of([0, 1]), _fig6_h()),
}


def preset(name: str, epsilon: float = 0.2, lam: float = 0.0) -> SystemSpec:
    try:
        g, h = PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return SystemSpec(epsilon, lam, g, h, name=name)


def spec_from_config(cfg: dict) -> SystemSpec:
    """Build a system from the config-file dictionary (no validation)."""
    try:
        if "preset" in cfg:
            return preset(cfg["preset"], cfg.get("epsilon", 0.2), cfg.get("lambda", 0.0))
        g = PolyBranch.of(cfg["g"]["coeffs"])
        h = PolyBranch.of(cfg["h"]["coeffs"])
        f = split = None
        if cfg.get("f") is not None:
            f = PolyBranch.of(cfg["f"]["coeffs"])
            split = cfg["f"]["split"]
        return SystemSpec(cfg["epsilon"], cfg["lambda"], g, h, f, split)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"malformed system config: {exc}") from exc


def spec_to_config(spec: SystemSpec) -> dict:
    cfg = {"epsilon": spec.epsilon, "lambda": spec.lam, "g": spec.g.to_json(), "h": spec.h.to_json()}
    if spec.f is not None:
        cfg["f"] = {**spec.f.to_json(), "split": spec.split}
    return cfg


def load_spec(path) -> SystemSpec:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read system config {path}: {exc}") from exc
    return spec_from_config(cfg)


def save_spec(spec: SystemSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_config(spec), indent=2) + "\n")
