"""Periodic orbits through a return map on the slow nullcline, plus canard tools.

Every periodic orbit encircles the equilibrium p = (lam, F(lam)) and so crosses
the half-line {x = lam, y < F(lam)} rightward exactly once per turn; there the
flow is horizontal, so the section is transverse away from p and the crossing
is the orbit's lowest point.
"""

from __future__ import annotations

import csv
import json
import math
import os
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import (
    Ambiguous,
    Diverged,
    HypothesisViolated,
    NoJump,
    NoOrbit,
    NoReturn,
    NotBracketed,
    PreconditionViolated,
    StepUnderflow,
)
from .integrator import EventSpec, Trajectory, _dense, first_return, integrate, section
from .polynomials import PolyBranch
from .system import SystemSpec, geometry, spec_from_config, spec_to_config

DEFAULT_TOL = 1e-10
FIXED_POINT_XTOL = 1e-10


def _section(spec: SystemSpec) -> EventSpec:
    return section(spec.lam, "rightward", (-math.inf, spec.F(spec.lam)), name="return")


def _default_t_max(spec: SystemSpec) -> float:
    return 100.0 / spec.epsilon + 100.0


def _return(spec, y0, tol, t_max, keep_dense=False):
    """One trip around the section; NoReturn also covers capture by a stable p."""
    lam, ylam = spec.lam, spec.F(spec.lam)
    d0 = ylam - y0
    if d0 <= 0:
        raise ValueError(f"y0={y0!r} is not below F(lam)={ylam!r}")
    stop = None
    if spec.dF(lam, "left" if lam < 0 else "right") < 0:
        near = (1e-3 * d0) ** 2

        def stop(t, x, y):
            return (x - lam) ** 2 + (y - ylam) ** 2 < near

    try:
        return first_return(spec, _section(spec), (lam, y0), t_max, tol, stop=stop, keep_dense=keep_dense)
    except (Diverged, StepUnderflow) as exc:
        raise NoReturn(f"no return from y0={y0!r}: {exc}") from exc


def return_map(spec: SystemSpec, y0: float, *, tol: float = DEFAULT_TOL, t_max: Optional[float] = None) -> float:
    """y of the first rightward return to {x = lam, y < F(lam)} from (lam, y0)."""
    (_, y1), _, _ = _return(spec, y0, tol, t_max or _default_t_max(spec))
    return y1


# -- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ClassifyThresholds:
    """Tube radius is ``tube_scale * 2 sqrt(eps)``.

    An outer attracting branch counts as visited when at least ``outer_visit``
    of the orbit's arclength lies in its tube.  Middle-branch coverage is the
    fraction of ``bins`` equal pieces of the repelling branch that the orbit
    shadows.
    """

    tube_scale: float = 0.1
    outer_visit: float = 0.05
    head_coverage: float = 0.15
    headless_coverage: float = 0.3
    bins: int = 50


@dataclass
class PeriodicOrbit:
    cycle: Trajectory
    period: float
    amplitude: float
    x_min: float
    x_max: float
    classification: str
    stability_multiplier: float
    y_star: float
    closure_error: float
    lam: float
    measures: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "y_star": self.y_star,
            "period": self.period,
            "amplitude": self.amplitude,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "classification": self.classification,
            "stability_multiplier": self.stability_multiplier,
            "closure_error": self.closure_error,
            "measures": self.measures,
        }


def _branch_points(spec, lo, hi, n=4000):
    xs = np.linspace(lo, hi, n)
    ys = np.array([spec.F(float(x)) for x in xs])
    return np.column_stack([xs, ys])


def tracking_measures(spec: SystemSpec, xs, ys, thresholds: ClassifyThresholds = ClassifyThresholds()) -> dict:
    """Arclength fractions near each critical-manifold branch, and middle-branch coverage."""
    geo = geometry(spec)
    xm = geo.x_M
    delta = thresholds.tube_scale * 2.0 * math.sqrt(spec.epsilon)
    pts = np.column_stack([xs, ys])
    seg = np.hypot(np.diff(xs), np.diff(ys))
    total = float(seg.sum())
    x_lo = min(float(np.min(xs)), 0.0) - 2 * delta
    x_hi = max(float(np.max(xs)), xm) + 2 * delta
    branches = {
        "l": _branch_points(spec, x_lo, 0.0),
        "m": _branch_points(spec, 0.0, xm),
        "r": _branch_points(spec, xm, x_hi),
    }
    out = {"delta": delta}
    for name, bp in branches.items():
        dist, idx = cKDTree(bp).query(pts)
        near = dist <= delta
        w = 0.5 * (near[:-1].astype(float) + near[1:])
        out[name] = float((w * seg).sum() / total) if total > 0 else 0.0
        if name == "m":
            bins = np.floor(bp[idx[near], 0] / xm * thresholds.bins).astype(int)
            bins = np.clip(bins, 0, thresholds.bins - 1)
            out["m_coverage"] = len(set(bins.tolist())) / thresholds.bins
    return out


def classify_measures(measures: dict, thresholds: ClassifyThresholds = ClassifyThresholds()) -> str:
    visits_l = measures["l"] >= thresholds.outer_visit
    visits_r = measures["r"] >= thresholds.outer_visit
    cov = measures["m_coverage"]
    if visits_l and visits_r:
        return "CanardWithHead" if cov >= thresholds.head_coverage else "RelaxationOscillation"
    if visits_l or visits_r:
        return "CanardWithoutHead" if cov >= thresholds.headless_coverage else "SmallCycle"
    raise Ambiguous("orbit tracks neither attracting branch", measures={**measures, **asdict(thresholds)})


def classify_orbit(
    spec: SystemSpec, orbit: Union[PeriodicOrbit, Trajectory], thresholds: ClassifyThresholds = ClassifyThresholds()
) -> str:
    """Canard type from how the orbit shadows the three branches.

    Visiting both attracting branches means a large orbit: it is a canard with
    head when it also follows a good part of the repelling branch, otherwise a
    relaxation oscillation.  An orbit near only one attracting branch is a
    canard without head if it follows the repelling branch far, else a small
    cycle.
    """
    cycle = orbit.cycle if isinstance(orbit, PeriodicOrbit) else orbit
    _, xs, ys = cycle.resample(8)
    return classify_measures(tracking_measures(spec, xs, ys, thresholds), thresholds)


# -- fixed points of the return map ----------------------------------------------


def _offsets(spec: SystemSpec, n: int) -> np.ndarray:
    """Log-spaced distances below F(lam), reaching past any bounded cycle."""
    geo = geometry(spec)
    span = abs(spec.F(geo.x_M)) + abs(spec.F(spec.lam)) + geo.x_M + 1.0
    return np.geomspace(1e-6, 10.0 * span, n)


class _Displacement:
    """D(y) = P(y) - y with caching; None where the map is undefined."""

    def __init__(self, spec, tol, t_max):
        self.spec, self.tol, self.t_max = spec, tol, t_max
        self.cache = {}

    def __call__(self, y):
        if y not in self.cache:
            try:
                (_, y1), _, _ = _return(self.spec, y, self.tol, self.t_max)
                self.cache[y] = y1 - y
            except NoReturn:
                self.cache[y] = None
        return self.cache[y]


def _stable_brackets(D, ys):
    """Adjacent (a, b), a < b, with D(a) > 0 > D(b): attracting fixed points."""
    vals = [D(y) for y in ys]
    out = []
    for (a, da), (b, db) in zip(zip(ys, vals), zip(ys[1:], vals[1:])):
        if da is not None and db is not None and da > 0 > db:
            out.append((a, b))
    return out


def _bracket_near(D, spec, y_guess, tries=10):
    ylam = spec.F(spec.lam)
    d = ylam - y_guess
    if not d > 0:
        return None
    d0 = D(y_guess)
    if d0 is None:
        return None
    if d0 == 0:
        return (y_guess, y_guess)
    step = 0.02
    for _ in range(tries):
        # D > 0 below the orbit; look further down if positive, up if negative
        other = ylam - d * (1 - step) if d0 > 0 else ylam - d * (1 + step)
        d1 = D(other)
        if d1 is None:
            return None
        if (d1 < 0) if d0 > 0 else (d1 > 0):
            return (y_guess, other) if d0 > 0 else (other, y_guess)
        step *= 2
        if step >= 1:
            step = 0.999
    return None


def find_periodic_orbit(
    spec: SystemSpec,
    *,
    y_guess: Optional[float] = None,
    n_grid: int = 30,
    tol: float = DEFAULT_TOL,
    t_max: Optional[float] = None,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
    classify: bool = True,
) -> PeriodicOrbit:
    """Locate an attracting cycle as a fixed point of the return map.

    Brackets of P(y) - y changing from positive to negative are sought near
    ``y_guess`` first and then on a log-spaced grid of depths below F(lam);
    the outermost bracket wins on the grid.
    """
    t_max = t_max or _default_t_max(spec)
    D = _Displacement(spec, tol, t_max)
    bracket = _bracket_near(D, spec, y_guess) if y_guess is not None else None
    if bracket is None:
        ys = list(spec.F(spec.lam) - _offsets(spec, n_grid)[::-1])
        found = _stable_brackets(D, ys)
        if not found:
            raise NoOrbit(f"no attracting cycle found at lambda={spec.lam!r}")
        bracket = found[0]
    a, b = bracket
    if a == b:
        y_star = a
    else:
        y_star = brentq(lambda y: D(y) if D(y) is not None else math.nan, a, b, xtol=FIXED_POINT_XTOL, rtol=1e-15)
    return _orbit_from(spec, y_star, tol, t_max, thresholds, classify)


def _orbit_from(spec, y_star, tol, t_max, thresholds, classify):
    (x1, y1), period, traj = _return(spec, y_star, tol, t_max, keep_dense=True)
    _, xs, ys = traj.resample(8)
    closure = math.hypot(x1 - spec.lam, y1 - y_star)
    depth = spec.F(spec.lam) - y_star
    h = min(max(1e-7, 1e-6 * depth), 0.5 * depth)
    try:
        mult = (return_map(spec, y_star + h, tol=tol, t_max=t_max) - return_map(spec, y_star - h, tol=tol, t_max=t_max)) / (
            2 * h
        )
    except NoReturn:
        mult = math.nan
    orbit = PeriodicOrbit(
        cycle=traj,
        period=period,
        amplitude=float(ys.max() - ys.min()),
        x_min=float(xs.min()),
        x_max=float(xs.max()),
        classification="Unclassified",
        stability_multiplier=float(mult),
        y_star=float(y_star),
        closure_error=closure,
        lam=spec.lam,
    )
    if classify:
        m = tracking_measures(spec, xs, ys, thresholds)
        orbit.measures = m
        try:
            orbit.classification = classify_measures(m, thresholds)
        except Ambiguous:
            orbit.classification = "Ambiguous"
    return orbit


# -- sweeps and explosions ------------------------------------------------------


@dataclass
class SweepRow:
    lam: float
    amplitude: float
    x_min: float
    x_max: float
    period: float
    classification: str
    y_star: float = math.nan


@dataclass
class ExplosionInterval:
    lam_lo: float
    lam_hi: float
    amp_lo: float
    amp_hi: float
    jump: float
    orientation: str  # which side carries the large orbit

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    rows: list
    explosion_intervals: list

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "amplitude", "x_min", "x_max", "period", "classification"])
            for r in self.rows:
                w.writerow([repr(r.lam), repr(r.amplitude), repr(r.x_min), repr(r.x_max), repr(r.period), r.classification])

    def intervals_json(self) -> list:
        return [iv.to_json() for iv in self.explosion_intervals]

    def write_intervals(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.intervals_json(), fh, indent=1)
            fh.write("\n")


def _equilibrate(spec, tol, thresholds):
    """Fallback for a failed fixed-point search: run 50/eps and look at the tail."""
    lam, ylam = spec.lam, spec.F(spec.lam)
    t_run = 50.0 / spec.epsilon
    try:
        traj = integrate(spec, (lam, ylam - 0.1), t_run, 1e-9, [_section(spec)], keep_dense=False)
    except (Diverged, StepUnderflow):
        return None
    hits = traj.events_named("return")
    if len(hits) >= 2 and ylam - hits[-1].y > 1e-6:
        try:
            return _row(find_periodic_orbit(spec, y_guess=hits[-1].y, tol=tol, thresholds=thresholds))
        except NoOrbit:
            pass
    tail = traj.t >= traj.t[-1] / 2
    span = float(traj.y[tail].max() - traj.y[tail].min())
    if span < 1e-6:
        return SweepRow(lam, 0.0, lam, lam, math.nan, "Equilibrium")
    xs = traj.x[tail]
    return SweepRow(lam, span, float(xs.min()), float(xs.max()), math.nan, "Transient")


def _row(orbit: PeriodicOrbit) -> SweepRow:
    return SweepRow(orbit.lam, orbit.amplitude, orbit.x_min, orbit.x_max, orbit.period, orbit.classification, orbit.y_star)


def _sweep_chunk(cfg, lams, tol, thresholds):
    base = spec_from_config(cfg)
    rows, depth = [], None
    for lam in lams:
        spec = base.with_lambda(float(lam))
        # a collapsed orbit gives no usable depth; let the search pick its own start
        guess = spec.F(spec.lam) - depth if depth is not None and depth > 1e-8 else None
        try:
            row = _row(find_periodic_orbit(spec, y_guess=guess, tol=tol, thresholds=thresholds))
        except NoOrbit:
            row = _equilibrate(spec, tol, thresholds) or SweepRow(spec.lam, math.nan, math.nan, math.nan, math.nan, "NoOrbit")
        if not math.isnan(row.y_star):
            depth = spec.F(spec.lam) - row.y_star
        rows.append(row)
    return rows


def worker_count() -> int:
    env = os.environ.get("CANARD_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def sweep(
    spec: SystemSpec,
    lam_lo: float,
    lam_hi: float,
    n: int,
    jump_threshold: float = 1.0,
    *,
    refine: bool = True,
    width_tol: float = 1e-4,
    workers: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
) -> SweepResult:
    """Amplitude rows on an even lambda grid and the explosions between them.

    Rows are split into contiguous chunks, one per worker; each chunk
    warm-starts every search from the previous row's depth below F(lam).
    """
    if not lam_lo < lam_hi:
        raise ValueError("need lam_lo < lam_hi")
    if n < 2:
        raise ValueError("need n >= 2")
    lams = np.linspace(lam_lo, lam_hi, n).tolist()
    workers = min(workers or worker_count(), n)
    cfg = spec_to_config(spec)
    if workers <= 1:
        rows = _sweep_chunk(cfg, lams, tol, thresholds)
    else:
        chunks = [c.tolist() for c in np.array_split(np.array(lams), workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_sweep_chunk, [cfg] * workers, chunks, [tol] * workers, [thresholds] * workers)
            rows = [r for part in parts for r in part]
    intervals = []
    for a, b in zip(rows, rows[1:]):
        if math.isnan(a.amplitude) or math.isnan(b.amplitude):
            continue
        if abs(b.amplitude - a.amplitude) > jump_threshold:
            if refine:
                intervals.append(
                    locate_explosion(spec, a.lam, b.lam, width_tol, jump_threshold=jump_threshold, tol=tol)
                )
            else:
                intervals.append(_interval(a.lam, b.lam, a.amplitude, b.amplitude))
    return SweepResult(rows, intervals)


def _interval(lo, hi, a_lo, a_hi) -> ExplosionInterval:
    return ExplosionInterval(lo, hi, a_lo, a_hi, abs(a_hi - a_lo), "large-at-lo" if a_lo > a_hi else "large-at-hi")


def locate_explosion(
    spec: SystemSpec,
    lam_lo: float,
    lam_hi: float,
    width_tol: float = 1e-4,
    *,
    jump_threshold: float = 1.0,
    tol: float = DEFAULT_TOL,
) -> ExplosionInterval:
    """Bisect an amplitude jump down to an interval of width ``width_tol``.

    The midpoint amplitude is compared with the mean of the endpoint
    amplitudes to decide which half keeps the jump.
    """
    if not lam_lo < lam_hi:
        raise ValueError("need lam_lo < lam_hi")

    def amp(lam, guess=None):
        s = spec.with_lambda(lam)
        try:
            o = find_periodic_orbit(s, y_guess=guess, tol=tol, classify=False)
        except NoOrbit:
            return 0.0, None
        return o.amplitude, s.F(lam) - o.y_star

    a_lo, d_lo = amp(lam_lo)
    a_hi, d_hi = amp(lam_hi)
    jump0 = abs(a_hi - a_lo)
    if jump0 <= jump_threshold:
        raise NoJump(f"amplitude change {jump0:.4g} over [{lam_lo}, {lam_hi}] does not exceed {jump_threshold}")
    lo, hi = lam_lo, lam_hi
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        a_m, d_m = amp(mid)
        if abs(a_m - a_lo) < abs(a_m - a_hi):
            lo, a_lo, d_lo = mid, a_m, d_m
        else:
            hi, a_hi, d_hi = mid, a_m, d_m
    if abs(a_hi - a_lo) <= 0.5 * jump0:
        raise NoJump(f"amplitude change shrank to {abs(a_hi - a_lo):.4g} during refinement; no jump")
    return _interval(lo, hi, a_lo, a_hi)


@dataclass
class GrazingResult:
    lam_G: float
    lam_lo: float
    lam_hi: float
    x_min_lo: float
    x_min_hi: float

    def to_json(self) -> dict:
        return asdict(self)


def _crosses_split(orbit: PeriodicOrbit) -> bool:
    return any(e.name == "split" for e in orbit.cycle.events)


def find_grazing(
    spec: SystemSpec, lam_lo: float, lam_hi: float, *, lam_tol: float = 1e-8, tol: float = DEFAULT_TOL
) -> GrazingResult:
    """Bisect on whether the attracting cycle enters x < 0.

    Needs a cycle crossing the splitting line at ``lam_lo`` and one staying
    in x > 0 at ``lam_hi``.
    """

    def probe(lam, guess=None):
        s = spec.with_lambda(lam)
        try:
            o = find_periodic_orbit(s, y_guess=guess, tol=tol, classify=False)
        except NoOrbit as exc:
            raise NotBracketed(f"no cycle at lambda={lam!r} to test") from exc
        return _crosses_split(o), o.x_min, s.F(lam) - o.y_star

    c_lo, xm_lo, _ = probe(lam_lo)
    c_hi, xm_hi, _ = probe(lam_hi)
    if not (c_lo and not c_hi):
        raise NotBracketed(
            f"need a crossing cycle at {lam_lo} and a non-crossing one at {lam_hi}; "
            f"x_min = {xm_lo:.6g}, {xm_hi:.6g}"
        )
    lo, hi = lam_lo, lam_hi
    while hi - lo > lam_tol:
        mid = 0.5 * (lo + hi)
        c, xm, _ = probe(mid)
        if c:
            lo, xm_lo = mid, xm
        else:
            hi, xm_hi = mid, xm
    return GrazingResult(0.5 * (lo + hi), lo, hi, xm_lo, xm_hi)


# -- shadow comparison ----------------------------------------------------------


@dataclass
class ShadowBoundReport:
    entry_y: float
    max_R_excess: float
    bounded: bool
    exit_y_nonsmooth: float
    exit_y_shadow: float
    max_dR_difference: float
    tol: float

    def to_json(self) -> dict:
        return asdict(self)


def _left_arc(spec, y_c, tol, t_max):
    halt = EventSpec("splitting-line", action="halt")
    try:
        traj = integrate(spec, (0.0, y_c), t_max, tol, [halt])
    except Diverged as exc:
        raise NoReturn(f"trajectory from (0, {y_c}) escaped before reaching x = 0", trajectory=exc.trajectory) from exc
    if traj.status != "halted-at-event":
        raise NoReturn(f"trajectory from (0, {y_c}) did not come back to x = 0 within t={t_max:g}", trajectory=traj)
    return traj


def nonnegative_on(p: PolyBranch, lo: float, hi: float, grid: int = 1024) -> bool:
    """p >= 0 on [lo, hi]: exact sign between isolated roots, plus a grid check."""
    if p.is_zero():
        return True
    cuts = [Fraction(lo)] + [Fraction(r) for r in p.real_roots(lo, hi)] + [Fraction(hi)]
    for a, b in zip(cuts, cuts[1:]):
        if a < b and p.exact_at((a + b) / 2) < 0:
            return False
    return bool(np.all(np.polyval(p.coeffs[::-1], np.linspace(lo, hi, grid)) >= -1e-12))


def shadow_compare(
    spec: SystemSpec,
    shadow_kind: Union[str, PolyBranch] = "extend-h",
    y_c: float = 1.0,
    tol: float = 1e-6,
    *,
    int_tol: float = 1e-12,
    t_max: Optional[float] = None,
) -> ShadowBoundReport:
    """Check that the nonsmooth arc through x < 0 stays inside the shadow arc.

    Both systems start at (0, y_c) and run until they return to x = 0.  The
    shadow arc and the axis bound a region that the nonsmooth arc must not
    leave.  With lam >= 0 the height y falls monotonically along both arcs,
    so the check compares R = (x^2 + y^2)/2 at equal heights, then the two
    exit points on the axis.  The horizontal push g - shadow >= 0 only points
    into the region while y falls, so lam < 0 is rejected.
    """
    if not y_c > 0:
        raise ValueError("y_c must be positive for the arc to enter x < 0")
    if spec.lam < 0:
        raise PreconditionViolated("the bound needs lam >= 0 (y must fall along the arc in x < 0)")
    if isinstance(shadow_kind, PolyBranch):
        left = shadow_kind
    elif shadow_kind == "extend-h":
        left = spec.h
    else:
        raise ValueError(f"unknown shadow kind {shadow_kind!r}")
    shadow = spec.replace_g(left)
    t_max = t_max or _default_t_max(spec)
    gn = _left_arc(spec, y_c, int_tol, t_max)
    gs = _left_arc(shadow, y_c, int_tol, t_max)
    _, xn, yn = gn.resample(16)
    _, xs, _ = gs.resample(16)

    a = float(min(xn.min(), xs.min(), 0.0))
    diff = spec.g - left
    if left.deriv()(0.0) < spec.g.deriv()(0.0) or not nonnegative_on(diff, a, 0.0):
        raise HypothesisViolated(f"need g >= shadow branch on [{a:.6g}, 0] with a shallower slope at 0")

    # pointwise R_n' - R_s' = x (g - shadow) along the shadow arc
    dR = np.array([x * diff(float(x)) if x < 0 else 0.0 for x in xs])
    y_exit_n, y_exit_s = float(yn[-1]), float(gs.y[-1])
    excess = max(_excess_same_height(gs, xn, yn, y_c, y_exit_s), 0.5 * (y_exit_n**2 - y_exit_s**2), 0.0)
    return ShadowBoundReport(
        entry_y=y_c,
        max_R_excess=float(excess),
        bounded=bool(excess <= tol),
        exit_y_nonsmooth=y_exit_n,
        exit_y_shadow=y_exit_s,
        max_dR_difference=float(dR.max()),
        tol=tol,
    )



def _excess_same_height(gs: Trajectory, xn, yn, y_c, y_exit_s) -> float:
    """max over the nonsmooth arc of R_n - R_s at equal y."""
    seg_y0 = np.array([s.rv[0] for s in gs.segments])  # y at the start of each step
    worst = 0.0
    for x, y in zip(xn, yn):
        if y >= y_c:
            continue
        if y < y_exit_s:
            worst = max(worst, 0.5 * (x * x + y * y - y_exit_s**2))
            continue
        # last step starting at or above y
        i = int(np.searchsorted(-seg_y0, -y, side="right")) - 1
        i = min(max(i, 0), len(gs.segments) - 1)
        x_s = _x_at_height(gs.segments[i], y)
        worst = max(worst, 0.5 * (x * x - x_s * x_s))
    return worst


def _x_at_height(seg, y):
    f = lambda th: _dense(seg.rv, th) - y  # noqa: E731
    f0, f1 = f(0.0), f(seg.th_end)
    if f0 == 0:
        return _dense(seg.ru, 0.0)
    if f0 * f1 > 0:
        th = 0.0 if abs(f0) < abs(f1) else seg.th_end
    else:
        th = brentq(f, 0.0, seg.th_end, xtol=1e-15, rtol=1e-15)
    return _dense(seg.ru, th)
