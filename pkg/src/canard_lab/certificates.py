"""Sampled verification of the invariant regions behind the corner results.

* ``build_W``: a six-sided positively invariant polygon around p for
  0 < lam < x_M, checked by the sign of the field against inward normals.
* ``superexplosion_witness``: the region V cut out by the strong unstable
  trajectory of the node p, which keeps the attracting cycle large.
* ``subcritical_witness``: the region V' around a stable focus whose
  complement in W must hold an attracting cycle, so the two coexist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bifurcation import corner_classify, equilibrium
from .errors import (
    ConstructionFailed,
    Diverged,
    NoOrbit,
    NoReturn,
    NotSuperExplosion,
    NoWitness,
    PreconditionViolated,
    StepUnderflow,
)
from .integrator import EventSpec, integrate, section
from .orbits import PeriodicOrbit, find_periodic_orbit, return_map
from .polynomials import PolyBranch
from .system import SystemSpec, geometry

INWARD_TOL = 1e-9


# -- planar geometry ------------------------------------------------------------


def point_in_polygon(px, py, vx, vy) -> np.ndarray:
    """Even-odd test of many points against one closed polygon."""
    px, py = np.atleast_1d(px), np.atleast_1d(py)
    ax, ay = np.asarray(vx, float), np.asarray(vy, float)
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    out = np.empty(len(px), dtype=bool)
    for start in range(0, len(px), 256):
        qx, qy = px[start : start + 256, None], py[start : start + 256, None]
        straddle = (ay > qy) != (by > qy)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = ax + (qy - ay) * (bx - ax) / (by - ay)
        out[start : start + 256] = (np.count_nonzero(straddle & (qx < x_cross), axis=1) % 2) == 1
    return out


def distance_to_polyline(px, py, vx, vy, closed=True) -> np.ndarray:
    """Euclidean distance from each point to the nearest edge."""
    px, py = np.atleast_1d(px), np.atleast_1d(py)
    ax, ay = np.asarray(vx, float), np.asarray(vy, float)
    bx, by = (np.roll(ax, -1), np.roll(ay, -1)) if closed else (ax[1:], ay[1:])
    if not closed:
        ax, ay = ax[:-1], ay[:-1]
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    out = np.empty(len(px))
    for start in range(0, len(px), 256):
        qx, qy = px[start : start + 256, None], py[start : start + 256, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(ll > 0, ((qx - ax) * dx + (qy - ay) * dy) / ll, 0.0)
        s = np.clip(s, 0.0, 1.0)
        d = np.hypot(qx - (ax + s * dx), qy - (ay + s * dy))
        out[start : start + 256] = d.min(axis=1)
    return out


# -- result types ---------------------------------------------------------------


@dataclass
class CertificateResult:
    verified: bool
    min_inward_product: float
    samples: int
    failure_points: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "verified": self.verified,
            "min_inward_product": self.min_inward_product,
            "samples": self.samples,
            "failure_points": self.failure_points,
            "details": self.details,
        }


@dataclass
class PolygonRegion:
    vertices: list
    params: dict
    labels: tuple = ("l1", "l2", "l3", "l4", "l5", "l6")

    @property
    def segments(self) -> list:
        vs = self.vertices
        return [(lab, vs[i], vs[(i + 1) % len(vs)]) for i, lab in enumerate(self.labels)]

    def contains(self, x, y) -> np.ndarray:
        vx, vy = zip(*self.vertices)
        return point_in_polygon(x, y, vx, vy)

    def distance_outside(self, x, y) -> np.ndarray:
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        vx, vy = zip(*self.vertices)
        outside = ~self.contains(x, y)
        out = np.zeros(len(x))
        if outside.any():
            out[outside] = distance_to_polyline(x[outside], y[outside], vx, vy)
        return out

    def to_json(self) -> dict:
        return {"vertices": [list(v) for v in self.vertices], "params": self.params}


@dataclass
class WitnessRegion:
    kind: str  # V | V'
    boundary_x: np.ndarray
    boundary_y: np.ndarray
    closing: tuple  # ((x0, y0), (x1, y1))
    params: dict

    def contains(self, x, y) -> np.ndarray:
        return point_in_polygon(x, y, self.boundary_x, self.boundary_y)

    def depth_inside(self, x, y) -> np.ndarray:
        """Distance to the boundary for points inside, 0 outside."""
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        inside = self.contains(x, y)
        out = np.zeros(len(x))
        if inside.any():
            out[inside] = distance_to_polyline(x[inside], y[inside], self.boundary_x, self.boundary_y)
        return out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "closing_segment": [list(self.closing[0]), list(self.closing[1])],
            "params": self.params,
            "boundary": [[float(a), float(b)] for a, b in zip(self.boundary_x, self.boundary_y)],
        }


@dataclass
class CoexistenceReport:
    equilibrium_stable: bool
    equilibrium_kind: str
    ball_attracted: int
    ball_directions: int
    orbit: Optional[PeriodicOrbit]
    orbit_outside_region: bool
    outside_starts_attracted: int
    outside_starts: int
    certificate: Optional[CertificateResult] = None

    @property
    def coexistence(self) -> bool:
        return (
            self.equilibrium_stable
            and self.ball_attracted == self.ball_directions
            and self.orbit is not None
            and self.orbit_outside_region
            and self.outside_starts_attracted == self.outside_starts
        )

    def to_json(self) -> dict:
        return {
            "coexistence": self.coexistence,
            "equilibrium_stable": self.equilibrium_stable,
            "equilibrium_kind": self.equilibrium_kind,
            "ball_attracted": self.ball_attracted,
            "ball_directions": self.ball_directions,
            "orbit": self.orbit.to_json() if self.orbit is not None else None,
            "orbit_outside_region": self.orbit_outside_region,
            "outside_starts_attracted": self.outside_starts_attracted,
            "outside_starts": self.outside_starts,
            "certificate": self.certificate.to_json() if self.certificate is not None else None,
        }


# -- the polygon W ------------------------------------------------------------


def _right_preimage(spec: SystemSpec, y1: float) -> Optional[float]:
    """Rightmost x >= x_M with F(x) = y1."""
    geo = geometry(spec)
    right = spec.f if spec.z_shaped else spec.h
    roots = (right - PolyBranch.of([y1])).real_roots(geo.x_M_exact, None, open_lo=False)
    return roots[-1] if roots else None


def _w_vertices(spec, x_hat, m1, m4):
    lam = spec.lam
    geo = geometry(spec)
    y1 = m1 * (lam - x_hat)
    r = _right_preimage(spec, y1)
    if r is None:
        raise ConstructionFailed(f"F(x) = {y1:.6g} has no solution right of the fold")
    x2 = r + 1.0
    y3 = geo.fold_value
    bound = (spec.g(x_hat) - y3) / (lam - x2)
    literal = 2.0 * bound
    if m4 is None:
        # y5 < g(x_hat) is the same inequality as m4 > bound; halfway between y3 and g(x_hat)
        m4 = 0.5 * bound if bound < 0 else literal
    y5 = m4 * (lam - x2) + y3
    params = {
        "x_hat": x_hat,
        "m1": m1,
        "m4": m4,
        "m4_bound": bound,
        "m4_literal_default": literal,
        "x2": x2,
        "y1": y1,
        "y3": y3,
        "y5": y5,
        "lambda": lam,
    }
    verts = [(x_hat, 0.0), (lam, y1), (x2, y1), (x2, y3), (lam, y5), (x_hat, y5)]
    return verts, params


def check_inward(spec: SystemSpec, region: PolygonRegion, samples: int) -> CertificateResult:
    """Field against unit inward normals at ``samples`` points per edge, endpoints included.

    Each vertex is therefore tested with the normals of both edges meeting there.
    """
    vs = region.vertices
    area2 = sum(vs[i][0] * vs[(i + 1) % len(vs)][1] - vs[(i + 1) % len(vs)][0] * vs[i][1] for i in range(len(vs)))
    orient = 1.0 if area2 > 0 else -1.0
    fld = spec.field()
    worst, fails, count = math.inf, [], 0
    for lab, (x0, y0), (x1, y1) in region.segments:
        dx, dy = x1 - x0, y1 - y0
        norm = math.hypot(dx, dy)
        if norm == 0:
            continue
        nx, ny = -dy / norm * orient, dx / norm * orient
        for s in np.linspace(0.0, 1.0, samples):
            x, y = x0 + s * dx, y0 + s * dy
            fx, fy = fld(x, y)
            p = nx * fx + ny * fy
            count += 1
            worst = min(worst, p)
            if p < -INWARD_TOL:
                fails.append({"segment": lab, "x": x, "y": y, "product": p})
    return CertificateResult(not fails, worst, count, fails[:50])


def build_W(
    spec: SystemSpec,
    x_hat: float = -3.0,
    m1: float = -1.0,
    m4: Optional[float] = None,
    samples: int = 200,
    *,
    auto: bool = True,
    x_hat_limit: float = -1e3,
) -> tuple:
    """Six-segment region with the field pointing inward, for 0 < lam < x_M.

    With ``auto`` and no explicit ``m4``, x_hat is pushed left until
    g(x_hat) clears the fold height and every edge checks out.
    """
    if not x_hat < 0:
        raise ValueError("x_hat must be negative")
    if not m1 < 0:
        raise ValueError("m1 must be negative")
    geo = geometry(spec)
    if not 0 < spec.lam < geo.x_M:
        raise PreconditionViolated(f"need 0 < lambda < x_M = {geo.x_M:.6g}")
    tries = []
    while True:
        verts, params = _w_vertices(spec, x_hat, m1, m4)
        region = PolygonRegion(verts, params)
        cert = check_inward(spec, region, samples)
        tries.append(x_hat)
        shallow = spec.g(x_hat) <= params["y3"]
        if not auto or m4 is not None or (cert.verified and not shallow):
            break
        if 2.0 * x_hat < x_hat_limit:
            if shallow:
                raise ConstructionFailed(
                    f"no x_hat down to {x_hat_limit:g} lifts g(x_hat) above the fold height; tried {tries}"
                )
            break
        x_hat *= 2.0
    cert.details["x_hat_tried"] = tries
    cert.details["constraint_m4_gt_bound"] = bool(params["m4"] > params["m4_bound"])
    return region, cert


def confinement_check(
    spec: SystemSpec, region: PolygonRegion, n: int = 20, seed: int = 0, t_factor: float = 100.0, tol: float = 1e-9
) -> dict:
    """Integrate ``n`` random interior starts for t_factor/eps and record the worst exit distance."""
    rng = np.random.default_rng(seed)
    vx, vy = zip(*region.vertices)
    starts = []
    while len(starts) < n:
        x = rng.uniform(min(vx), max(vx), 64)
        y = rng.uniform(min(vy), max(vy), 64)
        inside = region.contains(x, y)
        starts += list(zip(x[inside], y[inside]))
    starts = starts[:n]
    worst = 0.0
    for x0, y0 in starts:
        traj = integrate(spec, (float(x0), float(y0)), t_factor / spec.epsilon, tol)
        _, xs, ys = traj.resample(4)
        worst = max(worst, float(region.distance_outside(xs, ys).max()))
    return {"starts": len(starts), "max_exit_distance": worst, "t_max": t_factor / spec.epsilon}


# -- witness V ----------------------------------------------------------------


def _orbit_depth(region: WitnessRegion, orbit: PeriodicOrbit) -> float:
    _, xs, ys = orbit.cycle.resample(16)
    return float(region.depth_inside(xs, ys).max())


def superexplosion_witness(
    spec: SystemSpec,
    *,
    offset: float = 1e-8,
    tol: float = 1e-11,
    samples: int = 200,
    orbit: Optional[PeriodicOrbit] = None,
    geometric_tol: float = 1e-6,
) -> tuple:
    """Region V behind the strong unstable trajectory of the node p.

    The closing piece lies on x = lam below p, where the flow crosses
    rightward, out of V; so V is negatively invariant and an attracting
    cycle outside it must pass around all of V.
    """
    rep = corner_classify(spec)
    if rep.kind != "SuperExplosion":
        raise NotSuperExplosion(f"corner bifurcation is {rep.kind}; need h'(0) > 2 sqrt(eps)")
    geo = geometry(spec)
    lam = spec.lam
    if not 0 < lam < geo.x_M:
        raise PreconditionViolated(f"need 0 < lambda < x_M = {geo.x_M:.6g}")
    eq = equilibrium(spec)
    if eq.strong_eigvec_slope is None:
        raise PreconditionViolated(f"p is a {eq.kind}, not a node")
    slope = eq.strong_eigvec_slope
    ylam = spec.F(lam)
    n = math.hypot(1.0, slope)
    start = (lam + offset / n, ylam + offset * slope / n)
    sec = section(lam, "rightward", (-math.inf, ylam), action="halt", name="close")
    t_max = 100.0 / spec.epsilon + 100.0
    try:
        traj = integrate(spec, start, t_max, tol, [sec])
    except (Diverged, StepUnderflow) as exc:
        raise NoReturn(f"strong unstable trajectory failed: {exc}") from exc
    hits = traj.events_named("close")
    if not hits:
        raise NoReturn("strong unstable trajectory never came back to x = lambda below p", trajectory=traj)
    y_hat = hits[-1].y
    _, bx, by = traj.resample(32)
    bx = np.concatenate([[lam], bx, [lam]])
    by = np.concatenate([[ylam], by, [y_hat]])
    region = WitnessRegion(
        "V",
        bx,
        by,
        ((lam, y_hat), (lam, ylam)),
        {"lambda": lam, "eigvec_slope": slope, "mu_strong": spec.epsilon / slope, "offset": offset, "y_hat": y_hat},
    )

    # on the closing segment the flow must leave V, i.e. point to +x
    ys = np.linspace(y_hat, ylam, samples)
    products = [spec.field()(lam, float(y))[0] for y in ys]
    worst = float(min(products))
    fails = [{"segment": "closing", "x": lam, "y": float(y), "product": p} for y, p in zip(ys, products) if p < -INWARD_TOL]
    if orbit is None:
        orbit = find_periodic_orbit(spec)
    depth = _orbit_depth(region, orbit)
    outside = depth <= geometric_tol
    cert = CertificateResult(
        verified=not fails and outside,
        min_inward_product=worst,
        samples=samples,
        failure_points=fails,
        details={
            "orientation": "outward (negative invariance)",
            "orbit_outside_V": outside,
            "orbit_max_depth_inside_V": depth,
            "orbit_y_star": orbit.y_star,
            "orbit_amplitude": orbit.amplitude,
            "orbit_classification": orbit.classification,
        },
    )
    return region, cert


# -- witness V' ----------------------------------------------------------------


def _beta_outcome(spec, beta, tol, t_max):
    """Follow the trajectory from (0, beta) into x < 0.

    Returns ("captured", None, traj) when it settles on p, ("high", y, traj)
    when it comes back to x = 0 at y >= 0, or ("returned", beta', traj) after
    re-entering x > 0 below the origin and reaching x = 0 again.
    """
    lam, ylam = spec.lam, spec.F(spec.lam)
    near = 1e-8

    def settle(t, x, y):
        return (x - lam) ** 2 + (y - ylam) ** 2 < near

    halt = EventSpec("splitting-line", action="halt")
    leg1 = integrate(spec, (0.0, beta), t_max, tol, [halt], stop=settle)
    splits = [e for e in leg1.events if e.name == "split"]
    if not splits:
        return "captured", None, [leg1]
    y_in = splits[-1].y
    if y_in >= 0:
        return "high", y_in, [leg1]
    leg2 = integrate(spec, (0.0, y_in), t_max, tol, [halt])
    splits = [e for e in leg2.events if e.name == "split"]
    if not splits:
        return "captured", None, [leg1, leg2]
    return "returned", splits[-1].y, [leg1, leg2]


def subcritical_witness(
    spec: SystemSpec,
    *,
    n_beta: int = 24,
    width: float = 1e-4,
    tol: float = 1e-10,
    geometric_tol: float = 1e-6,
    ball_radius: float = 1e-3,
    ball_directions: int = 16,
) -> tuple:
    """Region V' around a stable focus, and the coexistence it implies.

    Heights beta on x = 0 between g(lam) and h(x_M) are scanned; the split
    between starts captured by p and starts that swing through x > 0 and come
    back higher (beta' > beta) is refined by bisection.  The first beta just
    on the escaping side closes V' with the segment [beta, beta'] of x = 0.
    """
    eps, lam = spec.epsilon, spec.lam
    tse = 2.0 * math.sqrt(eps)
    g0, h0 = spec.dF(0.0, "left"), spec.dF(0.0, "right")
    if not (h0 > tse and abs(g0) < tse and lam < 0):
        raise PreconditionViolated(
            f"need h'(0) > 2 sqrt(eps) > |g'(0)| and lambda < 0; got h'(0)={h0:.6g}, g'(0)={g0:.6g}, lambda={lam}"
        )
    geo = geometry(spec)
    lo, hi = spec.g(lam), geo.fold_value
    t_max = 100.0 / eps + 100.0
    trace = []

    def outcome(beta):
        kind, val, legs = _beta_outcome(spec, beta, tol, t_max)
        ok = kind == "returned" and val > beta
        trace.append({"beta": beta, "outcome": kind, "beta_prime": val, "expanding": ok})
        return kind, val, legs, ok

    betas = np.linspace(lo, hi, n_beta + 2)[1:-1]
    results = [outcome(float(b)) for b in betas]
    pair = None
    for (b0, r0), (b1, r1) in zip(zip(betas, results), zip(betas[1:], results[1:])):
        if r0[0] == "captured" and r1[3]:
            pair = (float(b0), float(b1))
            break
    if pair is None:
        raise NoWitness(f"no height on x = 0 separates capture from an expanding return at lambda={lam}", trace=trace)
    a, b = pair
    best = results[list(betas).index(b)]
    while b - a > width * (hi - lo):
        m = 0.5 * (a + b)
        r = outcome(m)
        if r[0] == "captured":
            a = m
        elif r[3]:
            b, best = m, r
        else:
            break
    beta = b
    _, beta_p, legs, _ = best
    pts = [leg.resample(32) for leg in legs]
    bx = np.concatenate([p[1] for p in pts])
    by = np.concatenate([p[2] for p in pts])
    region = WitnessRegion(
        "V'",
        bx,
        by,
        ((0.0, beta_p), (0.0, beta)),
        {"lambda": lam, "beta": beta, "beta_prime": beta_p, "search": [lo, hi]},
    )
    # on the closing segment of x = 0 (y > 0) the flow points to -x, out of V'
    ys = np.linspace(beta, beta_p, 50)
    products = [-spec.field()(0.0, float(y))[0] for y in ys]
    cert = CertificateResult(
        verified=bool(min(products) >= -INWARD_TOL and beta_p > beta),
        min_inward_product=float(min(products)),
        samples=len(ys),
        details={"orientation": "outward (negative invariance)", "trace": trace},
    )
    report = _coexistence(spec, region, tol, geometric_tol, ball_radius, ball_directions)
    report.certificate = cert
    return region, report


def _lowest_crossing(region: WitnessRegion, x0: float, default: float) -> float:
    bx, by = region.boundary_x, region.boundary_y
    idx = np.nonzero((bx[:-1] - x0) * (bx[1:] - x0) <= 0)[0]
    ys = []
    for i in idx:
        dx = bx[i + 1] - bx[i]
        s = 0.0 if dx == 0 else (x0 - bx[i]) / dx
        ys.append(by[i] + s * (by[i + 1] - by[i]))
    return min(ys) if ys else default


def _coexistence(spec, region, tol, geometric_tol, ball_radius, ball_directions) -> CoexistenceReport:
    eq = equilibrium(spec)
    stable = eq.mu_plus.real < 0 and eq.mu_minus.real < 0
    lam, ylam = spec.lam, spec.F(spec.lam)
    attracted = 0
    t_run = 500.0 / spec.epsilon
    for k in range(ball_directions):
        ang = 2 * math.pi * k / ball_directions
        x0, y0 = lam + ball_radius * math.cos(ang), ylam + ball_radius * math.sin(ang)
        traj = integrate(spec, (x0, y0), t_run, 1e-9, keep_dense=False, stop=lambda t, x, y: math.hypot(x - lam, y - ylam) < 1e-7)
        xf, yf = traj.final
        attracted += math.hypot(xf - lam, yf - ylam) < 1e-6
    try:
        orbit = find_periodic_orbit(spec, tol=tol)
    except NoOrbit:
        return CoexistenceReport(stable, eq.kind, attracted, ball_directions, None, False, 0, 0)
    outside = _orbit_depth(region, orbit) <= geometric_tol
    # starts on the section outside V': one between the orbit and V', one beyond the orbit
    v_low = _lowest_crossing(region, lam, default=ylam)
    starts = [orbit.y_star + 0.5 * (v_low - orbit.y_star), orbit.y_star - 0.5]
    ok = 0
    for y in starts:
        for _ in range(40):
            try:
                y_next = return_map(spec, y, tol=tol)
            except NoReturn:
                break
            if abs(y_next - orbit.y_star) < 1e-6:
                ok += 1
                break
            y = y_next
    return CoexistenceReport(stable, eq.kind, attracted, ball_directions, orbit, outside, ok, len(starts))
