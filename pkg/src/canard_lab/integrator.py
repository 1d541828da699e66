"""Adaptive Dormand-Prince integration of piecewise planar fields with events.

The field switches formula across vertical lines ``u = b``.  Each step is taken
with the formula of the current region only (extended smoothly past the
line); when the dense output shows the solution leaving the region the step is
cut at the located crossing, the state is put exactly on the line and the
formula is switched.  The field is continuous across the lines, so no sliding
logic is needed.

Plain Python floats are used throughout: the state is two-dimensional and
array overhead would dominate.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import Diverged, NoReturn, StepUnderflow

DIVERGENCE_BOUND = 1e8
MIN_STEP = 1e-14

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output (Hairer & Wanner's continuous extension)
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

_PROBE = (0.25, 0.5, 0.75)


def event_tolerance(tol: float) -> float:
    return max(tol, 1e-10)


@dataclass(frozen=True)
class PiecewiseField:
    """Planar field with one formula per region between sorted split lines on u."""

    breaks: tuple
    pieces: tuple
    nullcline: Optional[float] = None

    def region(self, u: float) -> int:
        # on a line the right-hand formula is used (both agree there)
        return bisect_right(self.breaks, u)

    def __call__(self, u: float, v: float) -> tuple:
        return self.pieces[self.region(u)](u, v)


@dataclass(frozen=True)
class EventSpec:
    """A crossing of a vertical line to record or halt at.

    kind is ``splitting-line``, ``vertical-section`` (needs ``x0``) or
    ``slow-nullcline``; direction is ``rightward``, ``leftward`` or ``both``.
    """

    kind: str
    x0: Optional[float] = None
    direction: str = "both"
    y_window: Optional[tuple] = None
    action: str = "record"
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("splitting-line", "vertical-section", "slow-nullcline"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "vertical-section" and (self.x0 is None or not math.isfinite(self.x0)):
            raise ValueError("a vertical section needs a finite x0")
        if self.direction not in ("rightward", "leftward", "both"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.action not in ("record", "halt"):
            raise ValueError(f"unknown action {self.action!r}")

    @property
    def label(self) -> str:
        return self.name or self.kind


def section(x0, direction="rightward", y_window=None, action="record", name=None) -> EventSpec:
    return EventSpec("vertical-section", x0, direction, y_window, action, name)


class Segment(NamedTuple):
    """Dense output of one accepted step; valid for th in [0, th_end]."""

    t0: float
    h: float
    th_end: float
    ru: tuple
    rv: tuple


class Event(NamedTuple):
    t: float
    x: float
    y: float
    name: str
    direction: int  # +1 rightward, -1 leftward


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    events: list
    status: str  # completed | halted-at-event | diverged
    segments: list = field(default_factory=list, repr=False)
    event_tol: float = 1e-10

    @property
    def final(self):
        return float(self.x[-1]), float(self.y[-1])

    def events_named(self, name: str) -> list:
        return [e for e in self.events if e.name == name]

    def interpolate(self, t: float) -> tuple:
        """Dense-output state at time ``t`` (within the integrated range)."""
        if not self.segments:
            return float(np.interp(t, self.t, self.x)), float(np.interp(t, self.t, self.y))
        starts = [s[0] for s in self.segments]
        i = max(0, min(bisect_right(starts, t) - 1, len(self.segments) - 1))
        t0, h, th_end, ru, rv = self.segments[i]
        th = 0.0 if h == 0 else min(max((t - t0) / h, 0.0), th_end)
        return _dense(ru, th), _dense(rv, th)

    def resample(self, n_per_step: int = 8) -> tuple:
        """Arrays (t, x, y) with ``n_per_step`` dense points inside every step."""
        if not self.segments:
            return self.t, self.x, self.y
        base = np.linspace(0.0, 1.0, n_per_step, endpoint=False)
        ts, xs, ys = [], [], []
        for t0, h, th_end, ru, rv in self.segments:
            th = base * th_end
            ts.append(t0 + th * h)
            xs.append(_dense_np(ru, th))
            ys.append(_dense_np(rv, th))
        ts.append([self.t[-1]])
        xs.append([self.x[-1]])
        ys.append([self.y[-1]])
        return np.concatenate(ts), np.concatenate(xs), np.concatenate(ys)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y"])
            for row in zip(self.t, self.x, self.y):
                w.writerow([repr(float(v)) for v in row])

    def events_json(self) -> list:
        return [{"t": e.t, "x": e.x, "y": e.y, "event": e.name} for e in self.events]

    def write_events(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.events_json(), fh, indent=1)
            fh.write("\n")


def _dense(r, th):
    r1, r2, r3, r4, r5 = r
    return r1 + th * (r2 + (1 - th) * (r3 + th * (r4 + (1 - th) * r5)))


def _dense_np(r, th):
    r1, r2, r3, r4, r5 = r
    return r1 + th * (r2 + (1 - th) * (r3 + th * (r4 + (1 - th) * r5)))


class _Watch(NamedTuple):
    level: float
    direction: int  # 0 both
    y_window: Optional[tuple]
    halt: bool
    name: str


def _resolve_events(fld: PiecewiseField, events: Sequence[EventSpec]):
    watches, split_halt, split_name = [], False, None
    for ev in events:
        if ev.kind == "splitting-line":
            split_halt = split_halt or ev.action == "halt"
            split_name = ev.name
            continue
        level = ev.x0 if ev.kind == "vertical-section" else fld.nullcline
        if level is None:
            raise ValueError("slow-nullcline events need a field with a nullcline")
        d = {"rightward": 1, "leftward": -1, "both": 0}[ev.direction]
        watches.append(_Watch(float(level), d, ev.y_window, ev.action == "halt", ev.label))
    return watches, split_halt, split_name


def _crossings(ru, level, th_end):
    """Roots of u(th) = level on (0, th_end], found from sign changes on probes."""
    probes = [0.0] + [p * th_end for p in _PROBE] + [th_end]
    out = []
    fa = _dense(ru, 0.0) - level
    for a, b in zip(probes[:-1], probes[1:]):
        fb = _dense(ru, b) - level
        if (fa < 0 < fb) or (fa > 0 > fb):
            r = brentq(lambda th: _dense(ru, th) - level, a, b, xtol=1e-16, rtol=1e-15, maxiter=200)
            out.append((r, 1 if fb > fa else -1))
        elif fb == 0.0 and fa != 0.0:
            out.append((b, 1 if fb > fa else -1))
        fa = fb
    return out


def integrate(
    system,
    init,
    t_max: float,
    tol: float = 1e-9,
    events: Sequence[EventSpec] = (),
    *,
    t0: float = 0.0,
    max_step: float = math.inf,
    stop: Optional[Callable[[float, float, float], bool]] = None,
    keep_dense: bool = True,
    rtol: Optional[float] = None,
) -> Trajectory:
    """Integrate ``system`` (a SystemSpec or PiecewiseField) from ``init``.

    Splitting-line crossings are always located, logged as ``split`` events
    (``split2`` for a second line) and used to switch formula.  ``stop`` is
    checked after every accepted step; returning True halts the run.
    The error norm uses ``atol = tol`` and ``rtol`` (default ``tol``); with
    ``rtol=0`` the step sequence is invariant under translations of the state.
    """
    if not 1e-13 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-13, 1e-3]")
    fld = system if isinstance(system, PiecewiseField) else system.field()
    watches, split_halt, split_name = _resolve_events(fld, events)
    breaks = fld.breaks
    pieces = fld.pieces
    ev_tol = event_tolerance(tol)
    split_labels = [split_name or "split"] + [f"{split_name or 'split'}{i + 1}" for i in range(1, len(breaks))]

    t = float(t0)
    u, v = float(init[0]), float(init[1])
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError("initial state must be finite")
    t_end = t + float(t_max)
    region = bisect_right(breaks, u)
    if u in breaks and pieces[region](u, v)[0] < 0:
        # starting on a line and moving left: use the left-hand formula
        region -= 1
    fn = pieces[region]
    ts, us, vs = [t], [u], [v]
    evlog, segments = [], []
    status = "completed"

    k1u, k1v = fn(u, v)
    h = min(max_step, 0.01, t_end - t)
    atol = tol
    rtol = tol if rtol is None else rtol
    if t_end <= t:
        return Trajectory(np.array(ts), np.array(us), np.array(vs), evlog, status, segments)

    while t < t_end:
        if h < MIN_STEP * max(1.0, abs(t)):
            raise StepUnderflow(f"step size underflow at t={t:.6g}")
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        k2u, k2v = fn(u + h * A21 * k1u, v + h * A21 * k1v)
        k3u, k3v = fn(u + h * (A31 * k1u + A32 * k2u), v + h * (A31 * k1v + A32 * k2v))
        k4u, k4v = fn(
            u + h * (A41 * k1u + A42 * k2u + A43 * k3u),
            v + h * (A41 * k1v + A42 * k2v + A43 * k3v),
        )
        k5u, k5v = fn(
            u + h * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u),
            v + h * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v),
        )
        k6u, k6v = fn(
            u + h * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u),
            v + h * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v),
        )
        u1 = u + h * (A71 * k1u + A73 * k3u + A74 * k4u + A75 * k5u + A76 * k6u)
        v1 = v + h * (A71 * k1v + A73 * k3v + A74 * k4v + A75 * k5v + A76 * k6v)
        k7u, k7v = fn(u1, v1)
        eu = h * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ev = h * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
        su = atol + rtol * max(abs(u), abs(u1))
        sv = atol + rtol * max(abs(v), abs(v1))
        err = math.sqrt(0.5 * ((eu / su) ** 2 + (ev / sv) ** 2))
        if not math.isfinite(err):
            h *= 0.2
            continue
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        # accepted: dense output coefficients
        ru = (
            u,
            u1 - u,
            h * k1u - (u1 - u),
            (u1 - u) - h * k7u - (h * k1u - (u1 - u)),
            h * (D1 * k1u + D3 * k3u + D4 * k4u + D5 * k5u + D6 * k6u + D7 * k7u),
        )
        rv = (
            v,
            v1 - v,
            h * k1v - (v1 - v),
            (v1 - v) - h * k7v - (h * k1v - (v1 - v)),
            h * (D1 * k1v + D3 * k3v + D4 * k4v + D5 * k5v + D6 * k6v + D7 * k7v),
        )

        # leaving the region through a split line cuts the step
        th_cut, cut_dir, cut_line = 1.0, 0, None
        lo_line = region - 1 if region > 0 else None
        hi_line = region if region < len(breaks) else None
        for line in (lo_line, hi_line):
            if line is None:
                continue
            for th, d in _crossings(ru, breaks[line], 1.0):
                # only exits count: leftward through the lower line, rightward through the upper
                if (line == lo_line and d < 0) or (line == hi_line and d > 0):
                    if th < th_cut:
                        th_cut, cut_dir, cut_line = th, d, line
                    break

        halt_here = False
        th_stop = th_cut
        found = []
        for w in watches:
            for th, d in _crossings(ru, w.level, th_cut):
                if w.direction and d != w.direction:
                    continue
                yv = _dense(rv, th)
                if w.y_window is not None and not (w.y_window[0] <= yv <= w.y_window[1]):
                    continue
                found.append((th, d, w))
        found.sort(key=lambda item: item[0])
        for th, d, w in found:
            if th > th_stop:
                break
            evlog.append(Event(t + th * h, w.level, _dense(rv, th), w.name, d))
            if w.halt:
                halt_here, th_stop = True, th
                break

        if th_stop < 1.0:
            h_used = th_stop * h
            u_new, v_new = _dense(ru, th_stop), _dense(rv, th_stop)
            if cut_line is not None and th_stop == th_cut:
                u_new = breaks[cut_line]
        else:
            h_used, u_new, v_new = h, u1, v1
        if keep_dense:
            segments.append(Segment(t, h, min(th_stop, 1.0), ru, rv))
        t = t + h_used if th_stop < 1.0 else (t_end if last else t + h)
        u, v = u_new, v_new
        ts.append(t)
        us.append(u)
        vs.append(v)

        if abs(u) > DIVERGENCE_BOUND or abs(v) > DIVERGENCE_BOUND:
            traj = Trajectory(np.array(ts), np.array(us), np.array(vs), evlog, "diverged", segments)
            raise Diverged(f"|state| exceeded {DIVERGENCE_BOUND:g} at t={t:.6g}", trajectory=traj)

        if halt_here:
            status = "halted-at-event"
            break

        if cut_line is not None and th_stop == th_cut:
            evlog.append(Event(t, u, v, split_labels[cut_line], cut_dir))
            du, _ = pieces[cut_line + 1](u, v)
            region = cut_line if du < 0 else cut_line + 1
            fn = pieces[region]
            k1u, k1v = fn(u, v)
            if split_halt:
                status = "halted-at-event"
                break
        else:
            k1u, k1v = (k7u, k7v) if th_stop >= 1.0 else fn(u, v)

        if stop is not None and stop(t, u, v):
            status = "halted-at-event"
            break
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(max_step, h * fac)

    return Trajectory(np.array(ts), np.array(us), np.array(vs), evlog, status, segments, ev_tol)


def first_return(
    system,
    sec: EventSpec,
    start,
    t_max: float,
    tol: float = 1e-9,
    *,
    max_step: float = math.inf,
    stop: Optional[Callable] = None,
    keep_dense: bool = False,
) -> tuple:
    """First later crossing of a vertical section in its declared direction.

    Returns ``((x, y), return_time, trajectory)``.  Raises NoReturn when
    ``t_max`` elapses or ``stop`` fires first.
    """
    fld = system if isinstance(system, PiecewiseField) else system.field()
    level = sec.x0 if sec.kind == "vertical-section" else fld.nullcline
    if sec.kind == "splitting-line":
        raise ValueError("use a vertical section at the split line instead")
    ev_tol = event_tolerance(tol)
    if abs(start[0] - level) > ev_tol:
        raise ValueError(f"start x={start[0]!r} is not on the section x={level!r}")
    halting = EventSpec("vertical-section", level, sec.direction, sec.y_window, "halt", "return")
    traj = integrate(
        fld, (level, start[1]), t_max, tol, [halting], max_step=max_step, stop=stop, keep_dense=keep_dense
    )
    hits = traj.events_named("return")
    if traj.status != "halted-at-event" or not hits:
        raise NoReturn(f"no return to x={level:g} within t={t_max:g}", trajectory=traj)
    e = hits[-1]
    return (e.x, e.y), e.t, traj
