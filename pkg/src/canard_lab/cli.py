"""Command-line front end: ``canard-lab <command> [flags]``.

Results go to stdout as JSON, artifacts (CSV/JSON) to the paths given with
``--out`` and friends, and diagnostics to stderr.  Exit codes: 0 success,
1 configuration or usage error, 2 numerical failure, 3 certificate failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import bifurcation, certificates, orbits, stommel
from .errors import (
    CanardLabError,
    ConfigError,
    ConstructionFailed,
    HypothesisNotSatisfied,
    NoWitness,
    NumericalFailure,
    UsageError,
)
from .integrator import integrate
from .system import SystemSpec, load_spec, preset, save_spec, validate

log = logging.getLogger("canard_lab")

COMMANDS = ("simulate", "classify", "orbit", "sweep", "certify", "stommel")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CERTIFICATE = 0, 1, 2, 3

TOL_RANGE = (1e-13, 1e-3)


@dataclass
class ExecutionPlan:
    command: str
    spec: SystemSpec
    options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _system_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--preset", help="built-in system: fig4, fig6 or fig8b")
    p.add_argument("--config", help="system config JSON file")
    p.add_argument("--eps", type=float, help="time-scale ratio epsilon")
    p.add_argument("--lambda", dest="lam", type=float, help="equilibrium position")
    p.add_argument("--save-config", help="write the resolved system config here")
    return p


def _run_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--tol", type=float, default=1e-9, help="integration tolerance (default 1e-9)")
    p.add_argument("--t-max", type=float, default=500.0, help="integration horizon (default 500)")
    p.add_argument("--out", help="main artifact path")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="canard-lab", description="Canard and relaxation-oscillation analysis of Lienard systems.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sysf, runf = _system_flags(), _run_flags()

    sp = sub.add_parser("simulate", parents=[sysf, runf], help="integrate one trajectory")
    sp.add_argument("--init", type=float, nargs=2, metavar=("X", "Y"))
    sp.add_argument("--events", help="write crossing events JSON here")

    sub.add_parser("classify", parents=[sysf, runf], help="equilibrium and bifurcation report")

    sp = sub.add_parser("orbit", parents=[sysf, runf], help="find and classify the attracting cycle")
    sp.add_argument("--y-guess", type=float)

    sp = sub.add_parser("sweep", parents=[sysf, runf], help="amplitude sweep over lambda")
    sp.add_argument("--lambda-min", type=float)
    sp.add_argument("--lambda-max", type=float)
    sp.add_argument("--samples", type=int, default=40)
    sp.add_argument("--jump", type=float, default=1.0, help="amplitude jump marking an explosion")
    sp.add_argument("--width-tol", type=float, default=1e-4)
    sp.add_argument("--no-refine", action="store_true")
    sp.add_argument("--intervals", help="write explosion intervals JSON here")

    sp = sub.add_parser("certify", parents=[sysf, runf], help="build and check a trapping or witness region")
    sp.add_argument("--region", choices=("W", "V", "Vprime"), default="W")
    sp.add_argument("--samples", type=int, default=200, help="boundary samples per edge")
    sp.add_argument("--x-hat", type=float, default=-3.0)
    sp.add_argument("--m1", type=float, default=-1.0)
    sp.add_argument("--m4", type=float)
    sp.add_argument("--confine", type=int, default=0, help="number of interior starts to integrate (W only)")

    sp = sub.add_parser("stommel", parents=[runf], help="thermohaline box model and its general form")
    sp.add_argument("--K", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--init", type=float, nargs=2, metavar=("Y", "MU"))
    sp.add_argument("--samples", type=int, default=1001, help="output time points")
    return parser


def _resolve_spec(ns) -> SystemSpec:
    if ns.preset and ns.config:
        raise UsageError("give either --preset or --config, not both")
    if ns.preset:
        spec = preset(ns.preset)
    elif ns.config:
        spec = load_spec(ns.config)
    else:
        raise UsageError(f"{ns.command} needs a system: pass --preset or --config")
    if ns.eps is not None:
        spec = spec.with_epsilon(ns.eps)
    if ns.lam is not None:
        spec = spec.with_lambda(ns.lam)
    validate(spec)
    return spec


def _check_ranges(ns) -> None:
    if not TOL_RANGE[0] <= ns.tol <= TOL_RANGE[1]:
        raise UsageError(f"--tol must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]")
    if not (math.isfinite(ns.t_max) and ns.t_max > 0):
        raise UsageError("--t-max must be positive")
    samples = getattr(ns, "samples", None)
    if samples is not None and samples < 2:
        raise UsageError("--samples must be at least 2")
    if ns.command == "sweep":
        if ns.lambda_min is None or ns.lambda_max is None:
            raise UsageError("sweep needs --lambda-min and --lambda-max")
        if not ns.lambda_min < ns.lambda_max:
            raise UsageError("--lambda-min must be below --lambda-max")
        if ns.jump <= 0 or ns.width_tol <= 0:
            raise UsageError("--jump and --width-tol must be positive")
    if ns.command == "certify" and ns.confine < 0:
        raise UsageError("--confine must be non-negative")


def plan(args) -> ExecutionPlan:
    """Parse ``args`` and resolve the system and defaults; nothing is computed."""
    ns = build_parser().parse_args(list(args))
    if ns.command is None:
        raise UsageError(f"missing command; choose from {', '.join(COMMANDS)}")
    _check_ranges(ns)
    opts = {k: v for k, v in vars(ns).items() if k not in ("command", "out", "events", "intervals", "save_config")}
    outputs = {"out": ns.out}
    if ns.command == "stommel":
        if ns.K is None or ns.eps is None or ns.lam is None:
            raise UsageError("stommel needs --K, --eps and --lambda")
        params = stommel.StommelParams(ns.K, ns.eps, ns.lam)
        spec, _ = stommel.to_general_form(params)
        validate(spec)
        opts["params"] = params
        return ExecutionPlan("stommel", spec, opts, outputs)
    spec = _resolve_spec(ns)
    outputs["save_config"] = ns.save_config
    if ns.command == "simulate":
        outputs["events"] = ns.events
    if ns.command == "sweep":
        outputs["intervals"] = ns.intervals
    return ExecutionPlan(ns.command, spec, opts, outputs)


# -- execution ----------------------------------------------------------------


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, Fraction):
        return str(o)
    return str(o)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_default)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


def _run_simulate(plan: ExecutionPlan, out) -> int:
    spec, o = plan.spec, plan.options
    init = tuple(o["init"]) if o["init"] else (spec.lam + 0.1, spec.F(spec.lam))
    traj = integrate(spec, init, o["t_max"], o["tol"])
    if plan.outputs["out"]:
        traj.to_csv(plan.outputs["out"])
    if plan.outputs.get("events"):
        traj.write_events(plan.outputs["events"])
    out.write(
        dumps(
            {
                "status": traj.status,
                "init": list(init),
                "final": {"t": float(traj.t[-1]), "x": traj.final[0], "y": traj.final[1]},
                "points": len(traj.t),
                "events": len(traj.events),
            }
        )
        + "\n"
    )
    return EXIT_OK


def classify_report(spec: SystemSpec) -> dict:
    report = bifurcation.corner_classify(spec).to_json()
    report["equilibrium"] = bifurcation.equilibrium(spec).to_json()
    try:
        report["fold_hopf"] = bifurcation.fold_hopf(spec).to_json()
    except ConfigError as exc:
        report["fold_hopf"] = {"unavailable": str(exc)}
    try:
        report["nonexistence"] = bifurcation.nonexistence_threshold(spec).to_json()
    except HypothesisNotSatisfied as exc:
        report["nonexistence"] = {"hypothesis_ok": False, "reason": str(exc)}
    return report


def _run_classify(plan: ExecutionPlan, out) -> int:
    report = classify_report(plan.spec)
    if plan.outputs["out"]:
        _write_json(plan.outputs["out"], report)
    out.write(dumps(report) + "\n")
    return EXIT_OK


def _write_cycle(path, orbit) -> None:
    t, x, y = orbit.cycle.resample(8)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for row in zip(t, x, y):
            w.writerow([repr(float(v)) for v in row])


def _run_orbit(plan: ExecutionPlan, out) -> int:
    o = plan.options
    orbit = orbits.find_periodic_orbit(plan.spec, y_guess=o["y_guess"], tol=o["tol"], t_max=o["t_max"])
    if plan.outputs["out"]:
        _write_cycle(plan.outputs["out"], orbit)
    out.write(dumps(orbit.to_json()) + "\n")
    return EXIT_OK


def _run_sweep(plan: ExecutionPlan, out) -> int:
    o = plan.options
    res = orbits.sweep(
        plan.spec,
        o["lambda_min"],
        o["lambda_max"],
        o["samples"],
        o["jump"],
        refine=not o["no_refine"],
        width_tol=o["width_tol"],
        tol=o["tol"],
    )
    if plan.outputs["out"]:
        res.to_csv(plan.outputs["out"])
    if plan.outputs.get("intervals"):
        res.write_intervals(plan.outputs["intervals"])
    summary = {"rows": len(res.rows), "explosion_intervals": res.intervals_json()}
    if not plan.outputs["out"]:
        summary["table"] = [
            {"lambda": r.lam, "amplitude": r.amplitude, "x_min": r.x_min, "x_max": r.x_max,
             "period": r.period, "classification": r.classification}
            for r in res.rows
        ]
    out.write(dumps(summary) + "\n")
    return EXIT_OK


def _run_certify(plan: ExecutionPlan, out) -> int:
    spec, o = plan.spec, plan.options
    if o["region"] == "W":
        region, cert = certificates.build_W(spec, o["x_hat"], o["m1"], o["m4"], o["samples"])
        result = {"region": region.to_json(), "certificate": cert.to_json()}
        if o["confine"]:
            conf = certificates.confinement_check(spec, region, n=o["confine"], tol=o["tol"])
            result["confinement"] = conf
            if conf["max_exit_distance"] > 10 * o["tol"]:
                cert.verified = False
    elif o["region"] == "V":
        region, cert = certificates.superexplosion_witness(spec, samples=o["samples"])
        result = {"region": region.to_json(), "certificate": cert.to_json()}
    else:
        region, report = certificates.subcritical_witness(spec)
        cert = report.certificate
        result = {"region": region.to_json(), "coexistence": report.to_json()}
        if not report.coexistence:
            cert.verified = False
    result["verified"] = bool(cert.verified)
    if plan.outputs["out"]:
        _write_json(plan.outputs["out"], result)
    out.write(dumps(result) + "\n")
    if not cert.verified:
        log.error("certificate not verified (min inward product %r)", cert.min_inward_product)
        return EXIT_CERTIFICATE
    return EXIT_OK


def _run_stommel(plan: ExecutionPlan, out) -> int:
    o = plan.options
    p = o["params"]
    init = tuple(o["init"]) if o["init"] else (p.lam + 0.1, stommel.critical_manifold(p, p.lam))
    direct, general = stommel.simulate(p, init, o["t_max"], o["tol"])
    times = np.linspace(0.0, min(direct.t[-1], general.t[-1]), o["samples"])
    err = stommel.conjugacy_error(direct, general, times)
    if plan.outputs["out"]:
        with open(plan.outputs["out"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "mu", "circulation", "X", "Y"])
            for t in times:
                y, mu = direct.interpolate(float(t))
                X, Y = general.interpolate(float(t))
                w.writerow([repr(float(t)), repr(y), repr(mu), str(stommel.circulation(y)[0]), repr(X), repr(Y)])
    spec = plan.spec
    result = {
        "regime": stommel.classify_regime(p).to_json(),
        "general_form": {"epsilon": spec.epsilon, "lambda": spec.lam, "g": spec.g.to_json(), "h": spec.h.to_json()},
        "fold_x": stommel.fold_location(p),
        "init": list(init),
        "conjugacy_error": err,
        "status": {"direct": direct.status, "general": general.status},
    }
    out.write(dumps(result) + "\n")
    return EXIT_OK


_RUNNERS = {
    "simulate": _run_simulate,
    "classify": _run_classify,
    "orbit": _run_orbit,
    "sweep": _run_sweep,
    "certify": _run_certify,
    "stommel": _run_stommel,
}


def execute(plan: ExecutionPlan, out=None) -> int:
    """Run the plan; returns the process exit code."""
    out = sys.stdout if out is None else out
    if plan.outputs.get("save_config"):
        save_spec(plan.spec, plan.outputs["save_config"])
    try:
        return _RUNNERS[plan.command](plan, out)
    except (NoWitness, ConstructionFailed) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CERTIFICATE
    except NumericalFailure as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except (CanardLabError, ValueError) as exc:
        # the system does not meet the command's hypotheses
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG


def main(argv: Optional[list] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        p = plan(argv)
    except (UsageError, ConfigError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG
    return execute(p)


if __name__ == "__main__":
    sys.exit(main())
