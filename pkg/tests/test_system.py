import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canard_lab import PolyBranch, SystemSpec, geometry, preset, validate
from canard_lab.errors import ConfigError, ContinuityViolation, NoFold, SlopeSignViolation
from canard_lab.system import branch_derivative, eval_field, load_spec, save_spec, spec_from_config, spec_to_config
from strategies import smooth_fold_specs


def test_presets_validate():
    for name in ("fig4", "fig6", "fig8b"):
        assert validate(preset(name)).ok


def test_preset_h_vanishes_at_corner():
    assert preset("fig6").h.exact_at(0) == 0
    assert preset("fig4").h.exact_at(0) == 0


def test_g_offset_is_continuity_violation():
    spec = SystemSpec(0.2, 0.0, PolyBranch.of([0.1, -1]), preset("fig4").h)
    with pytest.raises(ContinuityViolation) as info:
        validate(spec)
    assert info.value.report is not None
    assert not validate(spec, raise_errors=False).ok


def test_slope_sign_violation():
    spec = SystemSpec(0.2, 0.0, PolyBranch.of([0, 1]), preset("fig4").h)
    with pytest.raises(SlopeSignViolation):
        validate(spec)


def test_monotone_h_has_no_fold():
    spec = SystemSpec(0.2, 0.0, PolyBranch.of([0, -1]), PolyBranch.of([0, 1, 1]))
    with pytest.raises(NoFold):
        validate(spec)
    with pytest.raises(NoFold):
        geometry(spec)


def test_field_values():
    f6 = preset("fig6", 0.2, 0.3)
    assert eval_field(f6, (0.3, f6.F(0.3))) == pytest.approx((0.0, 0.0), abs=1e-15)
    f4 = preset("fig4", 0.2, 0.5)
    dx, dy = eval_field(f4, (-1.0, 0.0))
    assert dx == pytest.approx(3.0, abs=1e-14)
    assert dy == pytest.approx(0.2 * (-1.5), abs=1e-15)
    dx, _ = eval_field(f4, (1.6, 0.0))
    assert dx == pytest.approx(15552 / 6750, abs=1e-13)


def test_branch_derivatives():
    assert branch_derivative(preset("fig4"), 0.0, "right") == pytest.approx(0.32, abs=1e-15)
    assert branch_derivative(preset("fig4"), 0.0, "left") == pytest.approx(-2.0, abs=1e-15)
    assert branch_derivative(preset("fig6"), 0.0, "left") == pytest.approx(-2.0, abs=1e-15)
    assert branch_derivative(preset("fig6"), 0.0, "right") == pytest.approx(2.0, abs=1e-15)


def test_geometry_presets():
    g4 = geometry(preset("fig4"))
    assert g4.x_M == pytest.approx(1.6, abs=1e-15)
    assert g4.fold_kind == "smooth"
    assert g4.fold_value == pytest.approx(2.304, abs=1e-12)
    assert geometry(preset("fig6")).x_M == pytest.approx(2 / 3, abs=1e-15)
    tags = {k: b.stability for k, b in g4.branches.items()}
    assert tags == {"l": "attracting", "m": "repelling", "r": "attracting"}


def test_z_shaped_geometry():
    h = PolyBranch.of([0, 1])
    f = PolyBranch.of([2, -1])  # f(1) = h(1) = 1, f' = -1
    spec = SystemSpec(0.1, 0.0, PolyBranch.of([0, -1]), h, f, 1.0)
    validate(spec)
    geo = geometry(spec)
    assert geo.x_M == 1.0 and geo.fold_kind == "corner"
    assert spec.F(2.0) == pytest.approx(0.0)


def test_z_shaped_mismatch():
    spec = SystemSpec(0.1, 0.0, PolyBranch.of([0, -1]), PolyBranch.of([0, 1]), PolyBranch.of([3, -1]), 1.0)
    with pytest.raises(ContinuityViolation):
        validate(spec)


def test_config_round_trip(tmp_path):
    spec = preset("fig4", 0.2, 0.0142)
    path = tmp_path / "sys.json"
    save_spec(spec, path)
    back = load_spec(path)
    assert back == spec
    assert spec_to_config(back) == spec_to_config(spec)
    assert json.loads(path.read_text())["h"]["coeffs"][0] in (0, 0.0)


def test_preset_config_form():
    spec = spec_from_config({"preset": "fig6", "epsilon": 0.1, "lambda": 0.2})
    assert spec.epsilon == 0.1 and spec.lam == 0.2


def test_malformed_config():
    with pytest.raises(ConfigError):
        spec_from_config({"epsilon": 0.2})
    with pytest.raises(ConfigError):
        spec_from_config({"preset": "nope"})


@settings(max_examples=60, deadline=None)
@given(smooth_fold_specs())
def test_continuity_at_corner(spec):
    validate(spec)
    assert abs(spec.g(0.0) - spec.h(0.0)) <= 1e-12
    left = eval_field(spec, (-0.0, 0.3))
    right = eval_field(spec, (0.0, 0.3))
    assert abs(left[0] - right[0]) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(smooth_fold_specs(), st.lists(st.floats(-3, 3), min_size=100, max_size=100))
def test_derivative_matches_finite_difference(spec, xs):
    for x in xs:
        side = "left" if x < 0 else "right"
        branch = spec.branch_at(x, side)
        step = 1e-5 * max(1.0, abs(x))
        fd = (branch(x + step) - branch(x - step)) / (2 * step)
        d = branch_derivative(spec, x, side)
        assert abs(fd - d) <= 1e-6 * max(1.0, abs(d))


@settings(max_examples=60, deadline=None)
@given(smooth_fold_specs())
def test_fold_is_root_of_h_prime(spec):
    geo = geometry(spec)
    dh = spec.h.deriv()
    assert abs(dh(geo.x_M)) <= 1e-10
    assert dh(geo.x_M / 2) > 0
    assert geo.branches["m"].stability == "repelling"
    assert math.isfinite(geo.fold_value)


@settings(max_examples=30, deadline=None)
@given(smooth_fold_specs())
def test_spec_round_trip_property(spec):
    assert spec_from_config(json.loads(json.dumps(spec_to_config(spec)))) == spec


def test_polybranch_exact_arithmetic():
    p = PolyBranch.from_roots(["1/3", "1/3"])
    assert p.exact_at("1/3") == 0
    assert (p - p).is_zero()
    assert p.deriv().exact[0] == -PolyBranch.of(["2/3"]).exact[0]
    assert np.isclose(p(1.0), 4 / 9)
