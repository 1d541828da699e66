import json
import math

import numpy as np
import pytest

from canard_lab import build_W, check_inward, confinement_check, preset, subcritical_witness, superexplosion_witness
from canard_lab.certificates import PolygonRegion, point_in_polygon
from canard_lab.errors import NotSuperExplosion, NoWitness, PreconditionViolated


@pytest.fixture(scope="module")
def w_fig4():
    return build_W(preset("fig4", 0.2, 0.5), x_hat=-3.0, m1=-1.0, samples=200)


def test_W_verifies(w_fig4):
    region, cert = w_fig4
    assert cert.verified
    assert cert.min_inward_product >= -1e-9
    assert len(region.vertices) == 6
    p = region.params
    assert p["m1"] < 0
    assert p["m4"] > p["m4_bound"]
    assert p["y5"] < preset("fig4").g(p["x_hat"])


def test_W_contains_equilibrium_and_simple(w_fig4):
    region, _ = w_fig4
    spec = preset("fig4", 0.2, 0.5)
    assert region.contains(0.5, spec.F(0.5))[0]
    vx, vy = zip(*region.vertices)
    area = 0.5 * sum(vx[i] * vy[(i + 1) % 6] - vx[(i + 1) % 6] * vy[i] for i in range(6))
    assert abs(area) > 0


def test_W_doubled_sampling_stable(w_fig4):
    region, cert = w_fig4
    spec = preset("fig4", 0.2, 0.5)
    dense = check_inward(spec, region, 400)
    assert dense.verified
    assert abs(dense.min_inward_product - cert.min_inward_product) <= 1e-6


def test_W_vertex_checked_with_both_normals(w_fig4):
    region, cert = w_fig4
    # 6 edges x samples with endpoints: every vertex appears in two edges
    assert cert.samples == 6 * 200
    first_edge_end = region.segments[0][2]
    second_edge_start = region.segments[1][1]
    assert first_edge_end == second_edge_start


def test_W_confinement(w_fig4):
    region, _ = w_fig4
    out = confinement_check(preset("fig4", 0.2, 0.5), region, n=20)
    assert out["starts"] == 20
    assert out["max_exit_distance"] <= 1e-9


def test_W_shallow_x_hat_rechosen():
    region, cert = build_W(preset("fig4", 0.2, 0.5), x_hat=-0.01)
    assert cert.verified
    assert region.params["x_hat"] < -0.01
    assert len(cert.details["x_hat_tried"]) > 1


def test_W_preconditions():
    with pytest.raises(PreconditionViolated):
        build_W(preset("fig4", 0.2, 2.0))
    with pytest.raises(ValueError):
        build_W(preset("fig4", 0.2, 0.5), x_hat=1.0)


def test_W_json(w_fig4):
    region, cert = w_fig4
    d = json.loads(json.dumps({"region": region.to_json(), "cert": cert.to_json()}))
    assert d["cert"]["verified"] is True
    assert len(d["region"]["vertices"]) == 6


def test_point_in_polygon_square():
    inside = point_in_polygon(np.array([0.5, 1.5]), np.array([0.5, 0.5]), [0, 1, 1, 0], [0, 0, 1, 1])
    assert inside.tolist() == [True, False]


def test_failed_inward_check_reported():
    spec = preset("fig4", 0.2, 0.5)
    # a square around p: the field leaves it along the unstable directions
    region = PolygonRegion([(0.4, 0.3), (0.6, 0.3), (0.6, 0.7), (0.4, 0.7)], {}, ("a", "b", "c", "d"))
    cert = check_inward(spec, region, 20)
    assert not cert.verified
    assert cert.failure_points and cert.min_inward_product < 0


@pytest.mark.parametrize("lam", [0.001, 0.3])
def test_V_witness(lam):
    region, cert = superexplosion_witness(preset("fig6", 0.2, lam))
    assert cert.verified
    assert cert.details["orbit_outside_V"]
    assert region.closing[0][0] == lam == region.closing[1][0]
    if lam == 0.001:
        assert region.params["eigvec_slope"] == pytest.approx(0.2 / 1.8934, abs=1e-3)


def test_V_requires_super_explosion():
    with pytest.raises(NotSuperExplosion):
        superexplosion_witness(preset("fig4", 0.2, 0.01))


def test_Vprime_coexistence():
    region, report = subcritical_witness(preset("fig8b", 0.2, -0.05))
    assert report.coexistence
    assert report.ball_attracted == report.ball_directions == 16
    assert report.certificate.verified
    assert region.params["beta_prime"] > region.params["beta"]
    json.dumps(report.to_json())


def test_Vprime_precondition():
    with pytest.raises(PreconditionViolated):
        subcritical_witness(preset("fig6", 0.2, -0.05))


def test_Vprime_no_witness_far_from_corner():
    with pytest.raises(NoWitness) as info:
        subcritical_witness(preset("fig8b", 0.2, -0.5))
    assert info.value.trace
