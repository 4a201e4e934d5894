import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ellipe

from khessian.errors import ConvexityError, DomainError, InvalidBodyError, NonPositiveRadiusError
from khessian.geometry import (
    BallGeometry,
    area,
    boundary_frames,
    circle,
    curvature_integral,
    ellipse,
    fourier_body,
    make_body,
    perturbed_disk,
    quermassintegral_chain,
    random_convex_bodies,
    unit_ball_volume,
    volume,
)

ELLIPSE_PERIMETER = 4 * 2.0 * ellipe(1 - 0.25)


def perimeter_oracle(body):
    def speed(t):
        rho, drho, _ = body.radial(t)
        return math.hypot(rho, drho)

    return quad(speed, 0, 2 * math.pi, limit=400, epsabs=1e-13, epsrel=1e-13)[0]


class TestBodies:
    def test_circle(self):
        b = make_body("circle:1")
        assert b.min_curvature == pytest.approx(1.0)
        assert area(b) == pytest.approx(2 * math.pi, abs=1e-12)
        assert b.is_circle

    def test_ellipse_vertex_curvatures(self):
        b = ellipse(2, 1)
        np.testing.assert_allclose(b.curvature(np.array([0.0, math.pi / 2])), [2.0, 0.25], rtol=1e-12)
        assert b.min_curvature == pytest.approx(0.25, rel=1e-9)
        assert not b.is_circle

    def test_perturbed_disk_too_large(self):
        with pytest.raises(ConvexityError) as info:
            perturbed_disk(0.5, 3)
        assert info.value.curvature <= 0
        assert 0 <= info.value.theta < 2 * math.pi

    def test_nonpositive_radius(self):
        with pytest.raises(NonPositiveRadiusError):
            fourier_body(0.5, {2: 0.8})

    def test_exact_convexity_boundary_rejected(self):
        # rho = 1 + cos(3 t) / 10 has zero curvature at t = pi
        with pytest.raises(ConvexityError):
            make_body("fourier:1,a3=0.1")

    @pytest.mark.parametrize(
        "spec",
        ["ellipse:2", "blob:1", "fourier:", "fourier:1,c2=0.1", "ball:-1", "ellipse:1,-1"],
    )
    def test_bad_specs(self, spec):
        with pytest.raises(InvalidBodyError):
            make_body(spec)

    def test_spec_round_trip(self):
        for spec in ["ellipse:2.0,1.0", "fourier:1.0,a2=0.05,b3=0.02"]:
            assert make_body(spec).spec == spec
            assert make_body(make_body(spec).spec) == make_body(spec)

    def test_coefficient_sequence(self):
        b = make_body([1.0, 0.0, 0.0, 0.05])
        assert b == fourier_body(1.0, {2: 0.05})

    def test_ball_only_in_higher_dimension(self):
        assert make_body("ball:2", n=3) == BallGeometry(3, 2.0)
        with pytest.raises(DomainError):
            make_body("ellipse:2,1", n=3)

    def test_random_family_is_convex(self):
        bodies = random_convex_bodies(10, seed=1)
        assert len(bodies) == 10
        assert all(b.min_curvature > 0 and b.min_radius > 0 for b in bodies)


class TestFrames:
    def test_circle_frames(self):
        fr = boundary_frames(circle(1.0), 64)
        np.testing.assert_allclose(fr.kappa, 1.0, atol=1e-14)
        assert fr.ds.sum() == pytest.approx(2 * math.pi, abs=1e-12)

    def test_minimum_count(self):
        with pytest.raises(DomainError):
            boundary_frames(circle(1.0), 8)

    def test_ellipse_perimeter_converges(self):
        assert boundary_frames(ellipse(2, 1), 1024).ds.sum() == pytest.approx(ELLIPSE_PERIMETER, rel=1e-12)

    def test_frame_invariants(self):
        fr = boundary_frames(fourier_body(1.0, {2: 0.05}, {3: 0.02}), 128)
        np.testing.assert_allclose(np.linalg.norm(fr.normals, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.einsum("ij,ij->i", fr.normals, fr.tangents), 0.0, atol=1e-12)
        assert np.all(fr.kappa > 0)
        # outward: the normal points away from the origin for star-shaped bodies
        assert np.all(np.einsum("ij,ij->i", fr.normals, fr.points) > 0)
        one = fr[3]
        assert one.theta == fr.theta[3] and one.kappa == fr.kappa[3]

    def test_normal_matches_implicit_gradient(self):
        fr = boundary_frames(ellipse(2, 1), 32)
        grad = np.stack([fr.points[:, 0] / 4, fr.points[:, 1]], axis=1)
        np.testing.assert_allclose(fr.normals, grad / np.linalg.norm(grad, axis=1)[:, None], atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_turning_number_and_perimeter(self, seed):
        body = random_convex_bodies(1, seed=seed)[0]
        assert curvature_integral(body, 1) == pytest.approx(2 * math.pi, abs=1e-10)
        assert area(body) == pytest.approx(perimeter_oracle(body), rel=1e-8)


class TestMeasures:
    def test_circle(self):
        assert volume(circle(1.0)) == pytest.approx(math.pi)
        assert area(circle(1.0)) == pytest.approx(2 * math.pi)

    def test_ellipse_area(self):
        assert volume(ellipse(2, 1)) == pytest.approx(2 * math.pi, rel=1e-12)

    def test_ball_closed_forms(self):
        b = BallGeometry(3, 2.0)
        assert volume(b) == pytest.approx(32 * math.pi / 3)
        assert area(b) == pytest.approx(16 * math.pi)
        assert curvature_integral(BallGeometry(3, 1.7), 1) == pytest.approx(8 * math.pi * 1.7)
        assert curvature_integral(BallGeometry(4, 1.0), 2) == pytest.approx(6 * math.pi**2)

    def test_ball_rejects_bad_order(self):
        with pytest.raises(DomainError):
            BallGeometry(3, 1.0).curvature_integral(3)
        with pytest.raises(DomainError):
            curvature_integral(ellipse(2, 1), 2)

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 9), st.floats(0.1, 10))
    def test_ball_volume_area_relation(self, n, R):
        b = BallGeometry(n, R)
        assert n * b.volume() == pytest.approx(R * b.area(), rel=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.3, 3.0))
    def test_scaling_covariance(self, seed, t):
        body = random_convex_bodies(1, seed=seed)[0]
        big = body.scaled(t)
        assert volume(big) == pytest.approx(t**2 * volume(body), rel=1e-12)
        assert area(big) == pytest.approx(t * area(body), rel=1e-12)
        assert curvature_integral(big, 1) == pytest.approx(curvature_integral(body, 1), rel=1e-12)


class TestQuermassChain:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_ball_ratios_equal_radius(self, n):
        rep = quermassintegral_chain(BallGeometry(n, 1.3))
        np.testing.assert_allclose(list(rep.details["ratios"].values()), 1.3, rtol=1e-12)
        assert abs(rep.slack) <= 1e-12

    def test_ellipse(self):
        rep = quermassintegral_chain(ellipse(2, 1))
        assert rep.lhs == pytest.approx(ELLIPSE_PERIMETER / (2 * math.pi), rel=1e-12)
        assert rep.rhs == pytest.approx(math.sqrt(2), rel=1e-12)
        assert rep.slack > 0 and rep.details["holds"]

    def test_perturbed_disk(self):
        assert quermassintegral_chain(perturbed_disk(0.05, 2)).slack > 0

    def test_random_bodies(self):
        for body in random_convex_bodies(20, seed=3):
            assert quermassintegral_chain(body).details["min_slack"] >= -1e-8
