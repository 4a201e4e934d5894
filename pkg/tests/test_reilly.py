import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ellipe

from khessian.errors import DomainError, PreconditionError
from khessian.geometry import BallGeometry, circle, ellipse, perturbed_disk, random_convex_bodies
from khessian.grid import MappedGrid
from khessian.radial import radial_solve
from khessian.reilly import (
    af_inequality,
    boundary_split,
    minkowski_inequality,
    nm_bridge_checks,
    reilly_identity,
    reilly_inequality,
    third_term_III,
)
from khessian.solver import SolveProblem, augmented_solve, newton_solve_eps


def classical(body, m=16, k=1):
    g = MappedGrid(body, m, 2 * m)
    return augmented_solve(SolveProblem(k, math.comb(2, k), 0.0, g))


@pytest.fixture(scope="module")
def ellipse_solve():
    return classical(ellipse(2, 1), 32)


@pytest.fixture(scope="module")
def disk_grid():
    return MappedGrid(circle(1.0), 16, 32)


class TestBoundarySplit:
    def test_radial_quadratic(self, disk_grid):
        g = disk_grid
        sp = boundary_split((g, 0.5 * (g.x**2 + g.y**2)))
        assert len(sp) == g.ntheta
        np.testing.assert_allclose(sp.u_n, 1.0, atol=1e-9)
        np.testing.assert_allclose(sp.u_t, 0.0, atol=1e-9)
        np.testing.assert_allclose(sp.B[:, 0, 0], 1.0, atol=1e-9)
        np.testing.assert_allclose(sp.A[:, 1, 1], 1.0, atol=1e-9)
        np.testing.assert_allclose(sp.A[:, 0, 0], 0.0, atol=1e-9)

    def test_linear(self, disk_grid):
        g = disk_grid
        sp = boundary_split((g, 1 + 2 * g.x - g.y))
        np.testing.assert_allclose(sp.A + sp.B, 0.0, atol=1e-9)

    def test_normal_normal_curvature_entry_vanishes(self, ellipse_solve):
        sp = boundary_split(ellipse_solve)
        assert np.all(sp.B[:, 1, 1] == 0.0)
        np.testing.assert_allclose(sp.A + sp.B, sp.rotated, atol=1e-14)

    def test_manufactured_quadratic(self):
        M = np.array([[1.0, 0.3], [0.3, 0.6]])
        errs = []
        for m in (16, 32, 64):
            g = MappedGrid(ellipse(2, 1), m, 2 * m)
            sp = boundary_split((g, 0.5 * (M[0, 0] * g.x**2 + 2 * M[0, 1] * g.x * g.y + M[1, 1] * g.y**2)))
            frame = np.stack([g.tangents, g.normals], axis=1)
            errs.append(np.abs(sp.A + sp.B - frame @ M @ np.swapaxes(frame, -1, -2)).max())
        assert math.log2(errs[1] / errs[2]) > 1.7

    def test_rejects_other_inputs(self):
        with pytest.raises(DomainError):
            boundary_split(np.zeros(4))


class TestReillyIdentity:
    def test_exact_disk_field(self):
        g = MappedGrid(circle(1.0), 32, 64)
        rep = reilly_identity((g, 0.5 * (g.x**2 + g.y**2)), 1)
        assert rep.lhs == pytest.approx(2 * math.pi, abs=1e-8)
        assert rep.rhs == pytest.approx(2 * math.pi, abs=1e-8)

    def test_linear(self, disk_grid):
        g = disk_grid
        rep = reilly_identity((g, 3 * g.x + g.y), 1)
        assert abs(rep.lhs) < 1e-9 and abs(rep.rhs) < 1e-9

    def test_mismatch_decays(self):
        mism = [abs(reilly_identity(classical(ellipse(2, 1), m), 1).slack) for m in (16, 32)]
        assert mism[1] < mism[0] / 2

    @pytest.mark.parametrize("n, k", [(3, 1), (3, 2), (4, 2), (5, 3), (6, 5)])
    def test_ball_and_radial(self, n, k):
        assert abs(reilly_identity(BallGeometry(n, 1.4), k).relative_slack) < 1e-13
        sol = radial_solve(n, k, R=1.1, f=lambda r: math.comb(n, k) * (1 + r * r))
        assert abs(reilly_identity(sol, k).relative_slack) < 1e-10

    def test_order_too_high(self, disk_grid):
        with pytest.raises(DomainError):
            reilly_identity((disk_grid, disk_grid.x), 2)
        with pytest.raises(DomainError):
            reilly_identity(BallGeometry(3, 1.0), 3)


class TestReillyInequality:
    @pytest.mark.parametrize("n, k", [(2, 1), (3, 1), (3, 2), (4, 3), (6, 2)])
    def test_ball_equality(self, n, k):
        rep = reilly_inequality(BallGeometry(n, 1.2), k)
        assert rep.equality and rep.slack >= -1e-8
        both = n * math.comb(n - 1, k) * BallGeometry(n, 1.2).volume()
        assert rep.lhs == pytest.approx(both, rel=1e-13)

    def test_ellipse_strict(self, ellipse_solve):
        rep = reilly_inequality(ellipse_solve, 1)
        assert rep.slack > 0 and not rep.equality
        assert rep.details["III"] > 0
        assert abs(rep.details["ledger_residual"]) < 1e-2 * rep.lhs

    def test_perturbed_disk_strict(self):
        assert reilly_inequality(classical(perturbed_disk(0.05, 3)), 1).slack > 0

    def test_ledger_residual_decays(self):
        res = [abs(reilly_inequality(classical(ellipse(2, 1), m), 1).details["ledger_residual"]) for m in (16, 32)]
        assert res[1] < res[0] / 2

    def test_nonpositive_constant(self, ellipse_solve):
        with pytest.raises(PreconditionError):
            reilly_inequality(ellipse_solve, 1, c=0.0)
        with pytest.raises(PreconditionError):
            reilly_inequality(BallGeometry(3, 1.0), 1, c=-1.0)

    def test_eps_report_needs_constant(self, disk_grid):
        rep = newton_solve_eps(SolveProblem(1, 2.0, 0.0, disk_grid, eps=1.0))
        with pytest.raises(PreconditionError):
            reilly_inequality(rep, 1)

    def test_radial_higher_k(self):
        sol = radial_solve(4, 2, R=1.0, f=lambda r: 6.0 * (1 + 0.5 * r * r))
        rep = reilly_inequality(sol, 2)
        assert rep.slack >= -1e-8


class TestThirdTerm:
    def test_balls_vanish(self):
        assert third_term_III(BallGeometry(4, 2.0), 2) == 0.0
        assert third_term_III(radial_solve(3, 2), 1) == 0.0

    def test_ellipse_positive(self, ellipse_solve):
        assert third_term_III(ellipse_solve) > 0

    def test_disk_solution_vanishes(self):
        assert abs(third_term_III(classical(circle(1.0)))) < 1e-12

    def test_planar_higher_k(self, ellipse_solve):
        with pytest.raises(DomainError):
            third_term_III(ellipse_solve, 2)


class TestGeometricInequalities:
    def test_circle_isoperimetric_equality(self):
        rep = af_inequality(circle(1.0))
        assert rep.equality and abs(rep.relative_slack) < 1e-10

    def test_ellipse_values(self):
        rep = af_inequality(ellipse(2, 1))
        L = 8.0 * ellipe(0.75)
        assert rep.lhs == pytest.approx(L**2, rel=1e-10)
        assert rep.rhs == pytest.approx(8 * math.pi**2, rel=1e-10)
        assert rep.lhs == pytest.approx(93.866, abs=1e-3)
        assert rep.rhs == pytest.approx(78.957, abs=1e-3)
        speed = lambda t: math.hypot(2 * math.sin(t), math.cos(t))
        L_quad = quad(speed, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        assert rep.details["area"] == pytest.approx(L_quad, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_ball_equality(self, n):
        for k in range(1, n):
            rep = af_inequality(BallGeometry(n, 0.8), k)
            assert abs(rep.relative_slack) < 1e-12 and rep.equality

    def test_ball3_closed_form(self):
        R = 1.5
        rep = af_inequality(BallGeometry(3, R), 1)
        assert rep.lhs == pytest.approx(16 * math.pi**2 * R**4, rel=1e-13)
        assert rep.rhs == pytest.approx(16 * math.pi**2 * R**4, rel=1e-13)

    def test_random_family(self):
        bodies = random_convex_bodies(50, seed=11) + [circle(0.7), circle(1.9)]
        for body in bodies:
            rep = af_inequality(body)
            assert rep.slack >= -1e-10
            assert rep.equality == body.is_circle

    @pytest.mark.parametrize("body", [ellipse(2, 1), circle(1.0), perturbed_disk(0.05, 3), BallGeometry(3, 1.1)])
    def test_minkowski_matches_af(self, body):
        a, m = af_inequality(body, 1), minkowski_inequality(body)
        assert m.lhs == pytest.approx(a.lhs, rel=1e-12)
        assert m.rhs == pytest.approx(a.rhs, rel=1e-12)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            af_inequality(ellipse(2, 1), 2)


class TestBridge:
    def test_ball_equality(self):
        vol_rep, mean_rep = nm_bridge_checks(BallGeometry(3, 1.3), k=1)
        assert vol_rep.equality and mean_rep.equality
        assert mean_rep.rhs == pytest.approx(1.3 * BallGeometry(3, 1.3).area() / 3)

    def test_radial(self):
        vol_rep, mean_rep = nm_bridge_checks(radial_solve(4, 2, R=1.0))
        assert vol_rep.equality and mean_rep.equality

    def test_ellipse(self, ellipse_solve):
        vol_rep, mean_rep = nm_bridge_checks(ellipse_solve)
        assert vol_rep.slack > 0 and not vol_rep.equality
        # for k = 1 the mean bridge is the divergence identity: only
        # discretization error in lambda remains
        assert abs(mean_rep.relative_slack) < 0.02 * vol_rep.relative_slack
        # chaining the two bridges eliminates c and leaves the AF ratio
        af = af_inequality(ellipse(2, 1))
        chained = (vol_rep.lhs / vol_rep.rhs) * (mean_rep.lhs / mean_rep.rhs) ** 2
        assert chained == pytest.approx(af.lhs / af.rhs, rel=1e-3)

    def test_missing_lambda(self, disk_grid):
        with pytest.raises(PreconditionError):
            nm_bridge_checks((disk_grid, disk_grid.x))
        rep = newton_solve_eps(SolveProblem(1, 2.0, 0.0, disk_grid, eps=1.0))
        with pytest.raises(PreconditionError):
            nm_bridge_checks(rep)
