import json
import math

import numpy as np
import pytest

from khessian.errors import DomainError, PreconditionError
from khessian.fields import const, parse_field
from khessian.geometry import BallGeometry, circle, ellipse, perturbed_disk
from khessian.grid import MappedGrid
from khessian.reports import dumps
from khessian.solver import (
    SolveProblem,
    augmented_solve,
    continuation_solve,
    divergence_free_check,
    lambda_lower_bound,
    newton_solve_eps,
    residual,
    richardson,
)
from khessian.symfun import in_relaxed_cone


@pytest.fixture(scope="module")
def disk():
    return MappedGrid(circle(1.0), 16, 32)


@pytest.fixture(scope="module")
def oval():
    return MappedGrid(ellipse(2, 1), 16, 32)


def radial_quadratic(g, c):
    return 0.5 * (g.x**2 + g.y**2) + c


class TestResidual:
    @pytest.mark.parametrize("k", [1, 2])
    def test_radial_quadratic_is_exact(self, disk, k):
        p = SolveProblem(k, const(math.comb(2, k)), const(0.0), disk, eps=1.0)
        assert np.abs(residual(p, radial_quadratic(disk, -1.5))).max() < 1e-9

    def test_zero_field(self, disk):
        p = SolveProblem(2, const(1.0), const(0.0), disk, eps=1.0)
        r = residual(p, np.zeros(disk.size))
        np.testing.assert_allclose(r[disk.interior], -1.0)
        np.testing.assert_allclose(r[disk.boundary], 0.0)

    def test_manufactured_quadratic_converges(self):
        from khessian.manufactured import quadratic_manufactured

        errs = []
        for m in (16, 32, 64):
            g = MappedGrid(ellipse(2, 1), m, 2 * m)
            M = [[1.0, 0.3], [0.3, 0.8]]
            f, phi, u = quadratic_manufactured(g.body, M, 2, eps=0.5)
            errs.append(np.abs(residual(SolveProblem(2, f, phi, g, 0.5), g.evaluate(u))).max())
        assert math.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.3)

    def test_constant_shift_gauge(self, oval):
        p = SolveProblem(2, parse_field("poly:00=1,20=0.2"), parse_field("poly:01=0.1"), oval, eps=0.3)
        u = oval.evaluate(lambda x, y: 0.4 * x * x + 0.6 * y * y + 0.1 * x)
        d = residual(p, u + 2.0) - residual(p, u)
        # difference operators annihilate constants only up to round-off
        np.testing.assert_allclose(d[oval.interior], 0.0, atol=1e-10)
        np.testing.assert_allclose(d[oval.boundary], 0.6, atol=1e-10)
        lam_rows = residual(p, u + 2.0, lam=0.7) - residual(p, u, lam=0.7)
        np.testing.assert_allclose(lam_rows, 0.0, atol=1e-10)

    @pytest.mark.parametrize("k", [1, 2])
    def test_homogeneity(self, oval, k):
        t = 1.7
        u = oval.evaluate(lambda x, y: x * x + 0.5 * y * y + 0.1 * x**3)
        p = SolveProblem(k, const(1.0), const(0.0), oval, eps=1.0)
        pt = SolveProblem(k, const(t**k), const(0.0), oval, eps=1.0)
        np.testing.assert_allclose(
            residual(pt, t * u)[oval.interior], t**k * residual(p, u)[oval.interior], rtol=1e-12, atol=1e-12
        )


class TestNewtonEps:
    def test_disk_k2(self, disk):
        rep = newton_solve_eps(SolveProblem(2, const(1.0), const(0.0), disk, eps=0.5))
        np.testing.assert_allclose(rep.raw_u, radial_quadratic(disk, -2.5), atol=1e-8)
        assert rep.lambda_est == pytest.approx(1.0, abs=1e-8)
        assert rep.admissible and rep.residual_norm < 1e-10

    def test_disk_laplace(self, disk):
        rep = newton_solve_eps(SolveProblem(1, const(2.0), const(0.0), disk, eps=1.0))
        np.testing.assert_allclose(rep.raw_u, radial_quadratic(disk, -1.5), atol=1e-8)

    def test_mean_zero_and_admissible(self, oval):
        rep = newton_solve_eps(SolveProblem(2, parse_field("poly:00=1,10=0.3"), const(0.2), oval, eps=0.25))
        assert abs(oval.mean(rep.u)) <= 1e-12 * np.abs(rep.u).max()
        H = oval.hessians(rep.u)
        assert np.all(in_relaxed_cone(np.linalg.eigvalsh(H), 2))
        assert np.all(np.trace(H, axis1=1, axis2=2) > 0)

    def test_needs_positive_eps(self, disk):
        with pytest.raises(PreconditionError):
            newton_solve_eps(SolveProblem(1, const(2.0), const(0.0), disk, eps=0.0))


class TestClassical:
    def test_ball_lambda_is_radius(self):
        g = MappedGrid(circle(1.5), 12, 24)
        p = SolveProblem(2, const(1.0), const(0.0), g)
        cont = continuation_solve(p)
        aug = augmented_solve(p)
        assert cont.lambda_est == pytest.approx(1.5, abs=1e-6)
        assert aug.lambda_est == pytest.approx(1.5, abs=1e-8)
        exact = radial_quadratic(g, 0.0)
        np.testing.assert_allclose(aug.u, exact - g.mean(exact), atol=1e-8)
        assert len(cont.eps_schedule_trace) == 11

    def test_k1_divergence_identity(self):
        g = MappedGrid(circle(1.0), 32, 64)
        p = SolveProblem(1, parse_field("poly:00=1,10=0.3"), parse_field("poly:01=0.2"), g)
        # int f = pi, int phi = 0, Area = 2 pi
        assert augmented_solve(p).lambda_est == pytest.approx(0.5, abs=1e-4)

    def test_initializations_agree(self, oval):
        p = SolveProblem(2, parse_field("poly:00=1,10=0.3"), parse_field("poly:01=0.2"), oval)
        a = augmented_solve(p, init="quadratic")
        b = augmented_solve(p, init="laplace")
        assert a.lambda_est == pytest.approx(b.lambda_est, abs=1e-8)
        assert np.std(a.u - b.u) <= 1e-8 * np.abs(a.u).max()

    def test_continuation_matches_augmented(self, oval):
        p = SolveProblem(1, const(1.0), const(0.0), oval)
        c = continuation_solve(p, schedule=[0.02, 0.01])
        a = augmented_solve(p)
        assert c.lambda_est == pytest.approx(a.lambda_est, abs=1e-5)

    def test_lambda_meets_lower_bound(self, oval):
        f, phi = parse_field("poly:00=1,10=0.3"), parse_field("poly:01=0.2")
        rep = augmented_solve(SolveProblem(2, f, phi, oval))
        assert rep.lambda_est >= lambda_lower_bound(oval.body, 2, f, phi) - 1e-3

    def test_unknown_init(self, disk):
        with pytest.raises(DomainError):
            augmented_solve(SolveProblem(1, const(2.0), const(0.0), disk), init="random")

    @pytest.mark.parametrize("schedule", [[0.5], [0.5, 0.5], [0.1, 0.2], [0.5, -0.1]])
    def test_bad_schedule(self, disk, schedule):
        with pytest.raises(DomainError):
            continuation_solve(SolveProblem(1, const(2.0), const(0.0), disk), schedule=schedule)

    def test_report_json(self, disk):
        rep = augmented_solve(SolveProblem(1, const(2.0), const(0.0), disk))
        d = json.loads(dumps(rep))
        for key in ["lambda", "residual_norm", "newton_iters", "eps_trace", "u_stats", "admissible", "grid"]:
            assert key in d
        assert d["grid"] == "16x32"


class TestProblemValidation:
    def test_negative_eps(self, disk):
        with pytest.raises(DomainError):
            SolveProblem(1, const(1.0), const(0.0), disk, eps=-1.0)

    def test_nonpositive_f(self, disk):
        with pytest.raises(PreconditionError):
            SolveProblem(1, parse_field("poly:00=0.5,10=1"), const(0.0), disk)

    @pytest.mark.parametrize("k", [0, 3, 1.5])
    def test_bad_k(self, disk, k):
        with pytest.raises(DomainError):
            SolveProblem(k, const(1.0), const(0.0), disk)


class TestLambdaLowerBound:
    def test_ball(self):
        assert lambda_lower_bound(BallGeometry(3, 2.0), 2, const(3.0), const(0.0)) == pytest.approx(2.0)
        assert lambda_lower_bound(circle(1.0), 2, const(1.0), const(0.0)) == pytest.approx(1.0)

    def test_shift(self):
        body = perturbed_disk(0.05, 3)
        f, phi = parse_field("poly:00=1,11=0.2"), parse_field("poly:10=0.1")
        a = lambda_lower_bound(body, 1, f, phi)
        b = lambda_lower_bound(body, 1, f, phi + 0.7)
        assert a - b == pytest.approx(0.7, abs=1e-12)

    def test_unit_disk_k_equals_n(self):
        assert lambda_lower_bound(circle(1.0), 2, const(1.0), const(0.0)) == pytest.approx(1.0)
        # (f / C(2,2))^(1/2) = 1, so the bound is 2 * pi / (2 pi) = 1 for f = 1
        assert lambda_lower_bound(circle(1.0), 2, const(0.25), const(0.0)) == pytest.approx(0.5)

    def test_ball_needs_radial(self):
        with pytest.raises(DomainError):
            lambda_lower_bound(BallGeometry(3, 1.0), 2, parse_field("poly:10=1"), const(0.0))

    def test_richardson(self):
        assert richardson(1 + 4e-2, 1 + 1e-2) == pytest.approx(1.0)
        assert richardson(1 + 2e-2, 1 + 1e-2, order=1.0) == pytest.approx(1.0)


class TestDivergenceFree:
    def test_quadratic_round_off(self):
        g = MappedGrid(ellipse(2, 1), 16, 32)
        for k in (0, 1):
            assert divergence_free_check(g, parse_field("poly:20=1,11=0.5,02=2"), k).maxima[0] < 1e-10

    def test_quartic_second_order(self):
        grids = [MappedGrid(circle(1.0), m, 2 * m) for m in (16, 32, 64)]
        chk = divergence_free_check(grids, parse_field("poly:40=1,04=1"), 1)
        assert chk.order == pytest.approx(2.0, abs=0.3)

    def test_exp_second_order(self):
        # the coarsest ellipse grids are still pre-asymptotic for exp
        grids = [MappedGrid(ellipse(2, 1), m, 2 * m) for m in (32, 64, 128)]
        u = lambda x, y: np.exp(x)
        hess = lambda x, y: np.exp(x)[..., None, None] * np.array([[1.0, 0.0], [0.0, 0.0]])
        chk = divergence_free_check(grids, u, 1, hessian=hess)
        assert chk.order == pytest.approx(2.0, abs=0.3)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            divergence_free_check(MappedGrid(circle(1.0), 8, 16), parse_field("poly:20=1"), 2)
