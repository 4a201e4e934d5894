import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from khessian.errors import DomainError, PreconditionError
from khessian.fields import radial
from khessian.radial import radial_solve
from khessian.symfun import in_garding_cone


def ode_oracle(n, k, prof, R, r0=1e-5):
    """Integrate sigma_k(u'', u'/r, ..., u'/r) = f directly as an ODE for (u, u')."""
    a, b = math.comb(n - 1, k - 1), math.comb(n - 1, k)

    def rhs(r, y):
        v = y[1] / r
        return [y[1], (prof(r) - b * v**k) / (a * v ** (k - 1))]

    q0 = (prof(0.0) / math.comb(n, k)) ** (1.0 / k)
    r = np.linspace(r0, R, 41)
    sol = solve_ivp(rhs, (r0, R), [0.5 * q0 * r0**2, q0 * r0], t_eval=r, method="DOP853", rtol=1e-13, atol=1e-15)
    return r, sol.y[0], sol.y[1]


class TestClosedForms:
    def test_n3_k2(self):
        sol = radial_solve(3, 2, R=1.3, f=3.0)
        r = np.linspace(0, 1.3, 11)
        np.testing.assert_allclose(sol.du(r), r, atol=1e-13)
        np.testing.assert_allclose(sol.d2u(r), 1.0, atol=1e-13)
        assert sol.lam == pytest.approx(1.3)
        assert sol.mean() == pytest.approx(0.0, abs=1e-13)

    def test_n4_k2(self):
        sol = radial_solve(4, 2, R=2.0)
        r = np.linspace(0, 2, 9)
        np.testing.assert_allclose(sol.u(r) - sol.u(0.0), r**2 / 2, atol=1e-12)
        assert sol.lam == pytest.approx(2.0)

    def test_perturbed_boundary_condition(self):
        eps, phi = 0.3, 0.4
        sol = radial_solve(3, 2, R=1.0, eps=eps, phi=phi)
        assert float(sol.du(1.0)) == pytest.approx(-eps * float(sol.u(1.0)) + phi, abs=1e-13)
        assert sol.lam == pytest.approx(-eps * float(sol.u(1.0)), abs=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))),
        st.floats(0.5, 2.0),
        st.lists(st.floats(0.0, 1.0), min_size=0, max_size=2),
    )
    def test_equation_holds(self, nk, R, extra):
        n, k = nk
        f = radial([1.0, *extra])
        sol = radial_solve(n, k, R=R, f=f)
        r = np.linspace(0.05 * R, R, 7)
        np.testing.assert_allclose(sol.sigma(r, k), f.radial_profile(r), rtol=1e-9)
        assert np.all(in_garding_cone(sol.eigenvalues(r), k))
        assert sol.mean() == pytest.approx(0.0, abs=1e-10 * (1 + abs(float(sol.u(R)))))


class TestOdeOracle:
    @pytest.mark.parametrize("n, k", [(3, 2), (3, 3), (4, 2), (5, 3), (2, 1)])
    def test_matches_direct_integration(self, n, k):
        prof = lambda r: 3.0 * (1 + r * r) ** 2
        sol = radial_solve(n, k, R=1.0, f=prof)
        r, u, du = ode_oracle(n, k, prof, 1.0)
        np.testing.assert_allclose(sol.du(r), du, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(sol.u(r) - sol.u(r[0]), u - u[0], rtol=1e-10, atol=1e-12)


class TestErrors:
    @pytest.mark.parametrize("n, k", [(1, 1), (3, 0), (3, 4), (3, 1.5)])
    def test_bad_orders(self, n, k):
        with pytest.raises(DomainError):
            radial_solve(n, k)

    def test_bad_radius_and_eps(self):
        with pytest.raises(DomainError):
            radial_solve(3, 2, R=0.0)
        with pytest.raises(DomainError):
            radial_solve(3, 2, eps=0.0)

    def test_non_radial_field(self):
        with pytest.raises(DomainError):
            radial_solve(3, 2, f="poly:10=1")

    def test_nonpositive_rhs(self):
        with pytest.raises(PreconditionError):
            radial_solve(3, 2, f=lambda r: 1.0 - 2 * r)
