"""Semi-analytic radial solutions on n-dimensional balls.

For ``u = u(r)`` the Hessian has eigenvalues ``u''`` and ``u'/r`` (the
latter ``n - 1`` times), and the equation integrates once to

    r^(n-k) (u')^k = k / C(n-1, k-1) * int_0^r t^(n-1) f(t) dt.

Writing the right-hand integral as ``r^n G(r)`` with
``G(r) = int_0^1 t^(n-1) f(r t) dt`` gives ``u' = r q(r)`` where
``q = (k G / C(n-1, k-1))^(1/k)``, a smooth expression down to ``r = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError
from .fields import Field, parse_field
from .geometry import BallGeometry
from .symfun import elementary_symmetric_all

GAUSS_NODES = 96


def _profile(f) -> Callable:
    if callable(f) and not isinstance(f, Field):
        return f
    fld = parse_field(f)
    if not fld.is_radial:
        raise DomainError(f"radial solve needs a radial profile, got {fld.spec!r}")
    return fld.radial_profile


@dataclass
class RadialSolution:
    """Radial solution ``u(r) = U(r) + offset`` with ``U(0) = 0``.

    For the classical problem ``offset`` makes the volume mean zero; for the
    perturbed one it enforces ``u'(R) = -eps u(R) + phi``.
    """

    n: int
    k: int
    R: float
    profile: Callable
    phi: float
    eps: float | None
    lam: float = float("nan")
    offset: float = 0.0

    def __post_init__(self):
        t, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
        self._t, self._w = 0.5 * (t + 1), 0.5 * w
        self._c = math.comb(self.n - 1, self.k - 1)

    def _q(self, r):
        r = np.asarray(r, dtype=float)
        vals = np.asarray(self.profile(r[..., None] * self._t), dtype=float)
        if np.any(vals <= 0):
            raise PreconditionError("radial right-hand side must be positive")
        G = np.sum(self._w * self._t ** (self.n - 1) * vals, axis=-1)
        return (self.k * G / self._c) ** (1.0 / self.k)

    def du(self, r):
        r = np.asarray(r, dtype=float)
        return r * self._q(r)

    def d2u(self, r):
        # from differentiating r^(n-k) (u')^k: u'' = f / (C q^(k-1)) - (n-k)/k q
        r = np.asarray(r, dtype=float)
        q = self._q(r)
        f = np.asarray(self.profile(r), dtype=float)
        return f / (self._c * q ** (self.k - 1)) - (self.n - self.k) / self.k * q

    def _U(self, r):
        r = np.asarray(r, dtype=float)
        return r * np.sum(self._w * self.du(r[..., None] * self._t), axis=-1)

    def u(self, r):
        return self._U(r) + self.offset

    def mean(self) -> float:
        """Volume mean of ``u`` over the ball."""
        # (n / R^n) int_0^R U r^(n-1) dr = U(R) - R^(-n) int_0^R U'(r) r^n dr
        R = self.R
        moment = R * np.sum(self._w * self.du(R * self._t) * (R * self._t) ** self.n)
        return float(self._U(R) - moment / R**self.n + self.offset)

    def eigenvalues(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        second = self.d2u(r)
        first = self._q(r)
        lam = np.repeat(first[..., None], self.n, axis=-1)
        lam[..., 0] = second
        return lam

    def sigma(self, r, j: int):
        """``sigma_j(D^2 u)`` at radius ``r``."""
        return elementary_symmetric_all(self.eigenvalues(r))[..., j]

    def integrate(self, func, nodes: int = GAUSS_NODES) -> float:
        """``int_B func(r) dx`` for a radial integrand."""
        t, w = np.polynomial.legendre.leggauss(nodes)
        r = 0.5 * self.R * (t + 1)
        shell = BallGeometry(self.n, self.R).area() / self.R ** (self.n - 1)
        return float(0.5 * self.R * np.sum(w * shell * r ** (self.n - 1) * func(r)))

    def mesh(self, points: int = 257):
        """Sample ``(r, u, u', u'')`` on a uniform radial mesh."""
        r = np.linspace(0.0, self.R, points)
        return r, self.u(r), self.du(r), self.d2u(r)


def radial_solve(n: int, k: int, R: float = 1.0, f=None, eps: float | None = None, phi: float = 0.0) -> RadialSolution:
    """Radial solution of ``sigma_k(D^2 u) = f(|x|)`` on the ball ``B_R``.

    With ``eps=None`` the classical problem ``u_nu = lambda + phi`` is solved
    and ``u`` is normalized to zero mean; otherwise ``u_nu = -eps u + phi``
    and ``lam`` holds the boundary value of ``-eps u``.  ``f`` defaults to
    ``C(n, k)``, for which ``u = r^2 / 2 + const``.
    """
    if n < 2 or int(k) != k or not 1 <= k <= n:
        raise DomainError(f"need n >= 2 and 1 <= k <= n, got n={n}, k={k}")
    if R <= 0:
        raise DomainError(f"radius must be positive, got {R}")
    if eps is not None and eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    prof = _profile(math.comb(n, k) if f is None else f)
    sol = RadialSolution(n, k, float(R), prof, float(phi), eps)
    slope = float(sol.du(R))
    if eps is None:
        sol.offset = 0.0
        sol.offset = -sol.mean()
    else:
        sol.offset = (phi - slope) / eps - float(sol._U(R))
    sol.lam = slope - phi
    return sol
