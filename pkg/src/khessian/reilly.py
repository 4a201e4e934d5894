"""Reilly-type identity and inequality, and the Alexandrov-Fenchel family.

Inputs come in three flavours:

* a grid solution: a :class:`~khessian.solver.SolveReport`, or a
  ``(MappedGrid, nodal values)`` pair;
* a :class:`~khessian.radial.RadialSolution` on an n-ball;
* a :class:`~khessian.geometry.BallGeometry`, meaning ``u = |x|^2 / 2`` in
  closed form.

Every check returns an :class:`~khessian.reports.InequalityReport` oriented
so that ``slack >= 0`` means the inequality holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .geometry import BallGeometry, ConvexBody2D, QUAD_NODES, area, curvature_integral, dimension, volume
from .grid import MappedGrid
from .radial import RadialSolution
from .reports import TOL_EQ_CLOSED_FORM, TOL_EQ_GRID, InequalityReport
from .solver import SolveReport
from .symfun import coefficient_E, elementary_symmetric_all, newton_tensor


def _grid_field(u):
    if isinstance(u, SolveReport):
        if u.grid is None:
            raise PreconditionError("solve report carries no grid")
        return u.grid, np.asarray(u.u, dtype=float)
    if isinstance(u, tuple) and len(u) == 2 and isinstance(u[0], MappedGrid):
        return u[0], np.asarray(u[1], dtype=float)
    raise DomainError(f"expected a solve report or (grid, values) pair, got {type(u).__name__}")


def _check_order(k: int, n: int, top: int) -> None:
    if int(k) != k or not 0 <= k <= top:
        raise DomainError(f"k={k} outside [0, {top}] for n={n}")


@dataclass
class BoundaryHessianSplit:
    """Per boundary node, the Hessian in the (tangent, normal) frame split as ``A + B``.

    ``B`` carries the curvature terms ``[[kappa u_n, -kappa u_t], [-kappa u_t, 0]]``;
    ``A`` is the remainder (tangential Hessian of the restriction, mixed and
    normal-normal second derivatives).
    """

    theta: np.ndarray
    kappa: np.ndarray
    u_t: np.ndarray
    u_n: np.ndarray
    rotated: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __len__(self):
        return len(self.theta)


def boundary_split(u) -> BoundaryHessianSplit:
    g, vals = _grid_field(u)
    H = g.hessians(vals)[g.boundary]
    frame = np.stack([g.tangents, g.normals], axis=1)  # rows: tangent, normal
    if np.any(np.abs(np.linalg.det(frame)) < 0.5):
        raise ArithmeticError("degenerate boundary frame")
    rotated = frame @ H @ np.swapaxes(frame, -1, -2)
    u_t = g.Dtau @ vals
    u_n = g.Dnu @ vals
    B = np.zeros_like(rotated)
    B[:, 0, 0] = g.kappa * u_n
    B[:, 0, 1] = B[:, 1, 0] = -g.kappa * u_t
    return BoundaryHessianSplit(g.theta.copy(), g.kappa.copy(), u_t, u_n, rotated, rotated - B, B)


# -- Reilly identity -----------------------------------------------------------
def _radial_sides(sol: RadialSolution, k: int):
    n, R = sol.n, sol.R
    lhs = (k + 1) * sol.integrate(lambda r: sol.sigma(r, k + 1))
    slope = float(sol.du(R))
    # on the sphere T_k(D^2 u) nu = C(n-1, k) (u'/R)^k nu
    rhs = BallGeometry(n, R).area() * math.comb(n - 1, k) * (slope / R) ** k * slope
    return lhs, rhs, slope


def _ball_sides(ball: BallGeometry, k: int):
    n, R = ball.n, ball.R
    lhs = (k + 1) * math.comb(n, k + 1) * ball.volume()
    rhs = ball.area() * math.comb(n - 1, k) * R
    return lhs, rhs


def _grid_sides(g: MappedGrid, vals, k: int):
    H = g.hessians(vals)
    sig = elementary_symmetric_all(np.linalg.eigvalsh(H))
    lhs = (k + 1) * g.integrate(sig[:, k + 1])
    T = newton_tensor(H[g.boundary], k)
    grad = np.stack([g.Gx[g.boundary] @ vals, g.Gy[g.boundary] @ vals], axis=-1)
    flux = np.einsum("bij,bj,bi->b", T, grad, g.normals)
    return lhs, g.integrate_boundary(flux)


def reilly_identity(u, k: int) -> InequalityReport:
    """``(k+1) int sigma_{k+1}(D^2 u)`` against ``int_bd T_k(D^2 u) grad u . nu``.

    Both sides agree exactly in the continuum, so ``slack`` is pure
    discretization error.
    """
    if isinstance(u, BallGeometry):
        _check_order(k, u.n, u.n - 1)
        lhs, rhs = _ball_sides(u, k)
        return InequalityReport.build("reilly_identity", lhs, rhs, TOL_EQ_CLOSED_FORM, {"closed_form": True})
    if isinstance(u, RadialSolution):
        _check_order(k, u.n, u.n - 1)
        lhs, rhs, _ = _radial_sides(u, k)
        return InequalityReport.build("reilly_identity", lhs, rhs, TOL_EQ_CLOSED_FORM, {"radial_quadrature": True})
    g, vals = _grid_field(u)
    _check_order(k, g.n, g.n - 1)
    lhs, rhs = _grid_sides(g, vals, k)
    return InequalityReport.build("reilly_identity", lhs, rhs, TOL_EQ_GRID, {"grid": g.resolution})


# -- boundary remainder ----------------------------------------------------------
def third_term_III(u, k: int = 1) -> float:
    """The boundary remainder of the Reilly inequality for constant Neumann data.

    For planar grid solutions (only ``k = 1`` is possible) this is
    ``sum_i E(i, k) int_bd kappa u_t^2 u_n^(k-1-i)`` with ``E(0, 1) = 1``,
    i.e. ``int_bd kappa |u_t|^2``.  Radial solutions and balls have no
    tangential gradient, so the term vanishes identically.
    """
    if isinstance(u, (BallGeometry, RadialSolution)):
        _check_order(k, u.n, u.n - 1)
        return 0.0
    g, vals = _grid_field(u)
    if k != 1:
        raise DomainError(f"planar solutions support k=1 only, got k={k}")
    u_t = g.Dtau @ vals
    return float(coefficient_E(0, k)) * g.integrate_boundary(g.kappa * u_t**2)


# -- Reilly inequality ---------------------------------------------------------
def reilly_inequality(u, k: int, c: float | None = None) -> InequalityReport:
    """``(k+1) int sigma_{k+1}(D^2 u) >= c^(k+1) int_bd sigma_k(h)``.

    ``c`` is the constant Neumann value.  It defaults to ``R`` for a ball,
    ``u'(R)`` for a radial solution and ``lambda`` for a classical solve
    with zero ``phi``.
    """
    if isinstance(u, BallGeometry):
        _check_order(k, u.n, u.n - 1)
        c = u.R if c is None else float(c)
        _require_positive(c)
        lhs, _ = _ball_sides(u, k)
        rhs = u.curvature_integral(k) * c ** (k + 1)
        return InequalityReport.build(
            "reilly_inequality", lhs, rhs, TOL_EQ_CLOSED_FORM, {"closed_form": True}, {"c": c, "III": 0.0}
        )
    if isinstance(u, RadialSolution):
        _check_order(k, u.n, u.n - 1)
        lhs, ident_rhs, slope = _radial_sides(u, k)
        c = slope if c is None else float(c)
        _require_positive(c)
        rhs = BallGeometry(u.n, u.R).curvature_integral(k) * c ** (k + 1)
        return InequalityReport.build(
            "reilly_inequality",
            lhs,
            rhs,
            TOL_EQ_CLOSED_FORM,
            {"radial_quadrature": True},
            {"c": c, "III": 0.0, "identity_rhs": ident_rhs},
        )
    g, vals = _grid_field(u)
    if g.n - 1 < k:
        raise DomainError(f"k={k} needs sigma_{k + 1} in dimension {g.n}")
    if c is None:
        if not isinstance(u, SolveReport) or u.mode == "eps":
            raise PreconditionError("constant Neumann value c is required")
        c = u.lambda_est
    c = float(c)
    _require_positive(c)
    lhs, ident_rhs = _grid_sides(g, vals, k)
    rhs = c ** (k + 1) * g.integrate_boundary(g.kappa if k == 1 else np.ones(g.ntheta))
    iii = third_term_III(u, k) if k == 1 else 0.0
    return InequalityReport.build(
        "reilly_inequality",
        lhs,
        rhs,
        TOL_EQ_GRID,
        {"grid": g.resolution},
        {
            "c": c,
            "III": iii,
            "identity_rhs": ident_rhs,
            # lhs - rhs - III vanishes in the continuum
            "ledger_residual": lhs - rhs - iii,
        },
    )


def _require_positive(c: float) -> None:
    if not c > 0:
        raise PreconditionError(f"Neumann value must be a positive constant, got {c}")


# -- geometric inequalities -------------------------------------------------------
def _resolution(body, M):
    return {"closed_form": True} if isinstance(body, BallGeometry) else {"quadrature_nodes": M}


def af_inequality(body, k: int = 1, M: int = QUAD_NODES, name: str = "alexandrov_fenchel") -> InequalityReport:
    """``Area^(k+1) >= n^k / C(n-1, k) * Vol^k * int_bd sigma_k(h)``."""
    n = dimension(body)
    if int(k) != k or not 1 <= k <= n - 1:
        raise DomainError(f"k={k} outside [1, {n - 1}]")
    A, V, W = area(body, M), volume(body, M), curvature_integral(body, k, M)
    lhs = A ** (k + 1)
    rhs = n**k / math.comb(n - 1, k) * V**k * W
    details = {"area": A, "volume": V, "curvature_integral": W, "k": k, "n": n}
    if isinstance(body, ConvexBody2D):
        details["circle"] = body.is_circle
    return InequalityReport.build(name, lhs, rhs, TOL_EQ_CLOSED_FORM, _resolution(body, M), details)


def minkowski_inequality(body, M: int = QUAD_NODES) -> InequalityReport:
    """``Area^2 >= n/(n-1) Vol int_bd H`` with ``H = sigma_1(h)``."""
    n = dimension(body)
    A, V, W = area(body, M), volume(body, M), curvature_integral(body, 1, M)
    lhs = A**2
    rhs = n / (n - 1) * V * W
    return InequalityReport.build(
        "minkowski",
        lhs,
        rhs,
        TOL_EQ_CLOSED_FORM,
        _resolution(body, M),
        {"area": A, "volume": V, "curvature_integral": W, "n": n},
    )


def nm_bridge_checks(u, body=None, c: float | None = None, k: int | None = None):
    """The two inequalities that chain into Alexandrov-Fenchel.

    For a classical solve with ``f = C(n, k)`` and ``phi = 0`` with boundary
    value ``c = lambda``:

    * ``(k+1) C(n, k+1) Vol >= c^(k+1) int_bd sigma_k(h)``
    * ``c Area / n >= int (sigma_k(D^2 u) / C(n, k))^(1/k)``

    Returns the pair of reports; the first one's ``details`` also carry the
    Alexandrov-Fenchel ratio implied by combining them.
    """
    if isinstance(u, BallGeometry):
        n, k = u.n, 1 if k is None else k
        c = u.R if c is None else float(c)
        vol, A, W = u.volume(), u.area(), u.curvature_integral(k)
        nm_int = vol  # sigma_k(I) = C(n, k)
        tol, res = TOL_EQ_CLOSED_FORM, {"closed_form": True}
    elif isinstance(u, RadialSolution):
        n, k = u.n, u.k if k is None else k
        c = float(u.du(u.R)) if c is None else float(c)
        ball = BallGeometry(n, u.R)
        vol, A, W = ball.volume(), ball.area(), ball.curvature_integral(k)
        nm_int = u.integrate(lambda r: (u.sigma(r, k) / math.comb(n, k)) ** (1.0 / k))
        tol, res = TOL_EQ_CLOSED_FORM, {"radial_quadrature": True}
    else:
        g, vals = _grid_field(u)
        n = g.n
        if k is None:
            if not isinstance(u, SolveReport):
                raise PreconditionError("k is required for a bare grid field")
            k = u.k
        if c is None:
            if not isinstance(u, SolveReport) or u.mode == "eps":
                raise PreconditionError("the classical lambda is required")
            c = u.lambda_est
        if k + 1 > n:
            raise DomainError(f"k={k} needs sigma_{k + 1} in dimension {n}")
        vol, A = g.volume, g.perimeter
        W = g.integrate_boundary(g.kappa)
        sig = elementary_symmetric_all(np.linalg.eigvalsh(g.hessians(vals)))[:, k]
        nm_int = g.integrate(np.clip(sig / math.comb(n, k), 0.0, None) ** (1.0 / k))
        tol, res = TOL_EQ_GRID, {"grid": g.resolution}
    if c is None or not math.isfinite(c):
        raise PreconditionError("the classical lambda is required")
    _require_positive(c)
    implied = (c * A / n) ** (k + 1) / vol ** (k + 1)
    first = InequalityReport.build(
        "nm_bridge_volume",
        (k + 1) * math.comb(n, k + 1) * vol,
        c ** (k + 1) * W,
        tol,
        res,
        {"c": c, "implied_af_factor": implied},
    )
    second = InequalityReport.build("nm_bridge_mean", c * A / n, nm_int, tol, res, {"c": c})
    return first, second
