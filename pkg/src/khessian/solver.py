"""Newton solvers for the perturbed and classical Neumann problems.

The perturbed problem is

    sigma_k(D^2 u) = f in the body,    u_nu = -eps * u + phi on the boundary,

and the classical one replaces the boundary condition by
``u_nu = lambda + phi`` with the constant ``lambda`` unknown.

Both are solved on the same bordered system.  The unknowns are a field
``w`` with zero volume mean and a scalar ``mu``; ``u = w - mu / eps`` for
``eps > 0`` and ``lambda = mu`` for ``eps = 0``.  The boundary rows read
``w_nu + eps * w - mu - phi``.  Keeping the large constant ``-mu / eps`` out
of the nodal values avoids cancellation in the finite differences when
``eps`` is small.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import (
    ConeBreakdownError,
    ContinuationDivergenceError,
    DomainError,
    NonConvergenceError,
    PreconditionError,
    SingularSystemError,
)
from .fields import Field, parse_field
from .grid import MappedGrid
from .symfun import elementary_symmetric_all, in_relaxed_cone, newton_tensor

log = logging.getLogger(__name__)

TOL_NEWTON_EPS = 1e-10
TOL_NEWTON_AUGMENTED = 1e-9
MAX_HALVINGS = 30
MAX_NEWTON_ITERS = 50
DEFAULT_SCHEDULE = tuple(0.5 * 2.0**-j for j in range(11))
# Residual rows are also accepted when they sit at the round-off floor
# |F_i| <= FLOOR_FACTOR * machine_eps * (|J| |z|)_i of the linearization.
FLOOR_FACTOR = 256.0


@dataclass
class SolveProblem:
    k: int
    f: Field
    phi: Field
    grid: MappedGrid
    eps: float = 0.0

    def __post_init__(self):
        self.f = parse_field(self.f)
        self.phi = parse_field(self.phi)
        n = self.grid.n
        if int(self.k) != self.k or not 1 <= self.k <= n:
            raise DomainError(f"k={self.k} outside [1, {n}]")
        if self.eps < 0 or not math.isfinite(self.eps):
            raise DomainError(f"eps must be finite and >= 0, got {self.eps}")
        self.f_nodes = self.grid.evaluate(self.f)
        if np.any(self.f_nodes <= 0):
            raise PreconditionError(f"f must be positive, min nodal value {self.f_nodes.min():.6g}")
        g = self.grid
        self.phi_nodes = np.asarray(self.phi(g.x[g.boundary], g.y[g.boundary]), dtype=float)

    def with_eps(self, eps: float) -> "SolveProblem":
        return SolveProblem(self.k, self.f, self.phi, self.grid, eps)


@dataclass
class EpsStage:
    eps: float
    lambda_eps: float
    grad_sup: float
    newton_iters: int
    residual_norm: float

    def to_dict(self):
        return {"eps": self.eps, "lambda_eps": self.lambda_eps, "grad_sup": self.grad_sup}


@dataclass
class SolveReport:
    """Result of a solve.

    ``u`` is normalized to zero volume mean; for a perturbed solve the raw
    solution is ``u + offset``.
    """

    u: np.ndarray
    lambda_est: float
    residual_norm: float
    admissible: bool
    newton_iters: int
    eps_schedule_trace: list = field(default_factory=list)
    offset: float = 0.0
    mode: str = "eps"
    k: int = 1
    eps: float = 0.0
    grid: MappedGrid | None = None
    grad_sup: float = float("nan")
    admissible_interior: bool = True
    condition_estimate: float = float("nan")

    @property
    def raw_u(self) -> np.ndarray:
        return self.u + self.offset

    def to_dict(self) -> dict:
        out = {
            "lambda": self.lambda_est,
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
            "eps_trace": [s.to_dict() for s in self.eps_schedule_trace],
            "u_stats": {
                "min": float(self.u.min()),
                "max": float(self.u.max()),
                "mean": self.grid.mean(self.u) if self.grid is not None else float(self.u.mean()),
            },
            "mode": self.mode,
            "k": self.k,
            "eps": self.eps,
            "admissible": self.admissible,
            "grad_sup": self.grad_sup,
        }
        if self.grid is not None:
            out["grid"] = self.grid.resolution
        return out


def initial_constant(k: int, n: int, fmax: float) -> float:
    """A with sigma_k(D^2(A|x|^2)) = (2A)^k C(n, k) = max f."""
    return 0.5 * (fmax / math.comb(n, k)) ** (1.0 / k)


class _BorderedNewton:
    def __init__(self, problem: SolveProblem, eps: float, tol: float):
        self.p = problem
        self.g = problem.grid
        self.eps = float(eps)
        self.tol = tol
        g = self.g
        N = g.size
        self.N = N
        self.nint = len(g.interior)
        self.q = g.volume_weights / g.volume
        self.border_col = sp.csr_matrix(
            (-np.ones(len(g.boundary)), (g.boundary, np.zeros(len(g.boundary), dtype=int))), shape=(N, 1)
        )
        self.q_row = sp.csr_matrix(self.q[None, :])
        rows_b = sp.vstack([sp.csr_matrix((self.nint, N)), g.Dnu]).tocsr()
        self.boundary_block = (rows_b + sp.diags(self.eps * g.is_boundary.astype(float))).tocsr()
        self.abs_parts = [abs(g.Dxx), abs(g.Dxy), abs(g.Dyy)]

    def residual(self, w, mu, H=None):
        g, p = self.g, self.p
        if H is None:
            H = g.hessians(w)
        F = np.empty(self.N + 1)
        sig = elementary_symmetric_all(np.linalg.eigvalsh(H[g.interior]))
        F[g.interior] = sig[:, p.k] - p.f_nodes[g.interior]
        F[g.boundary] = g.Dnu @ w + self.eps * w[g.boundary] - mu - p.phi_nodes
        F[self.N] = self.q @ w
        return F, H

    def cone_ok(self, H) -> bool:
        lam = np.linalg.eigvalsh(H[self.g.interior])
        return bool(np.all(in_relaxed_cone(lam, self.p.k)))

    def jacobian(self, H):
        g, k = self.g, self.p.k
        T = newton_tensor(H, k - 1)
        mask = (~g.is_boundary).astype(float)
        txx, txy, tyy = mask * T[:, 0, 0], mask * T[:, 0, 1], mask * T[:, 1, 1]
        J = sp.diags(txx) @ g.Dxx + sp.diags(2 * txy) @ g.Dxy + sp.diags(tyy) @ g.Dyy + self.boundary_block
        absJ = (
            sp.diags(np.abs(txx)) @ self.abs_parts[0]
            + sp.diags(np.abs(2 * txy)) @ self.abs_parts[1]
            + sp.diags(np.abs(tyy)) @ self.abs_parts[2]
            + abs(self.boundary_block)
        )
        full = sp.bmat([[J, self.border_col], [self.q_row, None]], format="csc")
        return full, absJ

    def floor(self, absJ, w, mu, F):
        # Round-off floor of each residual row at the current iterate.
        aw = np.abs(w)
        fl = np.empty(self.N + 1)
        fl[: self.N] = absJ @ aw
        fl[self.g.boundary] += abs(mu) + np.abs(self.p.phi_nodes)
        fl[self.g.interior] += np.abs(self.p.f_nodes[self.g.interior])
        fl[self.N] = self.q @ aw
        return FLOOR_FACTOR * np.finfo(float).eps * fl

    def solve(self, w, mu, max_iter=MAX_NEWTON_ITERS):
        trace = []
        F, H = self.residual(w, mu)
        cond = float("nan")
        for it in range(max_iter + 1):
            A, absJ = self.jacobian(H)
            tolerance = self.tol + self.floor(absJ, w, mu, F)
            nrm = float(np.abs(F).max())
            trace.append(nrm)
            if np.all(np.abs(F) <= tolerance):
                return w, mu, it, nrm, trace, cond
            if it == max_iter:
                break
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error")
                    lu, dz = _solve_equilibrated(A, -F)
            except (RuntimeError, Warning) as exc:
                raise SingularSystemError(f"bordered Jacobian is singular: {exc}", condition=float("inf"), trace=trace) from exc
            diag_u = np.abs(lu.U.diagonal())
            cond = float(diag_u.max() / diag_u.min()) if diag_u.min() > 0 else float("inf")
            if not np.all(np.isfinite(dz)):
                raise SingularSystemError("bordered Jacobian solve produced non-finite values", condition=cond, trace=trace)
            dw, dmu = dz[: self.N], dz[self.N]
            base = np.linalg.norm(F)
            t = 1.0
            cone_failed = False
            for _ in range(MAX_HALVINGS + 1):
                w_t, mu_t = w + t * dw, mu + t * dmu
                F_t, H_t = self.residual(w_t, mu_t)
                if not self.cone_ok(H_t):
                    cone_failed = True
                elif np.linalg.norm(F_t) < base:
                    break
                else:
                    cone_failed = False
                t *= 0.5
            else:
                if cone_failed:
                    raise ConeBreakdownError("line search could not stay in the admissible cone", trace=trace)
                raise NonConvergenceError(
                    f"line search stalled at residual {nrm:.3e} after {it} Newton steps", trace=trace
                )
            log.debug("newton it=%d residual=%.3e step=%.3g", it, nrm, t)
            w, mu, F, H = w_t, mu_t, F_t, H_t
        raise NonConvergenceError(f"no convergence in {max_iter} Newton steps (residual {trace[-1]:.3e})", trace=trace)


def _solve_equilibrated(A, b, refinements: int = 3):
    # Rows mix 1/h^2, 1/h and 1/N scales; equilibrate them and polish the
    # LU solution with a few steps of iterative refinement.
    scale = 1.0 / np.asarray(abs(A).max(axis=1).todense()).ravel()
    As = (sp.diags(scale) @ A).tocsc()
    bs = scale * b
    lu = splu(As)
    x = lu.solve(bs)
    for _ in range(refinements):
        r = bs - As @ x
        x = x + lu.solve(r)
    return lu, x


def _quadratic_start(problem: SolveProblem):
    g = problem.grid
    A = initial_constant(problem.k, g.n, float(problem.f_nodes.max()))
    u0 = A * (g.x**2 + g.y**2)
    return u0


def _admissibility(grid: MappedGrid, u, k):
    lam = np.linalg.eigvalsh(grid.hessians(u))
    ok = in_relaxed_cone(lam, k)
    return bool(np.all(ok)), bool(np.all(ok[grid.interior]))


def _report(problem, w, lam, offset, iters, res, mode, eps, trace=None, cond=float("nan")):
    g = problem.grid
    adm, adm_int = _admissibility(g, w, problem.k)
    grad = g.gradients(w)
    return SolveReport(
        u=w,
        lambda_est=float(lam),
        residual_norm=float(res),
        admissible=adm,
        newton_iters=int(iters),
        eps_schedule_trace=list(trace or []),
        offset=float(offset),
        mode=mode,
        k=problem.k,
        eps=float(eps),
        grid=g,
        grad_sup=float(np.sqrt((grad**2).sum(-1)).max()),
        admissible_interior=adm_int,
        condition_estimate=cond,
    )


def residual(problem: SolveProblem, u, lam: float | None = None) -> np.ndarray:
    """One residual entry per node.

    Interior rows are ``sigma_k(D^2 u) - f``.  Boundary rows are
    ``u_nu + eps * u - phi``, or ``u_nu - lam - phi`` when ``lam`` is given.
    """
    g = problem.grid
    u = np.asarray(u, dtype=float)
    out = np.empty(g.size)
    sig = elementary_symmetric_all(np.linalg.eigvalsh(g.hessians(u)[g.interior]))
    out[g.interior] = sig[:, problem.k] - problem.f_nodes[g.interior]
    un = g.Dnu @ u
    if lam is None:
        out[g.boundary] = un + problem.eps * u[g.boundary] - problem.phi_nodes
    else:
        out[g.boundary] = un - lam - problem.phi_nodes
    return out


def _split_init(problem: SolveProblem, init, eps):
    """Turn an initial guess into (w, mu) of the bordered formulation."""
    g = problem.grid
    if isinstance(init, SolveReport):
        w = init.u.copy()
        if eps > 0:
            return w, -eps * init.offset if init.mode == "eps" else init.lambda_est
        return w, init.lambda_est
    if isinstance(init, tuple):
        return np.asarray(init[0], dtype=float).copy(), float(init[1])
    u0 = _quadratic_start(problem) if init is None else np.asarray(init, dtype=float)
    m0 = g.mean(u0)
    w0 = u0 - m0
    if eps > 0:
        return w0, -eps * m0
    return w0, g.boundary_mean(g.Dnu @ w0 - problem.phi_nodes)


def newton_solve_eps(problem: SolveProblem, init=None, tol: float = TOL_NEWTON_EPS) -> SolveReport:
    """Damped Newton for the perturbed problem (``problem.eps > 0``).

    The default start is ``A|x|^2`` with ``A`` from :func:`initial_constant`.
    """
    eps = problem.eps
    if eps <= 0:
        raise PreconditionError("newton_solve_eps needs eps > 0; use augmented_solve for eps = 0")
    w0, mu0 = _split_init(problem, init, eps)
    solver = _BorderedNewton(problem, eps, tol)
    w, mu, iters, res, _, cond = solver.solve(w0, mu0)
    g = problem.grid
    lam_eps = g.boundary_mean(mu - eps * w[g.boundary])
    rep = _report(problem, w, lam_eps, -mu / eps, iters, res, "eps", eps, cond=cond)
    rep.eps_schedule_trace = [EpsStage(eps, lam_eps, rep.grad_sup, iters, res)]
    return rep


def continuation_solve(problem: SolveProblem, schedule=None, tol: float = TOL_NEWTON_EPS) -> SolveReport:
    """Solve along a decreasing eps schedule and extrapolate to eps = 0.

    Each stage is warm-started from the previous one.  ``lambda_eps`` is the
    boundary mean of ``-eps * u_eps``; the final ``(lambda, u)`` is the
    first-order Richardson extrapolation of the last two stages.
    """
    sched = [float(e) for e in (DEFAULT_SCHEDULE if schedule is None else schedule)]
    if len(sched) < 2 or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise DomainError(f"schedule must be positive and strictly decreasing with >= 2 stages, got {sched}")
    g = problem.grid
    init = None
    stages, fields_ = [], []
    total_iters = 0
    for j, eps in enumerate(sched):
        rep = newton_solve_eps(problem.with_eps(eps), init=init, tol=tol)
        init = (rep.u, -eps * rep.offset)
        total_iters += rep.newton_iters
        stages.append(rep.eps_schedule_trace[0])
        fields_.append(rep.u)
        if j >= 2:
            d_prev = abs(stages[-2].lambda_eps - stages[-3].lambda_eps)
            d_last = abs(stages[-1].lambda_eps - stages[-2].lambda_eps)
            floor = 1e-12 * max(1.0, abs(stages[-1].lambda_eps))
            if d_last > 1.5 * d_prev and d_last > floor:
                raise ContinuationDivergenceError(
                    f"lambda_eps change grew from {d_prev:.3e} to {d_last:.3e} at eps={eps:.3e}",
                    trace=[s.to_dict() for s in stages],
                )
    e1, e2 = sched[-2], sched[-1]
    l1, l2 = stages[-2].lambda_eps, stages[-1].lambda_eps
    lam = (e1 * l2 - e2 * l1) / (e1 - e2)
    ubar = (e1 * fields_[-1] - e2 * fields_[-2]) / (e1 - e2)
    res = float(np.abs(residual(problem, ubar, lam=lam)).max())
    return _report(problem, ubar, lam, 0.0, total_iters, res, "continuation", 0.0, trace=stages)


def augmented_solve(problem: SolveProblem, init=None, tol: float = TOL_NEWTON_AUGMENTED) -> SolveReport:
    """Solve the classical problem directly for ``(u, lambda)``.

    ``init`` may be ``None`` or ``"quadratic"`` (``A|x|^2``), ``"laplace"``
    (the ``k = 1`` solution with right-hand side ``n (f / C(n,k))^(1/k)``),
    a nodal array, a ``(w, lambda)`` pair or a previous report.
    """
    g = problem.grid
    if isinstance(init, str):
        if init == "quadratic":
            init = None
        elif init == "laplace":
            n = g.n
            scale = n * (problem.f_nodes / math.comb(n, problem.k)) ** (1.0 / problem.k)
            lap = SolveProblem(1, problem.f, problem.phi, g, 0.0)
            lap.f_nodes = scale
            init = augmented_solve(lap, init=None, tol=tol)
        else:
            raise DomainError(f"unknown initialization {init!r}")
    w0, mu0 = _split_init(problem, init, 0.0)
    solver = _BorderedNewton(problem, 0.0, tol)
    w, mu, iters, res, _, cond = solver.solve(w0, mu0)
    return _report(problem, w, mu, 0.0, iters, res, "augmented", 0.0, cond=cond)


# -- quadrature-only diagnostics ---------------------------------------------
GAUSS_NODES = 64


def _radial_profile(field_: Field, what: str):
    if not field_.is_radial:
        raise DomainError(f"{what} must be a radial field on a ball, got {field_.spec!r}")
    return field_.radial_profile


def lambda_lower_bound(body, k: int, f, phi, M: int = 2048) -> float:
    """``(n * int (f / C(n,k))^(1/k) dx - int phi dmu) / Area``.

    Planar bodies use Gauss-Legendre in the radial parameter and the
    trapezoid rule in the angle.  Balls need radial ``f`` and ``phi``.
    """
    from .geometry import BallGeometry, boundary_frames, dimension

    f, phi = parse_field(f), parse_field(phi)
    n = dimension(body)
    if int(k) != k or not 1 <= k <= n:
        raise DomainError(f"k={k} outside [1, {n}]")
    c = math.comb(n, k)
    t, wt = np.polynomial.legendre.leggauss(GAUSS_NODES)
    t, wt = 0.5 * (t + 1), 0.5 * wt
    if isinstance(body, BallGeometry):
        fr, pr = _radial_profile(f, "f"), _radial_profile(phi, "phi")
        R = body.R
        vals = np.asarray(fr(R * t), dtype=float)
        if np.any(vals <= 0):
            raise PreconditionError("f must be positive")
        shell = body.area() * R  # n * omega_n * R^n
        bulk = shell * np.sum(wt * t ** (n - 1) * (vals / c) ** (1.0 / k))
        return float((n * bulk - float(pr(R)) * body.area()) / body.area())
    theta = 2 * np.pi * np.arange(M) / M
    rho = body.radial(theta)[0]
    S, T = np.meshgrid(t, theta, indexing="ij")
    r = S * rho[None, :]
    vals = f(r * np.cos(T), r * np.sin(T))
    if np.any(vals <= 0):
        raise PreconditionError("f must be positive")
    weights = wt[:, None] * S * rho[None, :] ** 2 * (2 * np.pi / M)
    bulk = float(np.sum(weights * (vals / c) ** (1.0 / k)))
    fr = boundary_frames(body, M)
    flux = fr.integrate(phi(fr.points[:, 0], fr.points[:, 1]))
    return (n * bulk - flux) / float(fr.ds.sum())


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: float = 2.0) -> float:
    """Extrapolate two estimates whose error behaves like ``C h^order``."""
    q = ratio**order
    return (q * fine - coarse) / (q - 1)


@dataclass
class DivergenceCheck:
    maxima: list
    hs: list
    order: float


def divergence_free_check(grids, u, k: int, hessian=None) -> DivergenceCheck:
    """Max of ``|sum_j D_j [T_k]_ij(D^2 u)|`` over nodes off the boundary layers.

    ``grids`` is a grid or a sequence of refined grids.  The tensor field is
    built from the analytic Hessian (``hessian(x, y)``, or the field's own for
    polynomial and radial fields) and differentiated with the grid's first
    derivative operators.  Without an analytic Hessian the grid Hessian is
    used, which nests two difference operators and loses accuracy at the pole.
    The order is the least-squares slope of log max against log h.
    """
    if isinstance(grids, MappedGrid):
        grids = [grids]
    if hessian is None and isinstance(u, Field) and u.hessian_func is not None:
        hessian = u.hessian
    maxima, hs = [], []
    for g in grids:
        if not 0 <= k <= g.n - 1:
            raise DomainError(f"tensor order k={k} outside [0, {g.n - 1}]")
        H = g.hessians(g.evaluate(u)) if hessian is None else np.asarray(hessian(g.x, g.y), dtype=float)
        T = newton_tensor(H, k)
        div = np.stack([g.Gx @ T[:, i, 0] + g.Gy @ T[:, i, 1] for i in range(2)], axis=-1)
        keep = np.arange(g.size) < (g.ns - 2) * g.ntheta
        maxima.append(float(np.abs(div[keep]).max()))
        hs.append(g.h)
    if len(grids) < 2 or min(maxima) <= 0:
        order = float("nan")
    else:
        order = float(np.polyfit(np.log(hs), np.log(maxima), 1)[0])
    return DivergenceCheck(maxima, hs, order)
