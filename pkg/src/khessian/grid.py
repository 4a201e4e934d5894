"""Logically rectangular (s, theta) grid mapped onto a star-shaped body.

Nodes sit at ``s_i = (i + 1/2) h`` with ``h = 1 / (ns - 1/2)`` so that the
last layer is the boundary ``s = 1`` and no node sits on the pole.  A
stencil that reaches ``s < 0`` reads the node on the opposite ray
(``theta + pi``); the map is built so that this pairing is exact:

    x(s, theta) = s * (rho_e(theta) + s * rho_o(theta)) * (cos theta, sin theta)

where ``rho_e``/``rho_o`` are the parts of ``rho`` even/odd under
``theta -> theta + pi``.  For centrally symmetric bodies this is the plain
radial map ``s * rho(theta)``.

Derivatives in theta use trigonometrically fitted central differences
(exact on ``1, cos theta, sin theta``, second order otherwise), and the
metric terms come from applying the same difference operators to the node
coordinates. Together these make the discrete Hessian vanish identically on
linear functions, which keeps the pole rule second order.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidBodyError
from .geometry import ConvexBody2D, frames_at


class MappedGrid:
    def __init__(self, body: ConvexBody2D, ns: int, ntheta: int):
        if ns < 4:
            raise DomainError(f"need at least 4 radial layers, got {ns}")
        if ntheta < 8 or ntheta % 2:
            raise DomainError(f"angular node count must be even and >= 8, got {ntheta}")
        self.body = body
        self.ns = ns
        self.ntheta = ntheta
        self.n = 2
        self.h = 1.0 / (ns - 0.5)
        self.htheta = 2 * np.pi / ntheta
        self.s = (np.arange(ns) + 0.5) * self.h
        self.theta = np.arange(ntheta) * self.htheta
        self.size = ns * ntheta

        rho = body.radial(self.theta)[0]
        rho_pi = np.roll(rho, -ntheta // 2)
        self.rho_even = 0.5 * (rho + rho_pi)
        self.rho_odd = 0.5 * (rho - rho_pi)
        if np.any(self.rho_even - 2 * np.abs(self.rho_odd) <= 0):
            raise InvalidBodyError("body is too far off-centre for the paired polar map")

        S, T = np.meshgrid(self.s, self.theta, indexing="ij")
        r = self.rho_even[None, :] + S * self.rho_odd[None, :]
        self.x = (S * r * np.cos(T)).ravel()
        self.y = (S * r * np.sin(T)).ravel()
        self.xy = np.stack([self.x, self.y], axis=-1)
        # Exact Jacobian determinant of the map, used only for quadrature.
        jac = S * r * (self.rho_even[None, :] + 2 * S * self.rho_odd[None, :])

        self.boundary = np.arange((ns - 1) * ntheta, ns * ntheta)
        self.interior = np.arange(0, (ns - 1) * ntheta)
        self.is_boundary = np.zeros(self.size, dtype=bool)
        self.is_boundary[self.boundary] = True

        ws = np.full(ns, self.h)
        ws[-2] += self.h / 8
        ws[-1] = 3 * self.h / 8
        self.volume_weights = (ws[:, None] * self.htheta * jac).ravel()

        fr = frames_at(body, self.theta)
        self.normals = fr.normals
        self.tangents = fr.tangents
        self.kappa = fr.kappa
        self.ds = fr.ds * self.htheta

        self._build_operators()

    @property
    def resolution(self) -> str:
        return f"{self.ns}x{self.ntheta}"

    def index(self, i: int, j: int) -> int:
        return i * self.ntheta + j

    # -- operator assembly -------------------------------------------------
    def _s_operator(self, stencil_for_row):
        ns, nt = self.ns, self.ntheta
        rows, cols, vals = [], [], []
        j = np.arange(nt)
        for i in range(ns):
            stencil = stencil_for_row(i)
            for di, w in stencil:
                ii = i + di
                if ii < 0:
                    col = (-1 - ii) * nt + (j + nt // 2) % nt
                else:
                    col = ii * nt + j
                rows.append(i * nt + j)
                cols.append(col)
                vals.append(np.full(nt, w))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.size, self.size)
        )

    def _theta_operator(self, stencil):
        nt = self.ntheta
        node = np.arange(self.size)
        i, j = np.divmod(node, nt)
        rows, cols, vals = [], [], []
        for dj, w in stencil:
            rows.append(node)
            cols.append(i * nt + (j + dj) % nt)
            vals.append(np.full(self.size, w))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.size, self.size)
        )

    def _build_operators(self):
        h, ht, last = self.h, self.htheta, self.ns - 1
        # The first s-derivative is fourth order wherever the five-point
        # stencil fits: its error reaches the Hessian through metric terms
        # that grow like 1/s at the pole.
        d1_wide = [(-2, 1 / (12 * h)), (-1, -8 / (12 * h)), (1, 8 / (12 * h)), (2, -1 / (12 * h))]
        d1_central = [(-1, -0.5 / h), (1, 0.5 / h)]
        d1_back = [(-2, 0.5 / h), (-1, -2.0 / h), (0, 1.5 / h)]
        d2_central = [(-1, 1 / h**2), (0, -2 / h**2), (1, 1 / h**2)]
        d2_back = [(-3, -1 / h**2), (-2, 4 / h**2), (-1, -5 / h**2), (0, 2 / h**2)]
        self.Ds = self._s_operator(lambda i: d1_back if i == last else d1_central if i == last - 1 else d1_wide)
        self.Dss = self._s_operator(lambda i: d2_back if i == last else d2_central)
        c1 = 1.0 / (2 * np.sin(ht))
        c2 = 1.0 / (2 - 2 * np.cos(ht))
        self.Dt = self._theta_operator([(-1, -c1), (1, c1)])
        self.Dtt = self._theta_operator([(-1, c2), (0, -2 * c2), (1, c2)])
        self.Dst = (self.Ds @ self.Dt).tocsr()

        X, Y = self.x, self.y
        xs, xt, ys, yt = self.Ds @ X, self.Dt @ X, self.Ds @ Y, self.Dt @ Y
        det = xs * yt - xt * ys
        if np.any(np.abs(det) < 1e-14):
            raise InvalidBodyError("degenerate discrete Jacobian")
        # K = J^{-1}, J = [[xs, xt], [ys, yt]]; K[a, c] with a in (s, t), c in (x, y)
        K = {
            ("s", "x"): yt / det,
            ("s", "y"): -xt / det,
            ("t", "x"): -ys / det,
            ("t", "y"): xs / det,
        }
        self.metric = K
        self.jacobian_det = det
        diag = sp.diags
        self.Gx = (diag(K["s", "x"]) @ self.Ds + diag(K["t", "x"]) @ self.Dt).tocsr()
        self.Gy = (diag(K["s", "y"]) @ self.Ds + diag(K["t", "y"]) @ self.Dt).tocsr()
        second = {("s", "s"): self.Dss, ("s", "t"): self.Dst, ("t", "t"): self.Dtt}
        L = {}
        for ab, D in second.items():
            xab, yab = D @ X, D @ Y
            L[ab] = (D - diag(xab) @ self.Gx - diag(yab) @ self.Gy).tocsr()
        L["t", "s"] = L["s", "t"]

        def hess(c, d):
            out = None
            for a in ("s", "t"):
                for b in ("s", "t"):
                    term = diag(K[a, c] * K[b, d]) @ L[a, b]
                    out = term if out is None else out + term
            return out.tocsr()

        self.Dxx = hess("x", "x")
        self.Dxy = hess("x", "y")
        self.Dyy = hess("y", "y")
        nb = self.boundary
        self.Dnu = (
            diag(self.normals[:, 0]) @ self.Gx[nb] + diag(self.normals[:, 1]) @ self.Gy[nb]
        ).tocsr()
        self.Dtau = (
            diag(self.tangents[:, 0]) @ self.Gx[nb] + diag(self.tangents[:, 1]) @ self.Gy[nb]
        ).tocsr()

    # -- evaluation ----------------------------------------------------------
    def hessians(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        hxx, hxy, hyy = self.Dxx @ u, self.Dxy @ u, self.Dyy @ u
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)

    def gradients(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([self.Gx @ u, self.Gy @ u], axis=-1)

    def normal_derivative(self, u) -> np.ndarray:
        return self.Dnu @ np.asarray(u, dtype=float)

    def evaluate(self, func) -> np.ndarray:
        """Nodal values of ``func(x, y)``."""
        return np.broadcast_to(np.asarray(func(self.x, self.y), dtype=float), (self.size,)).copy()

    @cached_property
    def volume(self) -> float:
        return float(self.volume_weights.sum())

    @cached_property
    def perimeter(self) -> float:
        return float(self.ds.sum())

    def integrate(self, values) -> float:
        return float(np.dot(self.volume_weights, values))

    def integrate_boundary(self, values) -> float:
        return float(np.dot(self.ds, values))

    def mean(self, u) -> float:
        return self.integrate(u) / self.volume

    def boundary_mean(self, values) -> float:
        return self.integrate_boundary(values) / self.perimeter


def hessian_at(grid: MappedGrid, u, node) -> np.ndarray:
    """Cartesian Hessian of nodal field ``u`` at one node (flat index or (i, j))."""
    if isinstance(node, tuple):
        node = grid.index(*node)
    u = np.asarray(u, dtype=float)
    hxy = grid.Dxy[node] @ u
    return np.array([[grid.Dxx[node] @ u, hxy], [hxy, grid.Dyy[node] @ u]]).reshape(2, 2)
