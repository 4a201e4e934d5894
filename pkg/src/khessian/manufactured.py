"""Manufactured quadratic solutions ``u* = x^T M x / 2`` on planar bodies."""

from __future__ import annotations

import numpy as np

from .fields import Field, const
from .geometry import ConvexBody2D, frames_at
from .symfun import sigma_of_matrix, sym_matrix


def boundary_normal_at(body: ConvexBody2D, x, y) -> np.ndarray:
    """Outward unit normal at boundary points given in Cartesian form."""
    theta = np.arctan2(np.asarray(y, dtype=float), np.asarray(x, dtype=float)) % (2 * np.pi)
    return frames_at(body, np.atleast_1d(theta)).normals.reshape(np.shape(theta) + (2,))


def quadratic_manufactured(body: ConvexBody2D, M, k: int, eps: float = 0.0, lam: float = 0.0):
    """Data ``(f, phi, u_exact)`` for which ``u* = x^T M x / 2`` solves the problem.

    With ``eps > 0`` the boundary data is ``phi = (M x).nu + eps * u*`` so that
    ``u*`` solves the perturbed problem; with ``eps = 0`` it is
    ``phi = (M x).nu - lam`` and ``(u*, lam)`` solves the classical problem.
    """
    M = sym_matrix(M)

    def u_exact(x, y):
        return 0.5 * (M[0, 0] * x * x + 2 * M[0, 1] * x * y + M[1, 1] * y * y)

    def phi(x, y):
        nu = boundary_normal_at(body, x, y)
        flux = (M[0, 0] * x + M[0, 1] * y) * nu[..., 0] + (M[0, 1] * x + M[1, 1] * y) * nu[..., 1]
        return flux + eps * u_exact(x, y) if eps > 0 else flux - lam

    f = const(sigma_of_matrix(M, k))
    return f, Field(f"manufactured-quadratic(eps={eps!r})", phi), u_exact
