"""Elementary symmetric functions, Newton tensors and Garding cones.

Every function here accepts either a single object (a spectrum of shape
``(n,)`` or a matrix of shape ``(n, n)``) or a stack of them with leading
batch axes, so that the solver can evaluate whole grids in one call.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConeViolationError, DomainError, NumericError

RELAXED_CONE_TOL = 1e-12


def _is_exact(values) -> bool:
    arr = np.asarray(values)
    return arr.dtype == object or np.issubdtype(arr.dtype, np.integer)


def as_spectrum(lam) -> np.ndarray:
    """Validate a spectrum (or stack of spectra) and return it as an array."""
    arr = np.asarray(lam)
    if arr.ndim == 0:
        raise DomainError("a spectrum needs at least one entry")
    if arr.shape[-1] < 1:
        raise DomainError("a spectrum needs at least one entry")
    if arr.dtype != object and not np.all(np.isfinite(arr)):
        raise NumericError("spectrum has non-finite entries")
    return arr


def sym_matrix(a) -> np.ndarray:
    """Return ``a`` symmetrized as ``(a + a^T) / 2`` after validation."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise DomainError(f"expected square matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("matrix has non-finite entries")
    return 0.5 * (arr + np.swapaxes(arr, -1, -2))


def _check_level(k: int, n: int, lo: int = 0) -> None:
    if int(k) != k or k < lo or k > n:
        raise DomainError(f"order k={k} outside [{lo}, {n}]")


def elementary_symmetric_all(lam) -> np.ndarray:
    """All of sigma_0..sigma_n, stacked on the last axis.

    One pass of the running update ``e_j <- e_j + x * e_{j-1}`` (descending
    in j) per entry; integer or ``Fraction`` input stays exact.
    """
    arr = as_spectrum(lam)
    n = arr.shape[-1]
    if _is_exact(arr):
        flat = arr.reshape(-1, n)
        out = np.empty((flat.shape[0], n + 1), dtype=object)
        for row, values in enumerate(flat):
            e = [1] + [0] * n
            for x in values.tolist():
                for j in range(n, 0, -1):
                    e[j] = e[j] + x * e[j - 1]
            out[row] = e
        return out.reshape(arr.shape[:-1] + (n + 1,))
    arr = arr.astype(float)
    e = np.zeros(arr.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = arr[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] += x * e[..., j - 1]
    return e


def elementary_symmetric(lam, k: int):
    """sigma_k of a spectrum; ``k = 0`` gives 1."""
    arr = as_spectrum(lam)
    _check_level(k, arr.shape[-1])
    out = elementary_symmetric_all(arr)[..., k]
    return out.item() if np.ndim(out) == 0 else out


def eigenvalues(a) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(sym_matrix(a))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - lapack failure
        raise NumericError(str(exc)) from exc


def sigma_of_matrix(a, k: int):
    """sigma_k of the eigenvalues of a symmetric matrix."""
    lam = eigenvalues(a)
    _check_level(k, lam.shape[-1])
    return elementary_symmetric(lam, k)


def sigma_all_of_matrix(a) -> np.ndarray:
    return elementary_symmetric_all(eigenvalues(a))


def newton_tensor(a, k: int) -> np.ndarray:
    """[T_k]_{ij} = d sigma_{k+1} / d A_{ij}.

    Uses ``T_0 = I`` and ``T_k = sigma_k I - A T_{k-1}``.
    """
    a = sym_matrix(a)
    n = a.shape[-1]
    if int(k) != k or k < 0 or k > n - 1:
        raise DomainError(f"Newton tensor order k={k} outside [0, {n - 1}]")
    sig = sigma_all_of_matrix(a)
    eye = np.broadcast_to(np.eye(n), a.shape)
    t = eye.copy()
    for j in range(1, k + 1):
        t = sig[..., j, None, None] * eye - a @ t
    return 0.5 * (t + np.swapaxes(t, -1, -2))


def _polarize(func, mats: Sequence[np.ndarray]):
    # Inclusion-exclusion over subsets recovers the symmetric multilinear
    # form of a degree-k homogeneous map from its diagonal values.
    k = len(mats)
    total = 0.0
    for size in range(1, k + 1):
        sign = (-1) ** (k - size)
        for subset in itertools.combinations(range(k), size):
            total = total + sign * func(sum(mats[i] for i in subset))
    return total / math.factorial(k)


def _check_same_dim(mats) -> list[np.ndarray]:
    mats = [sym_matrix(m) for m in mats]
    shapes = {m.shape for m in mats}
    if len(shapes) > 1:
        raise DomainError(f"mixed matrix shapes {sorted(shapes)}")
    return mats


def polarized_sigma(mats: Sequence, n: int | None = None):
    """Polarization sigma_k(A_1, ..., A_k) with k = len(mats)."""
    mats = _check_same_dim(mats)
    k = len(mats)
    if k == 0:
        return 1.0
    dim = mats[0].shape[-1]
    _check_level(k, dim, lo=1)
    return _polarize(lambda m: sigma_of_matrix(m, k), mats)


def mixed_newton_tensor(mats: Sequence, n: int | None = None) -> np.ndarray:
    """Mixed Newton transformation T_k(A_1, ..., A_k) with k = len(mats).

    An empty argument list returns the identity of size ``n``.
    """
    mats = _check_same_dim(mats)
    k = len(mats)
    if k == 0:
        if n is None:
            raise DomainError("dimension n is required when no matrices are given")
        return np.eye(n)
    dim = mats[0].shape[-1]
    if n is not None and n != dim:
        raise DomainError(f"n={n} does not match matrix size {dim}")
    if k > dim - 1:
        raise DomainError(f"mixed Newton tensor order k={k} outside [0, {dim - 1}]")
    return _polarize(lambda m: newton_tensor(m, k), mats)


def in_garding_cone(lam, k: int):
    """True iff sigma_1..sigma_k are all strictly positive."""
    arr = as_spectrum(lam)
    _check_level(k, arr.shape[-1], lo=1)
    sig = elementary_symmetric_all(arr)[..., 1 : k + 1]
    out = np.all(sig > 0, axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


def in_relaxed_cone(lam, k: int, tol: float = RELAXED_CONE_TOL):
    """Cone test tolerant of round-off: sigma_i > -tol * (1 + sigma_i(|lam|))."""
    arr = as_spectrum(lam).astype(float)
    _check_level(k, arr.shape[-1], lo=1)
    sig = elementary_symmetric_all(arr)[..., 1 : k + 1]
    scale = elementary_symmetric_all(np.abs(arr))[..., 1 : k + 1]
    out = np.all(sig > -tol * (1.0 + scale), axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


def matrix_in_garding_cone(a, k: int, relaxed: bool = False, tol: float = RELAXED_CONE_TOL):
    lam = eigenvalues(a)
    if relaxed:
        return in_relaxed_cone(lam, k, tol)
    return in_garding_cone(lam, k)


def newton_maclaurin_means(lam, k: int) -> np.ndarray:
    """p_i = (sigma_i / C(n, i))^(1/i) for i = 1..k; non-increasing on the cone."""
    arr = as_spectrum(lam).astype(float)
    if arr.ndim != 1:
        raise DomainError("newton_maclaurin_means takes a single spectrum")
    n = arr.shape[-1]
    _check_level(k, n, lo=1)
    if not in_garding_cone(arr, k):
        raise ConeViolationError(f"spectrum {arr.tolist()} is not in Gamma_{k}")
    sig = elementary_symmetric_all(arr)
    return np.array([(sig[i] / math.comb(n, i)) ** (1.0 / i) for i in range(1, k + 1)])


def coefficient_E(i: int, k: int) -> Fraction:
    """Exact alternating sum sum_{l=i}^{k-1} (-1)^{l-i} C(k+1,l+2) C(l,i) (l+1)/k."""
    if int(k) != k or int(i) != i or k < 1 or i < 0 or i > k - 1:
        raise DomainError(f"need 1 <= k and 0 <= i <= k-1, got i={i}, k={k}")
    total = Fraction(0)
    for l in range(i, k):
        total += (-1) ** (l - i) * math.comb(k + 1, l + 2) * math.comb(l, i) * Fraction(l + 1, k)
    return total
