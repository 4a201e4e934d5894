"""Named analytic fields used as right-hand sides and Neumann data.

Spec strings:

* ``const:v``                   constant ``v``
* ``poly:ij=c[,ij=c...]``       ``sum c * x**i * y**j`` (single-digit powers)
* ``radial:a0[,a1,...]``        ``sum a_j * r**(2j)``
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


@dataclass(frozen=True)
class Field:
    spec: str
    func: Callable
    radial_profile: Callable | None = None
    hessian_func: Callable | None = None

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, np.asarray(y, dtype=float)), dtype=float), x.shape)

    @property
    def is_radial(self) -> bool:
        return self.radial_profile is not None

    def hessian(self, x, y) -> np.ndarray:
        """Analytic Hessian, shape ``x.shape + (2, 2)``."""
        if self.hessian_func is None:
            raise DomainError(f"field {self.spec!r} has no analytic Hessian")
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.hessian_func(x, np.asarray(y, dtype=float)), x.shape + (2, 2))

    def __add__(self, c: float) -> "Field":
        c = float(c)
        prof = self.radial_profile
        return Field(
            f"{self.spec}+{c!r}",
            lambda x, y: self.func(x, y) + c,
            None if prof is None else (lambda r: prof(r) + c),
            self.hessian_func,
        )

    def __mul__(self, c: float) -> "Field":
        c = float(c)
        prof = self.radial_profile
        return Field(
            f"{c!r}*({self.spec})",
            lambda x, y: c * self.func(x, y),
            None if prof is None else (lambda r: c * prof(r)),
            None if self.hessian_func is None else (lambda x, y: c * self.hessian_func(x, y)),
        )

    __rmul__ = __mul__


def _hess(hxx, hxy, hyy):
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def const(v: float) -> Field:
    v = float(v)
    return Field(
        f"const:{v!r}",
        lambda x, y: np.full_like(np.asarray(x, dtype=float), v),
        lambda r: np.full_like(np.asarray(r, dtype=float), v),
        lambda x, y: np.zeros(np.shape(x) + (2, 2)),
    )


def poly(coeffs: dict) -> Field:
    """``coeffs`` maps ``(i, j)`` to the coefficient of ``x**i * y**j``."""
    terms = tuple(sorted((int(i), int(j), float(c)) for (i, j), c in coeffs.items()))
    if any(i < 0 or j < 0 or i > 9 or j > 9 for i, j, _ in terms):
        raise DomainError("polynomial powers must lie in 0..9")

    def func(x, y):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for i, j, c in terms:
            out = out + c * x**i * y**j
        return out

    def mono(x, y, i, j):
        return x**i * y**j if i >= 0 and j >= 0 else np.zeros_like(x)

    def hessian(x, y):
        hxx, hxy, hyy = (np.zeros_like(x) for _ in range(3))
        for i, j, c in terms:
            hxx = hxx + c * i * (i - 1) * mono(x, y, i - 2, j)
            hxy = hxy + c * i * j * mono(x, y, i - 1, j - 1)
            hyy = hyy + c * j * (j - 1) * mono(x, y, i, j - 2)
        return _hess(hxx, hxy, hyy)

    spec = "poly:" + ",".join(f"{i}{j}={c!r}" for i, j, c in terms)
    return Field(spec, func, None, hessian)


def radial(coeffs) -> Field:
    """``sum a_j r^(2j)`` for the coefficient sequence ``a``."""
    a = tuple(float(c) for c in coeffs)
    if not a:
        raise DomainError("radial profile needs at least one coefficient")

    def prof(r):
        r2 = np.asarray(r, dtype=float) ** 2
        return sum(c * r2**j for j, c in enumerate(a))

    def hessian(x, y):
        # D^2 r^(2j) = 2j r^(2j-2) I + 2j(2j-2) r^(2j-4) x x^T
        r2 = x * x + y * y
        diag, outer = np.zeros_like(x), np.zeros_like(x)
        for j, c in enumerate(a):
            if j >= 1:
                diag = diag + c * 2 * j * r2 ** (j - 1)
            if j >= 2:
                outer = outer + c * 2 * j * (2 * j - 2) * r2 ** (j - 2)
        return _hess(diag + outer * x * x, outer * x * y, diag + outer * y * y)

    return Field("radial:" + ",".join(repr(c) for c in a), lambda x, y: prof(np.hypot(x, y)), prof, hessian)


def parse_field(spec) -> Field:
    if isinstance(spec, Field):
        return spec
    if isinstance(spec, (int, float)):
        return const(spec)
    kind, _, rest = str(spec).partition(":")
    kind = kind.strip().lower()
    args = [a.strip() for a in rest.split(",")] if rest.strip() else []
    if kind == "const":
        if len(args) != 1 or not re.fullmatch(_FLOAT, args[0]):
            raise DomainError(f"expected const:v, got {spec!r}")
        return const(float(args[0]))
    if kind == "poly":
        coeffs = {}
        for tok in args:
            m = re.fullmatch(rf"(\d)(\d)=({_FLOAT})", tok)
            if not m:
                raise DomainError(f"bad polynomial term {tok!r} in {spec!r}")
            key = (int(m.group(1)), int(m.group(2)))
            coeffs[key] = coeffs.get(key, 0.0) + float(m.group(3))
        if not coeffs:
            raise DomainError(f"empty polynomial in {spec!r}")
        return poly(coeffs)
    if kind == "radial":
        if not args or not all(re.fullmatch(_FLOAT, a) for a in args):
            raise DomainError(f"expected radial:a0[,a1...], got {spec!r}")
        return radial([float(a) for a in args])
    raise DomainError(f"unknown field kind {kind!r} in {spec!r}")


def binom_field(n: int, k: int) -> Field:
    """The constant ``C(n, k)``, the right-hand side solved by ``|x|^2 / 2``."""
    return const(math.comb(n, k))
