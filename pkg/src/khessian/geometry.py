"""Uniformly convex bodies: radial planar bodies and n-dimensional balls.

A planar body is star-shaped about the origin and given by its radial
function ``rho(theta)``; boundary normals, curvature and arclength come
from ``rho``, ``rho'`` and ``rho''`` in closed form.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvexityError, DomainError, InvalidBodyError, NonPositiveRadiusError
from .reports import InequalityReport

CHECK_SAMPLES = 4096
QUAD_NODES = 2048


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class BallGeometry:
    n: int
    R: float = 1.0

    def __post_init__(self):
        if self.n < 2 or self.R <= 0:
            raise InvalidBodyError(f"ball needs n >= 2 and R > 0, got n={self.n}, R={self.R}")

    @property
    def spec(self) -> str:
        return f"ball:{self.R!r}"

    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.R**self.n

    def area(self) -> float:
        return self.n * unit_ball_volume(self.n) * self.R ** (self.n - 1)

    def curvature_integral(self, k: int) -> float:
        if int(k) != k or k < 0 or k > self.n - 1:
            raise DomainError(f"curvature integral order k={k} outside [0, {self.n - 1}]")
        return math.comb(self.n - 1, k) * self.R ** (-k) * self.area()


@dataclass(frozen=True)
class ConvexBody2D:
    """Planar body ``{r < rho(theta)}``.

    ``family`` is ``"fourier"`` (``rho = c0 + sum a_m cos m t + b_m sin m t``)
    or ``"ellipse"`` (exact radial function of an axis-aligned ellipse).
    """

    family: str
    c0: float = 1.0
    cos_terms: tuple = ()
    sin_terms: tuple = ()
    axes: tuple | None = None
    min_radius: float = field(init=False)
    min_curvature: float = field(init=False)
    theta_min_curvature: float = field(init=False)

    def __post_init__(self):
        if self.family not in ("fourier", "ellipse"):
            raise InvalidBodyError(f"unknown body family {self.family!r}")
        values = [self.c0, *[v for _, v in self.cos_terms], *[v for _, v in self.sin_terms]]
        if self.axes is not None:
            values += list(self.axes)
        if not all(math.isfinite(v) for v in values):
            raise InvalidBodyError("body coefficients must be finite")
        if self.family == "ellipse" and (self.axes is None or min(self.axes) <= 0):
            raise InvalidBodyError(f"ellipse axes must be positive, got {self.axes}")
        theta = np.linspace(0.0, 2 * np.pi, CHECK_SAMPLES, endpoint=False)
        rho = self.radial(theta)[0]
        j = int(np.argmin(rho))
        if rho[j] <= 0:
            raise NonPositiveRadiusError(f"radial function {rho[j]:.6g} <= 0 at theta={theta[j]:.6g}")
        kappa = self.curvature(theta)
        j = int(np.argmin(kappa))
        t_min, k_min = self._refine_min(self.curvature, theta[j])
        if min(k_min, kappa[j]) <= 0:
            raise ConvexityError(
                f"boundary curvature {min(k_min, kappa[j]):.6g} <= 0 at theta={t_min:.6g}",
                theta=t_min,
                curvature=min(k_min, kappa[j]),
            )
        object.__setattr__(self, "min_radius", float(rho.min()))
        object.__setattr__(self, "min_curvature", float(min(k_min, kappa[j])))
        object.__setattr__(self, "theta_min_curvature", float(t_min))

    @staticmethod
    def _refine_min(func, t0):
        step = 2 * np.pi / CHECK_SAMPLES
        res = minimize_scalar(lambda t: float(func(np.array([t]))[0]), bounds=(t0 - step, t0 + step), method="bounded")
        return float(res.x % (2 * np.pi)), float(res.fun)

    @property
    def spec(self) -> str:
        if self.family == "ellipse":
            return f"ellipse:{self.axes[0]!r},{self.axes[1]!r}"
        parts = [repr(self.c0)]
        parts += [f"a{m}={v!r}" for m, v in self.cos_terms]
        parts += [f"b{m}={v!r}" for m, v in self.sin_terms]
        return "fourier:" + ",".join(parts)

    @property
    def is_circle(self) -> bool:
        """Pure c0 radial coefficients (within 1e-6), or an ellipse with equal axes."""
        if self.family == "ellipse":
            return abs(self.axes[0] - self.axes[1]) <= 1e-6
        return all(abs(v) <= 1e-6 for _, v in self.cos_terms + self.sin_terms)

    def radial(self, theta):
        """Return ``(rho, rho', rho'')`` at the given angles."""
        t = np.asarray(theta, dtype=float)
        if self.family == "ellipse":
            a, b = self.axes
            q = b**2 * np.cos(t) ** 2 + a**2 * np.sin(t) ** 2
            dq = (a**2 - b**2) * np.sin(2 * t)
            d2q = 2 * (a**2 - b**2) * np.cos(2 * t)
            rho = a * b * q**-0.5
            drho = -0.5 * a * b * q**-1.5 * dq
            d2rho = a * b * (0.75 * q**-2.5 * dq**2 - 0.5 * q**-1.5 * d2q)
            return rho, drho, d2rho
        rho = np.full_like(t, self.c0)
        drho = np.zeros_like(t)
        d2rho = np.zeros_like(t)
        for m, v in self.cos_terms:
            rho = rho + v * np.cos(m * t)
            drho = drho - v * m * np.sin(m * t)
            d2rho = d2rho - v * m * m * np.cos(m * t)
        for m, v in self.sin_terms:
            rho = rho + v * np.sin(m * t)
            drho = drho + v * m * np.cos(m * t)
            d2rho = d2rho - v * m * m * np.sin(m * t)
        return rho, drho, d2rho

    def curvature(self, theta):
        rho, d1, d2 = self.radial(theta)
        return (rho**2 + 2 * d1**2 - rho * d2) / (rho**2 + d1**2) ** 1.5

    def scaled(self, t: float) -> "ConvexBody2D":
        if self.family == "ellipse":
            return ConvexBody2D("ellipse", axes=(t * self.axes[0], t * self.axes[1]))
        return ConvexBody2D(
            "fourier",
            c0=t * self.c0,
            cos_terms=tuple((m, t * v) for m, v in self.cos_terms),
            sin_terms=tuple((m, t * v) for m, v in self.sin_terms),
        )


def circle(R: float = 1.0) -> ConvexBody2D:
    return ConvexBody2D("fourier", c0=float(R))


def ellipse(a: float, b: float) -> ConvexBody2D:
    return ConvexBody2D("ellipse", axes=(float(a), float(b)))


def fourier_body(c0: float, cos_terms=None, sin_terms=None) -> ConvexBody2D:
    """``cos_terms``/``sin_terms`` map frequency m >= 1 to its coefficient."""
    def norm(terms):
        items = sorted((int(m), float(v)) for m, v in dict(terms or {}).items())
        if any(m < 1 for m, _ in items):
            raise InvalidBodyError("Fourier frequencies must be >= 1")
        return tuple((m, v) for m, v in items if v != 0.0)

    return ConvexBody2D("fourier", c0=float(c0), cos_terms=norm(cos_terms), sin_terms=norm(sin_terms))


def perturbed_disk(delta: float, m: int, R: float = 1.0) -> ConvexBody2D:
    """``rho = R (1 + delta cos(m theta))``."""
    return fourier_body(R, {m: R * delta})


def random_convex_bodies(count: int, seed: int = 0, max_mode: int = 4, amplitude: float = 0.08):
    """Random Fourier bodies near the unit circle, all verified convex."""
    rng = np.random.default_rng(seed)
    bodies = []
    while len(bodies) < count:
        modes = range(2, max_mode + 1)
        cos_t = {m: rng.uniform(-amplitude, amplitude) / m for m in modes}
        sin_t = {m: rng.uniform(-amplitude, amplitude) / m for m in modes}
        try:
            bodies.append(fourier_body(1.0 + rng.uniform(-0.2, 0.2), cos_t, sin_t))
        except InvalidBodyError:
            continue
    return bodies


_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def make_body(spec, n: int = 2):
    """Build a body from a spec string, a coefficient sequence or a body.

    Strings: ``ball:R`` (``circle:R`` is an alias), ``ellipse:a,b`` and
    ``fourier:c0[,aM=v][,bM=v]...``. With ``n > 2`` only ``ball:R`` is
    accepted and a :class:`BallGeometry` is returned.
    """
    if isinstance(spec, (ConvexBody2D, BallGeometry)):
        return spec
    if not isinstance(spec, str):
        coeffs = [float(c) for c in spec]
        if not coeffs:
            raise InvalidBodyError("empty coefficient list")
        # (c0, a1, b1, a2, b2, ...)
        cos_t = {(i + 1) // 2: c for i, c in enumerate(coeffs) if i % 2 == 1}
        sin_t = {i // 2: c for i, c in enumerate(coeffs) if i > 0 and i % 2 == 0}
        return fourier_body(coeffs[0], cos_t, sin_t)
    family, _, rest = spec.partition(":")
    family = family.strip().lower()
    args = [a.strip() for a in rest.split(",")] if rest.strip() else []
    if family in ("ball", "circle"):
        if len(args) != 1 or not re.fullmatch(_FLOAT, args[0]):
            raise InvalidBodyError(f"expected {family}:R, got {spec!r}")
        R = float(args[0])
        if R <= 0:
            raise InvalidBodyError(f"radius must be positive in {spec!r}")
        return BallGeometry(n, R) if n > 2 else circle(R)
    if n > 2:
        raise DomainError(f"only balls are supported in dimension n={n}, got {spec!r}")
    if family == "ellipse":
        if len(args) != 2 or not all(re.fullmatch(_FLOAT, a) for a in args):
            raise InvalidBodyError(f"expected ellipse:a,b, got {spec!r}")
        return ellipse(float(args[0]), float(args[1]))
    if family == "fourier":
        if not args or not re.fullmatch(_FLOAT, args[0]):
            raise InvalidBodyError(f"expected fourier:c0[,aM=v...], got {spec!r}")
        cos_t, sin_t = {}, {}
        for tok in args[1:]:
            m = re.fullmatch(rf"([ab])(\d+)=({_FLOAT})", tok)
            if not m:
                raise InvalidBodyError(f"bad Fourier term {tok!r} in {spec!r}")
            (cos_t if m.group(1) == "a" else sin_t)[int(m.group(2))] = float(m.group(3))
        return fourier_body(float(args[0]), cos_t, sin_t)
    raise InvalidBodyError(f"unknown body family {family!r} in {spec!r}")


class BoundaryFrame(NamedTuple):
    theta: float
    point: np.ndarray
    nu: np.ndarray
    kappa: float
    ds_weight: float


@dataclass(frozen=True)
class BoundaryFrames:
    """Struct-of-arrays view of equally spaced boundary frames."""

    theta: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    kappa: np.ndarray
    ds: np.ndarray

    def __len__(self):
        return len(self.theta)

    def __getitem__(self, i) -> BoundaryFrame:
        return BoundaryFrame(self.theta[i], self.points[i], self.normals[i], self.kappa[i], self.ds[i])

    def integrate(self, values) -> float:
        return float(np.dot(values, self.ds))


def frames_at(body: ConvexBody2D, theta) -> BoundaryFrames:
    """Frames at arbitrary angles; ``ds`` holds the speed ``|x'(theta)|``."""
    theta = np.asarray(theta, dtype=float)
    rho, d1, d2 = body.radial(theta)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    ep = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    speed = np.sqrt(rho**2 + d1**2)
    tangent = (d1[:, None] * e + rho[:, None] * ep) / speed[:, None]
    normal = (rho[:, None] * e - d1[:, None] * ep) / speed[:, None]
    kappa = (rho**2 + 2 * d1**2 - rho * d2) / speed**3
    return BoundaryFrames(theta, rho[:, None] * e, normal, tangent, kappa, speed)


def boundary_frames(body: ConvexBody2D, M: int = 256) -> BoundaryFrames:
    """``M`` frames equally spaced in theta with trapezoid arclength weights."""
    if M < 16:
        raise DomainError(f"need at least 16 boundary nodes, got {M}")
    theta = 2 * np.pi * np.arange(M) / M
    fr = frames_at(body, theta)
    return BoundaryFrames(fr.theta, fr.points, fr.normals, fr.tangents, fr.kappa, fr.ds * (2 * np.pi / M))


def volume(body, M: int = QUAD_NODES) -> float:
    if isinstance(body, BallGeometry):
        return body.volume()
    theta = 2 * np.pi * np.arange(M) / M
    rho = body.radial(theta)[0]
    return float(0.5 * np.sum(rho**2) * 2 * np.pi / M)


def area(body, M: int = QUAD_NODES) -> float:
    if isinstance(body, BallGeometry):
        return body.area()
    return float(np.sum(boundary_frames(body, M).ds))


def curvature_integral(body, k: int, M: int = QUAD_NODES) -> float:
    """Integral of sigma_k(h) over the boundary."""
    if isinstance(body, BallGeometry):
        return body.curvature_integral(k)
    if k not in (0, 1):
        raise DomainError(f"planar bodies support k in {{0, 1}}, got k={k}")
    fr = boundary_frames(body, M)
    return fr.integrate(fr.kappa if k == 1 else np.ones(M))


def dimension(body) -> int:
    return body.n if isinstance(body, BallGeometry) else 2


def quermassintegral_chain(body, tol: float = 1e-8, M: int = QUAD_NODES) -> InequalityReport:
    """Normalized quermassintegral ratios against the unit ball.

    Entry ``l = -1`` uses the volume and ``l >= 0`` uses the boundary integral
    of sigma_l(h); ratios ``(W_l(body)/W_l(B))^(1/(n-1-l))`` must be
    non-decreasing in ``l``. The report's sides are the tightest pair.
    The normalization constants of the quermassintegrals cancel in the
    ratios, so they are never formed (a convention, not a derived value).
    """
    n = dimension(body)
    unit = BallGeometry(n, 1.0)
    ratios = {}
    for l in range(-1, n - 1):
        if l == -1:
            w, w_b = volume(body, M), unit.volume()
        else:
            w, w_b = curvature_integral(body, l, M), unit.curvature_integral(l)
        ratios[l] = (w / w_b) ** (1.0 / (n - 1 - l))
    pairs = []
    for k_ in ratios:
        for l in ratios:
            if k_ > l:
                pairs.append({"k": k_, "l": l, "slack": ratios[k_] - ratios[l]})
    worst = min(pairs, key=lambda p: p["slack"])
    return InequalityReport.build(
        "quermassintegral_chain",
        ratios[worst["k"]],
        ratios[worst["l"]],
        resolution={"quadrature_nodes": M} if n == 2 else {"closed_form": True},
        details={
            "ratios": {str(l): r for l, r in ratios.items()},
            "pairs": pairs,
            "min_slack": worst["slack"],
            "holds": worst["slack"] >= -tol,
            "normalization": "unit-ball ratios; quermassintegral constants cancel",
        },
    )
