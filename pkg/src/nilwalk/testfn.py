"""Product test functions with closed-form integrals and smoothness data.

Each one-dimensional piece carries its exact integral, absolute integral,
sup norm, Lipschitz constant, and antiderivative.  Products over
coordinates inherit all of these in closed form, which is what the
distributional-distance experiments need: no numeric quadrature anywhere
on the estimate path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError


class Piece:
    """One-dimensional component; subclasses fill in the closed forms."""

    integral: float
    l1: float
    sup: float
    lip: float
    support: tuple[float, float]

    def __call__(self, t):
        raise NotImplementedError

    def antiderivative(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Tent(Piece):
    """Triangle of the given height on [center - half_width, center + half_width]."""

    center: float = 0.0
    half_width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.half_width <= 0 or self.height <= 0:
            raise StructuralError("tent needs positive width and height")

    @property
    def integral(self):
        return self.height * self.half_width

    l1 = integral

    @property
    def sup(self):
        return self.height

    @property
    def lip(self):
        return self.height / self.half_width

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def __call__(self, t):
        u = np.abs(np.asarray(t, dtype=float) - self.center)
        return self.height * np.clip(1.0 - u / self.half_width, 0.0, None)

    def antiderivative(self, t):
        w, h = self.half_width, self.height
        u = np.clip(np.asarray(t, dtype=float) - self.center, -w, w)
        lower = h * ((u + w) + (u * u - w * w) / (2 * w))
        upper = h * w / 2 + h * (u - u * u / (2 * w))
        return np.where(u <= 0, np.where(u <= -w, 0.0, lower),
                        h * w / 2 + np.where(u >= w, h * w / 2, upper - h * w / 2))


@dataclass(frozen=True)
class CosineBump(Piece):
    """Smooth raised-cosine bump; continuously differentiable at the edges."""

    center: float = 0.0
    half_width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.half_width <= 0 or self.height <= 0:
            raise StructuralError("bump needs positive width and height")

    @property
    def integral(self):
        return self.height * self.half_width

    l1 = integral

    @property
    def sup(self):
        return self.height

    @property
    def lip(self):
        return self.height * np.pi / (2 * self.half_width)

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def __call__(self, t):
        u = np.asarray(t, dtype=float) - self.center
        inside = np.abs(u) <= self.half_width
        vals = 0.5 * self.height * (1.0 + np.cos(np.pi * u / self.half_width))
        return np.where(inside, vals, 0.0)

    def antiderivative(self, t):
        w, h = self.half_width, self.height
        u = np.clip(np.asarray(t, dtype=float) - self.center, -w, w)
        return 0.5 * h * (u + w + (w / np.pi) * np.sin(np.pi * u / w))


@dataclass(frozen=True)
class RampIndicator(Piece):
    """Indicator of [lo, hi] averaged over a box of half-width ramp.

    Exact integral hi - lo; needs hi - lo >= 2 * ramp so the plateau exists.
    """

    lo: float
    hi: float
    ramp: float

    def __post_init__(self):
        if self.ramp <= 0:
            raise StructuralError("ramp must be positive")
        if self.hi - self.lo < 2 * self.ramp:
            raise StructuralError("interval too short for the requested ramp")

    @property
    def integral(self):
        return self.hi - self.lo

    l1 = integral

    sup = 1.0

    @property
    def lip(self):
        return 0.5 / self.ramp

    @property
    def support(self):
        return (self.lo - self.ramp, self.hi + self.ramp)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        up = np.clip((t - (self.lo - self.ramp)) / (2 * self.ramp), 0.0, 1.0)
        down = np.clip(((self.hi + self.ramp) - t) / (2 * self.ramp), 0.0, 1.0)
        return np.minimum(up, down)

    def antiderivative(self, t):
        r = self.ramp
        t = np.asarray(t, dtype=float)

        def ramp_area(u):
            # antiderivative of a 0->1 ramp of length 2r starting at 0
            v = np.clip(u, 0.0, 2 * r)
            return v * v / (4 * r) + np.clip(u - 2 * r, 0.0, None)

        return ramp_area(t - (self.lo - r)) - ramp_area(t - (self.hi - r))


@dataclass(frozen=True)
class BoxSmoothed(Piece):
    """A piece averaged over a sliding box of half-width eps."""

    piece: Piece
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise StructuralError("smoothing width must be positive")
        if isinstance(self.piece, BoxSmoothed):
            raise StructuralError("nested box smoothing has no closed antiderivative")

    @property
    def integral(self):
        return self.piece.integral

    @property
    def l1(self):
        return self.piece.l1

    @property
    def sup(self):
        return self.piece.sup

    @property
    def lip(self):
        return min(self.piece.lip, self.piece.sup / self.eps)

    @property
    def support(self):
        a, b = self.piece.support
        return (a - self.eps, b + self.eps)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return (self.piece.antiderivative(t + self.eps)
                - self.piece.antiderivative(t - self.eps)) / (2 * self.eps)

    def antiderivative(self, t):
        raise StructuralError("no closed antiderivative after smoothing")


@dataclass(frozen=True)
class ProductTestFunction:
    """Product of one-dimensional pieces, one per coordinate."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise StructuralError("need at least one coordinate piece")

    @property
    def dim(self):
        return len(self.pieces)

    @property
    def integral(self):
        out = 1.0
        for p in self.pieces:
            out *= p.integral
        return out

    @property
    def l1(self):
        out = 1.0
        for p in self.pieces:
            out *= p.l1
        return out

    @property
    def sup(self):
        out = 1.0
        for p in self.pieces:
            out *= p.sup
        return out

    @property
    def lip(self):
        """Lipschitz bound in the max norm on coordinates."""
        total = 0.0
        for m, p in enumerate(self.pieces):
            rest = 1.0
            for l, o in enumerate(self.pieces):
                if l != m:
                    rest *= o.sup
            total += p.lip * rest
        return total

    def smoothed(self, eps: float) -> "ProductTestFunction":
        return ProductTestFunction(tuple(BoxSmoothed(p, eps) for p in self.pieces))

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        arr = np.atleast_2d(np.asarray(coords, dtype=float))
        if arr.shape[1] != len(self.pieces):
            raise StructuralError(
                f"expected {len(self.pieces)} coordinates, got {arr.shape[1]}")
        out = np.ones(arr.shape[0])
        for m, p in enumerate(self.pieces):
            out *= p(arr[:, m])
        return out


def centered_bump(dim: int, half_width: float = 1.0) -> ProductTestFunction:
    return ProductTestFunction(tuple(CosineBump(0.0, half_width, 1.0)
                                     for _ in range(dim)))


def centered_tent(dim: int, half_width: float = 1.0) -> ProductTestFunction:
    return ProductTestFunction(tuple(Tent(0.0, half_width, 1.0)
                                     for _ in range(dim)))
