"""Scalar fields on a periodic pixel grid and the stencils that act on them.

A field is a plain 2-D ``float64`` numpy array (rows = height). Pixel spacing
is 1, so integrals are plain sums.
"""

from dataclasses import dataclass, field as dc_field
import math

import numpy as np

from . import kernels
from .errors import InvalidParameterError

CONVENTIONS = ("paper-std", "heat-time")


def as_field(values, name="field"):
    """Validate and return ``values`` as a read-only float64 2-D array."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidParameterError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvKernel:
    """Odd-sized, center-anchored stencil.

    ``factors`` optionally holds (column, row) 1-D taps whose outer product is
    ``weights``; when present the convolution runs as two 1-D passes.
    """

    weights: np.ndarray
    normalized: bool = False
    factors: tuple = dc_field(default=None, repr=False)

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise InvalidParameterError(f"kernel must be 2-D with odd sides, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidParameterError("kernel weights must be finite")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"kernel flagged normalized but sums to {w.sum()!r}")
        object.__setattr__(self, "weights", w)
        if self.factors is not None:
            col, row = (_frozen(f) for f in self.factors)
            if col.shape != (w.shape[0],) or row.shape != (w.shape[1],):
                raise InvalidParameterError("separable factors do not match kernel shape")
            object.__setattr__(self, "factors", (col, row))

    @property
    def shape(self):
        return self.weights.shape

    @classmethod
    def identity(cls):
        return cls(np.ones((1, 1)), normalized=True)


FIVE_POINT = ConvKernel(np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]))


def gaussian_std(delta, convention="heat-time"):
    """Standard deviation of the sampled Gaussian for a width parameter."""
    if not delta > 0:
        raise InvalidParameterError(f"delta must be positive, got {delta!r}")
    if convention == "paper-std":
        return float(delta)
    if convention == "heat-time":
        return math.sqrt(2.0 * delta)
    raise InvalidParameterError(f"unknown Gaussian convention {convention!r}")


def default_radius(delta, convention="heat-time"):
    return max(1, math.ceil(4.0 * gaussian_std(delta, convention)))


def gaussian_density(delta, convention="heat-time", radius=None):
    """Unnormalized samples of the bivariate density on a (2r+1)^2 grid."""
    sigma = gaussian_std(delta, convention)
    if radius is None:
        radius = default_radius(delta, convention)
    if radius < 1:
        raise InvalidParameterError(f"radius must be >= 1, got {radius!r}")
    x = np.arange(-radius, radius + 1, dtype=float)
    r2 = x[:, None] ** 2 + x[None, :] ** 2
    return np.exp(-r2 / (2.0 * sigma**2)) / (2.0 * math.pi * sigma**2)


def gaussian_kernel(delta, convention="heat-time", radius=None):
    """Normalized, separable Gaussian kernel.

    ``paper-std`` uses standard deviation ``delta``; ``heat-time`` uses
    ``sqrt(2*delta)``, i.e. the heat kernel at time ``delta``. The default
    radius is ``ceil(4*std)``.
    """
    sigma = gaussian_std(delta, convention)
    if radius is None:
        radius = default_radius(delta, convention)
    if radius < 1:
        raise InvalidParameterError(f"radius must be >= 1, got {radius!r}")
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    g /= g.sum()
    return ConvKernel(np.outer(g, g), normalized=True, factors=(g, g))


def _check_fits(u, k):
    kh, kw = k.shape
    if kh > u.shape[0] or kw > u.shape[1]:
        raise InvalidParameterError(f"kernel {k.shape} does not fit field {u.shape}")


def convolve_periodic(u, k):
    """Circular convolution ``(k*u)[i,j] = sum k[p,q] u[i-p+rh, j-q+rw]``.

    Taps are accumulated in row-major order, skipping zero weights, so the
    result is reproducible bit for bit.
    """
    u = np.asarray(u, dtype=float)
    _check_fits(u, k)
    if k.factors is not None:
        return kernels.conv_separable(u, *k.factors)
    return kernels.conv_direct(u, k.weights)


def laplacian_periodic(u):
    """Five-point Laplacian with periodic wrap."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] < 3 or u.shape[1] < 3:
        raise InvalidParameterError(f"Laplacian needs at least 3x3, got {u.shape}")
    return kernels.conv_direct(u, FIVE_POINT.weights)


def integrate(u):
    """Sum of all pixel values, accumulated left to right in row-major order."""
    return kernels.seq_sum(u)
