"""Synthetic two-level test images with exact ground-truth masks."""

import numpy as np

from .errors import InvalidParameterError

SHAPES = ("disk", "two-disks", "square", "half-plane")


def disk_mask(height, width, radius, center=None):
    """Pixels with (i-ci)^2 + (j-cj)^2 <= r^2; default center (H//2, W//2)."""
    ci, cj = center if center is not None else (height // 2, width // 2)
    i = np.arange(height)[:, None]
    j = np.arange(width)[None, :]
    return ((i - ci) ** 2 + (j - cj) ** 2 <= radius * radius).astype(float)


def shape_mask(shape, height, width, radius=30):
    if shape == "disk":
        return disk_mask(height, width, radius)
    if shape == "two-disks":
        r = max(2, radius // 2)
        a = disk_mask(height, width, r, (height // 2, width // 3))
        b = disk_mask(height, width, r, (height // 2, (2 * width) // 3))
        return np.maximum(a, b)
    if shape == "square":
        m = np.zeros((height, width))
        ci, cj = height // 2, width // 2
        m[max(ci - radius, 0) : ci + radius, max(cj - radius, 0) : cj + radius] = 1.0
        return m
    if shape == "half-plane":
        m = np.zeros((height, width))
        m[:, width // 2 :] = 1.0
        return m
    raise InvalidParameterError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def box_muller(rng, n):
    """n standard normals from pairs of uniforms, consumed in order
    (u1, u2), (u1, u2), ..."""
    m = (n + 1) // 2
    uni = rng.random(2 * m)
    u1, u2 = uni[0::2], uni[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def make_image(shape="disk", height=192, width=256, levels=(0.2, 0.9), noise_sd=0.0, seed=0, radius=30):
    """Return ``(image, truth)``. Noise is additive Gaussian, then clamped to [0, 1].

    The RNG is PCG64 seeded with ``seed``; normals come from Box-Muller.
    """
    if height < 16 or width < 16:
        raise InvalidParameterError(f"image size must be at least 16x16, got {height}x{width}")
    if not noise_sd >= 0:
        raise InvalidParameterError(f"noise_sd must be >= 0, got {noise_sd!r}")
    if int(seed) != seed or seed < 0:
        raise InvalidParameterError(f"seed must be a non-negative integer, got {seed!r}")
    bg, fg = (float(x) for x in levels)
    truth = shape_mask(shape, height, width, radius)
    img = np.where(truth > 0.5, fg, bg)
    if noise_sd > 0:
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        img = np.clip(img + noise_sd * box_muller(rng, img.size).reshape(img.shape), 0.0, 1.0)
    return img, truth
