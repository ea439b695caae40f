"""Image similarity and feature primitives.

SSIM follows the Gaussian-weighted form of Wang et al. (2004); the metric is
averaged over every fully contained window position, no padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError

IDENTICAL = math.inf  # psnr() of two identical images


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InputError("SSIM window must be odd and >= 3")
        if not (self.sigma > 0 and self.k1 > 0 and self.k2 > 0 and self.dynamic_range > 0):
            raise InputError("SSIM sigma, k1, k2 and dynamic_range must be positive")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D window is their outer product."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _valid_filter(img, taps):
    rows = sliding_window_view(img, taps.size, axis=0) @ taps
    return sliding_window_view(rows, taps.size, axis=1) @ taps


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise InputError(f"image dimensions differ: {a.shape} vs {b.shape}")
    return a, b


def ssim_map(a, b, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    a, b = _pair(a, b)
    if min(a.shape) < cfg.window:
        raise InputError(f"image {a.shape} smaller than SSIM window {cfg.window}")
    taps = gaussian_window(cfg.window, cfg.sigma)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    mu_a = _valid_filter(a, taps)
    mu_b = _valid_filter(b, taps)
    var_a = _valid_filter(a * a, taps) - mu_a * mu_a
    var_b = _valid_filter(b * b, taps) - mu_b * mu_b
    cov = _valid_filter(a * b, taps) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean SSIM over all window positions; 1.0 for identical inputs."""
    return float(np.clip(ssim_map(a, b, cfg).mean(), -1.0, 1.0))


def psnr(a, b, dynamic_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, ``IDENTICAL`` when MSE is 0."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return IDENTICAL
    return 10.0 * math.log10(dynamic_range**2 / mse)


def cosine_similarity(f1, f2) -> float:
    f1 = np.asarray(f1, dtype=np.float64).ravel()
    f2 = np.asarray(f2, dtype=np.float64).ravel()
    if f1.shape != f2.shape:
        raise InputError(f"feature length mismatch: {f1.size} vs {f2.size}")
    n1, n2 = np.linalg.norm(f1), np.linalg.norm(f2)
    if n1 == 0 or n2 == 0:
        raise InputError("zero-norm feature")
    return float(np.clip(np.dot(f1, f2) / (n1 * n2), -1.0, 1.0))


def area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix averaging input cells over each output cell.

    Output cell ``i`` covers input interval ``[i*n_in/n_out, (i+1)*n_in/n_out)``;
    partially covered input cells contribute by their overlap.
    """
    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo = np.arange(n_in)
    left = np.maximum(edges[:-1, None], lo[None, :])
    right = np.minimum(edges[1:, None], lo[None, :] + 1)
    w = np.clip(right - left, 0.0, None)
    return w / (n_in / n_out)


def area_resample(img, rows: int, cols: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return area_weights(img.shape[0], rows) @ img @ area_weights(img.shape[1], cols).T


def patch_descriptor(img, grid: int = 16) -> np.ndarray:
    """Downsampled, mean-free, L2-normalized thumbnail of ``img``.

    A constant image yields the zero vector; callers decide whether that is
    an error.
    """
    img = np.asarray(img, dtype=np.float64)
    if grid < 2:
        raise InputError("descriptor grid must be >= 2")
    if img.ndim != 2 or img.size == 0:
        raise InputError("descriptor input must be a non-empty 2D image")
    v = area_resample(img, grid, grid).ravel()
    v = v - v.mean()
    norm = np.linalg.norm(v)
    if norm <= 1e-12 * max(1.0, float(np.abs(img).max())):
        return np.zeros_like(v)
    return v / norm


Descriptor = Callable[[np.ndarray], np.ndarray]

_DESCRIPTORS: dict[str, Descriptor] = {"builtin-patch": patch_descriptor}


def register_descriptor(name: str, fn: Descriptor):
    """Make ``fn`` (GrayImage -> feature vector) selectable by ``name``."""
    _DESCRIPTORS[name] = fn


def get_descriptor(name: str) -> Descriptor:
    try:
        return _DESCRIPTORS[name]
    except KeyError:
        raise InputError(
            f"unknown descriptor {name!r}; available: {sorted(_DESCRIPTORS)}"
        ) from None
