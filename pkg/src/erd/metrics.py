"""Image quality and convergence metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .grid import check_same_shape

__all__ = ["PSNR_CAP", "QualityReport", "psnr", "mssim", "gaussian_window",
           "relative_error", "quality"]

#: PSNR reported for identical images, keeping CSV output finite.
PSNR_CAP = 99.0


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    mssim: float


def psnr(x, ref, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at :data:`PSNR_CAP`."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    check_same_shape(x, ref)
    if peak <= 0:
        raise ValueError("peak must be positive")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(ref))):
        raise ValueError("psnr inputs must be finite")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 2-D Gaussian window, as used by the reference SSIM code."""
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g = np.exp(-(ax ** 2) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def mssim(x, ref, peak: float = 1.0, k1: float = 0.01, k2: float = 0.03,
          win_size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over all fully contained ``win_size`` Gaussian windows.

    No pre-downsampling is applied.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    check_same_shape(x, ref)
    if x.ndim != 2:
        raise ValueError(f"mssim expects a 2-D field, got shape {x.shape}")
    if min(x.shape) < win_size:
        raise ValueError(f"image {x.shape} is smaller than the {win_size}x{win_size} window")
    w = gaussian_window(win_size, sigma)

    def filt(a):
        return fftconvolve(a, w, mode="valid")

    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu_x, mu_y = filt(x), filt(ref)
    sxx = filt(x * x) - mu_x * mu_x
    syy = filt(ref * ref) - mu_y * mu_y
    sxy = filt(x * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def relative_error(u_new, u_old) -> float:
    """``||u_new - u_old|| / ||u_new||``; ``inf`` when ``u_new`` is zero."""
    u_new = np.asarray(u_new, dtype=np.float64)
    check_same_shape(u_new, u_old)
    denom = float(np.linalg.norm(u_new))
    if denom == 0.0:
        return math.inf
    return float(np.linalg.norm(u_new - u_old)) / denom


def quality(channels: Sequence[np.ndarray], refs: Sequence[np.ndarray],
            peak: float = 1.0) -> QualityReport:
    """PSNR and MSSIM averaged over matching channels."""
    if len(channels) != len(refs):
        raise ValueError(f"channel count mismatch: {len(channels)} vs {len(refs)}")
    p = [psnr(c, r, peak) for c, r in zip(channels, refs)]
    s = [mssim(c, r, peak) for c, r in zip(channels, refs)]
    return QualityReport(psnr=float(np.mean(p)), mssim=float(np.mean(s)))
