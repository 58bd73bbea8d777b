"""Render-quality (PSNR, SSIM) and mask-agreement (IoU, CCR) metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import DimensionMismatchError, EmptyGroundTruthError, TooSmallError

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


@dataclass
class MetricsRecord:
    psnr: float
    ssim: float
    ccr: Optional[float] = None
    iou: Optional[float] = None
    spins: Optional[int] = None
    frames_per_spin: Optional[int] = None
    error_cm: Optional[float] = None
    mode: Optional[str] = None


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio of two 8-bit images in dB, capped at 99."""
    a = np.asarray(a)
    b = np.asarray(b)
    _same_shape(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(255.0 ** 2 / mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel SSIM over windows that fit fully inside the image."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise TooSmallError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    w = gaussian_window()

    def filt(x):
        return np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (var_a + var_b + C2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(ssim_map(a, b)))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    _same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def ccr(pred: np.ndarray, gt: np.ndarray) -> float:
    """Coverage ratio: share of ground-truth pixels the prediction covers."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    _same_shape(pred, gt)
    n = np.count_nonzero(gt)
    if n == 0:
        raise EmptyGroundTruthError("ground-truth mask is empty")
    return np.count_nonzero(pred & gt) / n


def dilate(mask: np.ndarray, k: int) -> np.ndarray:
    """Binary dilation by a (2k+1) x (2k+1) square."""
    if k <= 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_dilation(mask, structure=np.ones((2 * k + 1, 2 * k + 1), dtype=bool))
