"""Image quality metrics: PSNR and SSIM."""
import numpy as np

from .errors import ContractError

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = np.array([0.299, 0.587, 0.114])


def _pair(pred, target):
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0)


def mse_to_psnr(mse):
    """``10 log10(1 / mse)`` for a [0, 1] range; ``mse == 0`` maps to the 100 dB cap."""
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * np.log10(mse))


def psnr(pred, target):
    a, b = _pair(pred, target)
    return float(mse_to_psnr(float(np.mean((a - b) ** 2))))


def to_gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ LUMA
    if img.ndim == 3 and img.shape[2] == 1:
        return img[..., 0]
    if img.ndim == 2:
        return img
    raise ContractError(f"expected (H, W), (H, W, 1) or (H, W, 3) image, got {img.shape}")


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, 'valid' positions only
    rows = np.lib.stride_tricks.sliding_window_view(img, g.size, axis=1) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, g.size, axis=0) @ g


def ssim_map(pred, target):
    a, b = _pair(to_gray(pred), to_gray(target))
    if min(a.shape) < SSIM_WINDOW:
        raise ContractError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    g = gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(pred, target):
    """Mean SSIM over all valid 11x11 Gaussian-window positions (sigma 1.5).

    RGB inputs are reduced to luminance first; values are clipped to [0, 1].
    """
    return float(np.mean(ssim_map(pred, target)))
