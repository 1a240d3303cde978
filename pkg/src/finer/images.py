"""2-D image fitting: pixel sampling, image IO and the training pipeline."""
import enum
from dataclasses import dataclass, field

import numpy as np

from .activations import Tag
from .errors import ContractError
from .metrics import mse_to_psnr, psnr, ssim
from .net import InitScheme, PositionalEncoder, init_mlp, predict
from .optim import AdamState, train

FULL_BATCH_LIMIT = 256 * 256
RANDOM_BATCH = 16384


@dataclass
class ImageTarget:
    """Pixels in [0, 1] with shape ``(height, width, channels)``."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ContractError(f"image must be (H, W) or (H, W, 1|3), got {d.shape}")
        if not np.isfinite(d).all() or d.min() < 0.0 or d.max() > 1.0:
            raise ContractError("pixel values must lie in [0, 1]")
        self.data = np.ascontiguousarray(d)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def num_pixels(self):
        return self.height * self.width


def pixel_coords(height, width):
    """Pixel-centre coordinates in [-1, 1]^2, x fastest, as ``(x, y)`` rows."""
    xs = (2.0 * np.arange(width) + 1.0) / width - 1.0
    ys = (2.0 * np.arange(height) + 1.0) / height - 1.0
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


class BatchMode(enum.Enum):
    FULL = "full"
    RANDOM = "random"


def image_batch(img, mode=BatchMode.FULL, size=None, rng=None):
    """Coordinates and pixel values for one training step.

    ``FULL`` returns every pixel once in raster order; ``RANDOM`` draws
    ``size`` pixels uniformly with replacement from ``rng``.
    """
    coords = pixel_coords(img.height, img.width)
    values = img.data.reshape(-1, img.channels)
    if BatchMode(mode) is BatchMode.FULL:
        return coords, values
    if size is None or size < 1:
        raise ContractError("RANDOM batches need a positive size")
    idx = rng.integers(0, img.num_pixels, size=size)
    return coords[idx], values[idx]


def load_image(path):
    """Read an 8-bit PNG, PPM (P6) or PGM (P5) into an :class:`ImageTarget`."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "1"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return ImageTarget(arr / 255.0)


def to_uint8(data):
    return np.round(np.clip(np.asarray(data), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(data, path):
    from PIL import Image

    d = to_uint8(data)
    if d.ndim == 3 and d.shape[2] == 1:
        d = d[:, :, 0]
    Image.fromarray(d).save(path)


@dataclass
class FitConfig:
    hidden: tuple = (256, 256, 256)
    iters: int = 2000
    lr: float = 1e-4
    batch: int = None           # None: full batch up to 256x256, else RANDOM_BATCH
    loss: str = "l2"
    cosine: bool = False
    pe_bands: int = 10          # positional encoding bands, used with ReLU (PEMLP)


@dataclass
class FitResult:
    mlp: object
    psnr: float
    ssim: float
    log: object
    recon: np.ndarray = field(repr=False, default=None)


def data_stream(seed):
    """Generator for batch sampling, independent of every weight stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1 << 20,))))


def build_image_model(img, family, scheme, cfg):
    encoder = PositionalEncoder(cfg.pe_bands) if family.tag is Tag.RELU else None
    dims = [2, *cfg.hidden, img.channels]
    return init_mlp(dims, family, scheme, encoder)


def reconstruct(mlp, height, width):
    """Network output on the pixel grid, mapped back to [0, 1]."""
    out = predict(mlp, pixel_coords(height, width))
    return (out.reshape(height, width, -1) + 1.0) / 2.0


def fit_image(img, family, scheme=None, cfg=None, callback=None):
    """Fit a coordinate network to an image with the L2 (or L1) loss.

    Targets are mapped to [-1, 1]; metrics are computed on the full pixel
    grid after training.
    """
    scheme = scheme or InitScheme()
    cfg = cfg or FitConfig()
    mlp = build_image_model(img, family, scheme, cfg)
    coords, values = image_batch(img, BatchMode.FULL)
    targets = 2.0 * values - 1.0
    batch = cfg.batch
    if batch is None:
        batch = img.num_pixels if img.num_pixels <= FULL_BATCH_LIMIT else RANDOM_BATCH
    if batch >= img.num_pixels:
        sampler = lambda it: (coords, targets)  # noqa: E731
        metric = (lambda loss: mse_to_psnr(loss / 4.0)) if cfg.loss == "l2" else None
    else:
        rng = data_stream(scheme.seed)

        def sampler(it):
            idx = rng.integers(0, img.num_pixels, size=batch)
            return coords[idx], targets[idx]
        metric = None
    state = AdamState.for_mlp(mlp, lr=cfg.lr)
    mlp, log = train(mlp, sampler, cfg.iters, state, loss=cfg.loss, metric=metric,
                     cosine=cfg.cosine, callback=callback)
    recon = reconstruct(mlp, img.height, img.width)
    return FitResult(mlp, psnr(recon, img.data), ssim(recon, img.data), log, recon)
