import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import data_path
from finer import activations as A
from finer.errors import ContractError
from finer.images import (BatchMode, FitConfig, ImageTarget, fit_image, image_batch, load_image,
                          pixel_coords, save_image)
from finer.metrics import PSNR_CAP, psnr, ssim
from finer.net import InitScheme


def test_psnr_oracles():
    a = np.full((8, 8, 3), 0.3)
    assert psnr(a, a) == PSNR_CAP == 100.0
    assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == 0.0
    assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.5)) == pytest.approx(6.0206, abs=5e-5)
    assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.5)) == pytest.approx(10 * np.log10(4), rel=1e-15)


def test_psnr_clamps_and_checks_shape():
    assert psnr(np.full((4, 4), 1.7), np.ones((4, 4))) == PSNR_CAP
    with pytest.raises(ContractError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_psnr_symmetric_and_monotone(rng):
    img = rng.random((32, 32))
    noise = rng.uniform(-1, 1, img.shape)
    values = [psnr(np.clip(img + a * noise, 0, 1), img) for a in (0.01, 0.05, 0.1, 0.2, 0.4)]
    assert all(b < a for a, b in zip(values, values[1:]))
    other = rng.random((32, 32))
    assert psnr(img, other) == psnr(other, img)


def test_ssim_oracles(rng):
    img = rng.random((32, 32, 3))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)
    gray = 0.5 + 0.4 * np.sin(np.linspace(0, 12, 32))[:, None] * np.cos(np.linspace(0, 9, 32))[None, :]
    assert ssim(gray, 1.0 - gray) < 0
    c = np.full((16, 16), 0.5)
    assert ssim(c, c) == 1.0
    with pytest.raises(ContractError):
        ssim(np.zeros((10, 30)), np.zeros((10, 30)))


def test_ssim_matches_reference_implementation(rng):
    skm = pytest.importorskip("skimage.metrics")
    a = rng.random((40, 48))
    b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
    ref = skm.structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-10)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)


def test_full_batch_coordinates():
    img = ImageTarget(np.arange(4, dtype=float).reshape(2, 2) / 3)
    coords, values = image_batch(img, BatchMode.FULL)
    assert coords.tolist() == [[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]]
    assert values[:, 0].tolist() == (np.arange(4) / 3).tolist()
    assert pixel_coords(1, 1).tolist() == [[0.0, 0.0]]


def test_random_batch_frequencies():
    img = ImageTarget(np.zeros((2, 2)))
    coords, _ = image_batch(img, BatchMode.RANDOM, 1000, np.random.default_rng(5))
    _, counts = np.unique(coords, axis=0, return_counts=True)
    assert len(counts) == 4 and np.all(np.abs(counts / 1000 - 0.25) <= 0.05)
    with pytest.raises(ContractError):
        image_batch(img, BatchMode.RANDOM, None, np.random.default_rng(0))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9))
def test_pixel_centres_inside_square(h, w):
    c = pixel_coords(h, w)
    assert c.shape == (h * w, 2) and np.all(np.abs(c) < 1)
    np.testing.assert_allclose(c.mean(axis=0), 0.0, atol=1e-15)


def test_image_target_validation():
    with pytest.raises(ContractError):
        ImageTarget(np.full((4, 4), 1.5))
    with pytest.raises(ContractError):
        ImageTarget(np.zeros((4, 4, 2)))
    assert ImageTarget(np.zeros((3, 5))).channels == 1


@pytest.mark.parametrize("ext", ["png", "ppm", "pgm"])
def test_image_roundtrip(tmp_path, rng, ext):
    data = rng.integers(0, 256, size=(6, 7, 1 if ext == "pgm" else 3)) / 255.0
    path = tmp_path / f"img.{ext}"
    save_image(data, path)
    back = load_image(path)
    assert np.array_equal(back.data, data)


def test_sample_crops_present():
    for name in ("astronaut", "coffee", "chelsea"):
        img = load_image(data_path(f"{name}.png"))
        assert (img.height, img.width, img.channels) == (128, 128, 3)


@pytest.mark.parametrize("family", [A.finer(30.0), A.sine(30.0), A.gaussian(0.05), A.relu()],
                         ids=lambda f: f.tag.value)
def test_constant_image_is_easy(family):
    img = ImageTarget(np.full((16, 16, 3), 0.5))
    res = fit_image(img, family, InitScheme(seed=0), FitConfig(hidden=(32, 32), iters=200, lr=2e-2))
    assert res.psnr > 40.0
    assert len(res.log) == 200


def test_fit_image_is_bit_reproducible():
    img = ImageTarget(load_image(data_path("coffee.png")).data[::8, ::8])
    cfg = FitConfig(hidden=(16, 16), iters=20)
    a = fit_image(img, A.finer(), InitScheme(seed=3), cfg)
    b = fit_image(img, A.finer(), InitScheme(seed=3), cfg)
    assert np.array_equal(a.mlp.flat(), b.mlp.flat()) and a.psnr == b.psnr
    assert a.log.loss == b.log.loss


def test_random_batches_for_large_images():
    img = ImageTarget(np.full((300, 300), 0.25))
    res = fit_image(img, A.finer(), InitScheme(seed=0), FitConfig(hidden=(8,), iters=2, batch=None))
    assert res.log.psnr == [None, None]  # minibatch mode: no full-image metric per step
