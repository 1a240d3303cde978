import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from finer import activations as A
from finer.errors import ContractError
from finer.frequency import instantaneous_frequency, subfunction_boundary

FAMILIES = [A.finer(1.0), A.finer(30.0), A.sine(30.0), A.gaussian(0.05), A.identity(), A.relu()]


def test_finer_zero():
    assert A.activate(A.finer(1.0), 0.0) == 0.0


def test_finer_root_of_first_subfunction():
    x = (math.sqrt(1 + 4 * math.pi) - 1) / 2
    assert abs(A.activate(A.finer(1.0), x)) < 1e-14


def test_finer_is_odd(rng):
    x = rng.uniform(-5, 5, 100)
    f = A.finer(3.0)
    assert np.array_equal(A.activate(f, -x), -A.activate(f, x))


def test_sine_quarter_period():
    assert A.activate(A.sine(30.0), math.pi / 60) == pytest.approx(1.0, abs=1e-15)


def test_gaussian_and_identity():
    g = A.gaussian(0.5)
    assert A.activate(g, 0.0) == 1.0
    assert A.activate(g, 0.5) == pytest.approx(math.exp(-0.5))
    assert A.activate(A.identity(), -2.5) == -2.5


def test_grad_at_origin():
    assert A.activate_grad(A.finer(1.0), 0.0) == 1.0
    assert A.activate_grad(A.finer(2.5), 0.0) == 2.5
    assert A.activate_grad(A.gaussian(0.05), 0.0) == 0.0


@pytest.mark.parametrize("family", [A.finer(2.5), A.sine(3.0), A.gaussian(0.3)], ids=lambda f: f.tag.value)
def test_grad_matches_central_difference(family, rng):
    h = 1e-6
    for x in rng.uniform(-2, 2, 50):
        fd = (A.activate(family, x + h) - A.activate(family, x - h)) / (2 * h)
        g = A.activate_grad(family, x)
        assert abs(fd - g) <= 1e-6 * max(abs(g), 1.0)


def test_family_validation():
    with pytest.raises(ContractError):
        A.finer(0.0)
    with pytest.raises(ContractError):
        A.sine(-1.0)
    with pytest.raises(ContractError):
        A.gaussian(0.0)
    assert A.ActivationFamily.from_dict(A.finer(7.0).to_dict()) == A.finer(7.0)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f"{f.tag.value}-{f.omega0:g}")
def test_fused_matches_reference(family, each_backend, rng):
    g = rng.uniform(-3, 3, size=(37, 11))
    b = rng.uniform(-1, 1, size=11)
    z, dz = A.fused(family, g, bias=b)
    np.testing.assert_allclose(z, A.activate(family, g + b), rtol=0, atol=1e-13)
    np.testing.assert_allclose(dz, A.activate_grad(family, g + b), rtol=1e-13, atol=1e-13 * family.omega0)
    z2, none = A.fused(family, g, want_grad=False, bias=b)
    assert none is None and np.array_equal(z, z2)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-5e5, 5e5)))
def test_fast_sincos_accuracy(x):
    from finer import _accel

    if not _accel.HAVE_NUMBA:
        return
    with _accel.backend("numba"):
        z, dz = A.fused(A.sine(1.0), x[None, :])
    np.testing.assert_allclose(z[0], np.sin(x), rtol=0, atol=4e-16 * max(1.0, np.abs(x).max() * 1e-6) + 2e-16)
    np.testing.assert_allclose(dz[0], np.cos(x), rtol=0, atol=4e-16 * max(1.0, np.abs(x).max() * 1e-6) + 2e-16)


def test_huge_arguments_use_libm():
    from finer import _accel

    x = np.array([[1e7, -3e9, 1e15]])
    with _accel.backend("numba" if _accel.HAVE_NUMBA else "numpy"):
        z, dz = A.fused(A.sine(1.0), x)
    np.testing.assert_allclose(z, np.sin(x), atol=1e-15)
    np.testing.assert_allclose(dz, np.cos(x), atol=1e-15)


def test_dense_affine(each_backend, rng):
    z = rng.normal(size=(9, 3))
    w = rng.normal(size=(5, 3))
    b = rng.normal(size=5)
    g, none = A.dense(z, w, b)
    assert none is None
    np.testing.assert_allclose(g, z @ w.T + b, atol=1e-14)


def test_instantaneous_frequency_containment():
    # FINER's first sub-function sweeps [w0, w0 (2 x_1 + 1)], SINE stays at w0
    w0 = 30.0
    x1 = subfunction_boundary(1)
    lo, hi = instantaneous_frequency(A.finer(w0), np.array([0.0, x1]))
    assert lo == w0
    assert hi == pytest.approx(w0 * (2 * x1 + 1))
    assert hi > lo
    assert np.all(instantaneous_frequency(A.sine(w0), np.array([0.0, x1])) == w0)
    mids = instantaneous_frequency(A.finer(w0), np.linspace(0, x1, 101))
    assert np.all((mids >= lo) & (mids <= hi)) and np.all(np.diff(mids) > 0)
    with pytest.raises(ContractError):
        instantaneous_frequency(A.gaussian(), 0.0)
