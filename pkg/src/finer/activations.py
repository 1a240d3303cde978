"""Activation families for coordinate networks.

``FINER`` is the variable-periodic activation ``sin(omega0 * (|x| + 1) * x)``;
its local frequency ``omega0 * (2|x| + 1)`` grows with ``|x|``, so the bias
offset of a neuron picks which stretch of the function it works in.
``SINE`` is the SIREN activation ``sin(omega0 * x)``.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ContractError


class Tag(enum.Enum):
    FINER = "finer"
    SINE = "sine"
    GAUSSIAN = "gauss"
    IDENTITY = "identity"
    RELU = "relu"


_CODES = {Tag.FINER: 0, Tag.SINE: 1, Tag.GAUSSIAN: 2, Tag.IDENTITY: 3, Tag.RELU: 4}
PERIODIC = (Tag.FINER, Tag.SINE)


@dataclass(frozen=True)
class ActivationFamily:
    tag: Tag
    omega0: float = 30.0
    sigma: float = 0.05

    def __post_init__(self):
        if not isinstance(self.tag, Tag):
            object.__setattr__(self, "tag", Tag(self.tag))
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise ContractError(f"omega0 must be positive, got {self.omega0}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ContractError(f"sigma must be positive, got {self.sigma}")

    @property
    def periodic(self):
        return self.tag in PERIODIC

    def to_dict(self):
        return {"tag": self.tag.value, "omega0": self.omega0, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d):
        return cls(Tag(d["tag"]), float(d["omega0"]), float(d["sigma"]))


def finer(omega0=30.0):
    return ActivationFamily(Tag.FINER, omega0)


def sine(omega0=30.0):
    return ActivationFamily(Tag.SINE, omega0)


def gaussian(sigma=0.05):
    return ActivationFamily(Tag.GAUSSIAN, sigma=sigma)


def identity():
    return ActivationFamily(Tag.IDENTITY)


def relu():
    return ActivationFamily(Tag.RELU)


def activate(family, x):
    """Apply the activation elementwise (scalars or arrays)."""
    x = np.asarray(x, dtype=np.float64)
    w = family.omega0
    tag = family.tag
    if tag is Tag.FINER:
        out = np.sin(w * (np.abs(x) + 1.0) * x)
    elif tag is Tag.SINE:
        out = np.sin(w * x)
    elif tag is Tag.GAUSSIAN:
        out = np.exp(-(x * x) / (2.0 * family.sigma**2))
    elif tag is Tag.RELU:
        out = np.maximum(x, 0.0)
    else:
        out = x.copy()
    return out[()] if out.ndim == 0 else out


def activate_grad(family, x):
    """Exact derivative of :func:`activate` with respect to its input.

    For FINER, ``(|x| + 1) * x`` has slope ``2|x| + 1`` (1 at the origin), so
    the derivative is ``omega0 * (2|x| + 1) * cos(omega0 * (|x| + 1) * x)``.
    ReLU uses 0 at the kink.
    """
    x = np.asarray(x, dtype=np.float64)
    w = family.omega0
    tag = family.tag
    if tag is Tag.FINER:
        ax = np.abs(x)
        out = w * (2.0 * ax + 1.0) * np.cos(w * (ax + 1.0) * x)
    elif tag is Tag.SINE:
        out = w * np.cos(w * x)
    elif tag is Tag.GAUSSIAN:
        s2 = family.sigma**2
        out = -(x / s2) * np.exp(-(x * x) / (2.0 * s2))
    elif tag is Tag.RELU:
        out = (x > 0.0).astype(np.float64)
    else:
        out = np.ones_like(x)
    return out[()] if out.ndim == 0 else out


# Argument reduction by pi/2 (Cody-Waite, exact for |n| < 2**20) and the
# fdlibm minimax kernels on [-pi/4, pi/4].  One reduction feeds both sin and
# cos and the loop stays branch-free, so LLVM vectorises it.
_TWO_OVER_PI = 6.36619772367581382433e-01
_PIO2_1 = 1.57079632673412561417e+00
_PIO2_1T = 6.07710050650619224932e-11
_REDUCE_LIMIT = 1.0e6
_S1, _S2, _S3 = -1.66666666666666324348e-01, 8.33333333332248946124e-03, -1.98412698298579493134e-04
_S4, _S5, _S6 = 2.75573137070700676789e-06, -2.50507602534068634195e-08, 1.58969099521155010221e-10
_C1, _C2, _C3 = 4.16666666666666019037e-02, -1.38888888888741095749e-03, 2.48015872894767294178e-05
_C4, _C5, _C6 = -2.75573143513906633035e-07, 2.08757232129817482790e-09, -1.13596475577881948265e-11


@_accel.njit(inline="always")
def _sincos(a):
    n = np.floor(a * _TWO_OVER_PI + 0.5)
    r = (a - n * _PIO2_1) - n * _PIO2_1T
    q = np.int64(n)
    t = r * r
    s = r + r * t * (_S1 + t * (_S2 + t * (_S3 + t * (_S4 + t * (_S5 + t * _S6)))))
    c = 1.0 - 0.5 * t + t * t * (_C1 + t * (_C2 + t * (_C3 + t * (_C4 + t * (_C5 + t * _C6)))))
    odd = (q & 1) == 1
    sb = c if odd else s
    cb = s if odd else c
    return (1.0 - 2.0 * ((q >> 1) & 1)) * sb, (1.0 - 2.0 * (((q + 1) >> 1) & 1)) * cb


@_accel.njit
def _periodic_numba(pre, bias, omega0, variable, z, dz, want_grad):
    rows, cols = pre.shape
    big = False
    for i in range(rows):
        for j in range(cols):
            x = pre[i, j] + bias[j]
            ax = abs(x)
            scale = ax + 1.0 if variable else 1.0
            slope = 2.0 * ax + 1.0 if variable else 1.0
            a = omega0 * scale * x
            big = big | (abs(a) > _REDUCE_LIMIT)
            s, c = _sincos(a)
            z[i, j] = s
            if want_grad:
                dz[i, j] = omega0 * slope * c
    if big:
        for i in range(rows):
            for j in range(cols):
                x = pre[i, j] + bias[j]
                ax = abs(x)
                a = omega0 * (ax + 1.0) * x if variable else omega0 * x
                if abs(a) > _REDUCE_LIMIT:
                    z[i, j] = np.sin(a)
                    if want_grad:
                        dz[i, j] = omega0 * (2.0 * ax + 1.0 if variable else 1.0) * np.cos(a)


@_accel.njit
def _other_numba(pre, bias, code, sigma, z, dz, want_grad):
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    rows, cols = pre.shape
    for i in range(rows):
        for j in range(cols):
            x = pre[i, j] + bias[j]
            if code == 2:
                e = np.exp(-x * x * inv2s2)
                z[i, j] = e
                if want_grad:
                    dz[i, j] = -2.0 * x * inv2s2 * e
            elif code == 3:
                z[i, j] = x
                if want_grad:
                    dz[i, j] = 1.0
            else:
                pos = x > 0.0
                z[i, j] = x if pos else 0.0
                if want_grad:
                    dz[i, j] = 1.0 if pos else 0.0


@_accel.njit
def _affine_small(x, w, b, out):
    # BLAS is slow for fan-in of a few coordinates; do it directly
    rows, fan_in = x.shape
    fan_out = w.shape[0]
    for i in range(rows):
        for j in range(fan_out):
            acc = b[j]
            for k in range(fan_in):
                acc += x[i, k] * w[j, k]
            out[i, j] = acc


def _fused_numba(pre, bias, family, want_grad):
    z = np.empty_like(pre)
    dz = np.empty_like(pre) if want_grad else np.empty((0, 0))
    if family.periodic:
        _periodic_numba(pre, bias, family.omega0, family.tag is Tag.FINER, z, dz, want_grad)
    else:
        _other_numba(pre, bias, _CODES[family.tag], family.sigma, z, dz, want_grad)
    return z, (dz if want_grad else None)


def _fused_numpy(g, family, want_grad):
    z = activate(family, g)
    dz = activate_grad(family, g) if want_grad else None
    return z, dz


def fused(family, g, want_grad=True, bias=None):
    """Activation and (optionally) its derivative in one pass over ``g + bias``.

    Returns ``(z, dz)`` with ``dz`` ``None`` when ``want_grad`` is false.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.ndim != 2:
        z, dz = fused(family, g.reshape(1, -1), want_grad)
        return z.reshape(g.shape), (dz.reshape(g.shape) if want_grad else None)
    if bias is None:
        bias = np.zeros(g.shape[1])
    if _accel.use_numba():
        return _fused_numba(g, np.ascontiguousarray(bias, dtype=np.float64), family, want_grad)
    return _fused_numpy(g + bias, family, want_grad)


def dense(z, w, b, family=None, want_grad=True):
    """``family(z @ w.T + b)`` with the activation fused into the bias pass.

    ``family=None`` returns the affine map alone as ``(g, None)``.
    """
    if _accel.use_numba() and z.shape[1] <= 8:
        out = np.empty((z.shape[0], w.shape[0]))
        _affine_small(np.ascontiguousarray(z), w, b if family is None else np.zeros_like(b), out)
        if family is None:
            return out, None
        return _fused_numba(out, b, family, want_grad)
    pre = z @ w.T
    if family is None:
        pre += b
        return pre, None
    return fused(family, pre, want_grad, bias=b)
