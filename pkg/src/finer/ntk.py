"""Neural tangent kernels of coordinate networks and their spectra.

Two routes to the kernel of a 1-input/1-output, one-hidden-layer FINER net
``f(x) = sum_k c_k sigma(w_k x + b_k)``:

* :func:`empirical_ntk` contracts parameter gradients obtained by
  backpropagation, for any scalar-output :class:`~finer.net.Mlp`;
* :func:`analytic_ntk_mc` evaluates the closed-form summand
  ``(x_i x_j + 1) c_k^2 s(g_k(x_i)) s(g_k(x_j))`` with
  ``s(g) = omega0 (2|g| + 1) cos(omega0 (|g| + 1) g)`` and averages it over
  initialisation draws.

The closed form only covers the hidden-layer parameters ``(w_k, b_k)``; pass
``layers=[0]`` to :func:`empirical_ntk` for the matching restriction, or
``include_readout=True`` to :func:`analytic_ntk_mc` to add the
``c_k``/output-bias terms and match the full kernel.
"""
import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from . import activations as act
from .errors import ContractError
from .linalg import sym_eigen
from .net import InitScheme, forward, init_mlp, per_sample_deltas

MAX_COORDS = 2048
DIAGONAL_ENERGY_CAP = 1e12
DEFAULT_THRESHOLDS = (1e-2, 1e-1, 1.0, 10.0)


class Provenance(enum.Enum):
    EMPIRICAL = "empirical"
    ANALYTIC_MC = "analytic_mc"


@dataclass
class KernelMatrix:
    k: np.ndarray
    coords: np.ndarray
    provenance: Provenance
    ensemble_size: int = 1
    stderr: np.ndarray = None  # Monte-Carlo standard error per entry, if averaged

    def __post_init__(self):
        n = self.k.shape[0]
        if self.k.shape != (n, n) or len(self.coords) != n:
            raise ContractError("kernel must be N x N with N coordinates")


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    counts: dict = field(default_factory=dict)
    diagonal_energy: float = 0.0

    def count_above(self, threshold):
        if threshold in self.counts:
            return self.counts[threshold]
        return int(np.count_nonzero(self.eigenvalues > threshold))


def _coords(coords):
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] > MAX_COORDS:
        raise ContractError(f"at most {MAX_COORDS} coordinates, got {x.shape[0]}")
    return x


def _symmetrise(k):
    return 0.5 * (k + k.T)


def empirical_ntk(mlp, coords, layers=None):
    """``K[i, j] = <grad_theta f(x_i), grad_theta f(x_j)>`` at the current weights.

    Per layer the weight block contributes ``(d_i . d_j)(z_i . z_j)`` and the
    bias block ``d_i . d_j``, with ``d`` the backpropagated deltas and ``z``
    the layer input, which equals the Gram matrix of the flattened gradients.
    ``layers`` restricts the sum to those layer indices.
    """
    if mlp.out_features != 1:
        raise ContractError("empirical NTK needs a scalar-output network")
    x = _coords(coords)
    _, cache = forward(mlp, x)
    deltas = per_sample_deltas(mlp, cache)
    layers = range(len(mlp.weights)) if layers is None else layers
    n = x.shape[0]
    k = np.zeros((n, n))
    for l in layers:
        d, z = deltas[l], cache.inputs[l]
        k += (d @ d.T) * (z @ z.T + 1.0)
    return KernelMatrix(_symmetrise(k), x, Provenance.EMPIRICAL)


def gradient_matrix(mlp, coords, layers=None):
    """Rows are flattened per-sample parameter gradients (W then b per layer)."""
    x = _coords(coords)
    _, cache = forward(mlp, x)
    deltas = per_sample_deltas(mlp, cache)
    layers = range(len(mlp.weights)) if layers is None else layers
    blocks = []
    for l in layers:
        d, z = deltas[l], cache.inputs[l]
        blocks.append((d[:, :, None] * z[:, None, :]).reshape(x.shape[0], -1))
        blocks.append(d)
    return np.concatenate(blocks, axis=1)


def _check_single_hidden(dims, family):
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or dims[0] != 1 or dims[2] != 1:
        raise ContractError(f"closed-form kernel needs a (1, n, 1) network, got {dims}")
    if family.tag is not act.Tag.FINER:
        raise ContractError("closed-form kernel is derived for the FINER activation")
    return dims


def _member_scheme(scheme, m):
    return InitScheme(scheme.k, scheme.seed + m)


def ntk_summand(w, b, c, x, omega0=1.0, include_readout=False):
    """Closed-form kernel of one parameter draw on 1-D coordinates ``x``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    g = x[:, None] * w[None, :] + b[None, :]
    ag = np.abs(g)
    phase = omega0 * (ag + 1.0) * g
    scale = omega0 * (2.0 * ag + 1.0)          # scale term
    feat = c[None, :] * scale * np.cos(phase)  # sign term carried by the cosine
    k = (np.outer(x, x) + 1.0) * (feat @ feat.T)
    if include_readout:
        s = np.sin(phase)
        k += s @ s.T + 1.0
    return k


def analytic_ntk_mc(dims, family, scheme, coords, ensemble_size=256, include_readout=False):
    """Monte-Carlo average of the closed-form kernel over initialisation draws.

    Draw ``m`` uses ``InitScheme(scheme.k, scheme.seed + m)``, so with
    ``ensemble_size=1`` the kernel is that of ``init_mlp(dims, family, scheme)``.
    """
    _check_single_hidden(dims, family)
    if ensemble_size < 1:
        raise ContractError("ensemble_size must be >= 1")
    x = _coords(coords)
    if x.shape[1] != 1:
        raise ContractError("closed-form kernel takes 1-D coordinates")
    n = x.shape[0]
    total = np.zeros((n, n))
    total_sq = np.zeros((n, n))
    for m in range(ensemble_size):
        mlp = init_mlp(dims, family, _member_scheme(scheme, m))
        km = ntk_summand(mlp.weights[0][:, 0], mlp.biases[0], mlp.weights[1][0], x,
                         family.omega0, include_readout)
        total += km
        total_sq += km * km
    mean = total / ensemble_size
    stderr = None
    if ensemble_size > 1:
        var = np.maximum(total_sq - ensemble_size * mean * mean, 0.0) / (ensemble_size - 1)
        stderr = np.sqrt(var / ensemble_size)
    return KernelMatrix(_symmetrise(mean), x, Provenance.ANALYTIC_MC, ensemble_size, stderr)


def empirical_ntk_mean(dims, family, scheme, coords, ensemble_size=256, layers=None):
    """Average of :func:`empirical_ntk` over independently initialised nets."""
    if ensemble_size < 1:
        raise ContractError("ensemble_size must be >= 1")
    x = _coords(coords)
    n = x.shape[0]
    total = np.zeros((n, n))
    total_sq = np.zeros((n, n))
    for m in range(ensemble_size):
        km = empirical_ntk(init_mlp(dims, family, _member_scheme(scheme, m)), x, layers).k
        total += km
        total_sq += km * km
    mean = total / ensemble_size
    stderr = None
    if ensemble_size > 1:
        var = np.maximum(total_sq - ensemble_size * mean * mean, 0.0) / (ensemble_size - 1)
        stderr = np.sqrt(var / ensemble_size)
    return KernelMatrix(_symmetrise(mean), x, Provenance.EMPIRICAL, ensemble_size, stderr)


def diagonal_energy(k):
    """``mean(diag) / mean(|off-diagonal|)``, capped at ``DIAGONAL_ENERGY_CAP``."""
    k = np.asarray(k, dtype=np.float64)
    n = k.shape[0]
    diag = float(np.mean(np.diag(k)))
    if n < 2:
        return DIAGONAL_ENERGY_CAP
    off = (np.sum(np.abs(k)) - np.sum(np.abs(np.diag(k)))) / (n * n - n)
    if off <= diag / DIAGONAL_ENERGY_CAP:
        return DIAGONAL_ENERGY_CAP
    return diag / off


def spectrum(kernel, thresholds=DEFAULT_THRESHOLDS):
    k = kernel.k if isinstance(kernel, KernelMatrix) else np.asarray(kernel, dtype=np.float64)
    w, _ = sym_eigen(k)
    counts = {float(t): int(np.count_nonzero(w > t)) for t in thresholds}
    return SpectrumReport(w, counts, diagonal_energy(k))


def write_kernel_csv(kernel, path):
    np.savetxt(path, kernel.k, delimiter=",", fmt="%.17g")


def write_spectrum_csv(reports, path):
    """``reports`` maps a label (e.g. the bias range) to a SpectrumReport."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label", "index", "eigenvalue"])
        for label, rep in reports.items():
            for i, ev in enumerate(rep.eigenvalues):
                w.writerow([label, i, repr(float(ev))])


def kernel_heatmap(kernel):
    """Min-max normalised 8-bit grayscale image of the kernel, row-major."""
    k = kernel.k if isinstance(kernel, KernelMatrix) else np.asarray(kernel)
    lo, hi = float(k.min()), float(k.max())
    scaled = np.zeros_like(k) if hi == lo else (k - lo) / (hi - lo)
    return np.round(scaled * 255.0).astype(np.uint8)


def write_kernel_png(kernel, path):
    from PIL import Image

    Image.fromarray(kernel_heatmap(kernel), mode="L").save(path)
