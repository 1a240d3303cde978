"""Sub-function geometry of ``sin((|x|+1)x)`` and per-neuron frequency estimates."""
import math

import numpy as np

from .activations import Tag, activate
from .errors import ContractError


def subfunction_boundary(n):
    """Positive root of ``(x + 1) x = n pi``: the end of the n-th half-period.

    Evaluated as ``2 n pi / (sqrt(4 n pi + 1) + 1)`` which equals
    ``(sqrt(4 n pi + 1) - 1) / 2`` without the cancellation.
    """
    if int(n) != n or n < 1:
        raise ContractError(f"sub-function index must be a positive integer, got {n}")
    npi = n * math.pi
    return 2.0 * npi / (math.sqrt(4.0 * npi + 1.0) + 1.0)


def frequency_scale_constants():
    """Frequency ratios between neighbouring stretches of ``sin((|x|+1)x)``.

    ``c1 = 2 pi / (sqrt(4 pi + 1) - 1)``: plain sine to the first sub-function.
    ``c2 = (sqrt(4 pi + 1) - 1) / (sqrt(12 pi + 1) - sqrt(4 pi + 1))``: first
    to second sub-function.
    """
    r1 = math.sqrt(4.0 * math.pi + 1.0)
    r3 = math.sqrt(12.0 * math.pi + 1.0)
    return 2.0 * math.pi / (r1 - 1.0), (r1 - 1.0) / (r3 - r1)


def instantaneous_frequency(family, g):
    """Angular frequency d(phase)/dg of the activation at pre-activation ``g``."""
    g = np.asarray(g, dtype=np.float64)
    if family.tag is Tag.FINER:
        return family.omega0 * (2.0 * np.abs(g) + 1.0)
    if family.tag is Tag.SINE:
        return np.full_like(g, family.omega0)
    raise ContractError(f"{family.tag.value} activation has no phase")


def zero_crossings(signal):
    """Sign changes along the last axis; exact zeros are skipped over."""
    s = np.sign(np.asarray(signal, dtype=np.float64))
    if s.ndim == 1:
        nz = s[s != 0]
        return int(np.count_nonzero(nz[1:] != nz[:-1]))
    return np.array([zero_crossings(row) for row in s.reshape(-1, s.shape[-1])]).reshape(s.shape[:-1])


def dominant_frequency(signal, length):
    """Cycles per unit length estimated as ``crossings / (2 * length)``."""
    return zero_crossings(signal) / (2.0 * length)


def neuron_frequency_map(mlp, grid):
    """First-layer neuron responses over a regular grid and their frequencies.

    Parameters
    ----------
    mlp : Mlp
        Network whose first layer is inspected (positional encoding, if any,
        is applied first).
    grid : ndarray
        1-D array of ``n`` positions for 1-D inputs, or an ``(ny, nx, 2)``
        array of 2-D positions.

    Returns
    -------
    outputs : ndarray
        ``(width, n)`` for 1-D grids, ``(width, ny, nx)`` for 2-D.
    freqs : ndarray
        ``(width,)`` dominant frequency per neuron, in cycles per unit length.
        For 2-D grids the larger of the row-wise and column-wise estimates
        (each a mean over the lines of that direction) is reported.
    """
    grid = np.asarray(grid, dtype=np.float64)
    w, b = mlp.weights[0], mlp.biases[0]
    if grid.ndim == 1:
        if grid.size < 4:
            raise ContractError("frequency map needs at least 4 grid points")
        x = grid[:, None]
        z = mlp.encoder.encode(x) if mlp.encoder is not None else x
        out = activate(mlp.activation, z @ w.T + b).T
        length = float(grid[-1] - grid[0])
        freqs = np.array([dominant_frequency(row, length) for row in out])
        return out, freqs
    if grid.ndim != 3 or grid.shape[-1] != 2:
        raise ContractError(f"2-D grid must be (ny, nx, 2), got {grid.shape}")
    ny, nx = grid.shape[:2]
    if ny * nx < 4 or min(ny, nx) < 2:
        raise ContractError("frequency map needs at least 4 grid points")
    x = grid.reshape(-1, 2)
    z = mlp.encoder.encode(x) if mlp.encoder is not None else x
    out = activate(mlp.activation, z @ w.T + b).T.reshape(-1, ny, nx)
    len_x = float(grid[0, -1, 0] - grid[0, 0, 0])
    len_y = float(grid[-1, 0, 1] - grid[0, 0, 1])
    fx = zero_crossings(out).mean(axis=1) / (2.0 * len_x)
    fy = zero_crossings(np.swapaxes(out, 1, 2)).mean(axis=1) / (2.0 * len_y)
    return out, np.maximum(fx, fy)
