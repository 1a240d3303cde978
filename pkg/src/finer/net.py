"""Coordinate MLP: initialisation, forward pass and reverse-mode gradients.

Hidden layer ``l`` computes ``g = W z + b`` and ``z' = act(g)``; the last
layer is affine.  Weights are stored ``(out, in)`` so a batch ``Z`` (rows are
samples) maps to ``Z @ W.T + b``.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationFamily, Tag, dense
from .errors import ContractError


class WeightRule(enum.Enum):
    FIRST_LAYER = "first_layer"    # U(-1/n, 1/n)
    SIREN_HIDDEN = "siren_hidden"  # U(-sqrt(6/n), sqrt(6/n)), effective weights


@dataclass(frozen=True)
class InitScheme:
    """Initialisation ranges: weights by rule, every hidden bias ``U(-k, k)``."""

    k: float = 1.0 / math.sqrt(2.0)
    seed: int = 0

    def __post_init__(self):
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ContractError(f"bias half-width k must be >= 0, got {self.k}")

    def rule(self, layer, family):
        if layer == 0 and family.tag is not Tag.RELU:
            return WeightRule.FIRST_LAYER
        return WeightRule.SIREN_HIDDEN

    def weight_bound(self, layer, fan_in, family):
        """Half-width of the stored weights of ``layer``.

        Periodic families multiply every pre-activation by ``omega0``, so the
        stored hidden weights are divided by it: ``omega0 * W`` then spans the
        ``sqrt(6/n)`` range.
        """
        if self.rule(layer, family) is WeightRule.FIRST_LAYER:
            return 1.0 / fan_in
        bound = math.sqrt(6.0 / fan_in)
        if family.periodic:
            bound /= family.omega0
        return bound

    def rng(self, layer):
        # counter-based stream per layer: adding layers never reshuffles earlier draws
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(layer,))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PositionalEncoder:
    """Fourier features ``sin(2^j pi x), cos(2^j pi x)`` for ``j < num_bands``."""

    num_bands: int = 10
    include_input: bool = True

    def out_dim(self, d_in):
        return d_in * 2 * self.num_bands + (d_in if self.include_input else 0)

    def _freqs(self):
        return np.pi * 2.0 ** np.arange(self.num_bands)

    def encode(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        arg = x[:, :, None] * self._freqs()            # (B, d, L)
        feats = np.stack([np.sin(arg), np.cos(arg)], axis=-1)  # (B, d, L, 2)
        feats = feats.reshape(x.shape[0], -1)
        if self.include_input:
            feats = np.concatenate([x, feats], axis=1)
        return feats

    def backward(self, x, grad_feats):
        """Pull a gradient w.r.t. the features back to the raw coordinates."""
        x = np.asarray(x, dtype=np.float64)
        b, d = x.shape
        f = self._freqs()
        off = d if self.include_input else 0
        g = grad_feats[:, off:].reshape(b, d, self.num_bands, 2)
        arg = x[:, :, None] * f
        gx = np.sum(g[..., 0] * np.cos(arg) * f - g[..., 1] * np.sin(arg) * f, axis=2)
        if self.include_input:
            gx = gx + grad_feats[:, :d]
        return gx

    def to_dict(self):
        return {"num_bands": self.num_bands, "include_input": self.include_input}


@dataclass
class Mlp:
    weights: list
    biases: list
    activation: ActivationFamily
    encoder: PositionalEncoder = None
    k: float = 0.0
    seed: int = 0

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_features(self):
        """Raw coordinate dimension, before positional encoding."""
        d = self.weights[0].shape[1]
        if self.encoder is None:
            return d
        per = 2 * self.encoder.num_bands + (1 if self.encoder.include_input else 0)
        return d // per

    @property
    def out_features(self):
        return self.weights[-1].shape[0]

    @property
    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """Flat parameter list in layer order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.activation, self.encoder, self.k, self.seed)

    def flat(self):
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.num_params:
            raise ContractError(f"expected {self.num_params} parameters, got {theta.size}")
        i = 0
        for p in self.params():
            p[...] = theta[i:i + p.size].reshape(p.shape)
            i += p.size


@dataclass
class GradientSet:
    weights: list
    biases: list
    inputs: np.ndarray = None

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self):
        return np.concatenate([p.ravel() for p in self.params()])


@dataclass
class ForwardCache:
    x: np.ndarray                  # raw coordinates
    inputs: list                   # z^{l-1} fed into every layer
    dact: list = field(default_factory=list)  # act'(g) for hidden layers


def init_mlp(dims, family, scheme=None, encoder=None):
    """Draw a network with layer widths ``dims = [d_in, h1, ..., d_out]``.

    ``d_in`` is the raw coordinate dimension; with an ``encoder`` the first
    layer sees ``encoder.out_dim(d_in)`` features.  Hidden biases are drawn
    from ``U(-k, k)``; the output bias starts at zero.
    """
    scheme = scheme or InitScheme()
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) <= 0:
        raise ContractError(f"invalid layer widths {dims}")
    widths = list(dims)
    if encoder is not None:
        widths[0] = encoder.out_dim(dims[0])
    weights, biases = [], []
    n_layers = len(widths) - 1
    for layer in range(n_layers):
        fan_in, fan_out = widths[layer], widths[layer + 1]
        rng = scheme.rng(layer)
        bound = scheme.weight_bound(layer, fan_in, family)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        if layer == n_layers - 1:
            b = np.zeros(fan_out)
        else:
            b = rng.uniform(-scheme.k, scheme.k, size=fan_out) if scheme.k > 0 else np.zeros(fan_out)
        weights.append(w)
        biases.append(b)
    return Mlp(weights, biases, family, encoder, float(scheme.k), int(scheme.seed))


def _check_input(mlp, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ContractError(f"coordinates must be (batch, dim), got {x.shape}")
    bad = ~np.isfinite(x)
    if bad.any():
        row = int(np.argwhere(bad)[0, 0])
        raise ContractError(f"non-finite coordinate in batch row {row}: {x[row].tolist()}")
    if x.shape[1] != mlp.in_features:
        raise ContractError(f"coordinate dimension {x.shape[1]} != network input {mlp.in_features}")
    return x


def forward(mlp, x, keep_cache=True):
    """Evaluate the network on a batch of coordinates.

    Returns ``(outputs, cache)``; ``cache`` is ``None`` when ``keep_cache`` is
    false, which also skips computing activation derivatives.
    """
    x = _check_input(mlp, x)
    z = mlp.encoder.encode(x) if mlp.encoder is not None else x
    cache = ForwardCache(x, []) if keep_cache else None
    last = len(mlp.weights) - 1
    for layer, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        if keep_cache:
            cache.inputs.append(z)
        if layer == last:
            return dense(z, w, b)[0], cache
        z, dz = dense(z, w, b, mlp.activation, want_grad=keep_cache)
        if keep_cache:
            cache.dact.append(dz)


def predict(mlp, x, chunk=65536):
    """Cache-free forward pass in fixed-size chunks (large lattices)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    out = np.empty((x.shape[0], mlp.out_features))
    for s in range(0, x.shape[0], chunk):
        out[s:s + chunk] = forward(mlp, x[s:s + chunk], keep_cache=False)[0]
    return out


def backward(mlp, cache, output_grad, input_grad=False):
    """Reverse-mode gradients of a scalar loss, given ``dL/d(outputs)``.

    Batch contributions are summed by the matrix products, so the reduction
    order is fixed for a given batch shape.
    """
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.ndim == 1:
        output_grad = output_grad[:, None]
    n_layers = len(mlp.weights)
    if len(cache.inputs) != n_layers or len(cache.dact) != n_layers - 1:
        raise ContractError("cache does not match this network")
    batch = cache.inputs[0].shape[0]
    if output_grad.shape != (batch, mlp.out_features):
        raise ContractError(
            f"output_grad shape {output_grad.shape} != {(batch, mlp.out_features)}")
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = output_grad
    for layer in range(n_layers - 1, -1, -1):
        gw[layer] = delta.T @ cache.inputs[layer]
        gb[layer] = delta.sum(axis=0)
        if layer > 0 or input_grad:
            dz = delta @ mlp.weights[layer]
            if layer > 0:
                delta = dz * cache.dact[layer - 1]
    gx = None
    if input_grad:
        gx = dz if mlp.encoder is None else mlp.encoder.backward(cache.x, dz)
    return GradientSet(gw, gb, gx)


def per_sample_deltas(mlp, cache):
    """Backpropagated ``dF/dg`` per layer for a scalar-output network.

    Entry ``l`` has shape ``(batch, width_l)``; the per-sample gradient of the
    weights of layer ``l`` is ``outer(deltas[l][i], cache.inputs[l][i])``.
    """
    if mlp.out_features != 1:
        raise ContractError("per-sample gradients need a scalar-output network")
    batch = cache.inputs[0].shape[0]
    n_layers = len(mlp.weights)
    deltas = [None] * n_layers
    delta = np.ones((batch, 1))
    for layer in range(n_layers - 1, -1, -1):
        deltas[layer] = delta
        if layer > 0:
            delta = (delta @ mlp.weights[layer]) * cache.dact[layer - 1]
    return deltas
