"""Model checkpoints: one JSON file, parameters as base64 little-endian float64."""
import base64
import json

import numpy as np

from .activations import ActivationFamily
from .errors import ContractError
from .net import Mlp, PositionalEncoder

MAGIC = "FINER-CKPT-1"


def _pack(a):
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _unpack(s, shape):
    a = np.frombuffer(base64.b64decode(s), dtype="<f8").astype(np.float64)
    if a.size != int(np.prod(shape)):
        raise ContractError(f"checkpoint array has {a.size} values, expected shape {shape}")
    return a.reshape(shape)


def to_dict(mlp):
    dims = mlp.dims
    dims[0] = mlp.in_features
    return {
        "magic": MAGIC,
        "dims": dims,
        "activation": mlp.activation.to_dict(),
        "encoder": None if mlp.encoder is None else mlp.encoder.to_dict(),
        "k": mlp.k,
        "seed": mlp.seed,
        "layers": [
            {"weight_shape": list(w.shape), "weight": _pack(w), "bias": _pack(b)}
            for w, b in zip(mlp.weights, mlp.biases)
        ],
    }


def from_dict(d):
    if d.get("magic") != MAGIC:
        raise ContractError(f"not a {MAGIC} checkpoint (magic={d.get('magic')!r})")
    weights, biases = [], []
    for layer in d["layers"]:
        shape = tuple(layer["weight_shape"])
        weights.append(_unpack(layer["weight"], shape))
        biases.append(_unpack(layer["bias"], (shape[0],)))
    enc = d.get("encoder")
    encoder = None if enc is None else PositionalEncoder(int(enc["num_bands"]), bool(enc["include_input"]))
    mlp = Mlp(weights, biases, ActivationFamily.from_dict(d["activation"]), encoder,
              float(d["k"]), int(d["seed"]))
    if mlp.in_features != d["dims"][0]:
        raise ContractError("checkpoint dims do not match its layer shapes")
    return mlp


def dumps(mlp):
    return json.dumps(to_dict(mlp), indent=1, sort_keys=True) + "\n"


def save(mlp, path):
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(dumps(mlp))


def load(path):
    with open(path, encoding="ascii") as f:
        return from_dict(json.load(f))
