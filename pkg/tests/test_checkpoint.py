import json

import numpy as np
import pytest

from finer import activations as A
from finer import checkpoint
from finer.errors import ContractError
from finer.net import InitScheme, PositionalEncoder, forward, init_mlp


@pytest.mark.parametrize("family,encoder", [(A.finer(12.0), None), (A.gaussian(0.1), None),
                                            (A.relu(), PositionalEncoder(4))])
def test_roundtrip(tmp_path, family, encoder):
    mlp = init_mlp([2, 8, 8, 3], family, InitScheme(k=0.5, seed=7), encoder)
    checkpoint.save(mlp, tmp_path / "m.ckpt")
    back = checkpoint.load(tmp_path / "m.ckpt")
    assert all(np.array_equal(p, q) for p, q in zip(mlp.params(), back.params()))
    assert back.activation == mlp.activation and back.encoder == mlp.encoder
    assert back.k == 0.5 and back.seed == 7
    x = np.random.default_rng(0).uniform(-1, 1, (5, 2))
    assert np.array_equal(forward(mlp, x)[0], forward(back, x)[0])
    assert checkpoint.dumps(back) == (tmp_path / "m.ckpt").read_text()


def test_magic_and_layout():
    mlp = init_mlp([1, 4, 1], A.finer(), InitScheme())
    d = json.loads(checkpoint.dumps(mlp))
    assert d["magic"] == "FINER-CKPT-1" and d["dims"] == [1, 4, 1]
    bad = dict(d, magic="OTHER")
    with pytest.raises(ContractError, match="FINER-CKPT-1"):
        checkpoint.from_dict(bad)
    d["layers"][0]["weight_shape"] = [5, 1]
    with pytest.raises(ContractError):
        checkpoint.from_dict(d)
