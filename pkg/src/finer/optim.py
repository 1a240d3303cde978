"""Adam and the training loop shared by the fitting tasks."""
import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NonFiniteError
from .net import backward, forward


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lr >= 0:
            raise ContractError(f"lr must be >= 0, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ContractError("betas must lie in (0, 1)")
        if not self.eps >= 0:
            raise ContractError(f"eps must be >= 0, got {self.eps}")

    @classmethod
    def for_mlp(cls, mlp, **kw):
        st = cls(**kw)
        st.m = [np.zeros_like(p) for p in mlp.params()]
        st.v = [np.zeros_like(p) for p in mlp.params()]
        return st


def adam_step(mlp, grads, state, lr=None):
    """One bias-corrected Adam update, applied to ``mlp`` in place.

    ``lr`` overrides ``state.lr`` for this step (used by schedules).  A
    non-finite gradient raises :class:`NonFiniteError` naming the layer and
    leaves parameters and state untouched.
    """
    params = mlp.params()
    gs = grads.params()
    if len(gs) != len(params) or len(state.m) != len(params):
        raise ContractError("gradient/state layout does not match the network")
    for i, (p, g) in enumerate(zip(params, gs)):
        if g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in layer {i // 2}", layer=i // 2)
    lr = state.lr if lr is None else lr
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step = t
    return mlp, state


def loss_and_grad(pred, target, kind="l2"):
    """Mean loss over all output entries and its gradient w.r.t. ``pred``."""
    r = pred - target
    n = r.size
    if kind == "l2":
        return float(np.mean(r * r)), (2.0 / n) * r
    if kind == "l1":
        return float(np.mean(np.abs(r))), np.sign(r) / n
    raise ContractError(f"unknown loss {kind!r}")


@dataclass
class TrainLog:
    iters: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    ms: list = field(default_factory=list)
    psnr: list = field(default_factory=list)

    def append(self, it, loss, ms, psnr=None):
        if self.iters and it <= self.iters[-1]:
            raise ContractError("log iterations must be strictly increasing")
        self.iters.append(it)
        self.loss.append(loss)
        self.ms.append(ms)
        self.psnr.append(psnr)

    def __len__(self):
        return len(self.iters)

    def to_csv(self, include_time=True):
        """CSV text with header ``iter,loss,ms,psnr``.

        With ``include_time=False`` the ``ms`` column is left empty so that
        identical runs serialise to identical bytes.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "loss", "ms", "psnr"])
        for it, lo, ms, ps in zip(self.iters, self.loss, self.ms, self.psnr):
            w.writerow([it, repr(lo), f"{ms:.3f}" if include_time else "",
                        "" if ps is None else repr(ps)])
        return buf.getvalue()

    def write_csv(self, path, include_time=True):
        with open(path, "w", encoding="ascii", newline="") as f:
            f.write(self.to_csv(include_time))


def cosine_lr(lr0, it, total):
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * it / total))


def train(mlp, sampler, iterations, state=None, loss="l2", metric=None, cosine=False, callback=None):
    """Run ``iterations`` Adam steps.

    Parameters
    ----------
    sampler : callable
        ``sampler(it) -> (coords, targets)`` for 0-based iteration ``it``.
    metric : callable, optional
        ``metric(loss_value) -> float`` stored in the ``psnr`` column.
    callback : callable, optional
        Called as ``callback(it, loss_value, mlp)`` after every step.

    A non-finite loss or gradient re-raises :class:`NonFiniteError` with the
    partial log attached as ``err.log``.
    """
    if iterations < 1:
        raise ContractError("iterations must be >= 1")
    state = state if state is not None else AdamState.for_mlp(mlp)
    if not state.m:
        state.m = [np.zeros_like(p) for p in mlp.params()]
        state.v = [np.zeros_like(p) for p in mlp.params()]
    log = TrainLog()
    t0 = time.perf_counter()
    for it in range(iterations):
        coords, targets = sampler(it)
        pred, cache = forward(mlp, coords)
        value, dpred = loss_and_grad(pred, targets, loss)
        try:
            if not math.isfinite(value):
                raise NonFiniteError(f"non-finite loss at iteration {it + 1}")
            grads = backward(mlp, cache, dpred)
            lr = cosine_lr(state.lr, it, iterations) if cosine else None
            adam_step(mlp, grads, state, lr=lr)
        except NonFiniteError as err:
            err.log = log
            raise
        log.append(it + 1, value, (time.perf_counter() - t0) * 1e3,
                   None if metric is None else metric(value))
        if callback is not None:
            callback(it, value, mlp)
    return mlp, log
