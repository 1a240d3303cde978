"""3-D signed-distance fitting against analytic shapes."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .geometry import ScalarGrid, iou
from .images import data_stream
from .net import InitScheme, init_mlp, predict
from .optim import AdamState, train

BOX_MIN = (-1.0, -1.0, -1.0)
BOX_MAX = (1.0, 1.0, 1.0)
NEAR_SIGMA = 0.05


def _unit_vectors(n, rng):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class SdfTarget:
    """Signed distance oracle on [-1, 1]^3: negative inside, positive outside.

    ``surface`` (optional) draws ``n`` points on the zero level set from a
    generator and enables near-surface sampling.
    """

    name: str
    oracle: object
    surface: object = None
    params: dict = field(default_factory=dict)

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ContractError(f"points must be (N, 3), got {p.shape}")
        return self.oracle(p)


def sphere(radius=1.0, center=(0.0, 0.0, 0.0)):
    c = np.asarray(center, dtype=np.float64)
    if radius <= 0:
        raise ContractError("radius must be positive")
    return SdfTarget(
        "sphere",
        lambda p: np.linalg.norm(p - c, axis=1) - radius,
        lambda n, rng: c + radius * _unit_vectors(n, rng),
        {"radius": radius, "center": list(c)},
    )


def torus(major=0.6, minor=0.25):
    """Torus around the z axis."""
    if not 0 < minor < major:
        raise ContractError("need 0 < minor < major")

    def oracle(p):
        q = np.hypot(p[:, 0], p[:, 1]) - major
        return np.hypot(q, p[:, 2]) - minor

    def surface(n, rng):
        u, v = rng.random((2, n)) * 2.0 * np.pi
        # area element grows with the distance from the axis
        keep = rng.random(n) * (major + minor) < major + minor * np.cos(v)
        while not keep.all():
            bad = ~keep
            v[bad] = rng.random(bad.sum()) * 2.0 * np.pi
            keep[bad] = rng.random(bad.sum()) * (major + minor) < major + minor * np.cos(v[bad])
        ring = major + minor * np.cos(v)
        return np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], axis=1)

    return SdfTarget("torus", oracle, surface, {"major": major, "minor": minor})


def box(half=(0.5, 0.5, 0.5)):
    h = np.asarray(half, dtype=np.float64)
    if (h <= 0).any():
        raise ContractError("half extents must be positive")

    def oracle(p):
        q = np.abs(p) - h
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        return outside + np.minimum(q.max(axis=1), 0.0)

    def surface(n, rng):
        face_area = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
        axis = rng.choice(3, size=n, p=face_area / face_area.sum())
        pts = (2.0 * rng.random((n, 3)) - 1.0) * h
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        pts[np.arange(n), axis] = sign * h[axis]
        return pts

    return SdfTarget("box", oracle, surface, {"half": list(h)})


def plane(normal=(0.0, 0.0, 1.0), offset=0.0):
    """Half-space ``n . p < offset`` is inside."""
    nrm = np.asarray(normal, dtype=np.float64)
    if np.linalg.norm(nrm) == 0:
        raise ContractError("plane normal must be non-zero")
    nrm = nrm / np.linalg.norm(nrm)

    def surface(n, rng):
        p = 2.0 * rng.random((n, 3)) - 1.0
        return p - np.outer(p @ nrm - offset, nrm)

    return SdfTarget("plane", lambda p: p @ nrm - offset, surface,
                     {"normal": list(nrm), "offset": offset})


SHAPES = {"sphere": sphere, "torus": torus, "box": box, "plane": plane}


def make_target(name, **params):
    if name not in SHAPES:
        raise ContractError(f"unknown shape {name!r}; expected one of {sorted(SHAPES)}")
    return SHAPES[name](**params)


def sample_sdf(target, size, rng, strategy="mixed"):
    """Training points and their signed distances.

    ``"uniform"`` draws from the box; ``"mixed"`` draws half uniformly and
    half as surface points plus N(0, 0.05^2) offsets (uniform only if the
    target has no surface sampler).  Returns ``(coords, targets[:, None])``.
    """
    if size < 1:
        raise ContractError("batch size must be >= 1")
    lo, hi = np.array(BOX_MIN), np.array(BOX_MAX)
    if strategy == "mixed" and target.surface is not None:
        n_near = size // 2
        near = target.surface(n_near, rng) + NEAR_SIGMA * rng.normal(size=(n_near, 3))
        uni = lo + (hi - lo) * rng.random((size - n_near, 3))
        pts = np.concatenate([uni, near])
    elif strategy in ("mixed", "uniform"):
        pts = lo + (hi - lo) * rng.random((size, 3))
    else:
        raise ContractError(f"unknown strategy {strategy!r}")
    return pts, target(pts)[:, None]


def evaluate_lattice(fn, res=128):
    """Sample ``fn`` on a ``res``^3 lattice spanning the training box."""
    return ScalarGrid.from_function(fn, res, BOX_MIN, BOX_MAX)


@dataclass
class SdfConfig:
    hidden: tuple = (256, 256, 256)
    iters: int = 20000
    lr: float = 1e-4
    batch: int = 10000
    eval_res: int = 128
    loss: str = "l2"
    cosine: bool = False


@dataclass
class SdfResult:
    mlp: object
    grid: ScalarGrid
    iou: float
    log: object


def fit_sdf(target, family, scheme=None, cfg=None, callback=None):
    """Regress signed distances with a coordinate network, then evaluate it on a lattice.

    The returned IoU compares ``net < 0`` with ``oracle < 0`` at the lattice points.
    """
    scheme = scheme or InitScheme(k=1.0)
    cfg = cfg or SdfConfig()
    mlp = init_mlp([3, *cfg.hidden, 1], family, scheme)
    rng = data_stream(scheme.seed)
    state = AdamState.for_mlp(mlp, lr=cfg.lr)
    mlp, log = train(mlp, lambda it: sample_sdf(target, cfg.batch, rng), cfg.iters, state,
                     loss=cfg.loss, cosine=cfg.cosine, callback=callback)
    grid = evaluate_lattice(lambda p: predict(mlp, p)[:, 0], cfg.eval_res)
    truth = evaluate_lattice(target, cfg.eval_res)
    return SdfResult(mlp, grid, iou(grid, truth), log)
