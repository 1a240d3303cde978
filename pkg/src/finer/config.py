"""Experiment configuration: JSON file + flag overrides, validated up front."""
import copy
import json
import math

from .errors import ConfigError

TASKS = ("fit-image", "fit-sdf", "ntk", "freq-map", "render-ray", "eval")
FAMILIES = ("finer", "sine", "gauss", "pemlp")

# None marks a value whose default depends on the task (see TASK_DEFAULTS).
BASE = {
    "task": None,
    "seed": 0,
    "out": "runs",
    "log_wallclock": False,
    "activation": {"family": "finer", "omega0": None, "sigma": 0.05},
    "init": {"k": None},
    "network": {"hidden": None, "pe_bands": 10},
    "optim": {"lr": 1e-4, "iters": None, "batch": None, "loss": "l2", "cosine": False},
    "image": {"path": None},
    "sdf": {"shape": "sphere", "params": {}, "eval_res": 128, "iso": 0.0, "surface_samples": 30000},
    "ntk": {"k_sweep": [1.0, 5.0, 20.0], "coords": 64, "ensemble": 256,
            "thresholds": [0.01, 0.1, 1.0, 10.0]},
    "freq": {"points": 1024, "dims": 1},
    "render": {"colors": None, "sigmas": None, "deltas": None},
    "eval": {"checkpoint": None},
}

# free-form sub-dicts whose keys are checked by their consumer
OPEN_KEYS = {"sdf.params"}

TASK_DEFAULTS = {
    "fit-image": {"activation.omega0": 30.0, "init.k": 1.0 / math.sqrt(2.0),
                  "network.hidden": [256, 256, 256], "optim.iters": 2000},
    "fit-sdf": {"activation.omega0": 30.0, "init.k": 1.0,
                "network.hidden": [256, 256, 256], "optim.iters": 20000, "optim.batch": 10000},
    "ntk": {"activation.omega0": 1.0, "init.k": 1.0, "network.hidden": [64], "optim.iters": 1},
    "freq-map": {"activation.omega0": 30.0, "init.k": 1.0,
                 "network.hidden": [256, 256, 256], "optim.iters": 1},
    "render-ray": {"activation.omega0": 30.0, "init.k": 1.0,
                   "network.hidden": [256, 256, 256], "optim.iters": 1},
    "eval": {"activation.omega0": 30.0, "init.k": 1.0,
             "network.hidden": [256, 256, 256], "optim.iters": 1},
}


def _get(d, path):
    for part in path.split("."):
        d = d[part]
    return d


def _set(d, path, value):
    parts = path.split(".")
    for part in parts[:-1]:
        d = d[part]
    d[parts[-1]] = value


def _merge(base, override, prefix=""):
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict) and path not in OPEN_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            _merge(base[key], value, path + ".")
        else:
            base[key] = copy.deepcopy(value)


class ExperimentConfig:
    """Fully defaulted, validated configuration.

    Values are read with dotted key paths, e.g. ``cfg["init.k"]``.
    """

    def __init__(self, data):
        self._data = data

    def __getitem__(self, path):
        return _get(self._data, path)

    @property
    def task(self):
        return self._data["task"]

    @property
    def seed(self):
        return self._data["seed"]

    def to_dict(self):
        return copy.deepcopy(self._data)

    def dumps(self):
        return json.dumps(self._data, indent=1, sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self._data == other._data

    def __repr__(self):
        return f"ExperimentConfig({self._data!r})"


def _number(cfg, path, lo=None, lo_open=False, integer=False, allow_none=False):
    v = _get(cfg, path)
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if integer:
        _set(cfg, path, int(v))


def _choice(cfg, path, options):
    v = _get(cfg, path)
    if v not in options:
        raise ConfigError(path, f"expected one of {list(options)}, got {v!r}")


def _flag(cfg, path):
    if not isinstance(_get(cfg, path), bool):
        raise ConfigError(path, "expected true or false")


def _validate(cfg):
    _choice(cfg, "task", TASKS)
    _number(cfg, "seed", lo=0, integer=True)
    if not isinstance(cfg["out"], str) or not cfg["out"]:
        raise ConfigError("out", "expected a non-empty path")
    _flag(cfg, "log_wallclock")
    _choice(cfg, "activation.family", FAMILIES)
    _number(cfg, "activation.omega0", lo=0, lo_open=True)
    _number(cfg, "activation.sigma", lo=0, lo_open=True)
    _number(cfg, "init.k", lo=0)
    hidden = cfg["network"]["hidden"]
    if not isinstance(hidden, list) or not hidden:
        raise ConfigError("network.hidden", "expected a non-empty list of widths")
    for i, w in enumerate(hidden):
        if isinstance(w, bool) or not isinstance(w, int) or w < 1:
            raise ConfigError(f"network.hidden.{i}", f"width must be a positive integer, got {w!r}")
    _number(cfg, "network.pe_bands", lo=1, integer=True)
    _number(cfg, "optim.lr", lo=0, lo_open=True)
    _number(cfg, "optim.iters", lo=1, integer=True)
    _number(cfg, "optim.batch", lo=1, integer=True, allow_none=True)
    _choice(cfg, "optim.loss", ("l2", "l1"))
    _flag(cfg, "optim.cosine")
    _choice(cfg, "sdf.shape", ("sphere", "torus", "box", "plane"))
    if not isinstance(cfg["sdf"]["params"], dict):
        raise ConfigError("sdf.params", "expected an object")
    _number(cfg, "sdf.eval_res", lo=2, integer=True)
    _number(cfg, "sdf.iso")
    _number(cfg, "sdf.surface_samples", lo=1, integer=True)
    sweep = cfg["ntk"]["k_sweep"]
    if not isinstance(sweep, list) or not sweep:
        raise ConfigError("ntk.k_sweep", "expected a non-empty list")
    for i, v in enumerate(sweep):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= 0:
            raise ConfigError(f"ntk.k_sweep.{i}", f"must be a number >= 0, got {v!r}")
    _number(cfg, "ntk.coords", lo=2, integer=True)
    if cfg["ntk"]["coords"] > 2048:
        raise ConfigError("ntk.coords", "at most 2048 coordinates")
    _number(cfg, "ntk.ensemble", lo=1, integer=True)
    if not isinstance(cfg["ntk"]["thresholds"], list):
        raise ConfigError("ntk.thresholds", "expected a list")
    _number(cfg, "freq.points", lo=4, integer=True)
    _choice(cfg, "freq.dims", (1, 2))
    task = cfg["task"]
    if task == "fit-image" and not cfg["image"]["path"]:
        raise ConfigError("image.path", "required for fit-image")
    if task == "ntk" and cfg["activation"]["family"] != "finer":
        raise ConfigError("activation.family", "the closed-form kernel is defined for finer only")
    if task == "render-ray":
        for key in ("colors", "sigmas", "deltas"):
            if cfg["render"][key] is None:
                raise ConfigError(f"render.{key}", "required for render-ray")
    if task == "eval" and not cfg["eval"]["checkpoint"]:
        raise ConfigError("eval.checkpoint", "required for eval")


def load_json(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"malformed JSON in {path}: line {err.lineno} col {err.colno}: {err.msg}") from err
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    return data


def parse_config(file_data=None, overrides=None, task=None):
    """Resolve a configuration.

    Parameters
    ----------
    file_data : dict or str or path, optional
        Parsed JSON object, or a path to a JSON file.
    overrides : dict, optional
        Dotted key path -> value (e.g. ``{"init.k": 2.0}``); these win over
        the file.  ``None`` values are ignored.
    task : str, optional
        Task name; overrides ``task`` in the file.

    Raises
    ------
    ConfigError
        Naming the offending key path.
    """
    cfg = copy.deepcopy(BASE)
    if file_data is not None:
        if not isinstance(file_data, dict):
            file_data = load_json(file_data)
        _merge(cfg, file_data)
    if task is not None:
        cfg["task"] = task
    if cfg["task"] not in TASKS:
        raise ConfigError("task", f"expected one of {list(TASKS)}, got {cfg['task']!r}")
    for path, value in (overrides or {}).items():
        if value is None:
            continue
        try:
            _get(cfg, path)
        except (KeyError, TypeError):
            raise ConfigError(path, "unknown key") from None
        _set(cfg, path, value)
    for path, value in TASK_DEFAULTS[cfg["task"]].items():
        if _get(cfg, path) is None:
            _set(cfg, path, copy.deepcopy(value))
    _validate(cfg)
    return ExperimentConfig(cfg)
