"""Command-line front end: ``finer <task> [flags]``.

Every run writes into ``<out>/<task>-<seed>/`` and finishes with a
``summary.json`` echoing the resolved config.  Exit codes: 0 success,
2 invalid configuration, 3 output directory already in use, 4 bad input,
5 numerical failure.
"""
import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import activations as act
from . import checkpoint, geometry, images, ntk, sdf
from .config import FAMILIES, TASKS, parse_config
from .errors import ConfigError, ContractError, ConvergenceError, NonFiniteError
from .frequency import neuron_frequency_map
from .net import InitScheme, init_mlp, predict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EXISTS = 3
EXIT_INPUT = 4
EXIT_NUMERIC = 5


class OutputExists(Exception):
    pass


def family_from_config(cfg):
    name = cfg["activation.family"]
    if name == "finer":
        return act.finer(cfg["activation.omega0"])
    if name == "sine":
        return act.sine(cfg["activation.omega0"])
    if name == "gauss":
        return act.gaussian(cfg["activation.sigma"])
    return act.relu()


def output_dir(cfg, force=False):
    path = os.path.join(cfg["out"], f"{cfg.task}-{cfg.seed}")
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise OutputExists(path)
    os.makedirs(path, exist_ok=True)
    return path


def _write_summary(path, cfg, metrics, artifacts, runtime):
    summary = {"config": cfg.to_dict(), "metrics": metrics, "artifacts": sorted(artifacts)}
    if cfg["log_wallclock"]:
        summary["runtime_s"] = runtime
    with open(os.path.join(path, "summary.json"), "w", newline="\n") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")


def _finish_training(out, cfg, mlp, log):
    log.write_csv(os.path.join(out, "log.csv"), include_time=cfg["log_wallclock"])
    checkpoint.save(mlp, os.path.join(out, "model.ckpt"))
    return ["log.csv", "model.ckpt"]


def run_fit_image(cfg, out):
    img = images.load_image(cfg["image.path"])
    fit_cfg = images.FitConfig(hidden=tuple(cfg["network.hidden"]), iters=cfg["optim.iters"],
                               lr=cfg["optim.lr"], batch=cfg["optim.batch"], loss=cfg["optim.loss"],
                               cosine=cfg["optim.cosine"], pe_bands=cfg["network.pe_bands"])
    res = images.fit_image(img, family_from_config(cfg), InitScheme(cfg["init.k"], cfg.seed), fit_cfg)
    images.save_image(res.recon, os.path.join(out, "recon.png"))
    files = ["recon.png"] + _finish_training(out, cfg, res.mlp, res.log)
    return {"psnr": res.psnr, "ssim": res.ssim, "final_loss": res.log.loss[-1]}, files


def _target_from_config(cfg):
    return sdf.make_target(cfg["sdf.shape"], **cfg["sdf.params"])


def _surface_metrics(grid, target, cfg, out):
    """IoU, Chamfer and mesh export for a predicted lattice."""
    truth = sdf.evaluate_lattice(target, cfg["sdf.eval_res"])
    iso = cfg["sdf.iso"]
    metrics = {"iou": geometry.iou(grid, truth, iso)}
    mesh = geometry.marching_cubes(grid, iso)
    geometry.write_obj(mesh, os.path.join(out, "mesh.obj"))
    metrics["mesh_vertices"] = mesh.num_vertices
    metrics["mesh_triangles"] = mesh.num_triangles
    ref = geometry.marching_cubes(truth, iso)
    if mesh.num_triangles and ref.num_triangles:
        rng = images.data_stream(cfg.seed + 1)
        n = cfg["sdf.surface_samples"]
        metrics["chamfer"] = geometry.chamfer(geometry.sample_surface(mesh, n, rng),
                                              geometry.sample_surface(ref, n, rng))
    else:
        metrics["chamfer"] = None
    return metrics, ["mesh.obj"]


def run_fit_sdf(cfg, out):
    target = _target_from_config(cfg)
    fit_cfg = sdf.SdfConfig(hidden=tuple(cfg["network.hidden"]), iters=cfg["optim.iters"],
                            lr=cfg["optim.lr"], batch=cfg["optim.batch"] or 10000,
                            eval_res=cfg["sdf.eval_res"], loss=cfg["optim.loss"],
                            cosine=cfg["optim.cosine"])
    res = sdf.fit_sdf(target, family_from_config(cfg), InitScheme(cfg["init.k"], cfg.seed), fit_cfg)
    res.grid.write_raw(os.path.join(out, "lattice.raw"))
    metrics, files = _surface_metrics(res.grid, target, cfg, out)
    metrics["final_loss"] = res.log.loss[-1]
    return metrics, files + ["lattice.raw", "lattice.raw.json"] + _finish_training(out, cfg, res.mlp, res.log)


def run_ntk(cfg, out):
    hidden = cfg["network.hidden"]
    if len(hidden) != 1:
        raise ConfigError("network.hidden", "the closed-form kernel needs exactly one hidden layer")
    dims = [1, hidden[0], 1]
    coords = np.linspace(-1.0, 1.0, cfg["ntk.coords"])
    family = family_from_config(cfg)
    reports, metrics, files = {}, {}, []
    for k in cfg["ntk.k_sweep"]:
        label = f"{k:g}"
        kern = ntk.analytic_ntk_mc(dims, family, InitScheme(float(k), cfg.seed), coords,
                                   cfg["ntk.ensemble"])
        rep = ntk.spectrum(kern, cfg["ntk.thresholds"])
        reports[label] = rep
        name = f"kernel_k{label}.png"
        ntk.write_kernel_png(kern, os.path.join(out, name))
        files.append(name)
        metrics[label] = {"diagonal_energy": rep.diagonal_energy,
                          "count_above": {f"{t:g}": c for t, c in rep.counts.items()}}
    ntk.write_spectrum_csv(reports, os.path.join(out, "spectrum.csv"))
    return metrics, files + ["spectrum.csv"]


def run_freq_map(cfg, out):
    d = cfg["freq.dims"]
    n = cfg["freq.points"]
    family = family_from_config(cfg)
    if family.tag is act.Tag.RELU:
        raise ConfigError("activation.family", "frequency maps need a periodic or gaussian first layer")
    mlp = init_mlp([d, *cfg["network.hidden"], 1], family, InitScheme(cfg["init.k"], cfg.seed))
    axis = np.linspace(-1.0, 1.0, n)
    grid = axis if d == 1 else np.stack(np.meshgrid(axis, axis), axis=-1)
    _, freqs = neuron_frequency_map(mlp, grid)
    with open(os.path.join(out, "freq.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["neuron", "frequency"])
        for i, fr in enumerate(freqs):
            w.writerow([i, repr(float(fr))])
    metrics = {"spread": float(freqs.max() - freqs.min()), "mean": float(freqs.mean()),
               "min": float(freqs.min()), "max": float(freqs.max())}
    return metrics, ["freq.csv"]


def run_render_ray(cfg, out):
    samples = geometry.RaySamples(cfg["render.colors"], cfg["render.sigmas"], cfg["render.deltas"])
    color = geometry.composite_ray(samples)
    weights = geometry.composite_weights(samples)
    return {"color": [float(c) for c in color], "weights": [float(w) for w in weights]}, []


def run_eval(cfg, out):
    mlp = checkpoint.load(cfg["eval.checkpoint"])
    if mlp.in_features == 2:
        if not cfg["image.path"]:
            raise ConfigError("image.path", "required to evaluate an image model")
        img = images.load_image(cfg["image.path"])
        if mlp.out_features != img.channels:
            raise ContractError(f"model outputs {mlp.out_features} channels, image has {img.channels}")
        recon = images.reconstruct(mlp, img.height, img.width)
        images.save_image(recon, os.path.join(out, "recon.png"))
        from .metrics import psnr, ssim
        return {"psnr": psnr(recon, img.data), "ssim": ssim(recon, img.data)}, ["recon.png"]
    if mlp.in_features == 3:
        grid = sdf.evaluate_lattice(lambda p: predict(mlp, p)[:, 0], cfg["sdf.eval_res"])
        return _surface_metrics(grid, _target_from_config(cfg), cfg, out)
    raise ContractError(f"cannot evaluate a model with {mlp.in_features} inputs")


RUNNERS = {
    "fit-image": run_fit_image,
    "fit-sdf": run_fit_sdf,
    "ntk": run_ntk,
    "freq-map": run_freq_map,
    "render-ray": run_render_ray,
    "eval": run_eval,
}


def run(cfg, force=False):
    """Execute a resolved config; returns ``(out_dir, metrics)``."""
    out = output_dir(cfg, force)
    t0 = time.perf_counter()
    metrics, files = RUNNERS[cfg.task](cfg, out)
    _write_summary(out, cfg, metrics, files + ["summary.json"], time.perf_counter() - t0)
    return out, metrics


def _hidden(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="finer", description="Coordinate-network experiments.")
    sub = p.add_subparsers(dest="task", required=True, metavar="TASK")
    for task in TASKS:
        s = sub.add_parser(task)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output root (default: runs)")
        s.add_argument("--activation", choices=FAMILIES)
        s.add_argument("--omega0", type=float)
        s.add_argument("--k", type=float, help="bias half-width")
        s.add_argument("--iters", type=int)
        s.add_argument("--lr", type=float)
        s.add_argument("--batch", type=int)
        s.add_argument("--hidden", type=_hidden, help="comma-separated hidden widths")
        s.add_argument("--image", help="input image (PNG/PPM/PGM)")
        s.add_argument("--shape", help="analytic SDF shape")
        s.add_argument("--eval-res", type=int)
        s.add_argument("--checkpoint", help="model checkpoint to evaluate")
        s.add_argument("--log-wallclock", action="store_true", default=None,
                       help="record per-iteration wall time (logs stop being reproducible)")
        s.add_argument("--force", action="store_true", help="overwrite an existing output directory")
    return p


FLAG_KEYS = {
    "seed": "seed", "out": "out", "activation": "activation.family", "omega0": "activation.omega0",
    "k": "init.k", "iters": "optim.iters", "lr": "optim.lr", "batch": "optim.batch",
    "hidden": "network.hidden", "image": "image.path", "shape": "sdf.shape",
    "eval_res": "sdf.eval_res", "checkpoint": "eval.checkpoint", "log_wallclock": "log_wallclock",
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, name) for name, key in FLAG_KEYS.items()}
    try:
        cfg = parse_config(args.config, overrides, task=args.task)
        out, metrics = run(cfg, force=args.force)
    except ConfigError as err:
        print(f"finer: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputExists as err:
        print(f"finer: output directory {err} is not empty (use --force)", file=sys.stderr)
        return EXIT_EXISTS
    except (ContractError, OSError) as err:
        print(f"finer: bad input: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (NonFiniteError, ConvergenceError) as err:
        print(f"finer: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps({"out": out, "metrics": metrics}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
