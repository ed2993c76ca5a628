"""Command-line front end: ``hsims {synth,mnf,segment,eval}``.

Cubes and label rasters are addressed by their ``.json`` header; the sample
data lives next to it with a ``.raw`` suffix.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as hio
from .evaluate import evaluate
from .indicator import DEFAULT_ETA
from .pipeline import IndicatorMode, PipelineConfig, segment
from .preprocess import DegenerateInputError, apply_mnf, fit_mnf, normalize_cube
from .synth import SynthSpec, generate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

_MODES = {
    "robust": IndicatorMode.ROBUST_ANISOTROPIC,
    "robust_anisotropic": IndicatorMode.ROBUST_ANISOTROPIC,
    "ms2": IndicatorMode.SQUARED_EUCLIDEAN,
    "squared_euclidean": IndicatorMode.SQUARED_EUCLIDEAN,
}


class UsageError(Exception):
    pass


def _header_path(path: str) -> Path:
    p = Path(path)
    return p if p.suffix == ".json" else p.with_suffix(".json")


def _refuse_existing(paths, force: bool):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise UsageError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise hio.CubeFormatError(f"{args.spec}: not valid JSON ({exc})") from exc
    try:
        spec = SynthSpec.from_dict(doc)
    except KeyError as exc:
        raise hio.CubeFormatError(f"{args.spec}: missing field {exc.args[0]!r}") from exc
    if args.seed is not None:
        spec = SynthSpec(spec.height, spec.width, spec.clusters, spec.noise_snr, args.seed)
    prefix = args.out_prefix
    cube_h, gt_h = Path(f"{prefix}_cube.json"), Path(f"{prefix}_gt.json")
    _refuse_existing([cube_h, hio.data_path_for(cube_h), gt_h, hio.data_path_for(gt_h)], args.force)
    cube, gt = generate(spec)
    hio.save_cube(cube, cube_h)
    hio.save_ground_truth(gt, gt_h)
    print(f"wrote {cube_h} ({cube.height}x{cube.width}x{cube.bands}) and {gt_h}")
    return EXIT_OK


def cmd_mnf(args) -> int:
    cube = hio.load_cube(_header_path(args.cube_in))
    if args.kept < 1 or args.kept > cube.bands:
        raise UsageError(f"--kept must lie in 1..{cube.bands}, got {args.kept}")
    out = _header_path(args.cube_out)
    _refuse_existing([out, hio.data_path_for(out)], args.force)
    if not args.no_normalize:
        cube = normalize_cube(cube)
    model = fit_mnf(cube, args.kept)
    reduced = apply_mnf(model, cube)
    hio.save_cube(reduced, out)
    print("component  snr")
    for r, snr in enumerate(model.snrs, start=1):
        mark = "*" if r <= model.kept else " "
        print(f"{r:9d}{mark} {snr:.6g}")
    print(f"wrote {out} ({reduced.height}x{reduced.width}x{reduced.bands})")
    return EXIT_OK


def _segment_config(args) -> PipelineConfig:
    opts = {}
    if args.config:
        try:
            opts.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: not valid JSON ({exc})") from exc
    if "lambda" in opts:
        opts["lam"] = opts.pop("lambda")
    if "mode" in opts:
        if opts["mode"] not in _MODES:
            raise UsageError(f"unknown mode {opts['mode']!r}")
        opts["indicator_mode"] = _MODES[opts.pop("mode")]
    # command-line flags override the config file
    for key in ("k", "lam", "eps", "eta", "seed", "outer_max", "pdhg_max_iter", "fp_max_iter", "mnf_kept"):
        value = getattr(args, key)
        if value is not None:
            opts[key] = value
    if args.mode is not None:
        opts["indicator_mode"] = _MODES[args.mode]
    for key in ("k", "lam"):
        if key not in opts:
            raise UsageError(f"--{'lambda' if key == 'lam' else key} is required")
    mode = IndicatorMode(opts.get("indicator_mode", IndicatorMode.ROBUST_ANISOTROPIC))
    if mode is IndicatorMode.ROBUST_ANISOTROPIC and opts.get("eps") is None:
        raise UsageError("--eps is required for the robust indicator")
    if not opts["lam"] > 0:
        raise UsageError(f"--lambda must be > 0, got {opts['lam']}")
    try:
        return PipelineConfig(**opts)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def cmd_segment(args) -> int:
    cfg = _segment_config(args)
    outputs = [p for p in (args.out_png,) if p]
    if args.out_labels:
        lh = _header_path(args.out_labels)
        outputs += [lh, hio.data_path_for(lh)]
    _refuse_existing(outputs, args.force)
    cube = hio.load_cube(_header_path(args.cube_in))
    if args.normalize:
        cube = normalize_cube(cube)
    if cfg.mnf_kept is not None:
        if cfg.mnf_kept > cube.bands:
            raise UsageError(f"mnf_kept={cfg.mnf_kept} exceeds the {cube.bands} bands of the cube")
        cube = apply_mnf(fit_mnf(cube, cfg.mnf_kept), cube)

    def report(rec):
        print(f"iter {rec.iteration:3d}  E={rec.objective:.6g}  stop={rec.stop_value:.3g}  "
              f"pdhg={rec.pdhg_iterations}  sizes={rec.sizes}")

    result = segment(cube, cfg, callback=report)
    labels = result.labels.astype(np.uint16)
    if args.out_labels:
        hio.save_labels(labels, _header_path(args.out_labels))
    if args.out_png:
        hio.save_label_png(labels, hio.default_palette(cfg.k), path=args.out_png)
    print(f"{'converged' if result.converged else 'stopped'} after {len(result.trace)} outer iterations")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = hio.load_labels(_header_path(args.labels))
    gt = hio.load_ground_truth(_header_path(args.gt))
    if pred.shape != gt.labels.shape:
        raise hio.CubeFormatError(f"label map {pred.shape} and ground truth {gt.labels.shape} differ in size")
    k = args.k if args.k is not None else int(pred.max())
    rep = evaluate(pred, gt, k=k, seed=args.seed)
    print(f"OA     {rep.oa:.6f}")
    print(f"AA     {rep.aa:.6f}")
    print(f"kappa  {rep.kappa:.6f}")
    print("matching (pred -> gt): " + ", ".join(f"{b + 1}->{a}" for b, a in enumerate(rep.permutation) if a))
    if args.out_csv:
        hio.save_scores_csv([rep], args.out_csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsims", description="Unsupervised hyperspectral segmentation.")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS threads (default: $HSIMS_THREADS or all cores)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cube and ground truth from a JSON spec")
    p.add_argument("spec")
    p.add_argument("out_prefix")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mnf", help="normalize and reduce a cube with the MNF transform")
    p.add_argument("cube_in")
    p.add_argument("cube_out")
    p.add_argument("--kept", type=int, required=True)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_mnf)

    p = sub.add_parser("segment", help="segment a cube")
    p.add_argument("cube_in")
    p.add_argument("--config", help="JSON file with pipeline options; flags override it")
    p.add_argument("--k", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--eta", type=float, help=f"default {DEFAULT_ETA}")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=sorted(_MODES))
    p.add_argument("--outer-max", dest="outer_max", type=int)
    p.add_argument("--pdhg-max", dest="pdhg_max_iter", type=int)
    p.add_argument("--fp-max", dest="fp_max_iter", type=int)
    p.add_argument("--mnf-kept", dest="mnf_kept", type=int)
    p.add_argument("--normalize", action="store_true", help="normalize intensities to [0, 1] first")
    p.add_argument("--out-png")
    p.add_argument("--out-labels")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score a label map against ground truth")
    p.add_argument("labels")
    p.add_argument("gt")
    p.add_argument("--k", type=int, default=None, help="number of predicted classes")
    p.add_argument("--seed", type=int, default=None, help="seed recorded in the CSV row")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_eval)
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("HSIMS_THREADS")
    if not env:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"HSIMS_THREADS must be an integer, got {env!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _threads(args)
        if threads is not None and threads < 1:
            raise UsageError("--threads must be >= 1")
        with threadpool_limits(limits=threads):
            return args.func(args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (hio.CubeFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateInputError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
