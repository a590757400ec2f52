"""Командная строка: каждая стадия библиотеки доступна как подкоманда."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from jsonschema import ValidationError

from project import CONFIG, init_logger
from project.config import default_config, load_config, load_pipeline_config
from project.errors import SatMvsError
from project.geo.blocks import Aoi
from project.geo.dsm import read_dsm
from project.geo.metrics import evaluate_dsm, write_metrics
from project.geo.pipeline import View, run_pipeline, save_result
from project.mvs.io import write_height_map
from project.mvs.multistage import run_stages
from project.mvs.schedule import SweepConfig
from project.pinhole.fitting import fit_pinhole, pinhole_fit_sweep
from project.rpc.fitting import GridSpec, fit_inverse_rpc
from project.rpc.io import load_rpc, save_rpc
from project.schemas.config_schemas import Config
from project.synthetic.scene import SceneParams, gen_scene, load_scene_bundle, write_scene_bundle
from project.utils.images import load_image, save_image
from project.warp.resample import resample_bilinear
from project.warp.warping import PixelRect, warp_grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _config(args: argparse.Namespace) -> Config:
    if args.config:
        return load_config(Path(args.config))
    return CONFIG or default_config()


def _threads(args: argparse.Namespace, config: Config) -> int:
    return args.threads if args.threads is not None else config.runtime.threads


def _sweep_config(args: argparse.Namespace, config: Config) -> SweepConfig:
    return SweepConfig.from_config(
        config.sweep,
        plane_counts=args.plane_counts,
        intervals=args.intervals,
        temperature=args.temperature,
    )


# --- commands ----------------------------------------------------------------


def cmd_project(args: argparse.Namespace, config: Config) -> int:
    model = load_rpc(args.rpc)
    samp, line = model.project(args.lat, args.lon, args.hei)
    print(f"{float(samp):.6f} {float(line):.6f}")
    return EXIT_OK


def cmd_localize(args: argparse.Namespace, config: Config) -> int:
    model = load_rpc(args.rpc)
    lat, lon = model.localize(args.samp, args.line, args.hei)
    print(f"{float(lat):.9f} {float(lon):.9f}")
    if args.check:
        samp, line = model.project(lat, lon, args.hei)
        residual = float(np.hypot(samp - args.samp, line - args.line))
        print(f"residual_px {residual:.3e}")
    return EXIT_OK


def cmd_fit_inverse(args: argparse.Namespace, config: Config) -> int:
    model = load_rpc(args.rpc)
    grid = GridSpec(*args.grid) if args.grid else None
    fitted, report = fit_inverse_rpc(model, grid) if grid else fit_inverse_rpc(model)
    save_rpc(fitted, args.out)
    print(
        json.dumps(
            {
                "max_residual": report.max_residual,
                "rms_residual": report.rms_residual,
                "max_reprojection_px": report.max_reprojection_px,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_warp(args: argparse.Namespace, config: Config) -> int:
    src_rpc = load_rpc(args.src_rpc)
    ref_rpc = load_rpc(args.ref_rpc)
    image = load_image(args.src_image)
    width = args.width or image.shape[1]
    height = args.height or image.shape[0]
    cmap = warp_grid(src_rpc, ref_rpc, PixelRect(0, 0, width, height), args.hei, src_shape=image.shape)
    warped, valid = resample_bilinear(image, cmap)
    save_image(args.out, np.where(valid, warped, 0.0))
    logger.info(
        "Warped %s onto %dx%d reference raster at %.2f m: %d valid pixels",
        args.src_image,
        width,
        height,
        args.hei,
        int(valid.sum()),
    )
    return EXIT_OK


def cmd_fit_pinhole(args: argparse.Namespace, config: Config) -> int:
    model = load_rpc(args.rpc)
    heights = tuple(args.heights) if args.heights else None
    grid = GridSpec(*config.pinhole.fit_grid)
    check_grid = GridSpec(*config.pinhole.check_grid)
    refine = config.pinhole.refine and not args.no_refine
    out_dir = Path(args.out_dir)

    if args.patch:
        x0, y0, w, h = args.patch
        _, report = fit_pinhole(model, PixelRect(x0, y0, w, h), heights, grid=grid, check_grid=check_grid, refine=refine)
        reports = [report]
    else:
        reports = pinhole_fit_sweep(
            model,
            args.sizes or [],
            heights,
            grid=grid,
            check_grid=check_grid,
            refine=refine,
            threads=_threads(args, config),
        )

    summary = []
    for report in reports:
        stem = f"fit_{report.patch_size[0]}x{report.patch_size[1]}"
        report.write_json(out_dir / f"{stem}.json")
        report.write_csv(out_dir / f"{stem}.csv")
        summary.append(report.to_dict())
        print(f"{report.patch_size[0]}x{report.patch_size[1]}: max {report.max_err:.6f} px, mean {report.mean_err:.6f} px")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: Config) -> int:
    if len(args.src_image) != len(args.src_rpc):
        raise ValueError("--src-image and --src-rpc must be given the same number of times")
    ref = load_image(args.ref_image)
    sources = [load_image(p) for p in args.src_image]
    rpcs = [load_rpc(args.ref_rpc)] + [load_rpc(p) for p in args.src_rpc]
    heights = tuple(args.heights) if args.heights else None

    cameras = None
    if (args.warping or config.pipeline.warping) == "homography":
        rects = [PixelRect(0, 0, img.shape[1], img.shape[0]) for img in [ref] + sources]
        first, _ = fit_pinhole(rpcs[0], rects[0], heights)
        cameras = [first] + [
            fit_pinhole(m, rect, heights, frame=first.frame)[0] for m, rect in zip(rpcs[1:], rects[1:])
        ]

    maps, schedule = run_stages(
        ref,
        sources,
        rpcs,
        _sweep_config(args, config),
        heights=heights,
        cameras=cameras,
        threads=_threads(args, config),
    )
    write_height_map(args.out, maps[-1], schedule)
    if args.keep_stages:
        for i, hmap in enumerate(maps[:-1]):
            write_height_map(Path(args.out).with_name(f"{Path(args.out).stem}_stage{i}.pfm"), hmap, schedule)
    return EXIT_OK


def _pipeline_config(args: argparse.Namespace, config: Config) -> Config:
    if args.pipeline_config:
        config = load_pipeline_config(Path(args.pipeline_config), config)
    sweep = config.sweep
    if args.plane_counts is not None:
        sweep = replace(sweep, plane_counts=list(args.plane_counts))
    if args.intervals is not None:
        sweep = replace(sweep, intervals=list(args.intervals))
    if args.temperature is not None:
        sweep = replace(sweep, temperature=args.temperature)
    pipeline = config.pipeline
    if args.threshold is not None:
        pipeline = replace(pipeline, consistency_threshold=args.threshold)
    if args.warping is not None:
        pipeline = replace(pipeline, warping=args.warping)
    if args.block_size is not None:
        pipeline = replace(pipeline, block_size=args.block_size)
    return replace(config, sweep=sweep, pipeline=pipeline)


def cmd_pipeline(args: argparse.Namespace, config: Config) -> int:
    config = _pipeline_config(args, config)
    gt = None
    if args.scene:
        bundle = load_scene_bundle(args.scene)
        views, aoi, gt = bundle.views, bundle.aoi, bundle.gt
    else:
        if not args.image or len(args.image) != len(args.rpc or []):
            raise ValueError("give --scene or matching --image/--rpc lists")
        if args.aoi is None:
            raise ValueError("--aoi is required without --scene")
        views = [View(load_image(i), load_rpc(r), Path(i).stem) for i, r in zip(args.image, args.rpc)]
        aoi = Aoi(*args.aoi)
    if args.gt:
        gt = read_dsm(args.gt)

    result = run_pipeline(views, aoi, config, gt=gt, threads=_threads(args, config))
    save_result(result, args.out_dir, height_maps=not args.no_height_maps)
    for failure in result.failures:
        print(f"block {failure['block_id']} failed: {failure['error']}", file=sys.stderr)
    if result.metrics is not None:
        print(json.dumps(result.metrics.to_dict(), indent=2))
    return EXIT_FAILURE if result.failures else EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    dsm = read_dsm(args.dsm)
    gt = read_dsm(args.gt)
    metrics = evaluate_dsm(dsm, gt)
    if args.out:
        write_metrics(args.out, metrics, runtime_s=0.0)
    print(json.dumps(metrics.to_dict(), indent=2))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, config: Config) -> int:
    overrides = {
        "size_px": args.size,
        "relief": args.relief,
        "view_angles": tuple(args.angles) if args.angles else None,
        "ramp": True if args.ramp else None,
    }
    params = SceneParams.from_config(config.synthetic, **{k: v for k, v in overrides.items() if v is not None})
    seed = args.seed if args.seed is not None else config.runtime.seed
    scene = gen_scene(seed, params, threads=_threads(args, config))
    write_scene_bundle(scene, args.out_dir)
    print(args.out_dir)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML конфигурация (по умолчанию config.yaml)")
    common.add_argument("--threads", type=int, help="Количество потоков; на результат не влияет")
    return common


def _sweep_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--plane-counts", type=int, nargs="+", help="Число плоскостей на каждой стадии")
    parser.add_argument(
        "--intervals",
        type=lambda v: None if v.lower() == "auto" else float(v),
        nargs="+",
        help="Шаг плоскостей на каждой стадии, м (auto = диапазон / число плоскостей)",
    )
    parser.add_argument("--temperature", type=float, help="Температура soft-argmin")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satmvs", description="Многовидовая стереосъёмка по RPC-моделям")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("project", parents=[common], help="Земля -> пиксель")
    p.add_argument("--rpc", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--hei", type=float, required=True)
    p.set_defaults(handler=cmd_project)

    p = sub.add_parser("localize", parents=[common], help="Пиксель + высота -> земля")
    p.add_argument("--rpc", required=True)
    p.add_argument("--samp", type=float, required=True)
    p.add_argument("--line", type=float, required=True)
    p.add_argument("--hei", type=float, required=True)
    p.add_argument("--check", action="store_true", help="Напечатать невязку обратного проецирования")
    p.set_defaults(handler=cmd_localize)

    p = sub.add_parser("fit-inverse", parents=[common], help="Подобрать обратные полиномы RPC")
    p.add_argument("--rpc", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    p.set_defaults(handler=cmd_fit_inverse)

    p = sub.add_parser("warp", parents=[common], help="Перенести снимок в растр опорного вида на плоскости")
    p.add_argument("--src-image", required=True)
    p.add_argument("--src-rpc", required=True)
    p.add_argument("--ref-rpc", required=True)
    p.add_argument("--hei", type=float, required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_warp)

    p = sub.add_parser("fit-pinhole", parents=[common], help="Аппроксимация RPC камерой-обскурой")
    p.add_argument("--rpc", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--sizes", type=int, nargs="+", help="Стороны квадратных фрагментов, пиксели")
    group.add_argument("--patch", type=int, nargs=4, metavar=("X0", "Y0", "W", "H"))
    p.add_argument("--heights", type=float, nargs=2, metavar=("H_MIN", "H_MAX"))
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_fit_pinhole)

    p = sub.add_parser("sweep", parents=[common], help="Многостадийная карта высот опорного вида")
    p.add_argument("--ref-image", required=True)
    p.add_argument("--ref-rpc", required=True)
    p.add_argument("--src-image", action="append", required=True)
    p.add_argument("--src-rpc", action="append", required=True)
    p.add_argument("--heights", type=float, nargs=2, metavar=("H_MIN", "H_MAX"))
    p.add_argument("--warping", choices=("rpc", "homography"))
    p.add_argument("--keep-stages", action="store_true", help="Сохранить карты промежуточных стадий")
    p.add_argument("--out", required=True)
    _sweep_overrides(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("pipeline", parents=[common], help="ЦМП области интереса по блокам")
    p.add_argument("--scene", help="Каталог синтетической сцены с manifest.json")
    p.add_argument("--image", action="append")
    p.add_argument("--rpc", action="append")
    p.add_argument("--aoi", type=float, nargs=4, metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"))
    p.add_argument("--gt", help="Эталонная ЦМП для оценки")
    p.add_argument("--pipeline-config", help="JSON с переопределениями sweep/pipeline")
    p.add_argument("--threshold", type=float, help="Порог геометрической согласованности, пиксели")
    p.add_argument("--block-size", type=float)
    p.add_argument("--warping", choices=("rpc", "homography"))
    p.add_argument("--no-height-maps", action="store_true")
    p.add_argument("--out-dir", required=True)
    _sweep_overrides(p)
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("eval", parents=[common], help="Метрики ЦМП относительно эталона")
    p.add_argument("--dsm", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="Синтетическая сцена со снимками, RPC и эталонной ЦМП")
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--relief", type=float)
    p.add_argument("--angles", type=float, nargs="+")
    p.add_argument("--ramp", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_synth)

    return parser


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    handler: Callable[[argparse.Namespace, Config], int] = args.handler
    try:
        config = _config(args)
        init_logger(config)
        return handler(args, config)
    except (ValueError, OSError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SatMvsError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE
