"""Command-line surface: score, eval, features, train-niqe, ablate, synth.

Machine output goes to stdout (``--json`` for JSON), logs to stderr.  Exit
codes: 0 success, 2 manifest/input errors, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import descriptor, evaluate, niqe, pipeline, synthgen, trajectory, videoio
from .videoio import FormatError

log = logging.getLogger("tpqi")

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_NUMERIC = 3

_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(pipeline.PipelineConfig)}


def _coerce(key: str, raw: str):
    if key not in _CONFIG_TYPES:
        raise ValueError(f"unknown config key {key!r}")
    raw = raw.strip().strip('"').strip("'")
    ann = str(_CONFIG_TYPES[key])
    if "bool" in ann:
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in ann:
        return int(raw)
    if "float" in ann:
        return float(raw)
    return raw


def load_config(path=None, overrides=None) -> pipeline.PipelineConfig:
    """Flat ``key = value`` config file (# comments) plus flag overrides."""
    values = {}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = _coerce(key, raw)
    for key, raw in overrides or []:
        values[key] = _coerce(key, raw)
    return pipeline.PipelineConfig(**values)


def _resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a single config key (repeatable)")
    p.add_argument("--resolution", type=_resolution, metavar="WxH",
                   help="working resolution for the perceptual domains")
    p.add_argument("--pca-dim", type=int, help="trajectory dimensionality")
    p.add_argument("--pool", type=int, help="V1 energy pooling factor")
    p.add_argument("--fusion", choices=("sum", "product", "none"),
                   help="spatial/temporal fusion strategy")
    p.add_argument("--niqe-model", help="pristine model file for spatial scoring")
    p.add_argument("--threads", type=int, help="parallel video jobs")
    p.add_argument("--cache-dir", help="stage cache directory "
                   "(default $TPQI_CACHE_DIR or ~/.cache/tpqi)")
    p.add_argument("--no-cache", action="store_true", help="disable the stage cache")
    p.add_argument("--json", action="store_true", help="machine-readable stdout")


def _config_from_args(args) -> tuple[pipeline.PipelineConfig, str]:
    overrides = []
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        overrides.append(tuple(s.strip() for s in item.split("=", 1)))
    fusion = "product"
    if args.resolution:
        overrides += [("v1_width", str(args.resolution[0])),
                      ("v1_height", str(args.resolution[1]))]
    if args.pca_dim is not None:
        overrides.append(("pca_dim", str(args.pca_dim)))
    if args.pool is not None:
        overrides.append(("pool", str(args.pool)))
    if args.fusion:
        fusion = args.fusion
        if args.fusion != "none":
            overrides.append(("fusion", args.fusion))
    if args.niqe_model:
        overrides.append(("niqe_model", args.niqe_model))
    if args.threads is not None:
        overrides.append(("threads", str(args.threads)))
    cfg = load_config(args.config, overrides)
    if args.fusion is None:
        fusion = cfg.fusion
    return cfg, fusion


def _make_cache(args) -> pipeline.StageCache | None:
    if args.no_cache:
        return None
    root = Path(args.cache_dir) if args.cache_dir else pipeline.default_cache_dir()
    return pipeline.StageCache(root)


def _load_niqe_model(cfg, fusion) -> niqe.NiqeModel | None:
    if fusion == "none":
        return None
    if not cfg.niqe_model:
        raise FormatError("fusion requested but no NIQE model given "
                          "(--niqe-model or fusion none)")
    return niqe.load_model(cfg.niqe_model)


def _report_lines(report: evaluate.QualityReport) -> str:
    rows = [("source", report.source_id)]
    for label, value in (("q_tpqi", report.q_tpqi), ("q_tpqi_lgn", report.q_tpqi_lgn),
                         ("q_tpqi_v1", report.q_tpqi_v1), ("q_niqe", report.q_niqe),
                         ("q_overall_sum", report.q_overall_sum),
                         ("q_overall_product", report.q_overall_product)):
        if value is not None:
            rows.append((label, f"{value:.6f}"))
    if report.degenerate_flags:
        rows.append(("degenerate", ",".join(report.degenerate_flags)))
    rows.append(("fingerprint", report.config_fingerprint))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def cmd_score(args) -> int:
    cfg, fusion = _config_from_args(args)
    model = _load_niqe_model(cfg, fusion)
    cache = _make_cache(args)
    report = pipeline.score_path(args.video, cfg, model, cache)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(_report_lines(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
        _render_score_figures(args.video, cfg, out, cache)
        log.info("wrote %s", out)
    return EXIT_OK


def _render_score_figures(video, cfg, out: Path, cache=None) -> None:
    from . import figures

    seq = videoio.read_video(video)
    content_hash = pipeline.hash_file(video) if Path(video).is_file() else ""
    resized = videoio.resize(seq, cfg.v1_width, cfg.v1_height)
    series = {}
    for domain in ("lgn", "v1"):
        traj = pipeline.domain_trajectory(resized, domain, cfg, cache, content_hash)
        figures.plot_trajectory(traj.points, out / f"trajectory_{domain}.png",
                                title=f"{domain.upper()} trajectory")
        series[domain.upper()] = descriptor.describe(traj.points, cfg.kind())
    figures.plot_descriptor_series(series, out / "descriptor_series.png")


def _write_results_csv(path, reports) -> None:
    fields = ["source_id", "q_tpqi", "q_tpqi_lgn", "q_tpqi_v1", "q_niqe",
              "q_overall_sum", "q_overall_product", "degenerate_flags",
              "config_fingerprint"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in reports:
            d = r.to_dict()
            d["degenerate_flags"] = ";".join(d["degenerate_flags"])
            writer.writerow([d[f] for f in fields])


def cmd_eval(args) -> int:
    cfg, fusion = _config_from_args(args)
    model = _load_niqe_model(cfg, fusion)
    cache = _make_cache(args)
    manifest = evaluate.load_manifest(args.manifest)
    base = Path(args.manifest).parent
    entries = [(str((base / p)) if not Path(p).is_absolute() else p, m)
               for p, m in manifest.entries]
    reports, failures = pipeline.score_manifest(entries, cfg, model, cache,
                                                skip_errors=args.skip_errors)
    if failures:
        kept = {path for path, _ in entries} - {path for path, _ in failures}
        entries = [(p, m) for p, m in entries if p in kept]
        if len(entries) < 4:
            raise ValueError("too few scorable videos after --skip-errors")
    scored = evaluate.DatasetManifest(entries, manifest.name)
    rho, plcc, rmse, params = evaluate.evaluate_manifest(scored, reports,
                                                         args.score_field)
    if cache:
        log.info("cache: %d hits, %d misses", cache.hits, cache.misses)

    result = {"dataset": manifest.name, "score_field": args.score_field,
              "n": len(entries), "SRCC": rho, "PLCC": plcc, "RMSE": rmse,
              "logistic": vars(params), "config_fingerprint": cfg.fingerprint()}
    if args.json:
        print(json.dumps(result, indent=2))
    else:
        print(f"{'dataset':<12} {'field':<16} {'n':>4} {'SRCC':>8} {'PLCC':>8} {'RMSE':>8}")
        print(f"{manifest.name:<12} {args.score_field:<16} {len(entries):>4} "
              f"{rho:>8.3f} {plcc:>8.3f} {rmse:>8.3f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_results_csv(out / "results.csv", reports)
        (out / "metrics.json").write_text(json.dumps(result, indent=2))
        from . import figures

        pred = [r.score(args.score_field) for r in reports]
        mos = [m for _, m in entries]
        figures.plot_fit_scatter(pred, mos, params, out / "fit_scatter.png",
                                 score_field=args.score_field,
                                 metrics={"SRCC": rho, "PLCC": plcc, "RMSE": rmse})
        log.info("wrote %s", out)
    return EXIT_OK


def cmd_features(args) -> int:
    cfg, _ = _config_from_args(args)
    seq = videoio.read_video(args.video)
    if args.domain in ("lgn", "v1"):
        matrix = pipeline.feature_matrix(seq, args.domain, cfg)
    else:
        resized = videoio.resize(seq, cfg.v1_width, cfg.v1_height)
        domain = args.trajectory_domain
        traj = pipeline.domain_trajectory(resized, domain, cfg)
        matrix = traj.points
        if args.plot:
            from . import figures

            figures.plot_trajectory(traj.points, args.plot,
                                    title=f"{domain.upper()} trajectory")
    if args.format == "csv":
        trajectory.save_matrix_csv(args.out, matrix)
    else:
        trajectory.save_matrix(args.out, matrix)
    log.info("wrote %s (%d x %d)", args.out, matrix.shape[0], matrix.shape[1])
    return EXIT_OK


def cmd_train_niqe(args) -> int:
    if args.synthetic:
        images = [synthgen.natural_image(512, 512, seed=args.seed + i)
                  for i in range(args.synthetic)]
    else:
        if not args.corpus:
            raise FormatError("train-niqe needs --corpus DIR or --synthetic N")
        from PIL import Image

        paths = sorted(p for p in Path(args.corpus).glob("*")
                       if p.suffix.lower() in (".png", ".ppm", ".pgm"))
        # corpus images need not share dimensions
        images = [videoio._to_luma(np.asarray(Image.open(p))) for p in paths]
    model = niqe.train_model(images, patch_size=args.patch_size,
                             sharpness_fraction=args.sharpness_fraction)
    niqe.save_model(model, args.out)
    log.info("trained on %d images -> %s", len(images), args.out)
    print(args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    variant_map = {"vpt": "vpt", "curvature": "curvature_only",
                   "distance": "distance_only", "linear": "linear_error"}
    args.set = list(args.set) + [
        f"descriptor_variant={variant_map[args.descriptor]}",
        f"distance_option={args.distance_option}",
    ]
    args.score_field = args.score_field or "tpqi"
    return cmd_eval(args)


def cmd_synth(args) -> int:
    w, h = args.size
    seq = synthgen.smooth_clip(args.frames, (w, h), seed=args.seed,
                               velocity=args.velocity)
    if args.kind != "none":
        seq = synthgen.distort(seq, synthgen.DistortionSpec(args.kind, args.strength,
                                                            args.seed))
    videoio.write_y4m(seq, args.out)
    log.info("wrote %s (%d frames, %dx%d)", args.out, seq.n_frames, w, h)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpqi",
        description="Completely blind video quality assessment: temporal "
                    "perceptual trajectory index fused with NIQE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one video")
    p.add_argument("video")
    p.add_argument("--out", help="directory for report.json and figures")
    _add_config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate predictions against a MOS manifest")
    p.add_argument("manifest", help="CSV with header path,mos")
    p.add_argument("--score-field", default="tpqi",
                   choices=evaluate.QualityReport.SCORE_FIELDS)
    p.add_argument("--skip-errors", action="store_true",
                   help="drop unreadable videos instead of aborting")
    p.add_argument("--out", help="directory for results.csv, metrics.json, figures")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("features", help="dump per-frame features or the trajectory")
    p.add_argument("video")
    p.add_argument("--domain", required=True, choices=("lgn", "v1", "trajectory"))
    p.add_argument("--trajectory-domain", default="v1", choices=("lgn", "v1"),
                   help="perceptual domain for --domain trajectory")
    p.add_argument("--format", default="bin", choices=("bin", "csv"))
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render the 2-D trajectory to this PNG")
    _add_config_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-niqe", help="fit a pristine spatial model")
    p.add_argument("--corpus", help="directory of pristine PNG/PPM images")
    p.add_argument("--synthetic", type=int, default=0, metavar="N",
                   help="train on N procedurally generated pristine images")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--patch-size", type=int, default=96)
    p.add_argument("--sharpness-fraction", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_niqe)

    p = sub.add_parser("ablate", help="eval with an alternative descriptor")
    p.add_argument("manifest")
    p.add_argument("--descriptor", required=True,
                   choices=("vpt", "curvature", "distance", "linear"))
    p.add_argument("--distance-option", default="norm_of_sum",
                   choices=descriptor.DISTANCE_OPTIONS)
    p.add_argument("--score-field", default=None,
                   choices=evaluate.QualityReport.SCORE_FIELDS)
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic test clip")
    p.add_argument("--kind", default="none",
                   choices=("none",) + synthgen.DISTORTION_KINDS)
    p.add_argument("--strength", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--size", type=_resolution, default=(192, 108), metavar="WxH")
    p.add_argument("--velocity", type=float, nargs=2, default=(1.6, 0.9),
                   metavar=("VX", "VY"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (np.linalg.LinAlgError, ArithmeticError, pipeline.StageError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (FormatError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_MANIFEST


if __name__ == "__main__":
    sys.exit(main())
