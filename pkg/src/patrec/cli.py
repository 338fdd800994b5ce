"""Command-line interface.

One executable with one subcommand per pipeline stage plus single-file
reconstruction modes.  Every configuration key of the pipeline is mirrored
by a flag (flag wins over the ``--config`` JSON file).  Exit codes: 0 ok,
2 configuration error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _add_config_flags(p: argparse.ArgumentParser, exclude: tuple = ()) -> None:
    from .pipeline import PipelineConfig

    p.add_argument("--config", type=Path, help="JSON config file mirroring all flags")
    g = p.add_argument_group("pipeline configuration")
    for name, field in PipelineConfig.__dataclass_fields__.items():
        if name in exclude:
            continue
        flag = "--" + name.replace("_", "-")
        if field.type == "bool":
            g.add_argument(flag, action=argparse.BooleanOptionalAction, default=None)
        elif name == "extent":
            g.add_argument(flag, type=float, nargs=4, default=None,
                           metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
        elif name == "profile_row":
            g.add_argument(flag, type=int, default=None)
        elif field.type == "int":
            g.add_argument(flag, type=int, default=None)
        elif field.type == "float":
            g.add_argument(flag, type=float, default=None)
        else:
            g.add_argument(flag, type=str, default=None)


def _resolve_config(args):
    from .pipeline import PipelineConfig, apply_overrides, config_from_json

    cfg = config_from_json(args.config) if args.config else PipelineConfig()
    names = list(PipelineConfig.__dataclass_fields__)
    overrides = {n: getattr(args, n, None) for n in names}
    if getattr(args, "scale", None):
        from .pipeline import DESK_SCALE, FULL_SCALE

        scale = {"desk": DESK_SCALE, "full": FULL_SCALE}[args.scale]
        merged = dict(scale)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        overrides = merged
    return apply_overrides(cfg, **overrides)


def _load_grid(args, cfg):
    from .geometry import GridImage

    if getattr(args, "grid", None):
        w, h = (int(v) for v in args.grid.lower().split("x"))
        extent = tuple(args.extent) if args.extent is not None else cfg.extent
        return GridImage.zeros(w, h, extent)
    return cfg.grid()


def cmd_generate_data(args) -> int:
    from .pipeline import stage_generate

    cfg = _resolve_config(args)
    stage_generate(cfg, args.out)
    print(f"wrote {cfg.n_train} train + {cfg.n_eval} eval phantoms under {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .containers import read_image, write_sinogram
    from .pipeline import ConfigError, simulate_one, stage_simulate

    cfg = _resolve_config(args)
    if args.image:
        if not args.out:
            raise ConfigError("file mode needs --out")
        image = read_image(args.image)
        sino = simulate_one(cfg, image, args.noise_seed)
        write_sinogram(args.out, sino)
        print(f"simulated {args.image} -> {args.out}")
    else:
        if not args.data:
            raise ConfigError("need --data DIR or --image FILE with --out")
        stage_simulate(cfg, args.data)
        print(f"simulated sinograms under {args.data}")
    return EXIT_OK


def cmd_reconstruct_fbp(args) -> int:
    from .containers import read_sinogram, write_image
    from .fbp import FbpConfig, fbp_reconstruct
    from .pipeline import ConfigError, stage_fbp

    if args.sinogram:
        if not args.out:
            raise ConfigError("file mode needs --out")
        sino = read_sinogram(args.sinogram)
        grid = _load_grid(args, _resolve_config(args))
        fbp_cfg = FbpConfig(t_end=args.t_end)  # None: use the full record
        write_image(args.out, fbp_reconstruct(sino, grid, fbp_cfg))
        print(f"reconstructed {args.sinogram} -> {args.out}")
    else:
        if not args.data:
            raise ConfigError("need --data DIR or --sinogram FILE with --out")
        cfg = _resolve_config(args)
        stage_fbp(cfg, args.data)
        print(f"FBP reconstructions under {args.data}")
    return EXIT_OK


def cmd_reconstruct_tv(args) -> int:
    from .containers import read_sinogram, write_image
    from .pipeline import ConfigError, stage_tv
    from .tvmin import TvConfig, tv_reconstruct

    cfg = _resolve_config(args)
    if args.sinogram:
        if not args.out:
            raise ConfigError("file mode needs --out")
        sino = read_sinogram(args.sinogram)
        grid = _load_grid(args, cfg)
        tv_cfg = TvConfig(
            lam=args.lam, iterations=args.iters, checkpoint_every=cfg.tv_checkpoint_every
        )
        rec, history = tv_reconstruct(sino, grid, tv_cfg, cfg.forward_config())
        write_image(args.out, rec)
        if args.objective_csv:
            rows = ["iter,data_term,tv_term,total"]
            rows += [f"{it},{d!r},{t!r},{tot!r}" for it, d, t, tot in history]
            Path(args.objective_csv).write_text("\n".join(rows) + "\n")
        print(f"TV reconstruction {args.sinogram} -> {args.out}")
    else:
        if not args.data:
            raise ConfigError("need --data DIR or --sinogram FILE with --out")
        stage_tv(cfg, args.data)
        print(f"TV reconstructions under {args.data}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import stage_train

    cfg = _resolve_config(args)
    stage_train(cfg, args.data, args.arch)
    print(f"trained {args.arch}; checkpoint under {args.data}/models")
    return EXIT_OK


def cmd_reconstruct_cnn(args) -> int:
    from .containers import read_image, write_image
    from .neural import load_params, snet_apply, unet_apply
    from .pipeline import ConfigError, stage_cnn

    cfg = _resolve_config(args)
    if args.image:
        if not (args.weights and args.out):
            raise ConfigError("file mode needs --weights and --out")
        params = load_params(args.weights)
        img = read_image(args.image)
        apply_fn = snet_apply if params.arch == "snet" else unet_apply
        write_image(args.out, apply_fn(params, img))
        print(f"applied {params.arch} to {args.image} -> {args.out}")
    else:
        if not args.data:
            raise ConfigError("need --data DIR or --image FILE with --weights/--out")
        stage_cnn(cfg, args.data)
        print(f"network reconstructions under {args.data}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .pipeline import stage_evaluate

    cfg = _resolve_config(args)
    report = stage_evaluate(cfg, args.data)
    print(report.to_text())
    return EXIT_OK


def cmd_reproduce_paper(args) -> int:
    from .pipeline import reproduce

    cfg = _resolve_config(args)
    report = reproduce(cfg, args.out)
    print(report.to_text())
    means = {m: report.mean(m) for m in report.per_image}
    if {"fbp", "snet", "unet", "tv"} <= set(means):
        ok_cnn = means["snet"] < means["fbp"] and means["unet"] < means["fbp"]
        ok_tv = means["tv"] < means["fbp"]
        print(f"ordering: cnn < fbp: {ok_cnn}; tv < fbp: {ok_tv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patrec",
        description="Photoacoustic tomography reconstruction toolkit",
    )
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write phantom datasets + manifests")
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_generate_data)

    p = sub.add_parser("simulate", help="forward-simulate noisy sinograms")
    p.add_argument("--data", type=Path, help="pipeline directory (stage mode)")
    p.add_argument("--image", type=Path, help="single input image (file mode)")
    p.add_argument("--out", type=Path, help="output sinogram (file mode)")
    p.add_argument("--noise-seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("reconstruct-fbp", help="filtered back-projection")
    p.add_argument("--data", type=Path)
    p.add_argument("--sinogram", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--grid", type=str, help="WxH for file mode")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_reconstruct_fbp)

    p = sub.add_parser("reconstruct-tv", help="TV-regularized reconstruction")
    p.add_argument("--data", type=Path)
    p.add_argument("--sinogram", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--grid", type=str)
    p.add_argument("--lambda", dest="lam", type=float, default=0.005)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--objective-csv", type=Path)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_reconstruct_tv)

    p = sub.add_parser("train", help="train an artifact-removal network")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--arch", choices=("snet", "unet"), required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("reconstruct-cnn", help="apply a trained network")
    p.add_argument("--data", type=Path)
    p.add_argument("--image", type=Path)
    p.add_argument("--weights", type=Path)
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_reconstruct_cnn)

    p = sub.add_parser("evaluate", help="relMSE report over the eval split")
    p.add_argument("--data", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("reproduce-paper", help="run the full experiment chain")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_reproduce_paper)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            print("threadpoolctl not installed; --threads ignored", file=sys.stderr)

    from .containers import ContainerError
    from .neural import TrainingDivergedError
    from .pipeline import ConfigError

    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContainerError, OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingDivergedError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
