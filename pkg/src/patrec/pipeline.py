"""End-to-end experiment pipeline.

Fixed artifact layout under one output directory:

    phantoms/{train,eval}/phantom_*.pati (+ *_manifest.json)
    sinograms/{train,eval}/sino_*.pats
    fbp/{train,eval}/fbp_*.pati
    models/{snet,unet}.patw, models/*_loss.csv
    cnn/eval/{snet,unet}_*.pati
    tv/eval/tv_*.pati, tv/eval/tv_*_objective.csv
    report/report.txt, report/report.csv, report/profiles.csv
    provenance/<stage>.json

Every stage is a pure function of (config, already-written artifacts), with
its random stream derived from the master seed, so chaining the stages by
hand equals running :func:`reproduce`, and two runs with the same config
produce byte-identical trees.  Provenance records contain the resolved
config, derived seeds and toolkit version (never timestamps or absolute
paths, which would break reproducibility checks).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .containers import read_image, read_sinogram, write_image, write_sinogram
from .evaluation import EvalReport, cross_section, rel_mse, write_profile_csv
from .fbp import FbpConfig, fbp_reconstruct
from .geometry import GridImage, SensorGeometry, Sinogram, arc_below, full_circle
from .neural import TrainConfig, load_params, save_params, snet_apply, train, unet_apply
from .phantom import RingRanges, generate_dataset, load_manifest
from .rng import derive_seed
from .tvmin import TvConfig, stacked_opnorm, tv_reconstruct
from .wave import ForwardConfig, WaveOperator, add_noise


class ConfigError(ValueError):
    """Inconsistent or invalid pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    # image grid
    width: int = 128
    height: int = 128
    extent: tuple[float, float, float, float] = (-10.0, 10.0, -20.0, 5.0)
    # sensors: arc below arc_y_cut on the circle, or a full circle
    radius: float = 50.0
    num_detectors: int = 28
    arc_y_cut: float = -11.1
    full_view: bool = False
    # measurement
    num_times: int = 2963
    t_end: float = 67.3
    noise_level: float = 0.1
    noise_reference: str = "std"
    # forward quadrature
    circle_points: int = 512
    abel_points: int = 64
    radial_oversampling: float = 2.0
    # fbp
    fbp_n_tau: int = 1024
    fbp_rule: str = "table"
    # tv
    tv_lam: float = 0.005
    tv_iterations: int = 50
    tv_checkpoint_every: int = 10
    # dataset + training
    n_train: int = 1000
    n_eval: int = 200
    learning_rate: float = 0.001
    momentum: float = 0.99
    batch_size: int = 1
    sweeps: int = 30
    unet_depth: int = 3
    unet_base: int = 32
    train_dtype: str = "float32"
    # evaluation
    profile_row: int | None = None
    # master seed
    seed: int = 20170001

    @property
    def dt(self) -> float:
        return self.t_end / (self.num_times - 1)

    def grid(self) -> GridImage:
        return GridImage.zeros(self.width, self.height, self.extent)

    def geometry(self) -> SensorGeometry:
        if self.full_view:
            return full_circle(self.radius, self.num_detectors)
        return arc_below(self.radius, self.num_detectors, self.arc_y_cut)

    def forward_config(self) -> ForwardConfig:
        return ForwardConfig(
            circle_points=self.circle_points,
            abel_points=self.abel_points,
            radial_oversampling=self.radial_oversampling,
            t_end=self.t_end,
        )

    def validate(self) -> None:
        if self.num_times < 3:
            raise ConfigError("num_times must be at least 3")
        try:
            self.grid()
            self.geometry()
            fwd = self.forward_config()
            FbpConfig(t_end=self.t_end, n_tau=self.fbp_n_tau, rule=self.fbp_rule)
            TvConfig(lam=self.tv_lam, iterations=self.tv_iterations)
            TrainConfig(
                learning_rate=self.learning_rate,
                momentum=self.momentum,
                batch_size=self.batch_size,
                sweeps=self.sweeps,
                seed=0,
                dtype=self.train_dtype,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if (self.num_times - 1) * self.dt > fwd.t_end * (1 + 1e-12):
            raise ConfigError(
                f"record (N-1)*dt = {(self.num_times - 1) * self.dt:.3f} exceeds t_end {fwd.t_end}"
            )
        if self.n_train < 0 or self.n_eval < 0:
            raise ConfigError("dataset sizes must be non-negative")
        if self.width % 2**self.unet_depth or self.height % 2**self.unet_depth:
            raise ConfigError(
                f"grid {self.width}x{self.height} not divisible by 2^{self.unet_depth} (unet depth)"
            )


DESK_SCALE = {
    "width": 64,
    "height": 64,
    "num_times": 1024,
    "n_train": 200,
    "n_eval": 50,
    "sweeps": 30,
}
FULL_SCALE = {}  # the defaults above


def preset(scale: str, **overrides) -> PipelineConfig:
    if scale == "desk":
        merged = {**DESK_SCALE, **overrides}
    elif scale == "full":
        merged = {**FULL_SCALE, **overrides}
    else:
        raise ConfigError(f"unknown scale {scale!r} (use 'desk' or 'full')")
    return PipelineConfig(**merged)


# stage seeds, all derived from the master seed (documented splitting rule)
_SEED_SLOTS = {
    "phantoms_train": 1,
    "phantoms_eval": 2,
    "noise_train": 3,
    "noise_eval": 4,
    "train_snet": 5,
    "train_unet": 6,
    "opnorm": 7,
}


def stage_seed(cfg: PipelineConfig, slot: str) -> int:
    return derive_seed(cfg.seed, _SEED_SLOTS[slot])


def _config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_provenance(out: Path, stage: str, cfg: PipelineConfig, extra: dict | None = None) -> None:
    prov_dir = out / "provenance"
    prov_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "stage": stage,
        "toolkit_version": __version__,
        "config": asdict(cfg),
        "config_sha256": _config_hash(cfg),
        "seeds": {slot: stage_seed(cfg, slot) for slot in _SEED_SLOTS},
    }
    if extra:
        record["extra"] = extra
    (prov_dir / f"{stage}.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _split_dirs(out: Path, kind: str) -> dict[str, Path]:
    return {"train": out / kind / "train", "eval": out / kind / "eval"}


def stage_generate(cfg: PipelineConfig, out: Path) -> None:
    """Phantom datasets with disjoint train/eval seed streams."""
    cfg.validate()
    grid = cfg.grid()
    dirs = _split_dirs(out, "phantoms")
    generate_dataset(cfg.n_train, stage_seed(cfg, "phantoms_train"), dirs["train"], grid, RingRanges())
    generate_dataset(cfg.n_eval, stage_seed(cfg, "phantoms_eval"), dirs["eval"], grid, RingRanges())
    write_provenance(out, "generate-data", cfg)


def _phantom_files(out: Path, split: str) -> list[Path]:
    d = _split_dirs(out, "phantoms")[split]
    return sorted(d.glob("phantom_*.pati"))


def simulate_one(cfg: PipelineConfig, image: GridImage, noise_seed: int) -> Sinogram:
    sino = Sinogram(
        cfg.geometry(),
        cfg.dt,
        WaveOperator(image, cfg.geometry(), cfg.num_times, cfg.dt, cfg.forward_config()).apply(
            image.values
        ),
    )
    return add_noise(sino, cfg.noise_level, noise_seed, cfg.noise_reference)


def stage_simulate(cfg: PipelineConfig, out: Path) -> None:
    """Noisy measurement simulation for every phantom."""
    cfg.validate()
    geometry = cfg.geometry()
    op = WaveOperator(cfg.grid(), geometry, cfg.num_times, cfg.dt, cfg.forward_config())
    for split, noise_slot in (("train", "noise_train"), ("eval", "noise_eval")):
        sino_dir = _split_dirs(out, "sinograms")[split]
        sino_dir.mkdir(parents=True, exist_ok=True)
        for i, path in enumerate(_phantom_files(out, split)):
            image = read_image(path)
            sino = Sinogram(geometry, cfg.dt, op.apply(image.values))
            noisy = add_noise(
                sino, cfg.noise_level, derive_seed(stage_seed(cfg, noise_slot), i), cfg.noise_reference
            )
            write_sinogram(sino_dir / f"sino_{i:05d}.pats", noisy)
    write_provenance(out, "simulate", cfg)


def stage_fbp(cfg: PipelineConfig, out: Path) -> None:
    """Filtered back-projection of every sinogram."""
    cfg.validate()
    grid = cfg.grid()
    fbp_cfg = FbpConfig(t_end=cfg.t_end, n_tau=cfg.fbp_n_tau, rule=cfg.fbp_rule)
    for split in ("train", "eval"):
        sino_dir = _split_dirs(out, "sinograms")[split]
        fbp_dir = _split_dirs(out, "fbp")[split]
        fbp_dir.mkdir(parents=True, exist_ok=True)
        for path in sorted(sino_dir.glob("sino_*.pats")):
            sino = read_sinogram(path)
            rec = fbp_reconstruct(sino, grid, fbp_cfg)
            write_image(fbp_dir / path.name.replace("sino_", "fbp_").replace(".pats", ".pati"), rec)
    write_provenance(out, "reconstruct-fbp", cfg)


def _load_pairs(cfg: PipelineConfig, out: Path, split: str):
    phantoms = _phantom_files(out, split)
    fbp_dir = _split_dirs(out, "fbp")[split]
    pairs = []
    for i, ph_path in enumerate(phantoms):
        fbp_path = fbp_dir / f"fbp_{i:05d}.pati"
        pairs.append((read_image(fbp_path).values, read_image(ph_path).values))
    return pairs


def _loss_csv(history) -> str:
    lines = ["sweep,train_L1,eval_L1"]
    for h in history:
        ev = "" if h["eval_loss"] is None else repr(h["eval_loss"])
        lines.append(f"{h['sweep']},{h['train_loss']!r},{ev}")
    return "\n".join(lines) + "\n"


def stage_train(cfg: PipelineConfig, out: Path, arch: str) -> None:
    """Fit one network on (FBP image, phantom) pairs."""
    cfg.validate()
    train_pairs = _load_pairs(cfg, out, "train")
    eval_pairs = _load_pairs(cfg, out, "eval")
    tcfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        sweeps=cfg.sweeps,
        seed=stage_seed(cfg, f"train_{arch}"),
        dtype=cfg.train_dtype,
    )
    if arch == "snet":
        params, history = train(train_pairs, "snet", tcfg, eval_dataset=eval_pairs or None)
    elif arch == "unet":
        from .neural import unet_init

        init = unet_init(
            derive_seed(tcfg.seed, 0),
            depth=cfg.unet_depth,
            base_channels=cfg.unet_base,
            residual=True,
            dtype=np.dtype(cfg.train_dtype),
        )
        params, history = train(train_pairs, init, tcfg, eval_dataset=eval_pairs or None)
    else:
        raise ConfigError(f"unknown architecture {arch!r}")
    models = out / "models"
    models.mkdir(parents=True, exist_ok=True)
    save_params(models / f"{arch}.patw", params)
    (models / f"{arch}_loss.csv").write_text(_loss_csv(history))
    write_provenance(out, f"train-{arch}", cfg)


def stage_cnn(cfg: PipelineConfig, out: Path) -> None:
    """Apply every trained network to the eval FBP images."""
    cfg.validate()
    cnn_dir = _split_dirs(out, "cnn")["eval"]
    cnn_dir.mkdir(parents=True, exist_ok=True)
    fbp_dir = _split_dirs(out, "fbp")["eval"]
    dtype = np.dtype(cfg.train_dtype)
    for arch, apply_fn in (("snet", snet_apply), ("unet", unet_apply)):
        ckpt = out / "models" / f"{arch}.patw"
        if not ckpt.exists():
            continue
        params = load_params(ckpt)
        for path in sorted(fbp_dir.glob("fbp_*.pati")):
            img = read_image(path)
            rec = apply_fn(params, img, dtype=dtype)
            write_image(cnn_dir / path.name.replace("fbp_", f"{arch}_"), rec)
    write_provenance(out, "reconstruct-cnn", cfg)


def stage_tv(cfg: PipelineConfig, out: Path) -> None:
    """TV reconstruction of the eval sinograms, with objective traces."""
    cfg.validate()
    grid = cfg.grid()
    fwd_cfg = cfg.forward_config()
    op = WaveOperator(grid, cfg.geometry(), cfg.num_times, cfg.dt, fwd_cfg)
    opnorm = stacked_opnorm(op, grid, iters=50, seed=stage_seed(cfg, "opnorm"))
    tv_cfg = TvConfig(
        lam=cfg.tv_lam,
        iterations=cfg.tv_iterations,
        opnorm=opnorm,
        checkpoint_every=cfg.tv_checkpoint_every,
    )
    tv_dir = _split_dirs(out, "tv")["eval"]
    tv_dir.mkdir(parents=True, exist_ok=True)
    sino_dir = _split_dirs(out, "sinograms")["eval"]
    for path in sorted(sino_dir.glob("sino_*.pats")):
        sino = read_sinogram(path)
        rec, history = tv_reconstruct(sino, grid, tv_cfg, fwd_cfg, operator=op)
        stem = path.name.replace("sino_", "tv_").replace(".pats", "")
        write_image(tv_dir / f"{stem}.pati", rec)
        rows = ["iter,data_term,tv_term,total"]
        rows += [f"{it},{d!r},{t!r},{tot!r}" for it, d, t, tot in history]
        (tv_dir / f"{stem}_objective.csv").write_text("\n".join(rows) + "\n")
    write_provenance(out, "reconstruct-tv", cfg, extra={"opnorm": opnorm})


def stage_evaluate(cfg: PipelineConfig, out: Path) -> EvalReport:
    """relMSE report over the eval split for every produced method."""
    cfg.validate()
    phantoms = _phantom_files(out, "eval")
    manifest = _split_dirs(out, "phantoms")["eval"] / "phantom_manifest.json"
    report = EvalReport(
        files=[p.name for p in phantoms],
        manifests=[manifest.name] if manifest.exists() else [],
    )
    truths = [read_image(p) for p in phantoms]

    method_dirs = {
        "fbp": (_split_dirs(out, "fbp")["eval"], "fbp_{i:05d}.pati"),
        "tv": (_split_dirs(out, "tv")["eval"], "tv_{i:05d}.pati"),
        "snet": (_split_dirs(out, "cnn")["eval"], "snet_{i:05d}.pati"),
        "unet": (_split_dirs(out, "cnn")["eval"], "unet_{i:05d}.pati"),
    }
    recons: dict[str, list[GridImage]] = {}
    for method, (d, pattern) in method_dirs.items():
        if not d.exists() or not (d / pattern.format(i=0)).exists():
            continue
        images = [read_image(d / pattern.format(i=i)) for i in range(len(phantoms))]
        recons[method] = images
        report.add(method, [rel_mse(t, r) for t, r in zip(truths, images)])

    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "report.txt").write_text(report.to_text())
    (report_dir / "report.csv").write_text(report.to_csv())

    if truths:
        row = cfg.profile_row
        if row is None:
            # default: the row through the brightest pixel of the first truth
            row = int(np.unravel_index(np.argmax(truths[0].values), truths[0].values.shape)[0])
        x_mm, truth_profile = cross_section(truths[0], row=row)
        columns = {"truth": truth_profile}
        for method, images in recons.items():
            _, columns[method] = cross_section(images[0], row=row)
        write_profile_csv(report_dir / "profiles.csv", x_mm, columns)
    write_provenance(out, "evaluate", cfg, extra={"profile_row": cfg.profile_row})
    return report


def reproduce(cfg: PipelineConfig, out) -> EvalReport:
    """Chain every stage with the configured sizes and seeds."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage_generate(cfg, out)
    stage_simulate(cfg, out)
    stage_fbp(cfg, out)
    stage_train(cfg, out, "snet")
    stage_train(cfg, out, "unet")
    stage_cnn(cfg, out)
    stage_tv(cfg, out)
    report = stage_evaluate(cfg, out)
    write_provenance(out, "reproduce-paper", cfg)
    return report


def config_from_json(path) -> PipelineConfig:
    """Config file: a flat JSON object mirroring PipelineConfig fields."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(data) - set(PipelineConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    if "extent" in data:
        data["extent"] = tuple(data["extent"])
    try:
        cfg = PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg.validate()
    return cfg


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Flag-style overrides; None values are ignored."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    if "extent" in clean:
        clean["extent"] = tuple(clean["extent"])
    out = replace(cfg, **clean)
    out.validate()
    return out
