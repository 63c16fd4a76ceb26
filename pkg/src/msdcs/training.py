"""Mini-batch training: Euclidean loss, the learning-rate ladder, and the
three-phase schedule. Later phases re-train every weight learned so far
(joint learning of the sampling operator and all reconstruction stages).
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, model, ops
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .model import ModelParams, NetConfig, SamplingConfig
from .pgm import load_pgm


@dataclass(frozen=True)
class TrainConfig:
    phase_list: tuple[int, ...] = (1, 2, 3)
    epochs_per_lr: int = 2
    lr_ladder: tuple[float, ...] = (0.001, 0.0001, 0.00005)
    batch_size: int = 8
    seed: int = 0
    patch_size: int = 64
    patches_per_image: int = 25
    holdout_fraction: float = 0.1

    def __post_init__(self):
        if not self.phase_list or list(self.phase_list) != sorted(set(self.phase_list)) \
                or any(p not in (1, 2, 3) for p in self.phase_list):
            raise ConfigError(f"phase_list must be an ordered subset of 1,2,3; "
                              f"got {self.phase_list}")
        if any(lr <= 0 for lr in self.lr_ladder):
            raise ConfigError("learning rates must be positive")
        if list(self.lr_ladder) != sorted(self.lr_ladder, reverse=True) \
                or len(set(self.lr_ladder)) != len(self.lr_ladder):
            raise ConfigError(f"lr_ladder must be strictly decreasing, got {self.lr_ladder}")
        if self.batch_size < 1 or self.epochs_per_lr < 1 or self.patches_per_image < 1:
            raise ConfigError("batch_size, epochs_per_lr, patches_per_image must be >= 1")
        if not 0 <= self.holdout_fraction < 1:
            raise ConfigError("holdout_fraction must lie in [0, 1)")


@dataclass
class PatchDataset:
    train: list[np.ndarray]
    holdout: list[np.ndarray]
    manifest: list[tuple[str, int, int, str]]  # (file, top, left, split)


@dataclass
class EpochStats:
    epoch: int
    lr: float
    mean_loss: float
    holdout_psnr: float


def extract_patches(image_dir, cfg: TrainConfig) -> PatchDataset:
    """Seeded random patches from every grayscale image in the directory;
    a fraction of source images (not patches) is held out."""
    image_dir = Path(image_dir)
    files = sorted(image_dir.glob("*.pgm"))
    if not files:
        raise DataError(f"no .pgm images found in {image_dir}")
    ps = cfg.patch_size
    images, undersized = [], []
    for f in files:
        img = load_pgm(f)
        if img.height < ps or img.width < ps:
            undersized.append(f"{f.name} ({img.width}x{img.height})")
        else:
            images.append((f.name, img))
    if undersized:
        raise DataError(f"images smaller than patch size {ps}: {', '.join(undersized)}")

    rng = np.random.default_rng([cfg.seed, 0x5EED])
    n = len(images)
    n_hold = 0
    if n >= 2 and cfg.holdout_fraction > 0:
        n_hold = max(1, int(round(cfg.holdout_fraction * n)))
    hold_idx = set(rng.choice(n, size=n_hold, replace=False).tolist())

    train, holdout, manifest = [], [], []
    for i, (name, img) in enumerate(images):
        split = "holdout" if i in hold_idx else "train"
        pix = img.as_float()
        tops = rng.integers(0, img.height - ps + 1, size=cfg.patches_per_image)
        lefts = rng.integers(0, img.width - ps + 1, size=cfg.patches_per_image)
        for top, left in zip(tops.tolist(), lefts.tolist()):
            patch = pix[top:top + ps, left:left + ps].reshape(1, 1, ps, ps)
            (holdout if split == "holdout" else train).append(patch)
            manifest.append((name, top, left, split))
    return PatchDataset(train, holdout, manifest)


def mse_loss(recon: np.ndarray, target: np.ndarray):
    """Euclidean loss 1/(2 N_b) * sum of squared residuals over the batch;
    returns (loss, gradient w.r.t. recon)."""
    if recon.shape != target.shape:
        raise ShapeError(f"recon shape {recon.shape} != target shape {target.shape}")
    n_b = recon.shape[0]
    d = recon - target
    loss = float(np.dot(d.ravel().astype(np.float64), d.ravel().astype(np.float64))) / (2 * n_b)
    return loss, d / n_b


def _holdout_psnr(params: ModelParams, data: PatchDataset, phase: int) -> float:
    if not data.holdout:
        return float("nan")
    vals = []
    for patch in data.holdout:
        y = model.forward(patch, params, phase)
        vals.append(metrics.psnr(y[0, 0], patch[0, 0]))
    return float(np.mean(vals))


def train_phase(params: ModelParams, data: PatchDataset, phase: int,
                cfg: TrainConfig, log=None) -> tuple[ModelParams, list[EpochStats]]:
    """Run the lr ladder for one phase, updating every parameter active at
    that phase. Deterministic for a fixed seed."""
    if params.phase > phase:
        raise ValueError(f"model already trained through phase {params.phase}, "
                         f"cannot train phase {phase}")
    if not data.train:
        raise DataError("training set is empty")
    active = params.parameters(phase)
    history: list[EpochStats] = []
    epoch = 0
    for lr in cfg.lr_ladder:
        hyper = ops.AdamHyper(lr=lr)
        for _ in range(cfg.epochs_per_lr):
            rng = np.random.default_rng([cfg.seed, phase, epoch])
            order = rng.permutation(len(data.train))
            losses = []
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                x = np.concatenate([data.train[i] for i in idx], axis=0)
                y, cache = model.run_forward(x, params, phase)
                loss, gy = mse_loss(y, x)
                batch_no = start // cfg.batch_size
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss at phase {phase} epoch {epoch} "
                        f"batch {batch_no}", batch_index=batch_no)
                model.run_backward(params, cache, gy)
                try:
                    for p in active:
                        ops.adam_step(p, hyper)
                except ValueError as exc:  # non-finite gradient: overflow upstream
                    raise DivergenceError(
                        f"{exc} at phase {phase} epoch {epoch} batch {batch_no}",
                        batch_index=batch_no) from exc
                losses.append(loss)
            stats = EpochStats(epoch, lr, float(np.mean(losses)),
                               _holdout_psnr(params, data, phase))
            history.append(stats)
            if log is not None:
                log(phase, stats)
            epoch += 1
    params.phase = phase
    return params, history


def check_patch_size(cfg: TrainConfig, sampling: SamplingConfig, net: NetConfig) -> None:
    step = 2 * sampling.block_size
    if cfg.patch_size % step:
        raise ConfigError(f"patch_size {cfg.patch_size} not divisible by "
                          f"2 * block_size = {step}")
    if 3 in cfg.phase_list and cfg.patch_size % (2 ** net.mwcnn_levels):
        raise ConfigError(f"patch_size {cfg.patch_size} not divisible by "
                          f"2^mwcnn_levels = {2 ** net.mwcnn_levels}")


def train_all(image_dir, sampling: SamplingConfig, net: NetConfig,
              cfg: TrainConfig, out_dir, log=None) -> list[Path]:
    """Train the configured phases in order, writing one independently
    loadable model artifact and one history file per phase."""
    from .formats import save_model  # local import to avoid a cycle

    check_patch_size(cfg, sampling, net)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = extract_patches(image_dir, cfg)
    params = model.init_params(sampling, net, cfg.seed)
    artifacts = []
    for phase in cfg.phase_list:
        params, history = train_phase(params, data, phase, cfg, log=log)
        path = out_dir / f"model_phase{phase}.msdc"
        save_model(params, path)
        hist_path = out_dir / f"history_phase{phase}.csv"
        with open(hist_path, "w") as fh:
            fh.write("epoch,lr,mean_loss,holdout_psnr\n")
            for s in history:
                fh.write(f"{s.epoch},{s.lr:.12g},{s.mean_loss:.12g},"
                         f"{s.holdout_psnr:.12g}\n")
        artifacts.append(path)
    return artifacts
