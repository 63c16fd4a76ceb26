"""PSNR and SSIM on the 0..255 scale, plus evaluation-report assembly.

PSNR of identical images is reported as a 99 dB sentinel (and all values
are capped there so reports stay finite). SSIM follows the reference
single-scale formulation: 11x11 Gaussian window with sigma 1.5, K1=0.01,
K2=0.03, L=255, averaged over all fully contained window positions.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import model
from .errors import DataError, MsdcsError, ShapeError
from .pgm import central_crop, float_to_u8, load_pgm

PSNR_CAP_DB = 99.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_L = 255.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two [0,1] float images."""
    if a.shape != b.shape:
        raise ShapeError(f"psnr shapes differ: {a.shape} vs {b.shape}")
    d = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) * 255.0
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(255.0 ** 2 / mse))


def _gauss_window(n: int, sigma: float) -> np.ndarray:
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable windowed mean, valid positions only."""
    t = sliding_window_view(img, len(g), axis=0) @ g
    return sliding_window_view(t, len(g), axis=1) @ g


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity between two [0,1] float images."""
    if a.shape != b.shape:
        raise ShapeError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape) < _SSIM_WINDOW:
        raise ShapeError(f"ssim needs images at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, "
                         f"got {a.shape}")
    x = np.asarray(a, dtype=np.float64) * _SSIM_L
    y = np.asarray(b, dtype=np.float64) * _SSIM_L
    g = _gauss_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    var_x = _filter_valid(x * x, g) - mu_x * mu_x
    var_y = _filter_valid(y * y, g) - mu_y * mu_y
    cov = _filter_valid(x * y, g) - mu_x * mu_y
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass
class EvalRow:
    name: str
    subrate_target: float
    subrate_realized: float
    psnr_db: float
    ssim: float
    error: str | None = None


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    sample_seconds: float = 0.0
    reconstruct_seconds: float = 0.0

    def ok_rows(self) -> list[EvalRow]:
        return [r for r in self.rows if r.error is None]

    def averages(self) -> EvalRow | None:
        ok = self.ok_rows()
        if not ok:
            return None
        return EvalRow("average",
                       float(np.mean([r.subrate_target for r in ok])),
                       float(np.mean([r.subrate_realized for r in ok])),
                       float(np.mean([r.psnr_db for r in ok])),
                       float(np.mean([r.ssim for r in ok])))

    def render(self) -> str:
        lines = ["name,subrate_target,subrate_realized,psnr_db,ssim"]
        def fmt(r):
            return (f"{r.name},{r.subrate_target:.12g},{r.subrate_realized:.12g},"
                    f"{r.psnr_db:.12g},{r.ssim:.12g}")
        for r in self.rows:
            if r.error is None:
                lines.append(fmt(r))
            else:
                lines.append(f"{r.name},{r.subrate_target:.12g},nan,nan,nan")
        avg = self.averages()
        if avg is not None:
            lines.append(fmt(avg))
        lines.append(f"# sample_seconds={self.sample_seconds:.6f}")
        lines.append(f"# reconstruct_seconds={self.reconstruct_seconds:.6f}")
        for r in self.rows:
            if r.error is not None:
                lines.append(f"# error {r.name}: {r.error}")
        return "\n".join(lines) + "\n"


def evaluate_set(params: model.ModelParams, image_dir, out_path=None) -> EvalReport:
    """Sample and reconstruct every image in the directory at the model's
    phase, scoring the 8-bit decoded result against the (cropped) original.
    Per-image failures are recorded without aborting the batch."""
    image_dir = Path(image_dir)
    files = sorted(image_dir.glob("*.pgm"))
    if not files:
        raise DataError(f"no .pgm images found in {image_dir}")
    target = params.sampling_cfg.subrate
    realized = params.sampling_cfg.realized_subrate
    g = model.granule(params)
    report = EvalReport()
    for f in files:
        try:
            img = load_pgm(f)
            cropped, _, _ = central_crop(img.pixels, g)
            x = (cropped.astype(np.float32) / 255.0).reshape(1, 1, *cropped.shape)
            t0 = time.perf_counter()
            meas = model.sample(x, params)
            t1 = time.perf_counter()
            recon = model.reconstruct(meas, params)
            t2 = time.perf_counter()
            report.sample_seconds += t1 - t0
            report.reconstruct_seconds += t2 - t1
            decoded = float_to_u8(recon[0, 0]).astype(np.float32) / 255.0
            truth = cropped.astype(np.float32) / 255.0
            report.rows.append(EvalRow(f.name, target, realized,
                                       psnr(decoded, truth), ssim(decoded, truth)))
        except MsdcsError as exc:
            report.rows.append(EvalRow(f.name, target, float("nan"),
                                       float("nan"), float("nan"), error=str(exc)))
    if out_path is not None:
        Path(out_path).write_text(report.render())
    return report
