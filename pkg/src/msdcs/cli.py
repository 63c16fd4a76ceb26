"""Command-line interface: train, compress, decompress, eval, gradcheck.

Exit codes:
  0  success
  1  gradcheck failure or unexpected error
  2  configuration error (also used by argument parsing)
  3  data error: missing/empty/invalid images or model file
  4  training diverged (non-finite loss)
  5  measurement packet bound to a different model
  6  malformed measurement packet
  7  eval completed but at least one image failed
"""

import argparse
import sys

import numpy as np

from . import backend, gradcheck, model, training
from .config import load_config
from .errors import (ConfigError, DataError, DivergenceError, FormatError,
                     ModelMismatchError, MsdcsError)
from .formats import (MeasurementPacket, load_measurements, load_model,
                      save_measurements, save_model)
from .gradcheck import GRAD_TOL
from .metrics import evaluate_set
from .pgm import GrayImage, central_crop, float_to_u8, load_pgm, save_pgm

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_MODEL_MISMATCH = 5
EXIT_BAD_PACKET = 6
EXIT_EVAL_PARTIAL = 7


def _err(msg: str) -> None:
    print(f"msdcs: error: {msg}", file=sys.stderr)


def _load_model_or_code(path):
    try:
        return load_model(path), None
    except (FormatError, OSError) as exc:
        _err(f"cannot load model: {exc}")
        return None, EXIT_DATA


def cmd_train(args) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            _err(f"--set wants KEY=VALUE, got {item!r}")
            return EXIT_CONFIG
        key, _, val = item.partition("=")
        overrides[key.strip()] = val.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    try:
        setup = load_config(args.config, overrides)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    def log(phase, s):
        print(f"phase {phase} epoch {s.epoch} lr {s.lr:g} "
              f"loss {s.mean_loss:.6g} holdout_psnr {s.holdout_psnr:.4f}")

    try:
        artifacts = training.train_all(setup.image_dir, setup.sampling,
                                       setup.net, setup.train,
                                       setup.out_dir, log=log)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except DataError as exc:
        _err(str(exc))
        return EXIT_DATA
    except DivergenceError as exc:
        _err(f"training diverged: {exc}")
        return EXIT_DIVERGED
    for path in artifacts:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_compress(args) -> int:
    loaded, code = _load_model_or_code(args.model)
    if loaded is None:
        return code
    params, model_crc = loaded
    try:
        img = load_pgm(args.image)
        cropped, top, left = central_crop(img.pixels, model.granule(params))
    except (FormatError, DataError, OSError) as exc:
        _err(f"cannot read image: {exc}")
        return EXIT_DATA
    if cropped.shape != img.pixels.shape:
        print(f"cropped {img.width}x{img.height} -> "
              f"{cropped.shape[1]}x{cropped.shape[0]} at offset "
              f"({top}, {left})")
    x = (cropped.astype(np.float32) / 255.0).reshape(1, 1, *cropped.shape)
    meas = model.sample(x, params)
    packet = MeasurementPacket(orig_h=img.height, orig_w=img.width,
                               crop_top=top, crop_left=left,
                               crop_h=cropped.shape[0], crop_w=cropped.shape[1],
                               n_B=params.n_B, m=params.m,
                               model_crc=model_crc, measurements=meas)
    save_measurements(packet, args.out)
    print(f"wrote {args.out} ({meas.size} measurements, realized subrate "
          f"{params.sampling_cfg.realized_subrate:.6f})")
    return EXIT_OK


def cmd_decompress(args) -> int:
    loaded, code = _load_model_or_code(args.model)
    if loaded is None:
        return code
    params, model_crc = loaded
    try:
        packet = load_measurements(args.packet)
    except (FormatError, OSError) as exc:
        _err(f"cannot read packet: {exc}")
        return EXIT_BAD_PACKET
    if packet.model_crc != model_crc:
        if not args.force:
            _err(f"packet was produced by model {packet.model_crc:#010x}, "
                 f"loaded model is {model_crc:#010x} (use --force to override)")
            return EXIT_MODEL_MISMATCH
        print("warning: model checksum mismatch overridden", file=sys.stderr)
    if packet.n_B != params.n_B or packet.m != params.m:
        _err(f"packet geometry (n_B={packet.n_B}, m={packet.m}) does not match "
             f"model (n_B={params.n_B}, m={params.m})")
        return EXIT_MODEL_MISMATCH
    recon = model.reconstruct(packet.measurements, params)
    save_pgm(GrayImage(float_to_u8(recon[0, 0])), args.out)
    print(f"wrote {args.out} ({packet.crop_w}x{packet.crop_h})")
    return EXIT_OK


def cmd_eval(args) -> int:
    loaded, code = _load_model_or_code(args.model)
    if loaded is None:
        return code
    params, _ = loaded
    try:
        report = evaluate_set(params, args.image_dir, args.out)
    except DataError as exc:
        _err(str(exc))
        return EXIT_DATA
    print(report.render(), end="")
    failed = [r for r in report.rows if r.error is not None]
    return EXIT_EVAL_PARTIAL if failed else EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(args.seed)
    worst = None
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name}: max_rel_err={r.max_rel_err:.3e} tol={r.tol:g} {status}")
        if not r.passed and worst is None:
            worst = r
    if worst is not None:
        _err(f"gradient check failed for {worst.name}")
        return EXIT_FAIL
    print(f"all {len(results)} gradient checks passed (tol {GRAD_TOL:g})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msdcs",
        description="Multi-scale wavelet compressive-sensing codec")
    parser.add_argument("--deterministic", action="store_true",
                        help="pin the pure-numpy compute backend so artifacts "
                             "are reproducible across installs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train models per a config file")
    p.add_argument("--config", required=True, help="path to key=value config")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="override config out_dir")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress", help="sample an image into a measurement packet")
    p.add_argument("model", help="model file")
    p.add_argument("image", help="P5 graymap to compress")
    p.add_argument("--out", required=True, help="output packet path")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct an image from a packet")
    p.add_argument("model", help="model file")
    p.add_argument("packet", help="measurement packet")
    p.add_argument("--out", required=True, help="output P5 path")
    p.add_argument("--force", action="store_true",
                   help="decode even if the packet was made by another model")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="evaluate a model over an image directory")
    p.add_argument("model", help="model file")
    p.add_argument("image_dir", help="directory of P5 graymaps")
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.deterministic:
        backend.set_backend("numpy")
    try:
        code = args.func(args)
    except MsdcsError as exc:
        _err(str(exc))
        code = EXIT_FAIL
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
