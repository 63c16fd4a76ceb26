"""Flat "key = value" configuration files for the train command.

'#' starts a comment, blank lines are ignored, unknown keys are an error.
Lists (lr_ladder, phases, mwcnn_widths) are comma-separated.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import NetConfig, SamplingConfig
from .training import TrainConfig


def _to_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}") from None


def _to_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}") from None


def _to_int_list(s: str) -> tuple[int, ...]:
    return tuple(_to_int(p.strip()) for p in s.split(",") if p.strip())


def _to_float_list(s: str) -> tuple[float, ...]:
    return tuple(_to_float(p.strip()) for p in s.split(",") if p.strip())


_SCHEMA = {
    "image_dir": str,
    "out_dir": str,
    "block_size": _to_int,
    "subrate": _to_float,
    "phases": _to_int_list,
    "epochs_per_lr": _to_int,
    "lr_ladder": _to_float_list,
    "batch_size": _to_int,
    "patch_size": _to_int,
    "patches_per_image": _to_int,
    "holdout_fraction": _to_float,
    "seed": _to_int,
    "enhance1_depth": _to_int,
    "enhance1_width": _to_int,
    "mwcnn_levels": _to_int,
    "mwcnn_widths": _to_int_list,
    "mwcnn_convs_per_level": _to_int,
}


@dataclass
class TrainSetup:
    image_dir: str
    out_dir: str
    sampling: SamplingConfig
    net: NetConfig
    train: TrainConfig


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _SCHEMA[key](val)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    return values


def load_config(path, overrides: dict | None = None) -> TrainSetup:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = parse_config_text(path.read_text(), source=str(path))
    for key, val in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _SCHEMA[key](val) if isinstance(val, str) else val
    if "image_dir" not in values:
        raise ConfigError(f"{path}: required key 'image_dir' missing")

    try:
        sampling = SamplingConfig(
            block_size=values.get("block_size", 16),
            subrate=values.get("subrate", 0.1))
        net_kwargs = {}
        for src, dst in (("enhance1_depth", "enhance1_depth"),
                         ("enhance1_width", "enhance1_width"),
                         ("mwcnn_levels", "mwcnn_levels"),
                         ("mwcnn_widths", "mwcnn_widths"),
                         ("mwcnn_convs_per_level", "mwcnn_convs_per_level")):
            if src in values:
                net_kwargs[dst] = values[src]
        net = NetConfig(**net_kwargs)
        train_kwargs = {}
        for src, dst in (("phases", "phase_list"),
                         ("epochs_per_lr", "epochs_per_lr"),
                         ("lr_ladder", "lr_ladder"),
                         ("batch_size", "batch_size"),
                         ("seed", "seed"),
                         ("patch_size", "patch_size"),
                         ("patches_per_image", "patches_per_image"),
                         ("holdout_fraction", "holdout_fraction")):
            if src in values:
                train_kwargs[dst] = values[src]
        train = TrainConfig(**train_kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{path}: {exc}") from None

    return TrainSetup(image_dir=values["image_dir"],
                      out_dir=values.get("out_dir", "."),
                      sampling=sampling, net=net, train=train)
