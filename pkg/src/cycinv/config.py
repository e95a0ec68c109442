"""Plain-text run configuration: one `key = value` per line, `#` comments.

Unknown keys are errors (reported with their line number); every field has a
default, and parse -> serialize -> parse is a fixed point.
"""

from dataclasses import dataclass, fields


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass
class TrainConfig:
    lambda_g1: float = 1.0  # forward cycle: adversarial class-targeting
    lambda_g2: float = 10.0  # forward cycle: pixel reconstruction
    lambda_g3: float = 0.1  # forward cycle: KL to the unit-Gaussian prior
    lambda_d1: float = 1.0  # discriminator: real-image class term
    lambda_d2: float = 1.0  # discriminator: fake-class term
    lambda_bw1: float = 1.0  # backward cycle: latent agreement (L1)
    lambda_bw2: float = 10.0  # backward cycle: reconstruction through the swap
    enable_backward_cycle: bool = True
    enable_z_cycle: bool = True
    enable_x_cycle: bool = True
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 64
    epochs: int = 30
    latent_dim: int = 16
    side: int = 32
    n_classes: int = 4
    train_fraction: float = 0.8
    seed_init: int = 11
    seed_data: int = 12
    seed_codes: int = 13
    seed_reparam: int = 14
    data_path: str = ""

    def validate(self):
        for f in fields(self):
            if f.name.startswith("lambda_") and getattr(self, f.name) < 0:
                raise ConfigError(f"{f.name} must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if min(self.latent_dim, self.side, self.n_classes) < 1:
            raise ConfigError("latent_dim, side, and n_classes must be positive")
        return self


_FIELDS = {f.name: f.type for f in fields(TrainConfig)}


def _parse_value(key, raw, line):
    kind = _FIELDS[key]
    if kind is bool:
        if raw not in ("true", "false"):
            raise ConfigError(f"{key} expects true/false, got {raw!r}", line)
        return raw == "true"
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects {kind.__name__}, got {raw!r}", line) from None
    return raw


def parse_config(text):
    cfg = TrainConfig()
    seen = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected `key = value`, got {raw_line.strip()!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        seen.add(key)
        setattr(cfg, key, _parse_value(key, raw, lineno))
    cfg.validate()
    return cfg


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(cfg):
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())
