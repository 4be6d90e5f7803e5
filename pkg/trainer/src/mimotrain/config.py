"""Training configuration and the key=value config-file format."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class TrainConfig:
    n_t: int = 2
    n_r: int = 8
    m: int = 16
    epochs: int = 20
    batches_per_epoch: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    snr_lo_db: float = 5.0
    snr_hi_db: float = 15.0
    mod_width: int = 128        # all three modulator hidden layers
    feat_size: int = 8
    hidden1: int = 128
    hidden2: int = 64
    readout1: int = 128
    readout2: int = 64
    iterations: int = 10
    gnn_rounds: int = 2
    damping: float = 0.7
    paper_scale: bool = False   # 500 epochs x 1000 batches
    float64: bool = False       # gradcheck mode
    out_prefix: str = "e2e"

    def __post_init__(self):
        if self.paper_scale:
            self.epochs = 500
            self.batches_per_epoch = 1000
        positive = (
            "n_t", "n_r", "m", "epochs", "batches_per_epoch", "batch_size",
            "learning_rate", "mod_width", "feat_size", "hidden1", "hidden2",
            "readout1", "readout2", "iterations", "gnn_rounds",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.snr_hi_db < self.snr_lo_db:
            raise ValueError("snr_hi_db must be >= snr_lo_db")


def parse_config_file(path) -> TrainConfig:
    """key=value lines; '#' starts a comment; unknown keys are errors."""
    values: dict = {}
    types = {f.name: f.type for f in fields(TrainConfig)}
    defaults = TrainConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            current = getattr(defaults, key)
            if isinstance(current, bool):
                values[key] = val.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                values[key] = int(val)
            elif isinstance(current, float):
                values[key] = float(val)
            else:
                values[key] = val
    return TrainConfig(**values)
