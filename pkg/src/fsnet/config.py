"""Training configuration with the reference defaults baked in."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    Defaults: 10 selected features, embedding size 10, reconstruction weight
    1, learning rate 1e-3, 4000 epochs, temperature annealed from 10 to 0.01,
    dropout 0.2, leaky slope 0.2, RMSprop(0.9, 1e-8), no biases.
    """

    n_select: int = 10
    embed_size: int = 10
    recon_weight: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 4000
    tau_start: float = 10.0
    tau_end: float = 0.01
    dropout: float = 0.2
    seed: int = 0
    mode: str = "predictor"
    encoder: tuple[int, ...] = (64, 32, 16)
    decoder: tuple[int, ...] = (32, 64)
    leaky_slope: float = 0.2
    use_bias: bool = False
    rms_decay: float = 0.9
    rms_eps: float = 1e-8

    def __post_init__(self):
        self.encoder = tuple(int(w) for w in self.encoder)
        self.decoder = tuple(int(w) for w in self.decoder)
        self.validate()

    def validate(self) -> None:
        if self.n_select < 1:
            raise ValueError(f"n_select must be >= 1, got {self.n_select}")
        if self.embed_size < 1:
            raise ValueError(f"embed_size must be >= 1, got {self.embed_size}")
        if self.recon_weight < 0.0:
            raise ValueError(f"recon_weight must be >= 0, got {self.recon_weight}")
        # zero is allowed so a run can be frozen at initialization
        if self.learning_rate < 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.tau_start > self.tau_end > 0.0:
            raise ValueError(
                f"need tau_start > tau_end > 0, got {self.tau_start}, {self.tau_end}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.mode not in ("predictor", "dense"):
            raise ValueError(f"mode must be 'predictor' or 'dense', got {self.mode!r}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        if not 0.0 <= self.rms_decay < 1.0:
            raise ValueError(f"rms_decay must lie in [0, 1), got {self.rms_decay}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder"] = list(self.encoder)
        d["decoder"] = list(self.decoder)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)
