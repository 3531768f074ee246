from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigurationError

VARIANTS = ("full", "-SAL", "-UW", "-STG", "-ATL", "-GAT", "-CF")


@dataclass(frozen=True)
class HyperParams:
    """Model and optimisation settings; defaults follow the published setup
    where one is given (d=64, lr=1e-3 with 0.96 decay per epoch, lambda2=1e-2,
    dropout 0.5)."""

    d: int = 64
    layers: int = 2
    att_layers: int = 2
    n_periods: int = 3
    d_sal: int = 32
    lambda1: float = 1e-6
    lambda2: float = 1e-2
    lr: float = 1e-3
    lr_decay: float = 0.96
    dropout: float = 0.5
    batch_size: int = 256
    max_seq: int = 50
    n_pr: int = 1
    n_sal: int = 40
    epochs: int = 100
    seed: int = 0
    n_heads: int = 4
    slope: float = 0.1
    embed_std: float = 0.01
    layer_combine: str = "mean"
    ssl_sampling_scope: str = "batch"
    patience: int = 10
    variant: str = "full"

    def __post_init__(self):
        if self.d < 1 or self.d % self.n_heads:
            raise ConfigurationError(f"d={self.d} must be positive and divisible by n_heads={self.n_heads}")
        for name in ("layers", "att_layers", "n_periods", "d_sal", "batch_size", "max_seq", "n_pr"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.n_sal < 0 or self.epochs < 0:
            raise ConfigurationError("n_sal and epochs must be >= 0")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("loss weights must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if not 0.0 < self.slope < 1.0:
            raise ConfigurationError("LeakyReLU slope must lie in (0, 1)")
        if self.layer_combine not in ("mean", "concat_project"):
            raise ConfigurationError(f"unknown layer_combine {self.layer_combine!r}")
        if self.ssl_sampling_scope not in ("batch", "per_user"):
            raise ConfigurationError(f"unknown ssl_sampling_scope {self.ssl_sampling_scope!r}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    # ablation switches -----------------------------------------------------

    @property
    def effective_periods(self) -> int:
        return 1 if self.variant == "-STG" else self.n_periods

    @property
    def effective_lambda1(self) -> float:
        return 0.0 if self.variant == "-SAL" else self.lambda1

    @property
    def uniform_weight(self) -> bool:
        return self.variant == "-UW"

    @property
    def use_instance(self) -> bool:
        return self.variant != "-ATL"

    @property
    def interval_fuse(self) -> str:
        return "sum" if self.variant == "-GAT" else "gru_attention"

    @property
    def propagate(self) -> bool:
        return self.variant != "-CF"

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**data)
