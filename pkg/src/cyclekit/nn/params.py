"""Model hyperparameters and parameter initialisation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

FEATURES = ("br-lstm", "lstm", "bow")
ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class ModelConfig:
    num_relations: int
    k: int = 20
    m: int = 2
    d_e: int = 20
    d_h: int = 10
    lstm_layers: int = 2
    gcn_dims: tuple = (20, 20)
    mlp_hidden: int = 20
    dropout: float = 0.2
    gcn_activation: str = "relu"
    feature: str = "br-lstm"
    use_gcn: bool = True

    def __post_init__(self):
        if self.num_relations < 1:
            raise ValueError("num_relations must be >= 1")
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.feature not in FEATURES:
            raise ValueError(f"feature must be one of {FEATURES}")
        if self.gcn_activation not in ACTIVATIONS:
            raise ValueError(f"gcn_activation must be one of {ACTIVATIONS}")
        object.__setattr__(self, "gcn_dims", tuple(int(d) for d in self.gcn_dims))

    @property
    def feature_dim(self) -> int:
        return self.d_e if self.feature == "bow" else 2 * self.d_h

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Fresh float64 parameters; same seed, same values.

    Recurrent and affine layers use ``U(-1/sqrt(fan), 1/sqrt(fan))``, the
    graph convolution weights Glorot-uniform, embeddings ``N(0, 1)``. The
    basis logits start equal.
    """
    rng = np.random.default_rng(seed)
    c = config
    p: dict[str, np.ndarray] = {}
    p["relation_embedding"] = rng.standard_normal((2 * c.num_relations, c.d_e))
    if c.feature != "bow":
        bound = 1.0 / np.sqrt(c.d_h)
        d_in = c.d_e
        for layer in range(c.lstm_layers):
            p[f"lstm.l{layer}.W"] = _uniform(rng, bound, (d_in, 4 * c.d_h))
            p[f"lstm.l{layer}.U"] = _uniform(rng, bound, (c.d_h, 4 * c.d_h))
            p[f"lstm.l{layer}.b"] = _uniform(rng, bound, (4 * c.d_h,))
            d_in = c.d_h
    d = c.feature_dim
    if c.use_gcn:
        for i, d_out in enumerate(c.gcn_dims):
            p[f"gcn.W{i}"] = _uniform(rng, np.sqrt(6.0 / (d + d_out)), (d, d_out))
            d = d_out
    p["mlp.W0"] = _uniform(rng, 1.0 / np.sqrt(d), (d, c.mlp_hidden))
    p["mlp.b0"] = _uniform(rng, 1.0 / np.sqrt(d), (c.mlp_hidden,))
    p["mlp.W1"] = _uniform(rng, 1.0 / np.sqrt(c.mlp_hidden), (c.mlp_hidden, 1))
    p["mlp.b1"] = _uniform(rng, 1.0 / np.sqrt(c.mlp_hidden), (1,))
    p["basis_logits"] = np.zeros(c.k)
    return p


def zeros_like(params: dict) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def first_nonfinite(tensors: dict) -> str | None:
    """Name of the first tensor (in insertion order) holding NaN or Inf."""
    for name, t in tensors.items():
        if not np.all(np.isfinite(t)):
            return name
    return None
