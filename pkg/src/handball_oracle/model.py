"""Embedding MLP score model.

The 32 lineup tokens are looked up in an embedding matrix, flattened
(32 * m values) and concatenated with the 11 standardized covariates.  That
vector goes through the hidden layers (softplus by default, ReLU optional)
and a linear layer with two outputs: home and away goals divided by the
target scale.  Softplus keeps the output smooth along straight-line paths,
which the Riemann-sum attributions in ``explain`` rely on to converge.

Row 0 of the embedding is the null token.  It is pinned to zero and never
updated, so empty slots contribute nothing to the first layer.
"""
from __future__ import annotations

import copy
import json
import logging
import math
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .features import FeatureMatrix, FeatureVector, NormalizationStats, PlayerVocabulary

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ACTIVATIONS = ("softplus", "relu")


class ModelFormatError(ValueError):
    """Model file is truncated, corrupt or inconsistent."""


class ModelVersionError(ModelFormatError):
    """Model file was written with an unsupported format version."""


@dataclass
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 25
    lineup_len: int = 32
    covariate_count: int = 11
    hidden_sizes: Tuple[int, ...] = (256, 128, 64)
    seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: Optional[int] = 1
    activation: str = "softplus"

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not self.hidden_sizes:
            raise ValueError("hidden_sizes must not be empty")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.lineup_len < 2 or self.lineup_len % 2:
            raise ValueError("lineup_len must be a positive even number")
        if self.vocab_size < 0:
            raise ValueError("vocab_size must be >= 0")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("learning_rate, batch_size and max_epochs must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.patience is not None and self.patience < 0:
            raise ValueError("patience must be >= 0 or None")

    @property
    def input_width(self):
        return self.lineup_len * self.embedding_dim + self.covariate_count


@dataclass
class ScoreModel:
    embedding: np.ndarray  # (vocab_size + 1, m)
    layers: List[Tuple[np.ndarray, np.ndarray]]  # (W: in x out, b: out)
    stats: Optional[NormalizationStats]
    config: ModelConfig
    vocab: Optional[PlayerVocabulary] = None

    def copy(self):
        return ScoreModel(
            self.embedding.copy(),
            [(w.copy(), b.copy()) for w, b in self.layers],
            copy.deepcopy(self.stats),
            copy.deepcopy(self.config),
            copy.deepcopy(self.vocab),
        )

    @property
    def target_scale(self):
        return self.stats.target_scale if self.stats is not None else 1.0

    def parameters(self):
        """Trainable arrays in a fixed order: embedding, then W, b per layer."""
        out = [self.embedding]
        for w, b in self.layers:
            out += [w, b]
        return out

    def n_parameters(self):
        return sum(p.size for p in self.parameters())


@dataclass
class Gradients:
    embedding: np.ndarray
    layers: List[Tuple[np.ndarray, np.ndarray]]
    loss: float

    def arrays(self):
        out = [self.embedding]
        for dw, db in self.layers:
            out += [dw, db]
        return out


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    validation_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stopped_early: bool = False

    @property
    def epochs(self):
        return len(self.train_loss)

    def to_csv(self, path):
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,test_loss\n")
            for i, (tr, va) in enumerate(zip(self.train_loss, self.validation_loss), start=1):
                fh.write(f"{i},{tr!r},{va!r}\n")


@dataclass
class Metrics:
    rmse_home: float
    mape_home: float
    rmse_away: float
    mape_away: float
    n: int = 0
    mape_skipped_home: int = 0
    mape_skipped_away: int = 0


def init_model(config: ModelConfig, stats=None, vocab=None) -> ScoreModel:
    """Seeded initialization.

    Embedding rows are drawn from N(0, 1) first, then each dense layer's
    weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """
    rng = np.random.default_rng(config.seed)
    embedding = rng.standard_normal((config.vocab_size + 1, config.embedding_dim))
    embedding[0] = 0.0
    widths = [config.input_width, *config.hidden_sizes, 2]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append((w, b))
    return ScoreModel(embedding, layers, stats, config, vocab)


def _check_widths(model, covariates, lineups):
    cfg = model.config
    if lineups.ndim != 2 or lineups.shape[1] != cfg.lineup_len:
        raise ValueError(f"expected lineups of width {cfg.lineup_len}, got shape {lineups.shape}")
    if covariates.ndim != 2 or covariates.shape[1] != cfg.covariate_count:
        raise ValueError(f"expected {cfg.covariate_count} covariates, got shape {covariates.shape}")
    if covariates.shape[0] != lineups.shape[0]:
        raise ValueError("covariate and lineup batch sizes differ")


def dense_input(model, covariates, lineups):
    """Embed the lineups and build the (n, 32*m + 11) first-layer input."""
    covariates = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    lineups = np.atleast_2d(np.asarray(lineups, dtype=np.int64))
    _check_widths(model, covariates, lineups)
    emb = kernels.embed_gather(np.ascontiguousarray(model.embedding), lineups)
    return np.concatenate([emb, covariates], axis=1)


def _activate(z, activation):
    if activation == "softplus":
        return np.logaddexp(0.0, z)
    return np.maximum(z, 0.0)


def _activation_grad(z, activation):
    if activation == "softplus":
        return 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic sigmoid, overflow-free
    return (z > 0.0).astype(np.float64)


def forward_dense(layers, x, activation="softplus"):
    """Run the dense stack.

    Returns the output and a cache of (layer inputs, pre-activations) for
    :func:`backward_dense`.
    """
    inputs, pre = [], []
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = _activate(z, activation) if i < last else z
    return h, (inputs, pre, activation)


def backward_dense(layers, cache, d_out):
    """Reverse pass through the dense stack.

    Returns the per-layer (dW, db) and the gradient with respect to the
    dense input.
    """
    inputs, pre, activation = cache
    grads = [None] * len(layers)
    delta = d_out
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
        delta = delta @ w.T
        if i > 0:
            delta = delta * _activation_grad(pre[i - 1], activation)
    return grads, delta


def forward_batch(model, covariates, lineups):
    out, _ = forward_dense(model.layers, dense_input(model, covariates, lineups), model.config.activation)
    return out


def forward(model, f: FeatureVector):
    out = forward_batch(model, f.covariates[None, :], f.lineup[None, :])
    return float(out[0, 0]), float(out[0, 1])


def loss(pred, target):
    """Mean over the batch of the summed home and away squared errors."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


def gradients(model, batch: FeatureMatrix) -> Gradients:
    """Exact gradients of the mean batch loss.

    The null-token row always gets a zero gradient; rows of players not in
    the batch are zero as well.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("gradients need a non-empty batch")
    x = dense_input(model, batch.covariates, batch.lineups)
    pred, cache = forward_dense(model.layers, x, model.config.activation)
    diff = pred - batch.targets
    d_out = (2.0 / n) * diff
    layer_grads, d_x = backward_dense(model.layers, cache, d_out)
    width = model.config.lineup_len * model.config.embedding_dim
    d_emb = kernels.embed_scatter_add(
        np.ascontiguousarray(d_x[:, :width]), batch.lineups, model.embedding.shape[0]
    )
    d_emb[0] = 0.0
    return Gradients(d_emb, layer_grads, float(np.mean(np.sum(diff**2, axis=1))))


def dataset_loss(model, data: FeatureMatrix, chunk=4096):
    total = 0.0
    for start in range(0, len(data), chunk):
        sl = slice(start, start + chunk)
        pred = forward_batch(model, data.covariates[sl], data.lineups[sl])
        total += float(np.sum((pred - data.targets[sl]) ** 2))
    return total / len(data)


class Adam:
    def __init__(self, params, lr):
        self.params = params
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, grads):
        self.step_count += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            kernels.adam_update(p, g, m, v, self.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, self.step_count)


def train(model: ScoreModel, train_data: FeatureMatrix, val_data: FeatureMatrix, config=None):
    """Mini-batch Adam with early stopping on the validation loss.

    Training stops once the validation loss has failed to improve for
    ``patience`` consecutive epochs (``patience=None`` disables early
    stopping, ``patience=0`` trains a single epoch).  The returned model
    carries the weights of the best epoch; the input model is not modified.
    """
    cfg = config or model.config
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if train_data.targets is None or val_data.targets is None:
        raise ValueError("training and validation sets need targets")
    model = model.copy()
    params = model.parameters()
    opt = Adam(params, cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 1])
    history = TrainHistory()
    best_loss = math.inf
    best_params = [p.copy() for p in params]
    wait = 0
    n = len(train_data)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = FeatureMatrix(train_data.covariates[idx], train_data.lineups[idx], train_data.targets[idx])
            opt.step(gradients(model, batch).arrays())
            model.embedding[0] = 0.0
        tr = dataset_loss(model, train_data)
        va = dataset_loss(model, val_data)
        history.train_loss.append(tr)
        history.validation_loss.append(va)
        log.debug("epoch %d train %.6f val %.6f", epoch, tr, va)
        if va < best_loss:
            best_loss, history.best_epoch, wait = va, epoch, 0
            best_params = [p.copy() for p in params]
        else:
            wait += 1
        if cfg.patience is not None and wait >= cfg.patience and epoch < cfg.max_epochs:
            history.stopped_early = True
            break
    for p, best in zip(params, best_params):
        p[...] = best
    return model, history


def transfer_init(national_model: ScoreModel, clubs_model: ScoreModel, clubs_vocab, national_vocab):
    """Copy clubs embedding rows into the national model for shared players.

    Players are matched by exact full name.  Dense layers are left as they
    are because the two models do not share their covariate sets.
    """
    m_nat = national_model.config.embedding_dim
    m_club = clubs_model.config.embedding_dim
    if m_nat != m_club:
        raise ValueError(f"embedding dimensions differ: national {m_nat}, clubs {m_club}")
    out = national_model.copy()
    for name, nat_id in national_vocab.name_to_id.items():
        club_id = clubs_vocab.name_to_id.get(name)
        if club_id is not None:
            out.embedding[nat_id] = clubs_model.embedding[club_id]
    return out


def round_half_up(x):
    return int(math.floor(x + 0.5))


def descale(model, raw):
    return np.asarray(raw, dtype=np.float64) * model.target_scale


def goals_from_raw(raw_goals):
    """Clamp de-scaled predictions at zero and round half up."""
    return tuple(round_half_up(max(0.0, float(g))) for g in raw_goals)


def predict_score(model, f: FeatureVector):
    """Integer (home, away) goals plus the unrounded de-scaled values."""
    raw = descale(model, forward(model, f))
    home, away = goals_from_raw(raw)
    return home, away, (float(raw[0]), float(raw[1]))


def evaluate(model, test: FeatureMatrix) -> Metrics:
    """RMSE and MAPE in goal units on unrounded predictions.

    Matches whose actual score is 0 are left out of that side's MAPE and
    counted in ``mape_skipped_*``.
    """
    if len(test) == 0:
        raise ValueError("evaluate needs a non-empty test set")
    if test.targets is None:
        raise ValueError("test set has no final scores")
    pred = descale(model, forward_batch(model, test.covariates, test.lineups))
    actual = descale(model, test.targets)
    return metrics_from(pred, actual)


def metrics_from(pred, actual):
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    err = pred - actual
    rmse = np.sqrt(np.mean(err**2, axis=0))
    mape, skipped = [], []
    for k in range(2):
        ok = actual[:, k] != 0
        skipped.append(int(np.sum(~ok)))
        mape.append(float(np.mean(np.abs(err[ok, k]) / actual[ok, k])) if ok.any() else float("nan"))
    return Metrics(float(rmse[0]), mape[0], float(rmse[1]), mape[1], len(pred), skipped[0], skipped[1])


def save_model(model: ScoreModel, path):
    """Write an ``.npz`` archive: a JSON ``meta`` entry plus raw float64 arrays.

    ``meta`` holds ``format_version``, the config, normalization stats and
    vocabulary.  Arrays are ``embedding``, ``W0, b0, W1, b1, ...``.
    """
    meta = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "stats": model.stats.to_dict() if model.stats is not None else None,
        "vocab": model.vocab.to_dict() if model.vocab is not None else None,
        "n_layers": len(model.layers),
    }
    arrays = {"meta": np.array(json.dumps(meta)), "embedding": model.embedding}
    for i, (w, b) in enumerate(model.layers):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> ScoreModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as npz:
            meta = json.loads(str(npz["meta"]))
            version = meta.get("format_version")
            if version != FORMAT_VERSION:
                raise ModelVersionError(
                    f"model format version {version!r} is not supported (expected {FORMAT_VERSION})"
                )
            embedding = np.array(npz["embedding"], dtype=np.float64)
            layers = [(np.array(npz[f"W{i}"]), np.array(npz[f"b{i}"])) for i in range(meta["n_layers"])]
    except ModelVersionError:
        raise
    except (zipfile.BadZipFile, ValueError, KeyError, OSError, EOFError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
    config = ModelConfig(**meta["config"])
    stats = NormalizationStats.from_dict(meta["stats"]) if meta["stats"] else None
    vocab = PlayerVocabulary.from_dict(meta["vocab"]) if meta["vocab"] else None
    model = ScoreModel(embedding, layers, stats, config, vocab)
    if embedding.shape != (config.vocab_size + 1, config.embedding_dim) or layers[0][0].shape[0] != config.input_width:
        raise ModelFormatError(f"model file {path} has arrays inconsistent with its config")
    return model
