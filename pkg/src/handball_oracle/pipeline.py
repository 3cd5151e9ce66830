"""Glue from match datasets to trained models, shared by the CLI and tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

from .features import (
    TARGET_SCALE,
    FeatureMatrix,
    HistoryStrengths,
    build_matrix,
    build_vocabulary,
    fit_normalization,
    raw_covariates,
)
from .ingest import Dataset, filter_nonempty_lineups, impute_lineups, split_train_validation
from .model import ModelConfig, ScoreModel, TrainHistory, init_model, train, transfer_init

log = logging.getLogger(__name__)


@dataclass
class Prepared:
    vocab: object
    stats: object
    strengths: HistoryStrengths
    train: FeatureMatrix
    val: FeatureMatrix
    train_set: Dataset
    val_set: Dataset


def prepare(dataset: Dataset, roster=None, ratio=0.8, window=10, target_scale=TARGET_SCALE) -> Prepared:
    """Impute, filter (clubs only), split chronologically and featurize.

    The vocabulary covers training and validation lineups; normalization is
    fitted on the training split only.
    """
    data = impute_lineups(dataset)
    if data.category == "clubs":
        data = filter_nonempty_lineups(data)
    train_set, val_set = split_train_validation(data, ratio)
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError(f"not enough matches to split ({len(data)} after filtering)")
    strengths = HistoryStrengths(data, window)
    vocab = build_vocabulary(data, roster=roster)
    stats = fit_normalization(raw_covariates(train_set, strengths, roster), target_scale)
    return Prepared(
        vocab,
        stats,
        strengths,
        build_matrix(train_set, vocab, strengths, stats, roster),
        build_matrix(val_set, vocab, strengths, stats, roster),
        train_set,
        val_set,
    )


def fit(prep: Prepared, config: Optional[ModelConfig] = None, transfer_from: Optional[ScoreModel] = None, **overrides):
    """Initialize (optionally from a clubs model's embeddings) and train."""
    if config is None:
        config = ModelConfig(vocab_size=prep.vocab.size, **overrides)
    else:
        config = replace(config, vocab_size=prep.vocab.size, **overrides)
    model = init_model(config, prep.stats, prep.vocab)
    if transfer_from is not None:
        if transfer_from.vocab is None:
            raise ValueError("transfer source model carries no vocabulary")
        model = transfer_init(model, transfer_from, transfer_from.vocab, prep.vocab)
    trained, history = train(model, prep.train, prep.val, config)
    log.info("trained %d epochs, best epoch %d, val loss %.5f", history.epochs, history.best_epoch,
             history.validation_loss[history.best_epoch - 1])
    return trained, history
