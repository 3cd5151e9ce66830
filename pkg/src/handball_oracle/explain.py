"""Integrated Gradients attributions for the score model.

Lineup tokens are discrete, so the path is taken through the embedded
input: each slot moves from the baseline token's embedding row to the actual
token's row, and the slot's attribution is the sum over its embedding
coordinates.  Covariates are interpolated directly in standardized units.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .features import COVARIATE_NAMES, FeatureVector
from .ingest import MAX_LINEUP
from .model import backward_dense, dense_input, forward_dense

TEAMS = ("home", "away")


@dataclass
class RawAttribution:
    lineup: np.ndarray  # (lineup_len,) one value per slot
    covariates: np.ndarray  # (covariate_count,)
    input_output: float
    baseline_output: float
    target: str
    steps: int
    tokens: np.ndarray

    @property
    def total(self):
        return float(self.lineup.sum() + self.covariates.sum())

    @property
    def residual(self):
        return abs(self.total - (self.input_output - self.baseline_output))


def default_baseline(stats=None, lineup_len=32, covariate_count=11):
    """Null lineup and covariates at their training means (zero once standardized)."""
    return FeatureVector(np.zeros(covariate_count, dtype=np.float64), np.zeros(lineup_len, dtype=np.int64))


def _output_index(target):
    if target not in TEAMS:
        raise ValueError(f"target must be 'home' or 'away', got {target!r}")
    return TEAMS.index(target)


def integrated_gradients(model, f: FeatureVector, target="home", steps=200, baseline=None, chunk=512):
    """Midpoint Riemann approximation of the IG path integral for one output."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cfg = model.config
    if baseline is None:
        baseline = default_baseline(model.stats, cfg.lineup_len, cfg.covariate_count)
    if (np.shape(f.lineup) != np.shape(baseline.lineup)
            or np.shape(f.covariates) != np.shape(baseline.covariates)):
        raise ValueError("input and baseline shapes differ")
    k = _output_index(target)
    x = dense_input(model, f.covariates, f.lineup)[0]
    x0 = dense_input(model, baseline.covariates, baseline.lineup)[0]
    delta = x - x0
    grad_sum = np.zeros_like(x)
    for start in range(0, steps, chunk):
        alphas = (np.arange(start, min(steps, start + chunk)) + 0.5) / steps
        path = x0[None, :] + alphas[:, None] * delta[None, :]
        out, cache = forward_dense(model.layers, path, cfg.activation)
        d_out = np.zeros_like(out)
        d_out[:, k] = 1.0
        _, d_in = backward_dense(model.layers, cache, d_out)
        grad_sum += d_in.sum(axis=0)
    attr = delta * (grad_sum / steps)
    width = cfg.lineup_len * cfg.embedding_dim
    ends, _ = forward_dense(model.layers, np.stack([x, x0]), cfg.activation)
    return RawAttribution(
        lineup=attr[:width].reshape(cfg.lineup_len, cfg.embedding_dim).sum(axis=1),
        covariates=attr[width:].copy(),
        input_output=float(ends[0, k]),
        baseline_output=float(ends[1, k]),
        target=target,
        steps=steps,
        tokens=np.asarray(f.lineup, dtype=np.int64).copy(),
    )


@dataclass
class AttributionEntry:
    feature_name: str
    attribution: float
    kind: str  # "player", "empty" or "covariate"
    index: int  # slot index (0..31) or 32 + covariate index
    position: str = ""
    team: str = ""

    @property
    def label(self):
        if self.kind != "player":
            return self.feature_name
        meta = ", ".join(p for p in (self.position, self.team) if p)
        return f"{self.feature_name} ({meta})" if meta else self.feature_name


@dataclass
class AttributionReport:
    match_id: str
    team_explained: str
    entries: List[AttributionEntry]
    baseline_output: float
    input_output: float
    steps: int = 0

    @property
    def residual(self):
        return abs(sum(e.attribution for e in self.entries) - (self.input_output - self.baseline_output))

    def check_completeness(self, tol=1e-3):
        return self.residual < tol * max(1.0, abs(self.input_output - self.baseline_output))

    def to_dict(self):
        d = asdict(self)
        d["residual"] = self.residual
        return d


def build_report(raw: RawAttribution, vocab, roster=None, match=None, team=None):
    """Name every slot and covariate and sort by attribution, highest first.

    Ties keep slot order.  Player metadata comes from the roster when the
    player is listed there, else from the vocabulary.
    """
    n_slots = len(raw.lineup)
    if n_slots + len(raw.covariates) != 2 * MAX_LINEUP + len(COVARIATE_NAMES):
        raise ValueError(f"expected 43 attributions, got {n_slots + len(raw.covariates)}")
    entries = []
    for slot, (tok, value) in enumerate(zip(raw.tokens, raw.lineup)):
        tok = int(tok)
        if tok == 0:
            entries.append(AttributionEntry(f"empty slot {slot + 1}", float(value), "empty", slot))
            continue
        if vocab is None or tok not in vocab.id_to_meta:
            raise KeyError(f"token {tok} in slot {slot + 1} is not in the vocabulary")
        name, position, where = vocab.meta(tok)
        if roster and name in roster:
            position = roster[name].get("position", position)
            where = roster[name].get("national_team") or roster[name].get("club") or where
        entries.append(AttributionEntry(name, float(value), "player", slot, position, where))
    for i, (name, value) in enumerate(zip(COVARIATE_NAMES, raw.covariates)):
        entries.append(AttributionEntry(name, float(value), "covariate", n_slots + i))
    entries = sorted(entries, key=lambda e: -e.attribution)
    if team is None:
        team = raw.target
    return AttributionReport(
        match_id=match.match_id if match is not None else "",
        team_explained=team,
        entries=entries,
        baseline_output=raw.baseline_output,
        input_output=raw.input_output,
        steps=raw.steps,
    )


def export_attributions(report: AttributionReport, path):
    """CSV with header ``x,y``: attribution value, feature name."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y"])
        for e in report.entries:
            writer.writerow([repr(e.attribution), e.feature_name])


def read_attributions(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "y"]:
            raise ValueError(f"unexpected header {header}")
        return [(float(x), y) for x, y in reader]


def export_report_json(report: AttributionReport, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, ensure_ascii=False)
