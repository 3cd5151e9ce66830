"""Feature assembly: vocabulary, lineup tokens and the 11 numeric covariates."""
from __future__ import annotations

import bisect
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .ingest import MAX_LINEUP, Dataset, RawMatch

LINEUP_SLOTS = 2 * MAX_LINEUP
TARGET_SCALE = 50.0

COVARIATE_NAMES = (
    "day_of_week",
    "hour",
    "importance",
    "travel_distance_home",
    "travel_distance_away",
    "n_clubs_home",
    "n_clubs_away",
    "attack_home",
    "attack_away",
    "defense_home",
    "defense_away",
)

# Competition importance, national teams and clubs scored separately.
IMPORTANCE = {
    "national": {
        "Olympic Games": 10,
        "World championships": 9,
        "European championships": 8,
        "African cup": 7,
        "Eurocup": 7,
        "Asian cup": 6,
        "Qualifiers": 6,
        "Tournaments": 5,
        "Emerging nations": 5,
        "International Friendly Games": 4,
    },
    "clubs": {
        "EHF Champions League": 6,
        "EHF European League": 5,
        "EHF European Cup": 4,
        "Regular championships": 3,
        "National cups": 2,
        "Friendly games": 1,
    },
}


class UnknownCompetitionError(KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass
class PlayerVocabulary:
    name_to_id: dict = field(default_factory=dict)
    id_to_meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.name_to_id)

    def __len__(self):
        return self.size

    def __contains__(self, name):
        return name in self.name_to_id

    def token(self, name):
        return self.name_to_id.get(name, 0)

    def name(self, token):
        return self.id_to_meta[token][0]

    def meta(self, token):
        """(name, position, team) for a token id."""
        return self.id_to_meta[token]

    def add(self, name, position="", team=""):
        if name not in self.name_to_id:
            idx = len(self.name_to_id) + 1
            self.name_to_id[name] = idx
            self.id_to_meta[idx] = (name, position, team)
        return self.name_to_id[name]

    def to_dict(self):
        return {"players": [list(self.id_to_meta[i]) for i in range(1, self.size + 1)]}

    @classmethod
    def from_dict(cls, data):
        vocab = cls()
        for name, position, team in data["players"]:
            vocab.add(name, position, team)
        return vocab


def build_vocabulary(*datasets, roster=None):
    """Assign ids 1.. to player names in order of first appearance.

    Lineups are scanned match by match, home before away.  When a roster is
    given, its position and national team are stored as player metadata;
    otherwise the team the player first appeared for is used.
    """
    vocab = PlayerVocabulary()
    for data in datasets:
        for m in data:
            for team, lineup in ((m.home_team, m.home_lineup), (m.away_team, m.away_lineup)):
                for name in lineup:
                    if name in vocab:
                        continue
                    position, where = "", team
                    if roster is not None and name in roster:
                        entry = roster[name]
                        position = entry.get("position", "")
                        where = entry.get("national_team") or entry.get("club") or team
                    vocab.add(name, position, where)
    return vocab


def encode_lineup(vocab, home, away):
    if len(home) > MAX_LINEUP or len(away) > MAX_LINEUP:
        raise ValueError(f"lineups are limited to {MAX_LINEUP} players, got {len(home)} and {len(away)}")
    tokens = np.zeros(LINEUP_SLOTS, dtype=np.int64)
    for i, name in enumerate(home):
        tokens[i] = vocab.token(name)
    for i, name in enumerate(away):
        tokens[MAX_LINEUP + i] = vocab.token(name)
    return tokens


def importance_value(competition, category):
    table = IMPORTANCE.get(category)
    if table is None:
        raise ValueError(f"unknown category {category!r}")
    if competition in table:
        return table[competition]
    # "African cup / Eurocup" style labels are accepted as a whole too
    for part in competition.split("/"):
        if part.strip() in table:
            return table[part.strip()]
    raise UnknownCompetitionError(
        f"unknown {category} competition {competition!r}; known: {', '.join(sorted(table))}"
    )


def _check_coord(lat, lon):
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise ValueError(f"invalid coordinates ({lat}, {lon})")


def travel_distance(origin, destination):
    """Great-circle distance in km between two (lat, lon) points."""
    _check_coord(*origin)
    _check_coord(*destination)
    d = kernels.haversine_many([origin[0]], [origin[1]], [destination[0]], [destination[1]])
    return float(d[0])


def baseline_strengths(history: Dataset, team, window=10):
    """Mean goals scored and conceded over ``team``'s last ``window`` matches.

    Teams without history get the global per-team means of ``history``
    (0.0 if it holds no scored match).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    scored, conceded = [], []
    total, count = 0.0, 0
    for m in history:
        if not m.has_score:
            continue
        total += m.home_goals + m.away_goals
        count += 2
        if m.home_team == team:
            scored.append(m.home_goals)
            conceded.append(m.away_goals)
        elif m.away_team == team:
            scored.append(m.away_goals)
            conceded.append(m.home_goals)
    if not scored:
        g = total / count if count else 0.0
        return g, g
    scored, conceded = scored[-window:], conceded[-window:]
    return sum(scored) / len(scored), sum(conceded) / len(conceded)


class HistoryStrengths:
    """Strength provider backed by past results.

    Values supplied on the match (``attack_home`` etc.) win; otherwise the
    rolling means of :func:`baseline_strengths` are computed from matches
    strictly before the one being featurized.
    """

    def __init__(self, history: Optional[Dataset] = None, window=10):
        self.window = window
        self._team = defaultdict(list)  # team -> [(time, scored, conceded)]
        times, goals = [], []
        scored_matches = sorted((m for m in (history or ()) if m.has_score), key=lambda m: m.date_time)
        for m in scored_matches:
            self._team[m.home_team].append((m.date_time, m.home_goals, m.away_goals))
            self._team[m.away_team].append((m.date_time, m.away_goals, m.home_goals))
            times.append(m.date_time)
            goals.append(m.home_goals + m.away_goals)
        self._times = times
        self._team_times = {t: [r[0] for r in rows] for t, rows in self._team.items()}
        self._cum_goals = np.concatenate([[0.0], np.cumsum(goals, dtype=np.float64)])

    def team_strength(self, team, before):
        rows = self._team.get(team, [])
        hi = bisect.bisect_left(self._team_times.get(team, []), before)
        recent = rows[max(0, hi - self.window):hi]
        if recent:
            return (sum(r[1] for r in recent) / len(recent), sum(r[2] for r in recent) / len(recent))
        n = bisect.bisect_left(self._times, before)
        g = self._cum_goals[n] / (2 * n) if n else 0.0
        return float(g), float(g)

    def __call__(self, m: RawMatch):
        ah, dh = self.team_strength(m.home_team, m.date_time)
        aa, da = self.team_strength(m.away_team, m.date_time)
        return (
            ah if m.attack_home is None else m.attack_home,
            aa if m.attack_away is None else m.attack_away,
            dh if m.defense_home is None else m.defense_home,
            da if m.defense_away is None else m.defense_away,
        )


def load_roster(path):
    """Roster JSON: ``{player name: {position, club, national_team}}``."""
    with Path(path).open(encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("roster file must map player names to objects")
    return data


def n_clubs(lineup, category, roster=None):
    if category == "clubs" or not roster:
        return 1
    clubs = {roster[p]["club"] for p in lineup if p in roster and roster[p].get("club")}
    return max(1, len(clubs))


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    target_scale: float = TARGET_SCALE

    def standardize(self, covariates):
        return (np.asarray(covariates, dtype=np.float64) - self.mean) / self.std

    def destandardize(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "target_scale": self.target_scale}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64),
                   float(d["target_scale"]))


def fit_normalization(train, target_scale=TARGET_SCALE):
    """Per-covariate mean and population std; zero-variance columns get std 1."""
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("fit_normalization needs a non-empty (n, k) covariate matrix")
    if target_scale <= 0:
        raise ValueError("target_scale must be positive")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    return NormalizationStats(mean, std, float(target_scale))


@dataclass
class FeatureVector:
    covariates: np.ndarray  # 11 values, standardized when stats were supplied
    lineup: np.ndarray  # 32 int tokens


def covariates_for(m: RawMatch, strengths, roster=None):
    ah, aa, dh, da = strengths(m)
    return np.array([
        m.date_time.weekday(),
        m.date_time.hour,
        importance_value(m.competition, m.category),
        travel_distance(m.home_location, m.match_location),
        travel_distance(m.away_location, m.match_location),
        n_clubs(m.home_lineup, m.category, roster),
        n_clubs(m.away_lineup, m.category, roster),
        ah, aa, dh, da,
    ], dtype=np.float64)


def assemble_features(m: RawMatch, vocab, strengths, stats=None, roster=None):
    cov = covariates_for(m, strengths, roster)
    if stats is not None:
        cov = stats.standardize(cov)
    return FeatureVector(cov, encode_lineup(vocab, m.home_lineup, m.away_lineup))


@dataclass
class FeatureMatrix:
    """Stacked features and (scaled) targets for a batch of matches."""

    covariates: np.ndarray  # (n, 11)
    lineups: np.ndarray  # (n, 32)
    targets: Optional[np.ndarray] = None  # (n, 2), goals / target_scale
    match_ids: Sequence[str] = ()

    def __len__(self):
        return self.covariates.shape[0]

    def subset(self, idx):
        return FeatureMatrix(
            self.covariates[idx],
            self.lineups[idx],
            None if self.targets is None else self.targets[idx],
            [self.match_ids[i] for i in np.arange(len(self))[idx]] if len(self.match_ids) else (),
        )

    def row(self, i):
        return FeatureVector(self.covariates[i].copy(), self.lineups[i].copy())


def raw_covariates(dataset, strengths, roster=None):
    return np.array([covariates_for(m, strengths, roster) for m in dataset], dtype=np.float64).reshape(
        len(dataset), len(COVARIATE_NAMES)
    )


def build_matrix(dataset, vocab, strengths, stats, roster=None):
    """Featurize a whole dataset; targets are included when every match is scored."""
    cov = stats.standardize(raw_covariates(dataset, strengths, roster)) if len(dataset) else np.zeros((0, 11))
    lineups = np.array([encode_lineup(vocab, m.home_lineup, m.away_lineup) for m in dataset],
                       dtype=np.int64).reshape(len(dataset), LINEUP_SLOTS)
    targets = None
    if all(m.has_score for m in dataset):
        targets = np.array([[m.home_goals, m.away_goals] for m in dataset], dtype=np.float64).reshape(
            len(dataset), 2) / stats.target_scale
    return FeatureMatrix(cov, lineups, targets, [m.match_id for m in dataset])


def stack(features: Sequence[FeatureVector]):
    return FeatureMatrix(
        np.array([f.covariates for f in features], dtype=np.float64),
        np.array([f.lineup for f in features], dtype=np.int64),
    )
