"""Match data loading, lineup imputation and dataset splitting.

Match files are line-delimited JSON, one match per line, with the field
names of :class:`RawMatch`.  A CSV adapter accepts the same columns with
lineups joined by ``|`` and locations split into ``*_lat`` / ``*_lon``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import httpx

log = logging.getLogger(__name__)

MAX_LINEUP = 16
CATEGORIES = ("clubs", "national")
GENDERS = ("men", "women")
STRENGTH_FIELDS = ("attack_home", "attack_away", "defense_home", "defense_away")


class SchemaError(ValueError):
    """A match record does not conform to the file schema."""

    def __init__(self, message, row=None, field_name=None):
        self.row = row
        self.field_name = field_name
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class RawMatch:
    match_id: str
    date_time: datetime
    competition: str
    home_team: str
    away_team: str
    home_location: tuple
    away_location: tuple
    match_location: tuple
    home_lineup: tuple = ()
    away_lineup: tuple = ()
    home_goals: Optional[int] = None
    away_goals: Optional[int] = None
    category: str = "national"
    gender: str = "men"
    season: str = ""
    # optional externally estimated strengths; None means "use the fallback"
    attack_home: Optional[float] = None
    attack_away: Optional[float] = None
    defense_home: Optional[float] = None
    defense_away: Optional[float] = None
    # provenance only, ignored by the model
    home_lineup_imputed: bool = False
    away_lineup_imputed: bool = False

    @property
    def has_score(self):
        return self.home_goals is not None and self.away_goals is not None

    def to_record(self):
        rec = {
            "match_id": self.match_id,
            "date_time": self.date_time.isoformat(timespec="minutes"),
            "competition": self.competition,
            "home_team": self.home_team,
            "away_team": self.away_team,
            "home_location": list(self.home_location),
            "away_location": list(self.away_location),
            "match_location": list(self.match_location),
            "home_lineup": list(self.home_lineup),
            "away_lineup": list(self.away_lineup),
            "home_goals": self.home_goals,
            "away_goals": self.away_goals,
            "category": self.category,
            "gender": self.gender,
            "season": self.season,
        }
        for name in STRENGTH_FIELDS:
            value = getattr(self, name)
            if value is not None:
                rec[name] = value
        return rec


@dataclass(frozen=True)
class Dataset:
    matches: tuple = ()
    category: Optional[str] = None
    gender: Optional[str] = None

    def __len__(self):
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)

    def __getitem__(self, idx):
        return self.matches[idx]

    def with_matches(self, matches):
        return replace(self, matches=tuple(matches))


def _parse_location(value, row, name):
    if isinstance(value, dict):
        value = (value.get("lat"), value.get("lon"))
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError("expected [lat, lon]", row, name)
    try:
        lat, lon = float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise SchemaError("coordinates must be numbers", row, name) from None
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0) or math.isnan(lat + lon):
        raise SchemaError(f"coordinates out of range: ({lat}, {lon})", row, name)
    return (lat, lon)


def _parse_lineup(value, row, name):
    if value is None:
        return ()
    if not isinstance(value, (list, tuple)) or not all(isinstance(p, str) for p in value):
        raise SchemaError("expected a list of player names", row, name)
    if len(value) > MAX_LINEUP:
        raise SchemaError(f"lineup has {len(value)} players, at most {MAX_LINEUP} allowed", row, name)
    return tuple(p.strip() for p in value if p.strip())


def _parse_goals(value, row, name):
    if value is None or value == "":
        return None
    try:
        goals = int(value)
    except (TypeError, ValueError):
        raise SchemaError("goals must be an integer", row, name) from None
    if goals != float(value) or goals < 0:
        raise SchemaError("goals must be a nonnegative integer", row, name)
    return goals


def _parse_optional_float(value, row, name):
    if value is None or value == "":
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError("expected a number", row, name) from None


def parse_match(rec, row=None):
    """Validate one decoded record and build a :class:`RawMatch`."""
    if not isinstance(rec, dict):
        raise SchemaError("record must be a JSON object", row)
    for name in ("match_id", "date_time", "competition", "home_team", "away_team",
                 "home_location", "away_location", "match_location"):
        if rec.get(name) in (None, ""):
            raise SchemaError("missing required field", row, name)
    try:
        when = datetime.fromisoformat(str(rec["date_time"]))
    except ValueError:
        raise SchemaError(f"unparseable timestamp {rec['date_time']!r}", row, "date_time") from None
    home_goals = _parse_goals(rec.get("home_goals"), row, "home_goals")
    away_goals = _parse_goals(rec.get("away_goals"), row, "away_goals")
    if (home_goals is None) != (away_goals is None):
        missing = "away_goals" if away_goals is None else "home_goals"
        raise SchemaError("goals must be given for both teams or neither", row, missing)
    category = rec.get("category", "national")
    if category not in CATEGORIES:
        raise SchemaError(f"category must be one of {CATEGORIES}", row, "category")
    gender = rec.get("gender", "men")
    if gender not in GENDERS:
        raise SchemaError(f"gender must be one of {GENDERS}", row, "gender")
    return RawMatch(
        match_id=str(rec["match_id"]),
        date_time=when,
        competition=str(rec["competition"]),
        home_team=str(rec["home_team"]),
        away_team=str(rec["away_team"]),
        home_location=_parse_location(rec["home_location"], row, "home_location"),
        away_location=_parse_location(rec["away_location"], row, "away_location"),
        match_location=_parse_location(rec["match_location"], row, "match_location"),
        home_lineup=_parse_lineup(rec.get("home_lineup"), row, "home_lineup"),
        away_lineup=_parse_lineup(rec.get("away_lineup"), row, "away_lineup"),
        home_goals=home_goals,
        away_goals=away_goals,
        category=category,
        gender=gender,
        season=str(rec.get("season", "") or ""),
        **{name: _parse_optional_float(rec.get(name), row, name) for name in STRENGTH_FIELDS},
    )


def _dataset_from(matches, category=None, gender=None):
    matches = sorted(matches, key=lambda m: m.date_time)
    if matches:
        cats = {m.category for m in matches}
        gens = {m.gender for m in matches}
        if len(cats) > 1 or len(gens) > 1:
            raise SchemaError(f"mixed category/gender in one dataset: {sorted(cats)} {sorted(gens)}")
        category = category or cats.pop()
        gender = gender or gens.pop()
    return Dataset(tuple(matches), category, gender)


def _csv_record(row):
    rec = dict(row)
    for side in ("home", "away", "match"):
        lat, lon = rec.pop(f"{side}_lat", None), rec.pop(f"{side}_lon", None)
        if lat not in (None, "") and lon not in (None, ""):
            rec[f"{side}_location"] = [lat, lon]
    for side in ("home_lineup", "away_lineup"):
        raw = rec.get(side) or ""
        rec[side] = [p for p in raw.split("|") if p.strip()]
    return rec


def load_matches(source, category=None, gender=None):
    """Load a :class:`Dataset` from a file path or a :class:`MatchClient`.

    ``.csv`` files go through the CSV adapter, anything else is read as
    line-delimited JSON.  Blank lines are skipped.  Rows are numbered from 1.
    """
    if hasattr(source, "fetch_matches"):
        return source.fetch_matches(category, gender)
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"match file not found: {path}")
    matches = []
    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.DictReader(fh), start=1):
                matches.append(parse_match(_csv_record(row), row=i))
    else:
        with path.open(encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"invalid JSON: {exc.msg}", i) from None
                matches.append(parse_match(rec, row=i))
    return _dataset_from(matches, category, gender)


def save_matches(matches: Iterable[RawMatch], path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for m in matches:
            fh.write(json.dumps(m.to_record(), ensure_ascii=False) + "\n")


def impute_lineups(dataset: Dataset) -> Dataset:
    """Fill empty lineups with the team's last non-empty lineup of the same season.

    Only earlier matches are used.  Imputed sides are flagged via
    ``home_lineup_imputed`` / ``away_lineup_imputed``.
    """
    last = {}
    out = []
    for m in sorted(dataset.matches, key=lambda m: m.date_time):
        updates = {}
        for side in ("home", "away"):
            team = getattr(m, f"{side}_team")
            key = (team, m.season)
            lineup = getattr(m, f"{side}_lineup")
            if lineup:
                last[key] = lineup
            elif key in last:
                updates[f"{side}_lineup"] = last[key]
                updates[f"{side}_lineup_imputed"] = True
        out.append(replace(m, **updates) if updates else m)
    return dataset.with_matches(out)


def filter_nonempty_lineups(dataset: Dataset) -> Dataset:
    return dataset.with_matches(m for m in dataset.matches if m.home_lineup and m.away_lineup)


def split_train_validation(dataset: Dataset, ratio=0.8, seed=None, shuffle=False):
    """Chronological split: the first ``floor(n * ratio)`` matches train.

    With ``shuffle=True`` the order is permuted with ``seed`` first.  A single
    match with ratio 0.5 therefore yields an empty training set.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if len(dataset) == 0:
        raise ValueError("cannot split an empty dataset")
    matches = list(dataset.matches)
    if shuffle:
        import random

        random.Random(seed).shuffle(matches)
    cut = math.floor(len(matches) * ratio)
    return dataset.with_matches(matches[:cut]), dataset.with_matches(matches[cut:])


class MatchClient(Protocol):
    def fetch_matches(self, category, gender, start=None, end=None) -> Dataset: ...


@dataclass
class FileMatchClient:
    """Client double that serves matches from a local match file."""

    path: Path

    def fetch_matches(self, category=None, gender=None, start=None, end=None):
        data = load_matches(self.path)
        keep = [
            m for m in data.matches
            if (category is None or m.category == category)
            and (gender is None or m.gender == gender)
            and (start is None or m.date_time >= start)
            and (end is None or m.date_time <= end)
        ]
        return _dataset_from(keep, category, gender)


@dataclass
class HttpMatchClient:
    """Fetches match arrays from an HTTP API serving the match file schema.

    ``GET {base_url}/matches?category=..&gender=..&start=..&end=..`` must return
    a JSON array of match records.  ``httpx.Client`` is thread-safe, so one
    instance may be shared across threads.
    """

    base_url: str
    token: Optional[str] = None
    timeout: float = 30.0
    transport: Optional[httpx.BaseTransport] = field(default=None, repr=False)

    @classmethod
    def from_env(cls):
        url = os.environ.get("ORACLE_API_URL")
        if not url:
            raise ValueError("ORACLE_API_URL is not set")
        return cls(url, os.environ.get("ORACLE_API_TOKEN"))

    def fetch_matches(self, category=None, gender=None, start=None, end=None):
        params = {k: v for k, v in {
            "category": category,
            "gender": gender,
            "start": start.isoformat() if start else None,
            "end": end.isoformat() if end else None,
        }.items() if v is not None}
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            resp = client.get(self.base_url.rstrip("/") + "/matches", params=params, headers=headers)
            resp.raise_for_status()
            payload = resp.json()
        if not isinstance(payload, list):
            raise SchemaError("API response must be a JSON array")
        return _dataset_from([parse_match(rec, row=i) for i, rec in enumerate(payload, start=1)],
                             category, gender)


def match_fields():
    return [f.name for f in fields(RawMatch)]
