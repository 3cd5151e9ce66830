"""Olympic tournament simulation: two groups of six, then a knockout.

Group matches award 2 points for a win and 1 for a draw.  Groups are ranked
on points, goal difference, goals scored and finally team name.  The top
four of each group play crossed quarterfinals; semifinal losers meet in the
bronze final.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .features import HistoryStrengths, assemble_features
from .ingest import RawMatch
from .model import predict_score

GROUP_SIZE = 6
QUALIFIERS = 4
PARIS = (48.8566, 2.3522)

ScoreFn = Callable[[str, str], Tuple[int, int, float, float]]


@dataclass
class GroupStanding:
    team: str
    points: int = 0
    goal_difference: int = 0
    goals_scored: int = 0
    played: int = 0
    qualified: bool = False


@dataclass
class MatchResult:
    stage: str
    home: str
    away: str
    home_goals: int
    away_goals: int
    raw_home: float
    raw_away: float

    @property
    def winner(self):
        if self.home_goals != self.away_goals:
            return self.home if self.home_goals > self.away_goals else self.away
        if self.raw_home != self.raw_away:
            return self.home if self.raw_home > self.raw_away else self.away
        return self.home

    @property
    def loser(self):
        return self.away if self.winner == self.home else self.home


@dataclass
class Bracket:
    quarterfinals: List[Tuple[str, str]]
    semifinals: List[Tuple[str, str]] = field(default_factory=list)
    final: Optional[Tuple[str, str]] = None
    bronze_final: Optional[Tuple[str, str]] = None
    results: List[MatchResult] = field(default_factory=list)
    medals: Optional[Tuple[str, str, str, str]] = None  # gold, silver, bronze, fourth

    def result(self, stage):
        return next(r for r in self.results if r.stage == stage)


@dataclass
class TournamentState:
    groups: Dict[str, List[GroupStanding]]
    group_results: List[MatchResult]
    bracket: Bracket

    @property
    def medals(self):
        return self.bracket.medals

    def to_dict(self):
        return {
            "groups": {g: [asdict(s) for s in rows] for g, rows in self.groups.items()},
            "group_results": [asdict(r) for r in self.group_results],
            "bracket": bracket_dict(self.bracket),
        }


def bracket_dict(bracket: Bracket):
    out = {
        "quarterfinals": [list(p) for p in bracket.quarterfinals],
        "semifinals": [list(p) for p in bracket.semifinals],
        "final": list(bracket.final) if bracket.final else None,
        "bronze_final": list(bracket.bronze_final) if bracket.bronze_final else None,
        "results": [dict(asdict(r), winner=r.winner) for r in bracket.results],
        "medals": None,
    }
    if bracket.medals:
        out["medals"] = dict(zip(("gold", "silver", "bronze", "fourth"), bracket.medals))
    return out


def round_robin(teams: Sequence[str]) -> List[Tuple[str, str]]:
    """Circle-method schedule: every pair once, in round order."""
    teams = list(teams)
    if len(teams) != GROUP_SIZE:
        raise ValueError(f"a group needs exactly {GROUP_SIZE} teams, got {len(teams)}")
    if len(set(teams)) != len(teams):
        raise ValueError("duplicate team in group")
    n = len(teams)
    rot = teams[1:]
    fixtures = []
    for _ in range(n - 1):
        ring = [teams[0]] + rot
        for i in range(n // 2):
            fixtures.append((ring[i], ring[n - 1 - i]))
        rot = rot[-1:] + rot[:-1]
    return fixtures


def new_standings(teams):
    return {t: GroupStanding(t) for t in teams}


def update_standings(standings, home, away, home_goals, away_goals):
    """Return a new standings mapping with one result applied."""
    for team in (home, away):
        if team not in standings:
            raise KeyError(f"team {team!r} is not in this group")
    out = dict(standings)
    if home_goals > away_goals:
        pts = (2, 0)
    elif home_goals < away_goals:
        pts = (0, 2)
    else:
        pts = (1, 1)
    for team, scored, conceded, p in ((home, home_goals, away_goals, pts[0]), (away, away_goals, home_goals, pts[1])):
        s = out[team]
        out[team] = replace(
            s,
            points=s.points + p,
            goal_difference=s.goal_difference + scored - conceded,
            goals_scored=s.goals_scored + scored,
            played=s.played + 1,
        )
    return out


def rank_group(standings, qualifiers=QUALIFIERS):
    rows = list(standings.values())
    expected = len(rows) - 1
    incomplete = [s.team for s in rows if s.played != expected]
    if incomplete:
        raise ValueError(f"group incomplete, unfinished teams: {incomplete}")
    rows.sort(key=lambda s: (-s.points, -s.goal_difference, -s.goals_scored, s.team))
    return [replace(s, qualified=i < qualifiers) for i, s in enumerate(rows)]


def seed_quarterfinals(group_a, group_b):
    """Crossed pairings ordered so quarterfinals 1+2 and 3+4 feed the semifinals.

    Order: A1-B4, A2-B3, B2-A3, B1-A4.
    """
    qa = [s.team if isinstance(s, GroupStanding) else s for s in group_a[:QUALIFIERS]]
    qb = [s.team if isinstance(s, GroupStanding) else s for s in group_b[:QUALIFIERS]]
    if len(qa) < QUALIFIERS or len(qb) < QUALIFIERS:
        raise ValueError("each group needs four qualifiers")
    return [(qa[0], qb[3]), (qa[1], qb[2]), (qb[1], qa[2]), (qb[0], qa[3])]


def _play(stage, home, away, score_fn):
    if getattr(score_fn, "stage_aware", False):
        hg, ag, rh, ra = score_fn(home, away, stage=stage)
    else:
        hg, ag, rh, ra = score_fn(home, away)
    return MatchResult(stage, home, away, int(hg), int(ag), float(rh), float(ra))


def play_knockout(quarterfinals, score_fn: ScoreFn) -> Bracket:
    """Play the knockout; the first-listed team of each pairing is the home side.

    Level integer scores go to the side with the higher unrounded score, and
    to the first-listed team if those are level too.
    """
    if len(quarterfinals) != 4:
        raise ValueError("the knockout needs exactly 4 quarterfinals")
    bracket = Bracket([tuple(p) for p in quarterfinals])
    qf = [_play(f"QF{i}", h, a, score_fn) for i, (h, a) in enumerate(bracket.quarterfinals, start=1)]
    bracket.semifinals = [(qf[0].winner, qf[1].winner), (qf[2].winner, qf[3].winner)]
    sf = [_play(f"SF{i}", h, a, score_fn) for i, (h, a) in enumerate(bracket.semifinals, start=1)]
    bracket.final = (sf[0].winner, sf[1].winner)
    bracket.bronze_final = (sf[0].loser, sf[1].loser)
    bronze = _play("bronze", *bracket.bronze_final, score_fn)
    final = _play("final", *bracket.final, score_fn)
    bracket.results = qf + sf + [bronze, final]
    bracket.medals = (final.winner, final.loser, bronze.winner, bronze.loser)
    return bracket


def play_groups(groups, score_fn: ScoreFn, fixtures=None):
    """Play every group fixture; returns ranked groups and the results."""
    ranked, results = {}, []
    for name, teams in groups.items():
        standings = new_standings(teams)
        for home, away in (fixtures or {}).get(name) or round_robin(teams):
            r = _play(f"group {name}", home, away, score_fn)
            results.append(r)
            standings = update_standings(standings, home, away, r.home_goals, r.away_goals)
        ranked[name] = rank_group(standings)
    return ranked, results


def run_tournament(groups, score_fn: ScoreFn, fixtures=None) -> TournamentState:
    if sorted(groups) != ["A", "B"]:
        raise ValueError("expected groups 'A' and 'B'")
    ranked, results = play_groups(groups, score_fn, fixtures)
    bracket = play_knockout(seed_quarterfinals(ranked["A"], ranked["B"]), score_fn)
    return TournamentState(ranked, results, bracket)


@dataclass
class TeamEntry:
    name: str
    location: Tuple[float, float]
    lineup: Tuple[str, ...] = ()
    attack: Optional[float] = None
    defense: Optional[float] = None


@dataclass
class TournamentDefinition:
    """Parsed tournament file.

    JSON layout::

        {"name": ..., "gender": "men", "competition": "Olympic Games",
         "venue": [lat, lon], "roster": "roster.json",
         "teams": {"France": {"location": [lat, lon], "lineup": [...],
                              "attack": 30.1, "defense": 25.2}, ...},
         "groups": {"A": [6 teams], "B": [6 teams]},
         "schedule": [{"home": .., "away": .., "date_time": "2024-07-25T09:00"}, ...],
         "knockout_dates": {"quarterfinal": .., "semifinal": ..,
                            "bronze_final": .., "final": ..}}

    Every group pairing needs a schedule entry; its order is the playing
    order and its home/away orientation is kept.
    """

    name: str
    gender: str
    competition: str
    venue: Tuple[float, float]
    teams: Dict[str, TeamEntry]
    groups: Dict[str, List[str]]
    schedule: Dict[frozenset, Tuple[str, str, datetime]]
    knockout_dates: Dict[str, datetime]
    roster: Optional[dict] = None

    def fixtures(self):
        out = {}
        for g, teams in self.groups.items():
            members = set(teams)
            out[g] = [(h, a) for h, a, _ in self.schedule.values() if h in members and a in members]
        return out

    def date_for(self, home, away, stage):
        key = frozenset((home, away))
        if stage.startswith("group"):
            return self.schedule[key][2]
        for prefix, label in (("QF", "quarterfinal"), ("SF", "semifinal"), ("bronze", "bronze_final"), ("final", "final")):
            if stage.startswith(prefix):
                return self.knockout_dates[label]
        raise KeyError(stage)


def load_tournament(path) -> TournamentDefinition:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        teams = {
            name: TeamEntry(name, tuple(t["location"]), tuple(t.get("lineup", ())), t.get("attack"), t.get("defense"))
            for name, t in data["teams"].items()
        }
        groups = {g: list(members) for g, members in data["groups"].items()}
        schedule = {}
        for entry in data["schedule"]:
            key = frozenset((entry["home"], entry["away"]))
            schedule[key] = (entry["home"], entry["away"], datetime.fromisoformat(entry["date_time"]))
        knockout = {k: datetime.fromisoformat(v) for k, v in data["knockout_dates"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid tournament file {path}: {exc!r}") from exc
    for g, members in groups.items():
        for t in members:
            if t not in teams:
                raise ValueError(f"group {g} team {t!r} has no entry under 'teams'")
        for h, a in round_robin(members):
            if frozenset((h, a)) not in schedule:
                raise ValueError(f"no schedule entry for {h} vs {a}")
    missing = {"quarterfinal", "semifinal", "bronze_final", "final"} - set(knockout)
    if missing:
        raise ValueError(f"knockout_dates lacks {sorted(missing)}")
    roster = None
    if data.get("roster"):
        from .features import load_roster

        roster = load_roster(path.parent / data["roster"])
    return TournamentDefinition(
        name=data.get("name", path.stem),
        gender=data.get("gender", "men"),
        competition=data.get("competition", "Olympic Games"),
        venue=tuple(data.get("venue", PARIS)),
        teams=teams,
        groups=groups,
        schedule=schedule,
        knockout_dates=knockout,
        roster=roster,
    )


def fixture_match(defn: TournamentDefinition, home, away, when, stage="") -> RawMatch:
    th, ta = defn.teams[home], defn.teams[away]
    return RawMatch(
        match_id=f"{stage}:{home}-{away}".strip(":"),
        date_time=when,
        competition=defn.competition,
        home_team=home,
        away_team=away,
        home_location=th.location,
        away_location=ta.location,
        match_location=defn.venue,
        home_lineup=th.lineup,
        away_lineup=ta.lineup,
        category="national",
        gender=defn.gender,
        attack_home=th.attack,
        attack_away=ta.attack,
        defense_home=th.defense,
        defense_away=ta.defense,
    )


class ModelScorer:
    """Score function backed by the model; the stage picks the fixture date."""

    stage_aware = True

    def __init__(self, model, defn: TournamentDefinition, strengths=None):
        self.model = model
        self.defn = defn
        self.strengths = strengths or HistoryStrengths()

    def __call__(self, home, away, stage="group"):
        when = self.defn.date_for(home, away, stage)
        m = fixture_match(self.defn, home, away, when, stage)
        f = assemble_features(m, self.model.vocab, self.strengths, self.model.stats, self.defn.roster)
        hg, ag, (rh, ra) = predict_score(self.model, f)
        return hg, ag, rh, ra


def simulate_tournament(model, defn: TournamentDefinition, strengths=None, score_fn=None) -> TournamentState:
    """Play the whole tournament with the model's integer score predictions.

    Every fixture is an Olympic match at the tournament venue.  ``score_fn``
    replaces the model, e.g. to replay fixed results.
    """
    score_fn = score_fn or ModelScorer(model, defn, strengths)
    return run_tournament(defn.groups, score_fn, defn.fixtures())


class results_score_fn:
    """Score function replaying fixed results, in either orientation.

    ``results`` is a list of ``{"home", "away", "home_goals", "away_goals"}``
    with optional ``raw_home`` / ``raw_away`` and ``phase`` (``"group"`` or
    ``"knockout"``).  A result without a phase serves both phases, so
    knockout rematches of group pairings need one.
    """

    stage_aware = True

    def __init__(self, results):
        self.table = {}
        for r in results:
            phase = r.get("phase")
            if phase not in (None, "group", "knockout"):
                raise ValueError(f"unknown phase {phase!r}")
            rh = float(r.get("raw_home", r["home_goals"]))
            ra = float(r.get("raw_away", r["away_goals"]))
            hg, ag = int(r["home_goals"]), int(r["away_goals"])
            self.table[(phase, r["home"], r["away"])] = (hg, ag, rh, ra)
            self.table[(phase, r["away"], r["home"])] = (ag, hg, ra, rh)

    def __call__(self, home, away, stage="group"):
        phase = "group" if stage.startswith("group") else "knockout"
        for key in ((phase, home, away), (None, home, away)):
            if key in self.table:
                return self.table[key]
        raise KeyError(f"no fixed {phase} result for {home} vs {away}")


def format_state(state: TournamentState) -> str:
    lines = []
    for g in sorted(state.groups):
        lines.append(f"Group {g}")
        lines.append(f"{'Rank':<5}{'Team':<16}{'Pts':>4}{'GD':>6}{'GF':>6}")
        for i, s in enumerate(state.groups[g], start=1):
            mark = "*" if s.qualified else " "
            lines.append(f"{i:<4}{mark}{s.team:<16}{s.points:>4}{s.goal_difference:>6}{s.goals_scored:>6}")
        lines.append("")
    lines.append("Knockout")
    for r in state.bracket.results:
        lines.append(f"{r.stage:<7}{r.home} {r.home_goals} - {r.away_goals} {r.away}  -> {r.winner}")
    if state.medals:
        gold, silver, bronze, fourth = state.medals
        lines += ["", f"Gold: {gold}", f"Silver: {silver}", f"Bronze: {bronze}", f"Fourth: {fourth}"]
    return "\n".join(lines)
