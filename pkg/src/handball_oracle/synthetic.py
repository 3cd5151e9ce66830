"""Synthetic handball universe for tests, fixtures and the transfer experiment.

Every player carries a latent attacking and defensive effect.  Clubs and
national squads draw from the same player pool, so embeddings learnt on
club matches carry over to national matches.  Expected goals are

    28 + 3 * (attack(lineup) - defense(opponent lineup)) + small covariate terms

with Poisson noise, where attack/defense sum the players' effects scaled by
1/sqrt(lineup size).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .features import IMPORTANCE
from .ingest import Dataset, RawMatch

FIRST = (
    "Adrian Bruno Carlos Dario Emil Felix Goran Hugo Igor Jonas Kasper Luka Mads Niklas Oscar "
    "Pablo Rasmus Stefan Tomas Viktor Aleks Benoit Cedric Dimitri Erik Filip Gustav Henrik Ivan "
    "Jakob Karl Lars Marko Nils Olaf Petar Rune Simon Timo Ulrik"
).split()
LAST = (
    "Andersen Berg Costa Dahl Eriksen Fabre Gomez Hansen Ilic Jensen Kovac Lund Moreau Novak "
    "Olsen Petrov Quintana Roux Schmidt Toth Urban Vidal Weber Yilmaz Zoric Abalo Blanc Claes "
    "Duarte Egger Fontaine Gregor Horvat Iversen Juric Kiss Lemaire Maric Nagy Ortiz"
).split()
POSITIONS = ("goalkeeper", "left wing", "left back", "center back", "right back", "right wing", "line player")
NATIONS = (
    ("France", 48.86, 2.35), ("Denmark", 55.68, 12.57), ("Croatia", 45.82, 15.98), ("Spain", 40.42, -3.70),
    ("Norway", 59.91, 10.75), ("Germany", 52.52, 13.40), ("Sweden", 59.33, 18.07), ("Hungary", 47.50, 19.04),
    ("Slovenia", 46.06, 14.51), ("Egypt", 30.04, 31.24), ("Japan", 35.68, 139.69), ("Argentina", -34.60, -58.38),
    ("Portugal", 38.72, -9.14), ("Iceland", 64.15, -21.94), ("Poland", 52.23, 21.01), ("Brazil", -15.79, -47.88),
)
NATIONAL_COMPETITIONS = ("World championships", "European championships", "Qualifiers", "International Friendly Games")
CLUB_COMPETITIONS = ("Regular championships", "National cups", "EHF Champions League", "EHF European League")


@dataclass
class Universe:
    names: list
    attack: np.ndarray
    defense: np.ndarray
    club_of: np.ndarray  # player -> club index
    nation_of: np.ndarray  # player -> nation index or -1
    club_locations: np.ndarray  # (n_clubs, 2)
    club_names: list
    roster: dict


def make_universe(seed=0, n_clubs=40, squad=18, n_nations=16, national_squad=20, effect_sd=1.0):
    rng = np.random.default_rng(seed)
    n_players = n_clubs * squad
    combos = [f"{f} {l}" for f in FIRST for l in LAST]
    if n_players > len(combos):
        raise ValueError("not enough distinct names for this universe")
    if n_nations > len(NATIONS) or n_nations * national_squad > n_players:
        raise ValueError("national squads need more players or fewer nations")
    names = [combos[i] for i in rng.permutation(len(combos))[:n_players]]
    attack = rng.normal(0.0, effect_sd, n_players)
    defense = rng.normal(0.0, effect_sd, n_players)
    club_of = np.repeat(np.arange(n_clubs), squad)
    nation_of = np.full(n_players, -1)
    picks = rng.permutation(n_players)[: n_nations * national_squad]
    nation_of[picks] = np.repeat(np.arange(n_nations), national_squad)
    club_locations = np.column_stack([rng.uniform(38, 62, n_clubs), rng.uniform(-8, 28, n_clubs)])
    club_names = [f"HC {LAST[i % len(LAST)]} {i}" for i in range(n_clubs)]
    roster = {}
    for p, name in enumerate(names):
        roster[name] = {
            "position": POSITIONS[p % len(POSITIONS)],
            "club": club_names[club_of[p]],
            "national_team": NATIONS[nation_of[p]][0] if nation_of[p] >= 0 else None,
        }
    return Universe(names, attack, defense, club_of, nation_of, club_locations, club_names, roster)


def _expected_goals(u, own, opp, importance, travel_km):
    att = u.attack[own].sum() / math.sqrt(len(own))
    dfn = u.defense[opp].sum() / math.sqrt(len(opp))
    return max(1.0, 28.0 + 3.0 * (att - dfn) + 0.2 * (importance - 5) - 0.0005 * travel_km)


def _km(a, b):
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(b[1] - a[1]) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(min(1.0, h)))


def _lineup(rng, squad, size_range=(14, 16)):
    k = min(len(squad), int(rng.integers(size_range[0], size_range[1] + 1)))
    return [int(p) for p in rng.choice(squad, size=k, replace=False)]


def _season_squads(u: Universe, rng, n_seasons, move_rate):
    """Club squads per season; each summer ``move_rate`` of players swap clubs.

    The last season matches ``u.club_of`` (the roster's clubs).
    """
    n_clubs = len(u.club_names)
    club_of = u.club_of.copy()
    seasons = [club_of]
    for _ in range(n_seasons - 1):
        club_of = club_of.copy()
        movers = np.flatnonzero(rng.random(len(club_of)) < move_rate)
        club_of[movers] = club_of[rng.permutation(movers)]  # swapping keeps squad sizes
        seasons.append(club_of)
    return [[np.flatnonzero(c == k) for k in range(n_clubs)] for c in reversed(seasons)]


def club_matches(u: Universe, n, seed=0, gender="men", start=datetime(2016, 8, 1), move_rate=0.0):
    rng = np.random.default_rng([seed, 11])
    n_clubs = len(u.club_names)
    n_seasons = 8
    by_season = _season_squads(u, rng, n_seasons, move_rate)
    out = []
    hours = np.sort(rng.integers(0, n_seasons * 365 * 24, n))
    for i in range(n):
        h, a = (int(x) for x in rng.choice(n_clubs, 2, replace=False))
        comp = CLUB_COMPETITIONS[int(rng.integers(len(CLUB_COMPETITIONS)))]
        when = start + timedelta(hours=int(hours[i]))
        when = when.replace(hour=int(rng.integers(14, 21)))
        squads = by_season[min(n_seasons - 1, int(hours[i]) // (365 * 24))]
        lh, la = _lineup(rng, squads[h]), _lineup(rng, squads[a])
        loc_h, loc_a = tuple(u.club_locations[h]), tuple(u.club_locations[a])
        imp = IMPORTANCE["clubs"][comp]
        gh = rng.poisson(_expected_goals(u, lh, la, imp, 0.0))
        ga = rng.poisson(_expected_goals(u, la, lh, imp, _km(loc_a, loc_h)))
        out.append(RawMatch(
            match_id=f"c{seed}-{i}", date_time=when, competition=comp,
            home_team=u.club_names[h], away_team=u.club_names[a],
            home_location=loc_h, away_location=loc_a, match_location=loc_h,
            home_lineup=tuple(u.names[p] for p in lh), away_lineup=tuple(u.names[p] for p in la),
            home_goals=int(gh), away_goals=int(ga), category="clubs", gender=gender,
            season=f"{when.year if when.month >= 8 else when.year - 1}",
        ))
    out.sort(key=lambda m: m.date_time)
    return Dataset(tuple(out), "clubs", gender)


def national_matches(u: Universe, n, seed=0, gender="men", empty_rate=0.1, start=datetime(2016, 1, 1)):
    rng = np.random.default_rng([seed, 22])
    n_nat = int(u.nation_of.max()) + 1
    squads = [np.flatnonzero(u.nation_of == k) for k in range(n_nat)]
    out = []
    hours = np.sort(rng.integers(0, 8 * 365 * 24, n))
    for i in range(n):
        h, a = (int(x) for x in rng.choice(n_nat, 2, replace=False))
        comp = NATIONAL_COMPETITIONS[int(rng.integers(len(NATIONAL_COMPETITIONS)))]
        when = (start + timedelta(hours=int(hours[i]))).replace(hour=int(rng.integers(12, 21)))
        loc_h, loc_a = NATIONS[h][1:], NATIONS[a][1:]
        venue = loc_h if rng.random() < 0.6 else NATIONS[int(rng.integers(n_nat))][1:]
        lh, la = _lineup(rng, squads[h]), _lineup(rng, squads[a])
        imp = IMPORTANCE["national"][comp]
        gh = rng.poisson(_expected_goals(u, lh, la, imp, _km(loc_h, venue)))
        ga = rng.poisson(_expected_goals(u, la, lh, imp, _km(loc_a, venue)))
        show_h = rng.random() >= empty_rate
        show_a = rng.random() >= empty_rate
        out.append(RawMatch(
            match_id=f"n{seed}-{i}", date_time=when, competition=comp,
            home_team=NATIONS[h][0], away_team=NATIONS[a][0],
            home_location=loc_h, away_location=loc_a, match_location=venue,
            home_lineup=tuple(u.names[p] for p in lh) if show_h else (),
            away_lineup=tuple(u.names[p] for p in la) if show_a else (),
            home_goals=int(gh), away_goals=int(ga), category="national", gender=gender,
            season=str(when.year),
        ))
    out.sort(key=lambda m: m.date_time)
    return Dataset(tuple(out), "national", gender)


def national_squads(u: Universe):
    n_nat = int(u.nation_of.max()) + 1
    return {NATIONS[k][0]: [u.names[p] for p in np.flatnonzero(u.nation_of == k)] for k in range(n_nat)}
