"""Regenerate the bundled fixtures: ``python3 fixtures/generate.py``.

Everything except the fixed knockout results is synthetic.  Output is
deterministic.
"""
import json
from dataclasses import replace
from datetime import datetime, timedelta
from pathlib import Path

from handball_oracle import synthetic as S
from handball_oracle.ingest import save_matches
from handball_oracle.tournament import round_robin

HERE = Path(__file__).resolve().parent
N_NATIONAL = 300
LOCATIONS = {name: [lat, lon] for name, lat, lon in S.NATIONS}
LOCATIONS.update({"South Korea": [37.57, 126.98], "Netherlands": [52.37, 4.90], "Angola": [-8.84, 13.23]})
LILLE = [50.6292, 3.0573]
PARIS = [48.8566, 2.3522]

MEN_GROUPS = {
    "A": ["Croatia", "Spain", "Germany", "Sweden", "Slovenia", "Japan"],
    "B": ["Denmark", "France", "Norway", "Hungary", "Egypt", "Argentina"],
}
WOMEN_GROUPS = {
    "A": ["Norway", "Sweden", "Germany", "Denmark", "South Korea", "Slovenia"],
    "B": ["Spain", "France", "Hungary", "Brazil", "Netherlands", "Angola"],
}

# Group results chosen to give the tables' points and orderings with
# goal differences that sum to zero.
MEN_GROUP_RESULTS = [
    ("Croatia", "Germany", 30, 30), ("Croatia", "Spain", 33, 28), ("Croatia", "Sweden", 34, 25),
    ("Croatia", "Slovenia", 35, 25), ("Croatia", "Japan", 38, 26), ("Spain", "Germany", 31, 29),
    ("Spain", "Sweden", 30, 27), ("Spain", "Slovenia", 32, 28), ("Spain", "Japan", 36, 30),
    ("Germany", "Sweden", 29, 27), ("Germany", "Slovenia", 30, 27), ("Germany", "Japan", 34, 28),
    ("Sweden", "Slovenia", 27, 27), ("Sweden", "Japan", 33, 25), ("Slovenia", "Japan", 29, 27),
    ("Denmark", "France", 30, 30), ("Denmark", "Norway", 31, 27), ("Denmark", "Hungary", 32, 26),
    ("Egypt", "Denmark", 29, 28), ("Denmark", "Argentina", 36, 24), ("France", "Hungary", 33, 28),
    ("France", "Egypt", 31, 26), ("Norway", "France", 30, 28), ("France", "Argentina", 34, 24),
    ("Norway", "Egypt", 30, 27), ("Norway", "Hungary", 27, 29), ("Norway", "Argentina", 31, 25),
    ("Hungary", "Egypt", 28, 28), ("Hungary", "Argentina", 32, 24), ("Egypt", "Argentina", 28, 25),
]
MEN_KNOCKOUT = [
    ("Croatia", "Hungary", 34, 24), ("Norway", "Spain", 31, 32), ("Germany", "France", 28, 32),
    ("Denmark", "Sweden", 27, 23), ("Croatia", "Spain", 33, 30), ("France", "Denmark", 33, 28),
    ("Croatia", "France", 24, 35), ("Spain", "Denmark", 29, 30),
]
WOMEN_GROUP_RESULTS = [
    ("Norway", "Sweden", 26, 27), ("Norway", "Germany", 32, 25), ("Norway", "Denmark", 31, 26),
    ("Norway", "South Korea", 36, 24), ("Norway", "Slovenia", 35, 25), ("Sweden", "South Korea", 30, 26),
    ("Sweden", "Germany", 29, 27), ("Denmark", "Sweden", 28, 26), ("Sweden", "Slovenia", 31, 26),
    ("Germany", "South Korea", 33, 25), ("Germany", "Denmark", 29, 26), ("Germany", "Slovenia", 32, 24),
    ("Denmark", "South Korea", 30, 25), ("Denmark", "Slovenia", 30, 26), ("South Korea", "Slovenia", 28, 26),
    ("Spain", "France", 27, 27), ("Spain", "Hungary", 28, 26), ("Spain", "Brazil", 29, 25),
    ("Spain", "Netherlands", 30, 27), ("Spain", "Angola", 33, 25), ("France", "Hungary", 26, 28),
    ("France", "Brazil", 31, 24), ("France", "Netherlands", 32, 26), ("France", "Angola", 35, 22),
    ("Brazil", "Hungary", 27, 25), ("Hungary", "Netherlands", 30, 27), ("Hungary", "Angola", 31, 24),
    ("Brazil", "Netherlands", 28, 28), ("Brazil", "Angola", 30, 25), ("Netherlands", "Angola", 29, 26),
]
WOMEN_KNOCKOUT = [
    ("Norway", "Brazil", 34, 20), ("Sweden", "Hungary", 28, 25), ("France", "Germany", 29, 24),
    ("Spain", "Denmark", 24, 29), ("Norway", "Sweden", 27, 26), ("France", "Denmark", 29, 25),
    ("Norway", "France", 26, 27), ("Sweden", "Denmark", 34, 30),
]


def universe():
    u = S.make_universe(seed=0)
    france = S.NATIONS.index(next(n for n in S.NATIONS if n[0] == "France"))
    target = next(p for p in range(len(u.names))
                  if u.nation_of[p] == france and u.roster[u.names[p]]["position"] == "right back")
    old = u.names[target]
    u.names[target] = "Dika Mem"
    u.roster["Dika Mem"] = u.roster.pop(old)
    return u


def schedule(groups, start):
    out = []
    day = 0
    for teams in groups.values():
        for i, (h, a) in enumerate(round_robin(teams)):
            when = start + timedelta(days=2 * (i // 3) + day, hours=9 + 2 * (i % 3))
            out.append({"home": h, "away": a, "date_time": when.isoformat(timespec="minutes")})
        day = 1
    return out


def tournament(name, gender, groups, lineups):
    return {
        "name": name,
        "gender": gender,
        "competition": "Olympic Games",
        "venue": PARIS,
        "roster": "roster.json",
        "teams": {t: {"location": LOCATIONS[t], "lineup": lineups.get(t, [])} for g in groups.values() for t in g},
        "groups": groups,
        "schedule": schedule(groups, datetime(2024, 7, 25 if gender == "men" else 24)),
        "knockout_dates": {
            "quarterfinal": "2024-08-07T14:00" if gender == "men" else "2024-08-06T14:00",
            "semifinal": "2024-08-09T17:00" if gender == "men" else "2024-08-08T17:00",
            "bronze_final": "2024-08-11T09:00" if gender == "men" else "2024-08-10T09:00",
            "final": "2024-08-11T13:30" if gender == "men" else "2024-08-10T13:30",
        },
    }


def results(rows, phase):
    return [{"phase": phase, "home": h, "away": a, "home_goals": hg, "away_goals": ag} for h, a, hg, ag in rows]


def dump(obj, name):
    with (HERE / name).open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, ensure_ascii=False)
        fh.write("\n")


def main():
    u = universe()
    save_matches(S.club_matches(u, 8 * N_NATIONAL, seed=0), HERE / "clubs_men.jsonl")
    national = S.national_matches(u, N_NATIONAL, seed=0)
    save_matches(national, HERE / "national_men.jsonl")
    dump(u.roster, "roster.json")
    squads = S.national_squads(u)
    lineups = {team: players[:16] for team, players in squads.items()}
    final = national.matches[0]
    final = replace(
        final,
        match_id="paris2024-men-final",
        date_time=datetime(2024, 8, 11, 13, 30),
        competition="Olympic Games",
        home_team="Croatia",
        away_team="France",
        home_location=tuple(LOCATIONS["Croatia"]),
        away_location=tuple(LOCATIONS["France"]),
        match_location=tuple(LILLE),
        home_lineup=tuple(lineups["Croatia"]),
        away_lineup=tuple(lineups["France"] if "Dika Mem" in lineups["France"] else lineups["France"][:15] + ["Dika Mem"]),
        home_goals=None,
        away_goals=None,
        season="2024",
    )
    no_lineups = replace(final, match_id="paris2024-men-final-no-lineups", home_lineup=(), away_lineup=())
    save_matches([final, no_lineups], HERE / "final_men.jsonl")
    dump(tournament("Paris 2024 men", "men", MEN_GROUPS, lineups), "tournament_men.json")
    dump(tournament("Paris 2024 women", "women", WOMEN_GROUPS, {}), "tournament_women.json")
    dump(results(MEN_GROUP_RESULTS, "group") + results(MEN_KNOCKOUT, "knockout"), "results_men.json")
    dump(results(WOMEN_GROUP_RESULTS, "group") + results(WOMEN_KNOCKOUT, "knockout"), "results_women.json")


if __name__ == "__main__":
    main()
