"""Tests for group standings, seeding, the knockout and full simulations."""
import json
import string
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import handball_oracle.tournament as T
from conftest import FIXTURES
from handball_oracle.features import NormalizationStats, PlayerVocabulary
from handball_oracle.model import ModelConfig, init_model
from handball_oracle.tournament import (
    GroupStanding,
    fixture_match,
    format_state,
    load_tournament,
    new_standings,
    play_knockout,
    rank_group,
    results_score_fn,
    round_robin,
    run_tournament,
    seed_quarterfinals,
    simulate_tournament,
    update_standings,
)

SIX = ["Croatia", "Spain", "Germany", "Sweden", "Slovenia", "Japan"]

MEN_KNOCKOUT = [
    ("Croatia", "Hungary", 34, 24), ("Norway", "Spain", 31, 32), ("Germany", "France", 28, 32),
    ("Denmark", "Sweden", 27, 23), ("Croatia", "Spain", 33, 30), ("France", "Denmark", 33, 28),
    ("Croatia", "France", 24, 35), ("Spain", "Denmark", 29, 30),
]
WOMEN_KNOCKOUT = [
    ("Norway", "Brazil", 34, 20), ("Sweden", "Hungary", 28, 25), ("France", "Germany", 29, 24),
    ("Spain", "Denmark", 24, 29), ("Norway", "Sweden", 27, 26), ("France", "Denmark", 29, 25),
    ("Norway", "France", 26, 27), ("Sweden", "Denmark", 34, 30),
]


def fixed(rows):
    return results_score_fn([{"home": h, "away": a, "home_goals": x, "away_goals": y} for h, a, x, y in rows])


def first_listed_wins(home, away):
    return 1, 0, 1.0, 0.0


def standing(team, points, gd, goals=100):
    return GroupStanding(team, points, gd, goals, 5)


class TestRoundRobin:
    def test_fifteen_pairs(self):
        fixtures = round_robin(SIX)
        assert len(fixtures) == 15
        assert {frozenset(f) for f in fixtures} == {frozenset(p) for p in combinations(SIX, 2)}

    def test_five_each(self):
        fixtures = round_robin(SIX)
        for team in SIX:
            assert sum(team in f for f in fixtures) == 5

    def test_deterministic(self):
        assert round_robin(SIX) == round_robin(SIX)

    def test_rounds_disjoint(self):
        fixtures = round_robin(SIX)
        for r in range(5):
            teams = [t for f in fixtures[3 * r:3 * r + 3] for t in f]
            assert len(set(teams)) == 6

    @pytest.mark.parametrize("teams", [SIX[:5], SIX + ["Egypt"], SIX[:5] + ["Spain"]])
    def test_invalid(self, teams):
        with pytest.raises(ValueError):
            round_robin(teams)


def play_all(results):
    standings = new_standings(SIX)
    for (h, a), (x, y) in zip(round_robin(SIX), results):
        standings = update_standings(standings, h, a, x, y)
    return standings


class TestStandings:
    def test_five_wins(self):
        s = new_standings(SIX)
        for opp in SIX[1:]:
            s = update_standings(s, "Croatia", opp, 30, 25)
        assert s["Croatia"].points == 10 and s["Croatia"].played == 5

    def test_four_wins_one_draw(self):
        s = new_standings(SIX)
        for opp in SIX[1:5]:
            s = update_standings(s, opp, "Croatia", 25, 30)
        s = update_standings(s, "Croatia", "Japan", 28, 28)
        assert s["Croatia"].points == 9
        assert s["Croatia"].goal_difference == 20 and s["Croatia"].goals_scored == 148

    def test_draw(self):
        s = update_standings(new_standings(SIX), "Spain", "Japan", 30, 30)
        assert s["Spain"].points == s["Japan"].points == 1
        assert s["Spain"].goal_difference == 0 and s["Japan"].goals_scored == 30

    def test_unknown_team(self):
        with pytest.raises(KeyError):
            update_standings(new_standings(SIX), "Spain", "Brazil", 30, 20)

    def test_input_not_mutated(self):
        s = new_standings(SIX)
        update_standings(s, "Spain", "Japan", 30, 20)
        assert s["Spain"].points == 0

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 45), st.integers(0, 45)), min_size=15, max_size=15))
    def test_conservation(self, results):
        s = play_all(results)
        assert sum(r.points for r in s.values()) == 2 * 15
        assert sum(r.goal_difference for r in s.values()) == 0
        assert all(r.points <= 2 * r.played for r in s.values())
        ranked = rank_group(s)
        assert len({r.team for r in ranked}) == 6
        assert sum(r.qualified for r in ranked) == 4


class TestRanking:
    def test_gd_tiebreak(self):
        s = {t: standing(t, p, gd) for t, p, gd in [
            ("Croatia", 9, 36), ("Spain", 8, 10), ("Germany", 7, 9), ("Slovenia", 3, 1),
            ("Sweden", 3, 7), ("Japan", 0, -63)]}
        ranked = [r.team for r in rank_group(s)]
        assert ranked.index("Sweden") < ranked.index("Slovenia")

    def test_denmark_above_france(self):
        s = {t: standing(t, p, gd) for t, p, gd in [
            ("France", 7, 16), ("Denmark", 7, 20), ("Norway", 6, 5), ("Hungary", 5, -1),
            ("Egypt", 5, -4), ("Argentina", 0, -36)]}
        ranked = rank_group(s)
        assert [r.team for r in ranked[:2]] == ["Denmark", "France"]
        assert [r.qualified for r in ranked] == [True] * 4 + [False] * 2

    def test_goals_then_name(self):
        s = {t: standing(t, 4, 0, g) for t, g in [("B", 150), ("A", 150), ("C", 151), ("D", 1), ("E", 1), ("F", 1)]}
        assert [r.team for r in rank_group(s)] == ["C", "A", "B", "D", "E", "F"]

    def test_incomplete(self):
        with pytest.raises(ValueError):
            rank_group(new_standings(SIX))

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 10), st.integers(-20, 20), st.integers(0, 200)), min_size=6,
                    max_size=6))
    def test_total_order(self, rows):
        s = {t: standing(t, p, gd, g) for t, (p, gd, g) in zip(string.ascii_uppercase, rows)}
        shuffled = dict(reversed(list(s.items())))
        assert [r.team for r in rank_group(s)] == [r.team for r in rank_group(shuffled)]


MEN_A = ["Croatia", "Spain", "Germany", "Sweden", "Slovenia", "Japan"]
MEN_B = ["Denmark", "France", "Norway", "Hungary", "Egypt", "Argentina"]


class TestSeeding:
    def test_mens_pairings(self):
        qf = seed_quarterfinals(MEN_A, MEN_B)
        assert {frozenset(p) for p in qf} == {
            frozenset({"Croatia", "Hungary"}), frozenset({"Denmark", "Sweden"}),
            frozenset({"Spain", "Norway"}), frozenset({"France", "Germany"})}
        assert qf == [("Croatia", "Hungary"), ("Spain", "Norway"), ("France", "Germany"), ("Denmark", "Sweden")]

    def test_group_swap(self):
        a = {frozenset(p) for p in seed_quarterfinals(MEN_A, MEN_B)}
        b = {frozenset(p) for p in seed_quarterfinals(MEN_B, MEN_A)}
        assert a == b

    def test_standings_accepted(self):
        qa = [GroupStanding(t) for t in MEN_A]
        assert seed_quarterfinals(qa, MEN_B)[0] == ("Croatia", "Hungary")

    def test_three_qualifiers(self):
        with pytest.raises(ValueError):
            seed_quarterfinals(MEN_A[:3], MEN_B)


class TestKnockout:
    def test_mens_medals(self):
        qf = [("Croatia", "Hungary"), ("Norway", "Spain"), ("Germany", "France"), ("Denmark", "Sweden")]
        bracket = play_knockout(qf, fixed(MEN_KNOCKOUT))
        assert bracket.medals == ("France", "Croatia", "Denmark", "Spain")
        assert bracket.final == ("Croatia", "France")
        assert bracket.bronze_final == ("Spain", "Denmark")
        final = bracket.result("final")
        assert (final.home_goals, final.away_goals) == (24, 35)

    def test_womens_medals(self):
        qf = [("Norway", "Brazil"), ("Sweden", "Hungary"), ("France", "Germany"), ("Spain", "Denmark")]
        bracket = play_knockout(qf, fixed(WOMEN_KNOCKOUT))
        assert bracket.medals == ("France", "Norway", "Sweden", "Denmark")

    def test_first_listed_sweep(self):
        qf = [("a", "b"), ("c", "d"), ("e", "f"), ("g", "h")]
        bracket = play_knockout(qf, first_listed_wins)
        assert bracket.semifinals == [("a", "c"), ("e", "g")]
        assert bracket.medals == ("a", "e", "c", "g")

    def test_raw_breaks_level_score(self):
        def level(home, away):
            return 30, 30, 29.9, 30.2

        bracket = play_knockout([("a", "b"), ("c", "d"), ("e", "f"), ("g", "h")], level)
        assert bracket.semifinals == [("b", "d"), ("f", "h")]

    def test_fully_level_goes_to_first_listed(self):
        bracket = play_knockout([("a", "b"), ("c", "d"), ("e", "f"), ("g", "h")], lambda h, a: (30, 30, 30.0, 30.0))
        assert bracket.medals == ("a", "e", "c", "g")

    def test_wrong_quarterfinal_count(self):
        with pytest.raises(ValueError):
            play_knockout([("a", "b")], first_listed_wins)


def results_file(name):
    return results_score_fn(json.loads((FIXTURES / name).read_text()))


class TestFullTournament:
    def test_men_from_fixed_results(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        state = run_tournament(defn.groups, results_file("results_men.json"), defn.fixtures())
        assert state.medals == ("France", "Croatia", "Denmark", "Spain")
        a = {s.team: (s.points, s.goal_difference) for s in state.groups["A"]}
        assert a["Croatia"] == (9, 36)
        assert [s.team for s in state.groups["B"][:2]] == ["Denmark", "France"]
        assert {frozenset(p) for p in state.bracket.quarterfinals} == {
            frozenset({"Croatia", "Hungary"}), frozenset({"Denmark", "Sweden"}),
            frozenset({"Spain", "Norway"}), frozenset({"France", "Germany"})}

    def test_women_from_fixed_results(self):
        defn = load_tournament(FIXTURES / "tournament_women.json")
        state = run_tournament(defn.groups, results_file("results_women.json"), defn.fixtures())
        assert state.medals == ("France", "Norway", "Sweden", "Denmark")

    def test_invariants(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        state = run_tournament(defn.groups, results_file("results_men.json"), defn.fixtures())
        for rows in state.groups.values():
            assert sum(r.points for r in rows) == 30
            assert sum(r.goal_difference for r in rows) == 0
        qualified = {r.team for rows in state.groups.values() for r in rows if r.qualified}
        assert len(set(state.medals)) == 4 and set(state.medals) <= qualified

    def test_missing_result(self):
        with pytest.raises(KeyError):
            results_file("results_men.json")("Croatia", "Brazil")

    def test_phase_distinguishes_rematches(self):
        fn = results_file("results_men.json")
        assert fn("Croatia", "Spain", stage="group A")[:2] == (33, 28)
        assert fn("Croatia", "Spain", stage="SF1")[:2] == (33, 30)
        assert fn("Spain", "Croatia", stage="SF1")[:2] == (30, 33)

    def test_format_state(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        text = format_state(run_tournament(defn.groups, results_file("results_men.json"), defn.fixtures()))
        assert "Gold: France" in text and "Group A" in text


def constant_model(home, away, vocab=None):
    cfg = ModelConfig(vocab_size=0 if vocab is None else vocab.size, hidden_sizes=(4,))
    model = init_model(cfg, NormalizationStats(np.zeros(11), np.ones(11), 50.0), vocab or PlayerVocabulary())
    w, b = model.layers[-1]
    w[:] = 0.0
    b[:] = [home / 50.0, away / 50.0]
    return model


class TestSimulate:
    def test_stub_model_equals_direct_composition(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        state = simulate_tournament(constant_model(30.2, 28.4), defn)
        direct = run_tournament(defn.groups, lambda h, a: (30, 28, 30.2, 28.4), defn.fixtures())
        assert state.to_dict() == json.loads(json.dumps(direct.to_dict()))
        assert state.medals == direct.medals

    def test_importance_and_venue(self, monkeypatch):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        seen = []
        real = T.assemble_features

        def spy(m, *args, **kwargs):
            seen.append(m)
            return real(m, *args, **kwargs)

        monkeypatch.setattr(T, "assemble_features", spy)
        simulate_tournament(constant_model(30.0, 27.0), defn)
        assert len(seen) == 30 + 8
        assert all(m.competition == "Olympic Games" and m.match_location == (48.8566, 2.3522) for m in seen)
        from handball_oracle.features import importance_value

        assert {importance_value(m.competition, m.category) for m in seen} == {10}
        assert seen[-1].date_time.isoformat() == "2024-08-11T13:30:00"

    def test_deterministic(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        model = init_model(ModelConfig(vocab_size=0, hidden_sizes=(8,), seed=3),
                           NormalizationStats(np.zeros(11), np.ones(11), 50.0), PlayerVocabulary())
        assert simulate_tournament(model, defn).to_dict() == simulate_tournament(model, defn).to_dict()

    def test_fixture_match_fields(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        m = fixture_match(defn, "Croatia", "France", defn.knockout_dates["final"], "final")
        assert m.home_lineup == defn.teams["Croatia"].lineup and len(m.home_lineup) == 16
        assert m.category == "national" and m.home_goals is None


class TestLoadTournament:
    def test_fixture_file(self):
        defn = load_tournament(FIXTURES / "tournament_men.json")
        assert sorted(defn.groups) == ["A", "B"]
        assert sum(len(v) for v in defn.fixtures().values()) == 30
        assert defn.roster is not None

    def test_missing_schedule_entry(self, tmp_path):
        data = json.loads((FIXTURES / "tournament_women.json").read_text())
        data["schedule"] = data["schedule"][1:]
        data.pop("roster")
        (tmp_path / "t.json").write_text(json.dumps(data))
        with pytest.raises(ValueError, match="schedule"):
            load_tournament(tmp_path / "t.json")

    def test_unknown_group_team(self, tmp_path):
        data = json.loads((FIXTURES / "tournament_women.json").read_text())
        data["groups"]["A"][0] = "Atlantis"
        data.pop("roster")
        (tmp_path / "t.json").write_text(json.dumps(data))
        with pytest.raises(ValueError, match="Atlantis"):
            load_tournament(tmp_path / "t.json")
