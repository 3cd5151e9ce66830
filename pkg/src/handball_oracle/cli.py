"""Command-line entry point: train, predict, explain, report, simulate.

Settings come from, highest priority first: command-line flags, the TOML
file given with ``--config``, ``ORACLE_*`` environment variables, defaults.
Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 external-service error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import pipeline
from .explain import build_report, export_attributions, export_report_json, integrated_gradients
from .features import HistoryStrengths, assemble_features, load_roster
from .ingest import SchemaError, load_matches
from .model import ModelConfig, ModelFormatError, load_model, predict_score, save_model
from .report import (
    CompletionConfig,
    CompletionError,
    PromptBundle,
    build_prompt,
    generate_report,
    render_explain_section,
    render_feature_section,
    render_match_info,
)
from .tournament import (
    bracket_dict,
    format_state,
    load_tournament,
    results_score_fn,
    run_tournament,
    simulate_tournament,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("handball_oracle")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SERVICE = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class AppConfig:
    """Every setting the commands read.  Paths are resolved against the cwd.

    Model overrides left as None fall back to :class:`ModelConfig` defaults.
    """

    clubs_data: Optional[str] = None  # match file (JSONL or CSV) for clubs
    national_data: Optional[str] = None  # match file for national teams; also the strength history
    roster: Optional[str] = None  # roster JSON for positions, teams and n_clubs
    clubs_model: Optional[str] = None
    national_model: Optional[str] = None
    tournament: Optional[str] = None
    output_dir: str = "out"
    seed: Optional[int] = None
    learning_rate: Optional[float] = None
    batch_size: Optional[int] = None
    max_epochs: Optional[int] = None
    patience: Optional[int] = None
    embedding_dim: Optional[int] = None
    activation: Optional[str] = None
    ig_steps: int = 200
    llm_url: Optional[str] = None
    llm_model: str = "mistral-7b-instruct"
    llm_token: Optional[str] = field(default=None, repr=False)
    llm_max_tokens: int = 512
    llm_temperature: float = 0.2
    llm_timeout: float = 60.0
    log_level: str = "INFO"

    def model_overrides(self):
        keys = ("seed", "learning_rate", "batch_size", "max_epochs", "patience", "embedding_dim", "activation")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def completion(self):
        if not self.llm_url:
            raise ConfigError("completion endpoint URL is not configured (set llm_url, --llm-url or ORACLE_LLM_URL)")
        try:
            return CompletionConfig(
                url=self.llm_url,
                model=self.llm_model,
                max_tokens=self.llm_max_tokens,
                temperature=self.llm_temperature,
                timeout=self.llm_timeout,
                token=self.llm_token,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _coerce(name, value, kind):
    try:
        if kind in ("int", "Optional[int]"):
            return int(value)
        if kind in ("float", "Optional[float]"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"setting {name!r}: expected a number, got {value!r}") from None
    return str(value) if value is not None else None


def load_config(path=None, flags=None, environ=None) -> AppConfig:
    """Merge defaults < environment < TOML file < flags into an AppConfig."""
    environ = os.environ if environ is None else environ
    known = {f.name: f.type for f in fields(AppConfig)}
    values = {}
    for name, kind in known.items():
        env = environ.get(f"ORACLE_{name.upper()}")
        if env is not None and env != "":
            values[name] = _coerce(name, env, kind)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None
        for name, value in doc.items():
            if name not in known:
                raise ConfigError(f"unknown setting {name!r} in {path}")
            if isinstance(value, (dict, list)):
                raise ConfigError(f"setting {name!r} must be a scalar")
            values[name] = _coerce(name, value, known[name])
    for name, value in (flags or {}).items():
        if value is not None and name in known:
            values[name] = _coerce(name, value, known[name])
    return AppConfig(**values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _require_file(path, what):
    if not path:
        raise ConfigError(f"no {what} given")
    if not Path(path).is_file():
        raise DataError(f"{what} not found: {path}")
    return path


def _output_dir(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _roster(cfg):
    return load_roster(_require_file(cfg.roster, "roster file")) if cfg.roster else None


def _history(cfg):
    if cfg.national_data and Path(cfg.national_data).is_file():
        return HistoryStrengths(load_matches(cfg.national_data))
    return HistoryStrengths()


def _model_path(args, cfg):
    return _require_file(args.model or cfg.national_model, "model file")


def _load_model(path):
    model = load_model(path)
    if model.vocab is None or model.stats is None:
        raise DataError(f"model {path} lacks its vocabulary or normalization stats")
    return model


def _matches(args):
    data = load_matches(_require_file(args.match, "match file"))
    if args.match_id:
        picked = [m for m in data if m.match_id == args.match_id]
        if not picked:
            raise DataError(f"match {args.match_id!r} not in {args.match}")
        return picked
    return list(data)


def cmd_train(args, cfg: AppConfig):
    category, gender = args.category, args.gender
    data_path = args.data or (cfg.clubs_data if category == "clubs" else cfg.national_data)
    data = load_matches(_require_file(data_path, f"{category} data file"))
    if len(data) == 0 or (data.category, data.gender) != (category, gender):
        raise DataError(f"{data_path} holds no {gender} {category} matches")
    source = None
    if args.transfer_from:
        source = _load_model(_require_file(args.transfer_from, "transfer source model"))
    try:
        config = ModelConfig(vocab_size=1, **cfg.model_overrides())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if source is not None and source.config.embedding_dim != config.embedding_dim:
        raise ConfigError(
            f"transfer source embedding dimension {source.config.embedding_dim} "
            f"does not match the configured {config.embedding_dim}"
        )
    prep = pipeline.prepare(data, _roster(cfg))
    log.info("%d training and %d validation matches, %d players", len(prep.train), len(prep.val), prep.vocab.size)
    model, history = pipeline.fit(prep, config, transfer_from=source)
    out = _output_dir(cfg)
    stem = f"{category}_{gender}"
    save_model(model, out / f"{stem}_model.npz")
    history.to_csv(out / f"{stem}_history.csv")
    print(json.dumps({
        "model": str(out / f"{stem}_model.npz"),
        "history": str(out / f"{stem}_history.csv"),
        "epochs": history.epochs,
        "best_epoch": history.best_epoch,
        "validation_loss": history.validation_loss[history.best_epoch - 1],
        "transfer": bool(source),
    }))
    return EXIT_OK


def _predict_one(model, m, strengths, roster):
    f = assemble_features(m, model.vocab, strengths, model.stats, roster)
    hg, ag, (rh, ra) = predict_score(model, f)
    return f, {
        "match_id": m.match_id,
        "home_team": m.home_team,
        "away_team": m.away_team,
        "home_goals": hg,
        "away_goals": ag,
        "raw_home": rh,
        "raw_away": ra,
    }


def cmd_predict(args, cfg: AppConfig):
    model = _load_model(_model_path(args, cfg))
    matches = _matches(args)
    strengths, roster = _history(cfg), _roster(cfg)
    rows = [_predict_one(model, m, strengths, roster)[1] for m in matches]
    for r in rows:
        print(f"{r['home_team']} {r['home_goals']} - {r['away_goals']} {r['away_team']}"
              f"  (raw {r['raw_home']:.3f} - {r['raw_away']:.3f})")
    with (_output_dir(cfg) / "predictions.json").open("w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    return EXIT_OK


def _resolve_team(team, m):
    """Map --team (home, away or a team name) to (side, team name)."""
    if team in ("home", "away"):
        return team, m.home_team if team == "home" else m.away_team
    if team == m.home_team:
        return "home", team
    if team == m.away_team:
        return "away", team
    raise ConfigError(f"--team must be home, away, {m.home_team!r} or {m.away_team!r}, got {team!r}")


def _explain(args, cfg, model, m, strengths, roster):
    side, team = _resolve_team(args.team, m)
    f, pred = _predict_one(model, m, strengths, roster)
    steps = args.steps or cfg.ig_steps
    raw = integrated_gradients(model, f, side, steps)
    report = build_report(raw, model.vocab, roster, m, team)
    return side, team, pred, report


def cmd_explain(args, cfg: AppConfig):
    model = _load_model(_model_path(args, cfg))
    m = _matches(args)[0]
    side, team, _, report = _explain(args, cfg, model, m, _history(cfg), _roster(cfg))
    out = _output_dir(cfg)
    export_attributions(report, out / f"attributions_{side}.csv")
    export_report_json(report, out / f"attributions_{side}.json")
    print(f"explained {team} ({side}) with {report.steps} steps: "
          f"F(x)={report.input_output:.6f} F(baseline)={report.baseline_output:.6f} residual={report.residual:.3e}")
    return EXIT_OK


def cmd_report(args, cfg: AppConfig):
    completion = cfg.completion()  # fail before any computation
    model = _load_model(_model_path(args, cfg))
    m = _matches(args)[0]
    side, team, pred, report = _explain(args, cfg, model, m, _history(cfg), _roster(cfg))
    info = render_match_info(m.home_team, m.away_team, m.competition, m.date_time, pred["home_goals"], pred["away_goals"])
    prompt = build_prompt(PromptBundle(info, render_feature_section(), render_explain_section(report), team))
    out = _output_dir(cfg)
    (out / "prompt.txt").write_text(prompt, encoding="utf-8")
    text = generate_report(prompt, completion)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_simulate(args, cfg: AppConfig):
    defn = load_tournament(_require_file(args.tournament or cfg.tournament, "tournament file"))
    if args.results:
        with open(_require_file(args.results, "results file"), encoding="utf-8") as fh:
            state = run_tournament(defn.groups, results_score_fn(json.load(fh)), defn.fixtures())
    else:
        model = _load_model(_model_path(args, cfg))
        state = simulate_tournament(model, defn, _history(cfg))
    out = _output_dir(cfg)
    standings = {
        g: [{"rank": i, "team": s.team, "points": s.points, "goal_difference": s.goal_difference,
             "goals_scored": s.goals_scored, "played": s.played, "qualified": s.qualified}
            for i, s in enumerate(rows, start=1)]
        for g, rows in sorted(state.groups.items())
    }
    with (out / "standings.json").open("w", encoding="utf-8") as fh:
        json.dump(standings, fh, indent=2)
    with (out / "bracket.json").open("w", encoding="utf-8") as fh:
        json.dump({"bracket": bracket_dict(state.bracket), "medals": list(state.medals)}, fh, indent=2)
    text = format_state(state)
    (out / "tournament.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="handball-oracle", description="Handball score prediction, attribution and reports.")
    parser.add_argument("--config", help="TOML settings file")
    parser.add_argument("--output-dir", dest="output_dir", help="directory for all artifacts")
    parser.add_argument("--roster", help="roster JSON")
    parser.add_argument("--national-data", dest="national_data", help="national match file (strength history)")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write it with its loss history")
    p.add_argument("--category", choices=("clubs", "national"), required=True)
    p.add_argument("--gender", choices=("men", "women"), default="men")
    p.add_argument("--data", help="match file; defaults to clubs_data / national_data")
    p.add_argument("--transfer-from", dest="transfer_from", help="clubs model whose embeddings seed training")
    for name, kind in (("seed", int), ("learning-rate", float), ("batch-size", int), ("max-epochs", int),
                       ("patience", int), ("embedding-dim", int)):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=kind)
    p.add_argument("--activation", choices=("softplus", "relu"))
    p.set_defaults(handler=cmd_train)

    def match_args(p):
        p.add_argument("--model", help="model file; defaults to national_model")
        p.add_argument("--match", required=True, help="match file (JSONL or CSV)")
        p.add_argument("--match-id", dest="match_id", help="pick one match from the file")

    p = sub.add_parser("predict", help="predict scores for the matches in a file")
    match_args(p)
    p.set_defaults(handler=cmd_predict)

    for name, handler, help_text in (("explain", cmd_explain, "attribute one prediction to its inputs"),
                                     ("report", cmd_report, "generate a natural-language match report")):
        p = sub.add_parser(name, help=help_text)
        match_args(p)
        p.add_argument("--team", default="home", help="home, away or a team name")
        p.add_argument("--steps", type=int, help="integration steps (default ig_steps)")
        if name == "report":
            p.add_argument("--llm-url", dest="llm_url", help="completions endpoint URL")
            p.add_argument("--llm-model", dest="llm_model")
        p.set_defaults(handler=handler)

    p = sub.add_parser("simulate", help="play a tournament with the model")
    p.add_argument("--model", help="model file; defaults to national_model")
    p.add_argument("--tournament", help="tournament JSON")
    p.add_argument("--results", help="fixed results JSON replacing the model")
    p.set_defaults(handler=cmd_simulate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k not in ("config", "handler", "command")}
        cfg = load_config(args.config, flags)
        if args.command == "explain" or args.command == "report":
            if args.steps is not None and args.steps < 1:
                raise ConfigError("--steps must be >= 1")
        logging.basicConfig(level=getattr(logging, cfg.log_level.upper(), logging.INFO), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.handler(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompletionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (DataError, SchemaError, ModelFormatError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
