"""Shared helpers: small matches, tiny models and the bundled fixture paths."""
import json
import threading
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from handball_oracle.features import FeatureMatrix, NormalizationStats
from handball_oracle.ingest import RawMatch
from handball_oracle.model import ModelConfig, init_model

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"
PARIS = (48.8566, 2.3522)


def make_match(match_id="m1", when=datetime(2024, 3, 4, 18), home="A", away="B", home_lineup=(), away_lineup=(),
               home_goals=30, away_goals=28, category="national", gender="men", season="2024",
               competition=None, **extra):
    if competition is None:
        competition = "Olympic Games" if category == "national" else "Regular championships"
    return RawMatch(
        match_id=match_id,
        date_time=when,
        competition=competition,
        home_team=home,
        away_team=away,
        home_location=extra.pop("home_location", PARIS),
        away_location=extra.pop("away_location", (45.815, 15.9819)),
        match_location=extra.pop("match_location", PARIS),
        home_lineup=tuple(home_lineup),
        away_lineup=tuple(away_lineup),
        home_goals=home_goals,
        away_goals=away_goals,
        category=category,
        gender=gender,
        season=season,
        **extra,
    )


def tiny_config(vocab_size=5, embedding_dim=3, lineup_len=4, covariate_count=2, hidden_sizes=(5, 4), **kw):
    return ModelConfig(vocab_size=vocab_size, embedding_dim=embedding_dim, lineup_len=lineup_len,
                       covariate_count=covariate_count, hidden_sizes=hidden_sizes, **kw)


def tiny_model(seed=0, **kw):
    cfg = tiny_config(seed=seed, **kw)
    stats = NormalizationStats(np.zeros(cfg.covariate_count), np.ones(cfg.covariate_count), 50.0)
    return init_model(cfg, stats)


def random_batch(cfg, n, seed=0, with_null=True):
    rng = np.random.default_rng(seed)
    low = 0 if with_null else 1
    lineups = rng.integers(low, cfg.vocab_size + 1, size=(n, cfg.lineup_len))
    covariates = rng.normal(size=(n, cfg.covariate_count))
    targets = rng.normal(0.5, 0.1, size=(n, 2))
    return FeatureMatrix(covariates, lineups, targets)


class _EchoHandler(BaseHTTPRequestHandler):
    """Completion double: answers with the prompt it was sent."""

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.requests.append(body)
        payload = json.dumps({"choices": [{"text": "ECHO " + body["prompt"]}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def echo_endpoint():
    """Local echo completion server with ``.url``; received bodies land in ``.requests``."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EchoHandler)
    server.requests = []
    server.url = f"http://127.0.0.1:{server.server_port}/v1/completions"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        ok, detail = module.RESULTS[number]
        terminalreporter.write_line(f"ACCEPTANCE criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
