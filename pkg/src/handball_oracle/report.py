"""Prompt rendering and completion-endpoint client for match reports."""
from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional, Sequence

import httpx

from .explain import AttributionReport

log = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"\{(info|feat|explain|team|examples)\}")


def _asset(name):
    return resources.files("handball_oracle").joinpath("data", name).read_text(encoding="utf-8")


def prompt_template():
    return _asset("prompt_template.txt").rstrip("\n")


def default_examples():
    return [_asset(f"report_example_{i}.txt").rstrip("\n") for i in (1, 2)]


def feature_glossary():
    return json.loads(_asset("feature_glossary.json"))


@dataclass
class PromptBundle:
    info: str
    feat: str
    explain: str
    team: str
    examples: List[str] = field(default_factory=default_examples)

    def validate(self):
        for name in ("info", "feat", "explain", "team"):
            if not getattr(self, name).strip():
                raise ValueError(f"prompt field {name!r} is empty")
        if not self.examples or not all(e.strip() for e in self.examples):
            raise ValueError("at least one non-empty example report is required")


def build_prompt(bundle: PromptBundle, template=None) -> str:
    """Fill the report template in a single pass.

    Substituted text is never re-scanned, so braces inside inputs are safe.
    """
    bundle.validate()
    template = prompt_template() if template is None else template
    values = {
        "info": bundle.info,
        "feat": bundle.feat,
        "explain": bundle.explain,
        "team": bundle.team,
        "examples": "\n\n".join(f"Report {i}: {text}" for i, text in enumerate(bundle.examples, start=1)),
    }
    return PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


def render_explain_section(report: AttributionReport) -> str:
    """One ``label: value`` line per non-empty entry, values to 4 decimals."""
    return "\n".join(f"{e.label}: {e.attribution:.4f}" for e in report.entries if e.kind != "empty")


def render_feature_section(glossary=None) -> str:
    glossary = feature_glossary() if glossary is None else glossary
    return "\n".join(f"- {name}: {text}" for name, text in glossary.items())


def render_match_info(home_team, away_team, competition, when, home_goals, away_goals) -> str:
    return (
        f"{home_team} vs {away_team} at the {competition} on {when:%B} {when.day}, {when:%H:%M}. "
        f"Predicted score: {home_team} {home_goals} - {away_goals} {away_team}."
    )


class CompletionError(RuntimeError):
    pass


class CompletionTimeout(CompletionError):
    pass


class CompletionHTTPError(CompletionError):
    def __init__(self, status, body):
        self.status = status
        self.body = body
        super().__init__(f"completion endpoint returned HTTP {status}: {body[:200]}")


class MalformedCompletion(CompletionError):
    pass


@dataclass
class CompletionConfig:
    url: str
    model: str = "mistral-7b-instruct"
    max_tokens: int = 512
    temperature: float = 0.2
    timeout: float = 60.0
    token: Optional[str] = field(default=None, repr=False)
    max_in_flight: int = 4

    def __post_init__(self):
        if not self.url:
            raise ValueError("completion endpoint URL is not configured")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_env(cls, **overrides):
        kwargs = {"url": os.environ.get("ORACLE_LLM_URL", ""), "token": os.environ.get("ORACLE_LLM_TOKEN")}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


def _completion_text(payload):
    try:
        choice = payload["choices"][0]
    except (KeyError, IndexError, TypeError):
        raise MalformedCompletion("response has no choices") from None
    text = choice.get("text")
    if text is None and isinstance(choice.get("message"), dict):
        text = choice["message"].get("content")
    if not isinstance(text, str) or not text.strip():
        raise MalformedCompletion("response carries no completion text")
    return text


def generate_report(prompt: str, cfg: CompletionConfig, client: Optional[httpx.Client] = None) -> str:
    """POST the prompt to a completions endpoint and return the generated text.

    Transport errors, timeouts and 5xx/429 answers are retried once.
    """
    body = {"model": cfg.model, "prompt": prompt, "max_tokens": cfg.max_tokens, "temperature": cfg.temperature}
    headers = {"Authorization": f"Bearer {cfg.token}"} if cfg.token else {}
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout)
    try:
        for attempt in (1, 2):
            try:
                resp = client.post(cfg.url, json=body, headers=headers, timeout=cfg.timeout)
            except httpx.TimeoutException as exc:
                if attempt == 2:
                    raise CompletionTimeout(f"completion request timed out after {cfg.timeout}s") from exc
                log.warning("completion request timed out, retrying")
                continue
            except httpx.TransportError as exc:
                if attempt == 2:
                    raise CompletionError(f"completion endpoint unreachable: {exc}") from exc
                log.warning("completion transport error %s, retrying", exc)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                if attempt == 2:
                    raise CompletionHTTPError(resp.status_code, resp.text)
                log.warning("completion endpoint returned %d, retrying", resp.status_code)
                continue
            if not 200 <= resp.status_code < 300:
                raise CompletionHTTPError(resp.status_code, resp.text)
            try:
                payload = resp.json()
            except ValueError:
                raise MalformedCompletion(f"response is not JSON: {resp.text[:200]}") from None
            return _completion_text(payload)
    finally:
        if own:
            client.close()
    raise AssertionError("unreachable")


def generate_reports(prompts: Sequence[str], cfg: CompletionConfig) -> List[str]:
    """Run several completions with at most ``cfg.max_in_flight`` in flight."""
    with httpx.Client(timeout=cfg.timeout) as client, ThreadPoolExecutor(cfg.max_in_flight) as pool:
        return list(pool.map(lambda p: generate_report(p, cfg, client), prompts))
