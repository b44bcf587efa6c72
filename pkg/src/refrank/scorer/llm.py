"""Network judge for chat-completions endpoints that return token log-probs.

Endpoint contract: the backend POSTs a single-message chat completion with
temperature 0, one output token, and top-K log-probabilities requested for
the first generated position. A label's logit is the log-probability of its
token; a leading-space variant is probed as well and the larger value taken
(tokenizers differ on whitespace). Labels absent from the top-K get a floor
of one nat below the smallest returned log-probability. A response with no
usable top-K list, or in which no label token appears at all, is degenerate
and never retried; transient transport failures are retried with
exponential backoff.
"""

from __future__ import annotations

import os
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import requests

from ..datamodel import CallLedger, HarnessError, ValidationError
from .base import (
    BatchScoringError,
    DegenerateResponseError,
    LabelLogits,
    Scorer,
    ScoreRequest,
    ScoringError,
    TransientBackendError,
)
from .prompts import PromptTemplates, build_prompt, check_placeholders

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class LlmBackendConfig:
    """Connection and prompting configuration for the network judge."""

    base_url: str
    model: str
    api_key_env: str = ""
    templates: PromptTemplates = field(default_factory=PromptTemplates.defaults)
    label_tokens: Mapping[str, str] = field(default_factory=dict)
    timeout: float = 30.0
    max_retries: int = 3
    retry_backoff: float = 0.5
    max_doc_chars: int = 4000
    batch_size: int = 4
    top_logprobs: int = 20
    path: str = "/v1/chat/completions"

    def __post_init__(self):
        object.__setattr__(self, "label_tokens", dict(self.label_tokens))
        if not self.base_url:
            raise ValidationError("base_url must be nonempty")
        if not self.model:
            raise ValidationError("model must be nonempty")
        if self.timeout <= 0:
            raise ValidationError("timeout must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.top_logprobs < 1:
            raise ValidationError("top_logprobs must be >= 1")
        tokens = list(self.label_tokens.values())
        if len(tokens) != len(set(tokens)):
            raise ValidationError("label tokens must be distinct")
        check_placeholders(self.templates)

    def token_for(self, label: str) -> str:
        return self.label_tokens.get(label, label)


class LlmScorer(Scorer):
    """Scores requests against an HTTP chat-completions endpoint."""

    def __init__(self, config: LlmBackendConfig, ledger: CallLedger | None = None):
        super().__init__(ledger)
        self.config = config
        self._url = config.base_url.rstrip("/") + config.path
        self._headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            api_key = os.environ.get(config.api_key_env, "")
            if not api_key:
                raise ValidationError(
                    f"environment variable {config.api_key_env!r} is not set"
                )
            self._headers["Authorization"] = f"Bearer {api_key}"
        self._session = requests.Session()

    def _score_one(self, request: ScoreRequest) -> tuple[LabelLogits, int]:
        prompt = build_prompt(request, self.config.templates, self.config.max_doc_chars)
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "max_tokens": 1,
            "logprobs": True,
            "top_logprobs": self.config.top_logprobs,
        }
        data = self._post_with_retries(payload)
        return self._extract_logits(request, data), len(prompt)

    def _post_with_retries(self, payload: dict) -> dict:
        attempts = self.config.max_retries + 1
        last_failure = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.retry_backoff * (2 ** (attempt - 1)))
            try:
                response = self._session.post(
                    self._url,
                    json=payload,
                    headers=self._headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_failure = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise ScoringError(
                    f"endpoint returned HTTP {response.status_code}: "
                    f"{response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError:
                raise DegenerateResponseError(
                    "response body is not JSON", payload=response.text[:500]
                ) from None
        raise TransientBackendError(
            f"request failed after {attempts} attempt(s): {last_failure}"
        )

    def _extract_logits(self, request: ScoreRequest, data: dict) -> LabelLogits:
        try:
            top = data["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
        except (KeyError, IndexError, TypeError):
            raise DegenerateResponseError(
                "response carries no first-position top_logprobs", payload=data
            ) from None
        if not top:
            raise DegenerateResponseError("empty top_logprobs list", payload=data)
        by_token: dict[str, float] = {}
        for item in top:
            try:
                token, logprob = item["token"], float(item["logprob"])
            except (KeyError, TypeError, ValueError):
                raise DegenerateResponseError(
                    "malformed top_logprobs entry", payload=data
                ) from None
            if token not in by_token or logprob > by_token[token]:
                by_token[token] = logprob
        floor = min(by_token.values()) - 1.0
        values: dict[str, float] = {}
        found_any = False
        for label in request.labels:
            token = self.config.token_for(label)
            present = [by_token[v] for v in (token, " " + token) if v in by_token]
            if present:
                values[label] = max(present)
                found_any = True
            else:
                values[label] = floor
        if not found_any:
            raise DegenerateResponseError(
                f"no label token among {[self.config.token_for(l) for l in request.labels]} "
                f"appears in the top-{self.config.top_logprobs} log-probabilities",
                payload=data,
            )
        return LabelLogits(values)

    def score_batch(self, requests_seq: Sequence[ScoreRequest]) -> list[LabelLogits]:
        """Concurrent scoring with bounded in-flight requests; order preserved."""
        if not requests_seq:
            return []
        workers = min(self.config.batch_size, len(requests_seq))
        results: list[LabelLogits | None] = [None] * len(requests_seq)
        errors: dict[int, Exception] = {}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(self.score, request): index
                for index, request in enumerate(requests_seq)
            }
            for future in futures:
                index = futures[future]
                try:
                    results[index] = future.result()
                except HarnessError as exc:
                    errors[index] = exc
        if errors:
            raise BatchScoringError(results, errors)
        return results  # type: ignore[return-value]
