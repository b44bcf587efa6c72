"""Deterministic synthetic judge for desk-scale verification.

Scores derive from a latent relevance value g in [0, 1] per (query, doc):

  pointwise   s_yes - s_no = beta * (2 g - 1) + bias_d + eps
  triplet     s_A - s_B   = beta * (g_A - g_B) + eps
  duel        same as triplet
  setwise     logit_k      = beta * g_k + eps_k

All randomness is a pure function of (seed, request content), so batching,
call order, and threading can never change a result. For triplets and duels
the noise draw is keyed by the unordered doc pair and signed by orientation:
swapping the two slots swaps the logits exactly, and a document paired with
itself gets zero noise and therefore scores exactly 0.5.

bias_d is a seeded zero-mean Gaussian per-document shift (standard
deviation bias_amplitude) applied to pointwise requests only. It models how
isolated yes/no judgments drift per document in a way comparative judgments
cannot, which is what makes pointwise-versus-comparative experiments
meaningful under this judge.

When ref_noise_scale > 0, triplet noise widens as the reference document's
latent relevance falls: sigma_eff = noise_sigma + ref_noise_scale * (1 -
g_ref). This mode is the harness's explicit mechanism for studying how
anchor quality shapes ranking quality; it is asymmetric by construction and
leaves duels and setwise groups untouched.

Latent sources, in precedence order: an explicit (query_id, doc_id) -> g
map, qrels grades normalized per query (see oracle_latent), or seeded
per-document uniform draws.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .._seeded import stable_digest, std_normal, unit_uniform
from ..datamodel import CallLedger, DocCandidate, Qrels, ValidationError
from .base import (
    DuelRequest,
    LabelLogits,
    PointwiseRequest,
    Scorer,
    ScoreRequest,
    SetwiseRequest,
    TripletRequest,
)


def oracle_latent(doc: DocCandidate, qrels: Qrels, query_id: str) -> float:
    """Latent relevance from qrels: grade over the query's maximum grade.

    Docs absent from qrels get 0.0, and a query whose grades are all zero
    maps every doc to 0.0.
    """
    top = qrels.max_grade(query_id)
    if top <= 0:
        return 0.0
    return qrels.grade(query_id, doc.doc_id) / top


@dataclass(frozen=True)
class OracleConfig:
    """Knobs for the synthetic judge; see the module docstring for the math."""

    seed: int
    noise_sigma: float = 0.0
    bias_amplitude: float = 0.0
    beta: float = 1.0
    ref_noise_scale: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.bias_amplitude < 0:
            raise ValidationError(
                f"bias_amplitude must be >= 0, got {self.bias_amplitude}"
            )
        if self.beta <= 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if self.ref_noise_scale < 0:
            raise ValidationError(
                f"ref_noise_scale must be >= 0, got {self.ref_noise_scale}"
            )


class OracleScorer(Scorer):
    """Stateless seeded judge; repeated calls agree bit for bit."""

    def __init__(
        self,
        config: OracleConfig,
        *,
        qrels: Qrels | None = None,
        latents: Mapping[tuple[str, str], float] | None = None,
        ledger: CallLedger | None = None,
    ):
        super().__init__(ledger)
        self.config = config
        self._qrels = qrels
        self._latents = dict(latents) if latents is not None else None
        self._seed = str(config.seed)

    def latent(self, query_id: str, doc: DocCandidate) -> float:
        if self._latents is not None:
            try:
                return self._latents[(query_id, doc.doc_id)]
            except KeyError:
                raise ValidationError(
                    f"no latent relevance for ({query_id}, {doc.doc_id})"
                ) from None
        if self._qrels is not None:
            return oracle_latent(doc, self._qrels, query_id)
        return unit_uniform(self._seed, "latent", query_id, doc.doc_id)

    def _pair_noise(self, kind: str, query_id: str, id_a: str, id_b: str, sigma: float) -> float:
        # Keyed by the unordered pair, signed by orientation: swap-exact.
        if sigma <= 0.0 or id_a == id_b:
            return 0.0
        lo, hi = (id_a, id_b) if id_a < id_b else (id_b, id_a)
        draw = std_normal(self._seed, kind, query_id, lo, hi)
        return sigma * draw if id_a == lo else -sigma * draw

    def _score_one(self, request: ScoreRequest) -> tuple[LabelLogits, int]:
        cfg = self.config
        query_id = request.query.id
        if isinstance(request, PointwiseRequest):
            g = self.latent(query_id, request.doc)
            diff = cfg.beta * (2.0 * g - 1.0)
            if cfg.bias_amplitude > 0.0:
                diff += cfg.bias_amplitude * std_normal(
                    self._seed, "bias", query_id, request.doc.doc_id
                )
            if cfg.noise_sigma > 0.0:
                diff += cfg.noise_sigma * std_normal(
                    self._seed, "pointwise", query_id, request.doc.doc_id
                )
            logits = LabelLogits({"yes": 0.5 * diff, "no": -0.5 * diff})
            chars = len(request.query.text) + len(request.doc.text)
        elif isinstance(request, (TripletRequest, DuelRequest)):
            if isinstance(request, TripletRequest):
                doc_a, doc_b = request.doc, request.ref
            else:
                doc_a, doc_b = request.doc_a, request.doc_b
            g_a = self.latent(query_id, doc_a)
            g_b = self.latent(query_id, doc_b)
            sigma = cfg.noise_sigma
            if isinstance(request, TripletRequest) and cfg.ref_noise_scale > 0.0:
                sigma += cfg.ref_noise_scale * (1.0 - g_b)
            eps = self._pair_noise(request.kind, query_id, doc_a.doc_id, doc_b.doc_id, sigma)
            logits = LabelLogits(
                {"A": cfg.beta * g_a + 0.5 * eps, "B": cfg.beta * g_b - 0.5 * eps}
            )
            chars = len(request.query.text) + len(doc_a.text) + len(doc_b.text)
        elif isinstance(request, SetwiseRequest):
            group_key = stable_digest(*sorted(d.doc_id for d in request.docs)).hex()
            values: dict[str, float] = {}
            for label, doc in zip(request.labels, request.docs):
                logit = cfg.beta * self.latent(query_id, doc)
                if cfg.noise_sigma > 0.0:
                    logit += cfg.noise_sigma * std_normal(
                        self._seed, "setwise", query_id, group_key, doc.doc_id
                    )
                values[label] = logit
            logits = LabelLogits(values)
            chars = len(request.query.text) + sum(len(d.text) for d in request.docs)
        else:
            raise ValidationError(f"unsupported request type {type(request).__name__}")
        return logits, chars
