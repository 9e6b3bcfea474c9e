"""Scoring backends for the entailment service.

A backend maps (premise, hypothesis) pairs to entailment probabilities in
[0, 1]. Two kinds ship:

* builtin:overlap -- deterministic lexical model (premise-token coverage
  blended with character similarity). No ML dependencies; loads instantly,
  suitable for CI and for driving the client pipeline end-to-end.
* any other model id -- a HuggingFace sequence-classification checkpoint
  trained on NLI (e.g. an MNLI model); the probability of its entailment
  class is returned. Requires the [ml] extra and available weights.
"""
from __future__ import annotations

import difflib
import re
import threading

BUILTIN_OVERLAP = "builtin:overlap"
DEFAULT_MODEL_ID = BUILTIN_OVERLAP

_WORD_RE = re.compile(r"[a-z0-9]+")


class OverlapModel:
    """Lexical entailment surrogate: how much of the premise the hypothesis
    covers, softened by overall character similarity."""

    model_id = BUILTIN_OVERLAP

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        return [self._one(p, h) for p, h in pairs]

    @staticmethod
    def _one(premise: str, hypothesis: str) -> float:
        p_tokens = set(_WORD_RE.findall(premise.lower()))
        if not p_tokens:
            return 1.0
        h_tokens = set(_WORD_RE.findall(hypothesis.lower()))
        coverage = len(p_tokens & h_tokens) / len(p_tokens)
        shape = difflib.SequenceMatcher(
            None, premise.lower(), hypothesis.lower()).ratio()
        return max(0.0, min(1.0, 0.8 * coverage + 0.2 * shape))


class TransformerNliModel:
    """Entailment-class probability from an NLI sequence classifier."""

    def __init__(self, model_id: str):
        import torch
        from transformers import (AutoModelForSequenceClassification,
                                  AutoTokenizer)

        self.model_id = model_id
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForSequenceClassification.from_pretrained(model_id)
        self._model.eval()
        labels = {
            name.lower(): idx
            for idx, name in self._model.config.id2label.items()
        }
        if "entailment" not in labels:
            raise ValueError(f"{model_id} has no entailment class: {labels}")
        self._entail_idx = labels["entailment"]

    def score_pairs(self, pairs):
        with self._torch.no_grad():
            batch = self._tokenizer(
                [p for p, _ in pairs], [h for _, h in pairs],
                return_tensors="pt", padding=True, truncation=True, max_length=512)
            logits = self._model(**batch).logits
            probs = logits.softmax(dim=-1)[:, self._entail_idx]
        return [float(x) for x in probs]


def load_model(model_id: str):
    if model_id == BUILTIN_OVERLAP:
        return OverlapModel()
    return TransformerNliModel(model_id)


class ModelHolder:
    """Loads the model in the background and serializes inference.

    status: loading -> ready, or error (the service answers 503 in both
    non-ready states).
    """

    def __init__(self, loader, max_batch: int = 64):
        self.max_batch = max_batch
        self.status = "loading"
        self.error: str | None = None
        self.model = None
        self._infer_lock = threading.Lock()
        self._loader = loader

    def start(self):
        thread = threading.Thread(target=self._load, daemon=True)
        thread.start()
        return self

    def _load(self):
        try:
            self.model = self._loader()
            self.status = "ready"
        except Exception as exc:  # surfaces through /v1/health
            self.error = str(exc)
            self.status = "error"

    @property
    def model_id(self) -> str:
        return getattr(self.model, "model_id", "unloaded")

    def score_pairs(self, pairs):
        with self._infer_lock:
            return self.model.score_pairs(pairs)
