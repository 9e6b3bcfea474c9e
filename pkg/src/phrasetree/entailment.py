"""Entailment scoring backends.

Template filling and cross-template averaging live in metrics.entailment_score;
a backend only maps (premise, hypothesis) pairs to probabilities in [0, 1].
Three implementations ship:

* RemoteBackend   -- JSON-over-HTTP client for the scoring service
                     (POST {url}/v1/entail), bounded concurrency, retries.
* CacheBackend    -- read-only JSONL cache of precomputed pairs.
* OverlapStubBackend -- deterministic token-overlap ratio; lets the whole
                     pipeline and test suite run without any ML sidecar.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
import time

from .errors import ProtocolError, TransportError

_WORD_RE = re.compile(r"[a-z0-9]+")

ENDPOINT_ENV_VAR = "PHRASETREE_SCORER_URL"


def pair_key(premise: str, hypothesis: str) -> str:
    """Stable cache key for one (premise, hypothesis) pair."""
    digest = hashlib.sha256()
    digest.update(premise.encode("utf-8"))
    digest.update(b"\x1f")
    digest.update(hypothesis.encode("utf-8"))
    return digest.hexdigest()


def _check_score(score, origin):
    if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
        raise ProtocolError(f"{origin} returned entailment score {score!r} outside [0, 1]")
    return float(score)


class EntailmentBackend:
    """Interface: score a batch of (premise, hypothesis) pairs."""

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        raise NotImplementedError

    def score(self, premise: str, hypothesis: str) -> float:
        return self.score_pairs([(premise, hypothesis)])[0]


class OverlapStubBackend(EntailmentBackend):
    """Token-overlap ratio |P & H| / |P| on lowercased word tokens.

    An empty premise is vacuously entailed (score 1.0). Deterministic, so the
    primary suite can run with --scorer stub.
    """

    def score_pairs(self, pairs):
        return [self._one(p, h) for p, h in pairs]

    @staticmethod
    def _one(premise, hypothesis):
        p = set(_WORD_RE.findall(premise.lower()))
        if not p:
            return 1.0
        h = set(_WORD_RE.findall(hypothesis.lower()))
        return len(p & h) / len(p)


class CacheBackend(EntailmentBackend):
    """Precomputed scores from a JSONL file of {premise, hypothesis, score} rows."""

    def __init__(self, path):
        self.path = path
        self._scores: dict[str, float] = {}
        with open(path, encoding="utf-8") as f:
            for n, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                score = _check_score(row["score"], f"{path}:{n}")
                self._scores[pair_key(row["premise"], row["hypothesis"])] = score

    def __len__(self):
        return len(self._scores)

    def score_pairs(self, pairs):
        out = []
        for premise, hypothesis in pairs:
            key = pair_key(premise, hypothesis)
            if key not in self._scores:
                raise KeyError(
                    f"entailment cache {self.path} has no entry for "
                    f"premise={premise!r} hypothesis={hypothesis!r}"
                )
            out.append(self._scores[key])
        return out

    @staticmethod
    def write(path, rows):
        """Persist an iterable of (premise, hypothesis, score) rows."""
        with open(path, "w", encoding="utf-8") as f:
            for premise, hypothesis, score in rows:
                f.write(json.dumps(
                    {"premise": premise, "hypothesis": hypothesis, "score": score},
                    ensure_ascii=False,
                ) + "\n")


class RemoteBackend(EntailmentBackend):
    """Client for the HTTP scoring service.

    At most `max_in_flight` requests are outstanding at any time (shared
    semaphore, so concurrent callers from a worker pool stay bounded).
    Transport failures are retried `retries` times with linear backoff and
    then surface as TransportError; malformed responses as ProtocolError.
    """

    def __init__(self, url, timeout=30.0, max_in_flight=4, retries=2, batch_size=32):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.batch_size = batch_size
        self._slots = threading.Semaphore(max_in_flight)

    def score_pairs(self, pairs):
        out = []
        for start in range(0, len(pairs), self.batch_size):
            out.extend(self._post_batch(pairs[start:start + self.batch_size]))
        return out

    def _post_batch(self, batch):
        import requests

        payload = {"pairs": [{"premise": p, "hypothesis": h} for p, h in batch]}
        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                with self._slots:
                    resp = requests.post(
                        f"{self.url}/v1/entail", json=payload, timeout=self.timeout
                    )
            except requests.RequestException as exc:
                last_exc = exc
                time.sleep(0.2 * (attempt + 1))
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(f"scorer answered {resp.status_code}")
                time.sleep(0.2 * (attempt + 1))
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"scorer answered {resp.status_code}: {resp.text[:200]}")
            try:
                scores = resp.json()["scores"]
            except (ValueError, KeyError) as exc:
                raise ProtocolError(f"scorer response not a ScoreResponse: {exc}") from exc
            if len(scores) != len(batch):
                raise ProtocolError(
                    f"scorer returned {len(scores)} scores for {len(batch)} pairs"
                )
            return [_check_score(s, self.url) for s in scores]
        raise TransportError(f"scorer at {self.url} unreachable: {last_exc}")


def make_backend(kind, url=None, cache_path=None, **kwargs) -> EntailmentBackend:
    """Factory used by the CLI: kind is one of remote|cache|stub."""
    import os

    if kind == "stub":
        return OverlapStubBackend()
    if kind == "cache":
        if not cache_path:
            raise ValueError("cache backend needs a cache file path")
        return CacheBackend(cache_path)
    if kind == "remote":
        url = url or os.environ.get(ENDPOINT_ENV_VAR)
        if not url:
            raise ValueError(
                f"remote backend needs a url (flag or ${ENDPOINT_ENV_VAR})"
            )
        return RemoteBackend(url, **kwargs)
    raise ValueError(f"unknown scorer backend {kind!r}")
