"""Token normalization: lowercasing, lookup-table lemmatization, stopword removal.

The normalizer backs every lexical metric in the toolkit (tree splitting and
variant ordering use the same instance). Lemmatization is a pure lookup:
tokens missing from the table pass through unchanged, which keeps
normalization deterministic and idempotent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

_TOKEN_RE = re.compile(r"[a-z0-9']+", re.IGNORECASE)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("phrasetree") / "data" / name))


def read_lines(path) -> list[str]:
    """Read a one-entry-per-line UTF-8 lexicon, skipping blanks and # comments."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            entry = line.strip()
            if entry and not entry.startswith("#"):
                out.append(entry)
    return out


def load_lemma_table(path) -> dict[str, str]:
    """Load a `wordform<TAB>lemma` table, resolving chains to a fixpoint."""
    table: dict[str, str] = {}
    for line in read_lines(path):
        form, _, lemma = line.partition("\t")
        form, lemma = form.strip().lower(), lemma.strip().lower()
        if form and lemma:
            table[form] = lemma
    for form in list(table):
        seen = {form}
        target = table[form]
        while target in table and target not in seen:
            seen.add(target)
            target = table[target]
        table[form] = target
    return table


@dataclass(frozen=True)
class TokenNormalizer:
    """Deterministic token pipeline: lowercase -> lemmatize -> drop stopwords."""

    lemma_table: dict[str, str] = field(default_factory=dict)
    stopword_set: frozenset[str] = frozenset()
    lowercase: bool = True

    @classmethod
    def default(cls) -> "TokenNormalizer":
        """Normalizer backed by the shipped stopword and lemma tables."""
        return cls.from_files(_data_path("stopwords.txt"), _data_path("lemmas.tsv"))

    @classmethod
    def from_files(cls, stopword_path, lemma_path) -> "TokenNormalizer":
        return cls(
            lemma_table=load_lemma_table(lemma_path),
            stopword_set=frozenset(w.lower() for w in read_lines(stopword_path)),
        )

    def tokenize(self, text: str) -> list[str]:
        """Punctuation-stripped word tokens, lowercased when configured."""
        if self.lowercase:
            text = text.lower()
        return [t.strip("'") for t in _TOKEN_RE.findall(text) if t.strip("'")]

    def normalize(self, text: str) -> list[str]:
        """Lemmatized content tokens; stopwords are dropped by surface or lemma."""
        out = []
        for token in self.tokenize(text):
            if token in self.stopword_set:
                continue
            if token.endswith("'s"):
                token = token[:-2]
            lemma = self.lemma_table.get(token, token)
            if lemma and lemma not in self.stopword_set:
                out.append(lemma)
        return out

    def content_set(self, text: str) -> frozenset[str]:
        return frozenset(self.normalize(text))


def normalize_tokens(text: str, normalizer: TokenNormalizer) -> list[str]:
    return normalizer.normalize(text)
