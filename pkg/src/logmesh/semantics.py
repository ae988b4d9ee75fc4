"""Template attribute vectors: preprocessing, word-vector lookup, TF-IDF
weighting, and the weighted-sum sentence embedding. Also provides the
one-hot encoding used by the node-label ablation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, IoError
from .logparse import WILDCARD, TemplateCatalog

# Classic English stop-word list (NLTK's), embedded for determinism.
STOP_WORDS = frozenset("""
i me my myself we our ours ourselves you you're you've you'll you'd your yours
yourself yourselves he him his himself she she's her hers herself it it's its
itself they them their theirs themselves what which who whom this that that'll
these those am is are was were be been being have has had having do does did
doing a an the and but if or because as until while of at by for with about
against between into through during before after above below to from up down
in out on off over under again further then once here there when where why how
all any both each few more most other some such no nor not only own same so
than too very s t can will just don don't should should've now d ll m o re ve
y ain aren aren't couldn couldn't didn didn't doesn doesn't hadn hadn't hasn
hasn't haven haven't isn isn't ma mightn mightn't mustn mustn't needn needn't
shan shan't shouldn shouldn't wasn wasn't weren weren't won won't wouldn
wouldn't
""".split())

_CAMEL_RE = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SEP_RE = re.compile(r"[_\-]+")


def preprocess(tokens: list[str]) -> list[str]:
    """Turn template tokens into the word list fed to the embedding.

    Compound tokens are split on underscores/hyphens and camelCase
    boundaries; any part still containing a non-alphabetic character is
    dropped (ids, numbers, wildcards), the rest are lowercased and
    filtered against the stop-word list.
    """
    words = []
    for token in tokens:
        if token == WILDCARD:
            continue
        for part in _SEP_RE.split(token):
            for piece in _CAMEL_RE.split(part):
                if not piece.isalpha():
                    continue
                word = piece.lower()
                if word not in STOP_WORDS:
                    words.append(word)
    return words


@dataclass
class WordVectorTable:
    vectors: dict[str, np.ndarray]
    dim: int
    duplicates: int = 0

    def __contains__(self, word: str) -> bool:
        return word in self.vectors


def load_vectors(path: str) -> WordVectorTable:
    """Read a whitespace-separated text vector file: `word v1 ... v_d` per
    line. All rows must share one dimension; duplicate words keep the last
    occurrence (counted in `duplicates`)."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    duplicates = 0
    try:
        fh = open(path, "r", errors="replace")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if not values:
                raise FormatError(f"{path}:{line_no}: no vector components")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(
                    f"{path}:{line_no}: dimension {vec.size} != expected {dim}"
                )
            if word in vectors:
                duplicates += 1
            vectors[word] = vec
    if dim is None:
        raise FormatError(f"{path}: empty vector file")
    return WordVectorTable(vectors, dim, duplicates)


def tfidf(corpus: list[list[str]]) -> list[dict[str, float]]:
    """Per-template word weights: tf(w,t) = count/len(t), idf(w) = ln(N/df(w)).

    The document unit is the template. No smoothing; a word occurring in
    every template gets idf 0.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    n = len(corpus)
    df: dict[str, int] = {}
    for words in corpus:
        for w in set(words):
            df[w] = df.get(w, 0) + 1
    weights = []
    for words in corpus:
        wmap: dict[str, float] = {}
        if words:
            for w in words:
                wmap[w] = wmap.get(w, 0.0) + 1.0
            for w in wmap:
                tf = wmap[w] / len(words)
                wmap[w] = tf * math.log(n / df[w])
        weights.append(wmap)
    return weights


def embed_template(
    words: list[str], weights: dict[str, float], table: WordVectorTable
) -> np.ndarray:
    """Weighted sum of word vectors; out-of-vocabulary words contribute
    nothing, so an empty or all-OOV template maps to the zero vector."""
    vec = np.zeros(table.dim, dtype=np.float64)
    seen = set()
    for w in words:
        if w in seen:
            continue
        seen.add(w)
        wv = table.vectors.get(w)
        if wv is not None:
            vec += weights.get(w, 0.0) * wv
    return vec


@dataclass
class TemplateEmbeddingTable:
    """Row i is the attribute vector of template i."""

    matrix: np.ndarray
    mode: str = "semantic"  # or "onehot"

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def vector(self, template_id: int) -> np.ndarray:
        return self.matrix[template_id]


def semantic_table(catalog: TemplateCatalog, vectors: WordVectorTable) -> TemplateEmbeddingTable:
    if len(catalog) == 0:
        return TemplateEmbeddingTable(np.zeros((0, vectors.dim)), "semantic")
    corpus = [preprocess(t) for t in catalog.templates]
    weights = tfidf(corpus)
    rows = [embed_template(words, wmap, vectors) for words, wmap in zip(corpus, weights)]
    return TemplateEmbeddingTable(np.array(rows, dtype=np.float64), "semantic")


def onehot_table(catalog_size: int) -> TemplateEmbeddingTable:
    if catalog_size < 1:
        raise ValueError("catalog must contain at least one template")
    return TemplateEmbeddingTable(np.eye(catalog_size, dtype=np.float64), "onehot")
