"""Measurement side of the framework: span relevancy, CPC-section
classification of generated text, and the personalization-overlap metric."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import rankdata

from .corpus.types import CpcSection
from .dataset.bpe import Vocabulary
from .errors import (
    EmptyDistributionError,
    EmptyTextError,
    VocabMismatchError,
)
from .models.classifier import EncoderClassifier

DEFAULT_THRESHOLD = 0.5
RELEVANCY_POSITIVE_LABEL = 1
NUM_CPC_LABELS = 9


@dataclass(frozen=True)
class SpanPair:
    first: str
    second: str

    def __post_init__(self):
        if not self.first.strip() or not self.second.strip():
            raise EmptyTextError("both spans of a pair must be non-empty")


@dataclass(frozen=True)
class LabelDistribution:
    counts: Mapping[CpcSection, int]

    def __post_init__(self):
        clean = {s: int(c) for s, c in self.counts.items() if c}
        for s, c in clean.items():
            if c < 0:
                raise ValueError(f"negative count for {s}: {c}")
        object.__setattr__(self, "counts", clean)

    def total(self) -> int:
        return sum(self.counts.values())

    def get(self, section: CpcSection) -> int:
        return self.counts.get(section, 0)

    def to_dict(self) -> dict[str, int]:
        return {s.value: c for s, c in sorted(self.counts.items(),
                                              key=lambda kv: kv[0].value)}

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> "LabelDistribution":
        return cls({CpcSection(k): v for k, v in d.items()})


@dataclass(frozen=True)
class PersonalizationScore:
    value: float
    method: str = "normalized-multiset-jaccard"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"score {self.value} outside [0, 1]")


# -- encoding helpers ------------------------------------------------------

def _check_vocab(classifier: EncoderClassifier, vocab: Vocabulary) -> None:
    if (classifier.vocab_hash is not None
            and classifier.vocab_hash != vocab.vocab_hash()):
        raise VocabMismatchError(
            f"classifier bound to vocabulary {classifier.vocab_hash[:12]}..., "
            f"caller supplied {vocab.vocab_hash()[:12]}...")


def _encode_clipped(text: str, vocab: Vocabulary, context_len: int,
                    keep: str = "head") -> list[int]:
    enc = list(vocab.encode(text).ids)
    room = context_len - 2
    if len(enc) > room:
        enc = enc[:room] if keep == "head" else enc[len(enc) - room:]
    return [vocab.bos_id] + enc + [vocab.eos_id]


def pair_text(first: str, second: str, vocab: Vocabulary) -> str:
    return f"{first} {vocab.special.sep} {second}"


# -- relevancy -------------------------------------------------------------

def score_span_relevancy(classifier: EncoderClassifier, vocab: Vocabulary,
                         first: str, second: str) -> float:
    """Probability that ``second`` follows ``first``, under a 2-label
    classifier trained on adjacent vs cross-patent span pairs."""
    pair = SpanPair(first, second)
    _check_vocab(classifier, vocab)
    if classifier.num_labels != 2:
        raise ValueError(
            f"relevancy scoring needs a 2-label classifier, got "
            f"{classifier.num_labels}")
    # clipping keeps the tail of the pair: the junction and the second span
    ids = _encode_clipped(pair_text(pair.first, pair.second, vocab), vocab,
                          classifier.config.context_len, keep="tail")
    probs = classifier.proba_for(ids)
    return float(probs[RELEVANCY_POSITIVE_LABEL])


def build_relevancy_pairs(records, seed: int = 0,
                          negatives_per_positive: int = 1
                          ) -> list[tuple[str, str, int]]:
    """Training pairs: adjacent spans from one claim are positives; spans
    drawn from two different patents are negatives."""
    from .claim_parser import split_spans

    per_patent: dict[str, list[str]] = {}
    positives: list[tuple[str, str]] = []
    for record in records:
        spans_here = per_patent.setdefault(record.patent_id, [])
        for claim in record.claims:
            texts = [s.text for s in split_spans(claim).spans]
            spans_here.extend(texts)
            positives.extend(zip(texts, texts[1:]))

    patent_ids = sorted(pid for pid, spans in per_patent.items() if spans)
    rng = np.random.default_rng(seed)
    out = [(a, b, 1) for a, b in positives]
    if len(patent_ids) >= 2:
        for _ in range(len(positives) * negatives_per_positive):
            pa, pb = rng.choice(len(patent_ids), size=2, replace=False)
            first = per_patent[patent_ids[pa]]
            second = per_patent[patent_ids[pb]]
            out.append((first[rng.integers(len(first))],
                        second[rng.integers(len(second))], 0))
    return out


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via the rank-sum statistic."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2)
                 / (n_pos * n_neg))


# -- CPC classification ----------------------------------------------------

def classify_cpc(classifier: EncoderClassifier, vocab: Vocabulary, text: str,
                 threshold: float = DEFAULT_THRESHOLD) -> frozenset[CpcSection]:
    if not text.strip():
        raise EmptyTextError("cannot classify empty text")
    _check_vocab(classifier, vocab)
    if classifier.num_labels != NUM_CPC_LABELS:
        raise ValueError(
            f"CPC mode needs {NUM_CPC_LABELS} labels, classifier has "
            f"{classifier.num_labels}")
    ids = _encode_clipped(text, vocab, classifier.config.context_len)
    probs = classifier.proba_for(ids)
    sections = CpcSection.ordered()
    return frozenset(sections[i] for i in range(len(sections))
                     if probs[i] >= threshold)


def predict_sections(classifier: EncoderClassifier, vocab: Vocabulary,
                     texts: Iterable[str],
                     threshold: float = DEFAULT_THRESHOLD
                     ) -> list[frozenset[CpcSection]]:
    return [classify_cpc(classifier, vocab, t, threshold) for t in texts]


def distribution_from_sets(label_sets) -> LabelDistribution:
    counts: dict[CpcSection, int] = {}
    for labels in label_sets:
        for s in labels:
            counts[s] = counts.get(s, 0) + 1
    return LabelDistribution(counts)


def label_distribution(classifier: EncoderClassifier, vocab: Vocabulary,
                       texts: Iterable[str],
                       threshold: float = DEFAULT_THRESHOLD
                       ) -> LabelDistribution:
    """counts[s] = number of texts whose predicted set contains s."""
    return distribution_from_sets(
        predict_sections(classifier, vocab, texts, threshold))


def joint_counts(label_sets,
                 pairs: list[tuple[CpcSection, CpcSection]] | None = None
                 ) -> dict[tuple[CpcSection, CpcSection], int]:
    """Number of texts predicted with BOTH sections of each pair."""
    sets = [frozenset(s) for s in label_sets]
    if pairs is None:
        seen = sorted({s for labels in sets for s in labels},
                      key=lambda s: s.value)
        pairs = [(a, b) for i, a in enumerate(seen) for b in seen[i + 1:]]
    return {(a, b): sum(1 for labels in sets if a in labels and b in labels)
            for a, b in pairs}


# -- personalization overlap -----------------------------------------------

def personalization_overlap(generated: LabelDistribution,
                            reference: LabelDistribution
                            ) -> PersonalizationScore:
    """Multiset Jaccard over counts scaled to equal totals."""
    g_total, r_total = generated.total(), reference.total()
    if g_total == 0 or r_total == 0:
        raise EmptyDistributionError("both distributions need a positive count")
    sections = set(generated.counts) | set(reference.counts)
    min_sum = 0.0
    max_sum = 0.0
    for s in sections:
        g = generated.get(s) / g_total
        r = reference.get(s) / r_total
        min_sum += min(g, r)
        max_sum += max(g, r)
    return PersonalizationScore(value=min_sum / max_sum)


# -- coverage diagnostic ---------------------------------------------------

def coverage_report(classifier: EncoderClassifier, vocab: Vocabulary,
                    text: str, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Whole-text prediction next to sliding-window predictions, exposing
    whether the classifier reads all of the text or only parts of it."""
    if not text.strip():
        raise EmptyTextError("cannot analyze empty text")
    _check_vocab(classifier, vocab)
    whole = classify_cpc(classifier, vocab, text, threshold)
    enc = list(vocab.encode(text).ids)
    width = max(classifier.config.context_len // 2, 1)
    stride = max(classifier.config.context_len // 4, 1)
    windows = []
    start = 0
    while True:
        chunk = enc[start:start + width]
        if not chunk:
            break
        ids = [vocab.bos_id] + chunk + [vocab.eos_id]
        probs = classifier.proba_for(ids)
        sections = CpcSection.ordered()
        pred = frozenset(sections[i] for i in range(len(sections))
                         if probs[i] >= threshold)
        windows.append({"start_token": start, "n_tokens": len(chunk),
                        "sections": sorted(s.value for s in pred)})
        if start + width >= len(enc):
            break
        start += stride
    return {"whole": sorted(s.value for s in whole), "windows": windows}
