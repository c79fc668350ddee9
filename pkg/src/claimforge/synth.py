"""Synthetic claim-like corpora for desk-scale experiments.

Two CPC sections get disjoint content-word pools over a shared claim
scaffold, so classifiers can separate them and a language model can drift
from one to the other under fine-tuning. Within a patent, consecutive spans
reuse the patent's topic words, which makes span adjacency learnable.
"""
from __future__ import annotations

import datetime as dt

import numpy as np

from .claim_parser import Claim
from .corpus.types import CpcSection, PatentRecord

SECTION_WORDS: dict[CpcSection, tuple[str, ...]] = {
    CpcSection.A: (
        "valve", "pump", "filter", "membrane", "catheter", "syringe",
        "dressing", "implant", "scalpel", "suture", "bandage", "inhaler",
        "lancet", "stent", "forceps", "cannula", "tourniquet", "splint",
        "compress", "vial", "swab", "gauze", "pipette", "thermometer",
    ),
    CpcSection.G: (
        "processor", "memory", "sensor", "signal", "circuit", "register",
        "encoder", "decoder", "antenna", "transistor", "capacitor",
        "oscillator", "amplifier", "modulator", "waveguide", "photodiode",
        "resistor", "inductor", "microcontroller", "transceiver", "buffer",
        "latch", "multiplexer", "comparator",
    ),
}

_NOUNS = ("apparatus", "assembly", "device", "system", "unit")
_LINKS = ("coupled to", "connected to", "attached to", "mounted on")


def section_words(section: CpcSection) -> tuple[str, ...]:
    try:
        return SECTION_WORDS[section]
    except KeyError:
        raise ValueError(f"no synthetic pool for section {section}") from None


def make_claim_text(rng: np.random.Generator, words, noun: str | None = None,
                    n_elements: int = 2) -> str:
    """One claim with a preamble, ``n_elements`` element spans, and a
    wherein clause, in the house drafting style the parser understands."""
    pool = list(words)
    noun = noun or _NOUNS[rng.integers(len(_NOUNS))]
    picks = [pool[i] for i in rng.choice(len(pool), size=n_elements + 2,
                                         replace=False)]
    head = picks[0]
    parts = [f"A {head} {noun} comprising:"]
    previous = head
    for i in range(n_elements):
        w = picks[i + 1]
        link = _LINKS[rng.integers(len(_LINKS))]
        parts.append(f"a {w} {link} the {previous};")
        previous = w
    parts.append(f"and wherein the {picks[-1]} controls the {previous}.")
    return " ".join(parts)


def make_claim_texts(section: CpcSection, n: int, seed: int = 0) -> list[str]:
    """Flat list of claim texts for language-model training."""
    rng = np.random.default_rng(seed)
    words = section_words(section)
    return [make_claim_text(rng, words) for _ in range(n)]


def make_synthetic_corpus(section: CpcSection, n_patents: int,
                          claims_per_patent: int = 3,
                          seed: int = 0) -> list[PatentRecord]:
    """Patent records whose claims share per-patent topic words."""
    rng = np.random.default_rng(seed)
    words = section_words(section)
    pool_size = 6
    n_pools = len(words) // pool_size
    records = []
    for p in range(n_patents):
        # disjoint topic pools: spans within a patent share words, spans
        # across most patent pairs share none, so adjacency is learnable
        pool = p % n_pools
        topic = list(words[pool * pool_size:(pool + 1) * pool_size])
        rng.shuffle(topic)
        patent_id = f"SYN-{section.value}-{p:04d}"
        claims = []
        for c in range(claims_per_patent):
            text = make_claim_text(rng, topic)
            claims.append(Claim(patent_id=patent_id, number=c + 1, text=text))
        records.append(PatentRecord(
            patent_id=patent_id,
            grant_date=dt.date(2020, 1, 1) + dt.timedelta(days=p),
            cpc_sections=frozenset({section}),
            cited_patent_ids=(),
            inventor_ids=(f"syn-inv-{section.value}",),
            claims=tuple(claims)))
    return records


def corpus_texts(records) -> list[str]:
    return [c.text for r in records for c in r.claims]
