"""Slow-motion fine-tuning runs: fine-tune in short segments, generate a
batch of claims at every checkpoint, and track how the predicted CPC-section
mix drifts from the base corpus toward the fine-tuning corpus."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .corpus.builder import load_corpus
from .corpus.types import CpcSection, PatentRecord
from .dataset.bpe import Vocabulary
from .errors import (
    EmptySelectionError,
    InvalidConfigError,
    ResumeMismatchError,
    TooFewCheckpointsError,
)
from .generation import SamplingConfig, SamplingStrategy, decode_stream
from .measurement import (
    LabelDistribution,
    distribution_from_sets,
    joint_counts,
    predict_sections,
)
from .models.checkpoint import load_checkpoint, save_checkpoint
from .models.config import TrainConfig
from .models.trainer import EncodedDataset, fine_tune

METRICS_FILE = "metrics.jsonl"
SPEC_FILE = "spec.json"


@dataclass(frozen=True)
class SetSelector:
    """Which patents make up a working set, by CPC section membership."""

    require_sections: frozenset[CpcSection] = frozenset()
    forbid_sections: frozenset[CpcSection] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "require_sections",
                           frozenset(self.require_sections))
        object.__setattr__(self, "forbid_sections",
                           frozenset(self.forbid_sections))
        overlap = self.require_sections & self.forbid_sections
        if overlap:
            raise InvalidConfigError(
                f"sections both required and forbidden: "
                f"{sorted(s.value for s in overlap)}")

    def matches(self, record: PatentRecord) -> bool:
        return (self.require_sections <= record.cpc_sections
                and not (self.forbid_sections & record.cpc_sections))

    def to_dict(self) -> dict:
        return {"require": sorted(s.value for s in self.require_sections),
                "forbid": sorted(s.value for s in self.forbid_sections)}

    @classmethod
    def from_dict(cls, d: dict) -> "SetSelector":
        return cls(require_sections=frozenset(CpcSection(v)
                                              for v in d.get("require", ())),
                   forbid_sections=frozenset(CpcSection(v)
                                             for v in d.get("forbid", ())))


def select_sets(records, selector: SetSelector) -> list[PatentRecord]:
    out = [r for r in records if selector.matches(r)]
    if not out:
        raise EmptySelectionError(
            f"no record satisfies require={selector.to_dict()['require']} "
            f"forbid={selector.to_dict()['forbid']}")
    return out


def _default_sampling() -> SamplingConfig:
    return SamplingConfig(strategy=SamplingStrategy.TEMPERATURE,
                          temperature=1.0, top_k=40, max_tokens=64, seed=0)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines a slow-motion run, hashable for resume
    safety. Paths name artifacts produced beforehand."""

    base_checkpoint: str
    classifier_checkpoint: str
    vocab_path: str
    corpus_path: str
    s1: SetSelector
    s2: SetSelector
    n_segments: int
    steps_per_segment: int = 10
    claims_per_checkpoint: int = 512
    sampling: SamplingConfig = field(default_factory=_default_sampling)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=1e-3, batch_size=8, max_steps=10))
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_segments < 0:
            raise InvalidConfigError(
                f"n_segments must be >= 0, got {self.n_segments}")
        if self.steps_per_segment < 1:
            raise InvalidConfigError(
                f"steps_per_segment must be >= 1, got "
                f"{self.steps_per_segment}")
        if self.claims_per_checkpoint < 1:
            raise InvalidConfigError(
                f"claims_per_checkpoint must be >= 1, got "
                f"{self.claims_per_checkpoint}")

    def to_dict(self) -> dict:
        sc = self.sampling
        tc = self.train
        return {
            "base_checkpoint": str(self.base_checkpoint),
            "classifier_checkpoint": str(self.classifier_checkpoint),
            "vocab_path": str(self.vocab_path),
            "corpus_path": str(self.corpus_path),
            "s1": self.s1.to_dict(),
            "s2": self.s2.to_dict(),
            "n_segments": self.n_segments,
            "steps_per_segment": self.steps_per_segment,
            "claims_per_checkpoint": self.claims_per_checkpoint,
            "sampling": {"strategy": sc.strategy.value, "top_k": sc.top_k,
                         "temperature": sc.temperature,
                         "max_tokens": sc.max_tokens, "seed": sc.seed},
            "train": {f.name: getattr(tc, f.name) for f in fields(tc)},
            "threshold": self.threshold,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        sc = d["sampling"]
        return cls(
            base_checkpoint=d["base_checkpoint"],
            classifier_checkpoint=d["classifier_checkpoint"],
            vocab_path=d["vocab_path"],
            corpus_path=d["corpus_path"],
            s1=SetSelector.from_dict(d["s1"]),
            s2=SetSelector.from_dict(d["s2"]),
            n_segments=d["n_segments"],
            steps_per_segment=d["steps_per_segment"],
            claims_per_checkpoint=d["claims_per_checkpoint"],
            sampling=SamplingConfig(
                strategy=SamplingStrategy(sc["strategy"]), top_k=sc["top_k"],
                temperature=sc["temperature"], max_tokens=sc["max_tokens"],
                seed=sc["seed"]),
            train=TrainConfig(**d["train"]),
            threshold=d["threshold"],
            seed=d["seed"],
        )

    def spec_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CheckpointMetrics:
    step: int
    label_counts: LabelDistribution
    joint_counts: dict[tuple[CpcSection, CpcSection], int]

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "label_counts": self.label_counts.to_dict(),
            "joint_counts": {f"{a.value}+{b.value}": n for (a, b), n
                             in sorted(self.joint_counts.items(),
                                       key=lambda kv: (kv[0][0].value,
                                                       kv[0][1].value))},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckpointMetrics":
        joints = {}
        for key, n in d["joint_counts"].items():
            a, b = key.split("+")
            joints[(CpcSection(a), CpcSection(b))] = n
        return cls(step=d["step"],
                   label_counts=LabelDistribution.from_dict(
                       d["label_counts"]),
                   joint_counts=joints)


# -- run --------------------------------------------------------------------

def _segment_seed(spec_seed: int, segment: int) -> int:
    state = np.random.SeedSequence([spec_seed, segment]).generate_state(1)
    return int(state[0])


def _generate_and_classify(model, classifier, vocab: Vocabulary,
                           spec: ExperimentSpec, segment: int,
                           tracked_pairs) -> CheckpointMetrics:
    texts = []
    for j in range(spec.claims_per_checkpoint):
        rng = np.random.default_rng([spec.seed, segment, j])
        text, _, _ = decode_stream(model, vocab, "", spec.sampling, rng=rng)
        texts.append(text)
    sets = []
    nonempty = [t for t in texts if t.strip()]
    predicted = iter(predict_sections(classifier, vocab, nonempty,
                                      spec.threshold))
    for t in texts:
        sets.append(next(predicted) if t.strip() else frozenset())
    seen = {s for labels in sets for s in labels} | set(tracked_pairs)
    ordered = sorted(seen, key=lambda s: s.value)
    pairs = [(a, b) for i, a in enumerate(ordered) for b in ordered[i + 1:]]
    return CheckpointMetrics(
        step=segment * spec.steps_per_segment,
        label_counts=distribution_from_sets(sets),
        joint_counts=joint_counts(sets, pairs=pairs))


def _read_metrics(path: Path, expect_hash: str) -> list[CheckpointMetrics]:
    if not path.exists():
        return []
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            if row.get("spec_hash") != expect_hash:
                raise ResumeMismatchError(
                    f"metrics row for segment {row.get('segment')} was "
                    f"written under a different experiment spec")
            rows.append(CheckpointMetrics.from_dict(row))
    return rows


def _append_metrics(path: Path, row: CheckpointMetrics, segment: int,
                    spec_hash: str) -> None:
    payload = {"spec_hash": spec_hash, "segment": segment}
    payload.update(row.to_dict())
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(payload, sort_keys=True) + "\n")


def run_slow_motion(spec: ExperimentSpec, rundir) -> list[CheckpointMetrics]:
    """Executes (or resumes) a slow-motion run in ``rundir``.

    Progress lives in an append-only metrics file; one model checkpoint per
    completed segment makes any interruption point recoverable. A rundir
    holding state from a different spec raises ResumeMismatchError.
    """
    rundir = Path(rundir)
    rundir.mkdir(parents=True, exist_ok=True)
    spec_hash = spec.spec_hash()

    spec_file = rundir / SPEC_FILE
    if spec_file.exists():
        stored = json.loads(spec_file.read_text(encoding="utf-8"))
        if stored.get("spec_hash") != spec_hash:
            raise ResumeMismatchError(
                f"run directory {rundir} belongs to spec "
                f"{stored.get('spec_hash', '?')[:12]}..., "
                f"got {spec_hash[:12]}...")
    else:
        payload = dict(spec.to_dict(), spec_hash=spec_hash)
        spec_file.write_text(json.dumps(payload, indent=2, sort_keys=True)
                             + "\n", encoding="utf-8")

    metrics_path = rundir / METRICS_FILE
    done = _read_metrics(metrics_path, spec_hash)
    if len(done) >= spec.n_segments + 1:
        return done[:spec.n_segments + 1]

    vocab = Vocabulary.load(spec.vocab_path)
    classifier, _ = load_checkpoint(spec.classifier_checkpoint,
                                    expect_vocab_hash=vocab.vocab_hash())
    _, records = load_corpus(spec.corpus_path)
    s2_records = select_sets(records, spec.s2)
    s2_texts = [c.text for r in s2_records for c in r.claims]
    ds = EncodedDataset.from_texts(s2_texts, vocab)
    tracked = (spec.s1.require_sections | spec.s2.require_sections)

    completed = len(done) - 1  # -1 means even the baseline is missing
    if completed < 1:
        model_path = spec.base_checkpoint
    else:
        model_path = rundir / f"model_seg{completed:04d}.ckpt"
    model, _ = load_checkpoint(model_path,
                               expect_vocab_hash=vocab.vocab_hash())

    if completed < 0:
        row = _generate_and_classify(model, classifier, vocab, spec, 0,
                                     tracked)
        _append_metrics(metrics_path, row, 0, spec_hash)
        done.append(row)
        completed = 0

    for segment in range(completed + 1, spec.n_segments + 1):
        tc = TrainConfig(
            learning_rate=spec.train.learning_rate,
            batch_size=spec.train.batch_size,
            max_steps=spec.steps_per_segment,
            beta1=spec.train.beta1, beta2=spec.train.beta2,
            eps=spec.train.eps, grad_clip=spec.train.grad_clip,
            seed=_segment_seed(spec.seed, segment))
        fine_tune(model, ds, tc)
        save_checkpoint(model, rundir / f"model_seg{segment:04d}.ckpt",
                        extra={"segment": segment, "spec_hash": spec_hash})
        row = _generate_and_classify(model, classifier, vocab, spec, segment,
                                     tracked)
        _append_metrics(metrics_path, row, segment, spec_hash)
        done.append(row)
    return done


# -- trend analysis ---------------------------------------------------------

@dataclass(frozen=True)
class SectionTrend:
    delta_first_to_last: int
    spearman_rho_vs_step: float


@dataclass(frozen=True)
class TrendReport:
    per_section: dict[CpcSection, SectionTrend]

    def get(self, section: CpcSection) -> SectionTrend:
        return self.per_section.get(section, SectionTrend(0, 0.0))


def analyze_trend(metrics: list[CheckpointMetrics],
                  sections=None) -> TrendReport:
    """Per-section count drift across checkpoints; rho against step order.

    A constant series has no defined rank correlation and reports 0.0.
    """
    if len(metrics) < 2:
        raise TooFewCheckpointsError(
            f"trend needs at least 2 checkpoints, got {len(metrics)}")
    steps = [m.step for m in metrics]
    if sections is None:
        sections = sorted({s for m in metrics for s in m.label_counts.counts},
                          key=lambda s: s.value)
    per = {}
    for s in sections:
        series = [m.label_counts.get(s) for m in metrics]
        delta = series[-1] - series[0]
        if len(set(series)) <= 1:
            rho = 0.0
        else:
            rho = float(spearmanr(steps, series).statistic)
            if np.isnan(rho):
                rho = 0.0
        per[s] = SectionTrend(delta_first_to_last=delta,
                              spearman_rho_vs_step=rho)
    return TrendReport(per_section=per)
