"""Command-line interface.

Subcommands cover the whole pipeline: parse claim text, build an
inventor-centric corpus, turn it into training records and a vocabulary,
train/fine-tune/verify models, run completions, score relevancy or CPC
labels, drive the slow-motion fine-tuning experiment, and serve HTTP.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import sys
from pathlib import Path

import click

from .claim_parser import (
    check_antecedent_basis,
    parse_claim_block,
    parsed_claim_to_dict,
    split_spans,
)
from .corpus.api_client import ApiClient, LiveTransport, TokenBucketRateLimiter
from .corpus.builder import build_corpus, load_corpus, persist_corpus
from .corpus.claim_source import LocalClaimSource
from .corpus.types import CorpusSpec, CpcSection, InventorQuery
from .dataset.bpe import Vocabulary, train_bpe
from .dataset.records import (
    Direction,
    RecordFormat,
    build_records,
    load_records,
    reverse_record,
    save_records,
)
from .errors import ClaimForgeError
from .generation import (
    ConstraintSet,
    ExtentLevel,
    GenerationRequest,
    SamplingConfig,
    SamplingStrategy,
    generate_candidates,
    lookahead_spans,
)
from .models import (
    DecoderLM,
    EncoderClassifier,
    ModelConfig,
    TrainConfig,
)
from .models.checkpoint import load_checkpoint, save_checkpoint
from .models.gradcheck import gradient_check_classifier, gradient_check_lm
from .models.trainer import (
    EncodedDataset,
    LabeledDataset,
    evaluate_lm,
    fine_tune,
    train_classifier,
    train_lm,
)


def _fail(e: Exception) -> None:
    raise click.ClickException(str(e))


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        _fail(e)


def _write_json(data, out: str | None) -> None:
    text = json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)
    if out is None or out == "-":
        click.echo(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


@click.group()
def main() -> None:
    """Patent-claim auto-complete toolkit."""


# -- parse ------------------------------------------------------------------

@main.command()
@click.argument("input", required=False)
@click.option("--out", help="Write JSON here instead of stdout.")
def parse(input: str | None, out: str | None) -> None:
    """Parse a numbered claim block (file or stdin) into spans and
    antecedent-basis reports."""
    raw = _read_text(input)
    try:
        claims = parse_claim_block(raw)
        parsed = [split_spans(c) for c in claims]
        reports = [(c.number, check_antecedent_basis(c.text)) for c in claims]
    except ClaimForgeError as e:
        _fail(e)
    _write_json({
        "claims": [parsed_claim_to_dict(pc) for pc in parsed],
        "antecedent_reports": [
            {"claim_number": number, "ok": rep.ok,
             "violations": [{"phrase": v.phrase,
                             "char_offset": v.char_offset,
                             "kind": v.kind.value}
                            for v in rep.violations]}
            for number, rep in reports],
    }, out)


# -- corpus -----------------------------------------------------------------

@main.group()
def corpus() -> None:
    """Build and inspect inventor-centric patent corpora."""


@corpus.command("build")
@click.option("--inventor-last", required=True, help="Inventor last name.")
@click.option("--inventor-first", help="Inventor first name.")
@click.option("--location", help="Inventor location filter.")
@click.option("--cpc-section",
              type=click.Choice([s.value for s in CpcSection]),
              help="Restrict the seed query to one CPC section.")
@click.option("--depth", default=0, show_default=True,
              help="Citation-expansion depth.")
@click.option("--include", default="", help="Comma-separated keywords; "
              "patents must mention at least one.")
@click.option("--exclude", default="", help="Comma-separated keywords; "
              "patents mentioning any are dropped.")
@click.option("--citation-direction",
              type=click.Choice(["backward", "both"]), default="backward",
              show_default=True, help="Expand through cited patents only, "
              "or through citations in both directions.")
@click.option("--api-base", help="Override the API base URL "
              "(else CLAIMFORGE_API_BASE, else the default).")
@click.option("--claims-file", help="Local JSONL of patent_id -> claim "
              "block; used instead of fetching claim text.")
@click.option("--rate", default=5.0, show_default=True,
              help="Request rate limit per second.")
@click.option("--out", required=True, help="Corpus JSONL output path.")
def corpus_build(inventor_last, inventor_first, location, cpc_section,
                 depth, include, exclude, citation_direction, api_base,
                 claims_file, rate, out) -> None:
    """Fetch an inventor's patents, expand by citations, filter, persist."""
    try:
        query = InventorQuery(
            name_last=inventor_last, name_first=inventor_first,
            location=location,
            cpc_section=CpcSection(cpc_section) if cpc_section else None)
        spec = CorpusSpec(
            seed=query, citation_depth=depth,
            include_keywords=tuple(k for k in include.split(",") if k),
            exclude_keywords=tuple(k for k in exclude.split(",") if k),
            fetched_at=dt.datetime.now(dt.timezone.utc))
    except ValueError as e:
        _fail(e)
    client = ApiClient(LiveTransport(api_base),
                       rate_limiter=TokenBucketRateLimiter(rate))
    source = None
    if claims_file:
        try:
            source = LocalClaimSource(claims_file)
        except ClaimForgeError as e:
            _fail(e)
    try:
        records = build_corpus(spec, client, source,
                               citation_direction=citation_direction)
        persist_corpus(spec, records, out)
    except ClaimForgeError as e:
        _fail(e)
    click.echo(f"wrote {len(records)} patents to {out}")


@corpus.command("stats")
@click.argument("corpus_path")
def corpus_stats(corpus_path) -> None:
    """Summarize a corpus file."""
    try:
        spec, records = load_corpus(corpus_path)
    except ClaimForgeError as e:
        _fail(e)
    n_claims = sum(len(r.claims) for r in records)
    n_dependent = sum(1 for r in records for c in r.claims
                      if c.depends_on is not None)
    sections: dict[str, int] = {}
    for r in records:
        for s in r.cpc_sections:
            sections[s.value] = sections.get(s.value, 0) + 1
    dates = sorted(r.grant_date for r in records)
    click.echo(f"seed inventor:  {spec.seed.name_last}"
               + (f", {spec.seed.name_first}" if spec.seed.name_first else ""))
    click.echo(f"citation depth: {spec.citation_depth}")
    click.echo(f"patents:        {len(records)}")
    click.echo(f"claims:         {n_claims} "
               f"({n_claims - n_dependent} independent, "
               f"{n_dependent} dependent)")
    if dates:
        click.echo(f"grant dates:    {dates[0]} .. {dates[-1]}")
    click.echo("cpc sections:   "
               + (", ".join(f"{k}={v}" for k, v in sorted(sections.items()))
                  or "none"))


# -- dataset ----------------------------------------------------------------

@main.group()
def dataset() -> None:
    """Turn a corpus into training records and a vocabulary."""


@dataset.command("build")
@click.option("--corpus", "corpus_path", required=True,
              help="Corpus JSONL from `corpus build`.")
@click.option("--format", "fmt",
              type=click.Choice([f.value for f in RecordFormat]),
              default=RecordFormat.INDEPENDENT_PREPENDED.value,
              show_default=True)
@click.option("--direction",
              type=click.Choice([d.value for d in Direction]),
              default=Direction.FORWARD.value, show_default=True)
@click.option("--vocab-size", default=512, show_default=True,
              help="Target vocabulary size for BPE training.")
@click.option("--reuse-vocab", help="Load this vocabulary instead of "
              "training one (keeps forward/backward datasets comparable).")
@click.option("--out-records", required=True,
              help="Training-record JSONL output path.")
@click.option("--out-vocab", help="Vocabulary JSON output path "
              "(required unless --reuse-vocab).")
def dataset_build(corpus_path, fmt, direction, vocab_size, reuse_vocab,
                  out_records, out_vocab) -> None:
    """Build training records; the vocabulary is always trained on the
    forward form so both directions share token ids."""
    if not reuse_vocab and not out_vocab:
        raise click.UsageError("--out-vocab is required when training "
                               "a new vocabulary")
    try:
        _, patents = load_corpus(corpus_path)
        records = build_records(patents, RecordFormat(fmt))
        if reuse_vocab:
            vocab = Vocabulary.load(reuse_vocab)
        else:
            vocab = train_bpe([r.text for r in records], vocab_size)
            vocab.save(out_vocab)
        if Direction(direction) is Direction.BACKWARD:
            records = [reverse_record(r) for r in records]
        save_records(records, out_records)
    except ClaimForgeError as e:
        _fail(e)
    click.echo(f"wrote {len(records)} {direction} records to {out_records}"
               + ("" if reuse_vocab
                  else f"; vocabulary ({len(vocab.tokens)} tokens) "
                       f"to {out_vocab}"))


# -- train / finetune / gradcheck ------------------------------------------

def _train_config(lr, batch_size, steps, seed) -> TrainConfig:
    return TrainConfig(learning_rate=lr, batch_size=batch_size,
                       max_steps=steps, seed=seed)


_MODEL_OPTIONS = [
    click.option("--n-layers", default=2, show_default=True),
    click.option("--n-heads", default=2, show_default=True),
    click.option("--d-model", default=64, show_default=True),
    click.option("--d-ff", default=256, show_default=True),
    click.option("--context-len", default=128, show_default=True),
]

_TRAIN_OPTIONS = [
    click.option("--lr", default=1e-3, show_default=True),
    click.option("--batch-size", default=16, show_default=True),
    click.option("--steps", default=100, show_default=True),
    click.option("--seed", default=0, show_default=True),
]


def _with(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


def _load_labeled(path, vocab, num_labels) -> LabeledDataset:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            pairs.append((d["text"], d["labels"]))
    return LabeledDataset.from_texts(pairs, vocab, num_labels)


@main.command()
@click.option("--records", "records_path",
              help="Training-record JSONL (LM training).")
@click.option("--labeled", "labeled_path", help="JSONL of {text, labels} "
              "(classifier training).")
@click.option("--vocab", "vocab_path", required=True)
@click.option("--kind", type=click.Choice(["lm", "classifier"]),
              default="lm", show_default=True)
@click.option("--num-labels", default=9, show_default=True,
              help="Classifier label count.")
@click.option("--out", required=True, help="Checkpoint output path.")
@_with(_MODEL_OPTIONS)
@_with(_TRAIN_OPTIONS)
def train(records_path, labeled_path, vocab_path, kind, num_labels, out,
          n_layers, n_heads, d_model, d_ff, context_len,
          lr, batch_size, steps, seed) -> None:
    """Train a language model or a span classifier from scratch."""
    try:
        vocab = Vocabulary.load(vocab_path)
        cfg = ModelConfig(vocab_size=len(vocab.tokens), n_layers=n_layers,
                          n_heads=n_heads, d_model=d_model, d_ff=d_ff,
                          context_len=context_len, seed=seed)
        tc = _train_config(lr, batch_size, steps, seed)
        if kind == "lm":
            if not records_path:
                raise click.UsageError("--records is required for --kind lm")
            ds = EncodedDataset.from_texts(
                [r.text for r in load_records(records_path)], vocab)
            model = DecoderLM(cfg)
            model.vocab_hash = vocab.vocab_hash()
            _, losses = train_lm(model, ds, tc)
            final = evaluate_lm(model, ds)
            click.echo(f"trained {steps} steps; final loss "
                       f"{losses[-1]:.4f}, dataset CE {final:.4f}")
        else:
            if not labeled_path:
                raise click.UsageError(
                    "--labeled is required for --kind classifier")
            ds = _load_labeled(labeled_path, vocab, num_labels)
            model = EncoderClassifier(cfg, num_labels)
            model.vocab_hash = vocab.vocab_hash()
            _, losses = train_classifier(model, ds, tc)
            click.echo(f"trained {steps} steps; final loss "
                       f"{losses[-1]:.4f}")
        save_checkpoint(model, out)
    except ClaimForgeError as e:
        _fail(e)
    click.echo(f"checkpoint written to {out}")


@main.command()
@click.option("--checkpoint", required=True, help="Starting checkpoint.")
@click.option("--records", "records_path", required=True)
@click.option("--vocab", "vocab_path", required=True)
@click.option("--out", required=True, help="Fine-tuned checkpoint path.")
@_with(_TRAIN_OPTIONS)
def finetune(checkpoint, records_path, vocab_path, out,
             lr, batch_size, steps, seed) -> None:
    """Continue LM training from a checkpoint with a fresh optimizer."""
    try:
        vocab = Vocabulary.load(vocab_path)
        model, _ = load_checkpoint(checkpoint,
                                   expect_vocab_hash=vocab.vocab_hash())
        if model.kind != "lm":
            raise click.ClickException(
                "finetune works on language models; got a classifier")
        ds = EncodedDataset.from_texts(
            [r.text for r in load_records(records_path)], vocab)
        _, losses = fine_tune(model, ds, _train_config(lr, batch_size,
                                                       steps, seed))
        save_checkpoint(model, out)
    except ClaimForgeError as e:
        _fail(e)
    click.echo(f"fine-tuned {steps} steps (final loss {losses[-1]:.4f}); "
               f"checkpoint written to {out}")


@main.command()
@click.option("--kind", type=click.Choice(["lm", "classifier", "both"]),
              default="both", show_default=True)
@click.option("--d-model", default=12, show_default=True,
              help="Width of the tiny model being verified.")
@click.option("--h", default=1e-4, show_default=True,
              help="Finite-difference step.")
@click.option("--tolerance", default=1e-3, show_default=True)
def gradcheck(kind, d_model, h, tolerance) -> None:
    """Compare analytic gradients against central finite differences for
    every parameter of a tiny model; exits non-zero above tolerance."""
    cfg = ModelConfig(vocab_size=29, n_layers=2, n_heads=2, d_model=d_model,
                      d_ff=2 * d_model, context_len=16, seed=3)
    worst = 0.0
    if kind in ("lm", "both"):
        err = gradient_check_lm(cfg, h=h)
        worst = max(worst, err)
        click.echo(f"lm          max rel err {err:.3e}")
    if kind in ("classifier", "both"):
        err = gradient_check_classifier(cfg, h=h)
        worst = max(worst, err)
        click.echo(f"classifier  max rel err {err:.3e}")
    if worst >= tolerance:
        raise click.ClickException(
            f"max relative error {worst:.3e} >= tolerance {tolerance:.0e}")
    click.echo(f"ok (tolerance {tolerance:.0e})")


# -- complete ---------------------------------------------------------------

@main.command()
@click.option("--context-file", help="Context text (file or - for stdin).")
@click.option("--direction",
              type=click.Choice([d.value for d in Direction]),
              default=Direction.FORWARD.value, show_default=True)
@click.option("--extent",
              type=click.Choice([e.value for e in ExtentLevel]),
              default=ExtentLevel.WORD.value, show_default=True)
@click.option("--k", default=5, show_default=True)
@click.option("--lookahead", default=1, show_default=True,
              help="Chain this many spans (forward span extent only).")
@click.option("--exclude", multiple=True,
              help="Reject candidates containing this pattern (repeatable).")
@click.option("--include", multiple=True,
              help="Span/sentence candidates must contain one (repeatable).")
@click.option("--check-antecedent", is_flag=True,
              help="Reject candidates introducing missing antecedents.")
@click.option("--vocab", "vocab_path", required=True)
@click.option("--forward-checkpoint", "forward_path", required=True)
@click.option("--backward-checkpoint", "backward_path")
@click.option("--relevancy-checkpoint", "relevancy_path")
@click.option("--strategy",
              type=click.Choice([s.value for s in SamplingStrategy]),
              default=SamplingStrategy.TOP_K.value, show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--top-k", default=40, show_default=True)
@click.option("--max-tokens", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", help="Write JSON here instead of stdout.")
def complete(context_file, direction, extent, k, lookahead, exclude,
             include, check_antecedent, vocab_path, forward_path,
             backward_path, relevancy_path, strategy, temperature, top_k,
             max_tokens, seed, out) -> None:
    """Generate ranked completion candidates for a context."""
    from .service.app import load_bundle
    from .service.config import ServiceConfig

    context = _read_text(context_file)
    bundle, _, errors = load_bundle(ServiceConfig(
        vocab_path=vocab_path, forward_checkpoint=forward_path,
        backward_checkpoint=backward_path or "",
        relevancy_checkpoint=relevancy_path or ""))
    if bundle is None or bundle.forward is None:
        _fail(ClaimForgeError("; ".join(errors) or "no model loaded"))
    sc = SamplingConfig(strategy=SamplingStrategy(strategy), top_k=top_k,
                        temperature=temperature, max_tokens=max_tokens,
                        seed=seed)
    try:
        constraints = ConstraintSet(
            must_include=tuple(include), must_exclude=tuple(exclude),
            enforce_antecedent_basis=check_antecedent)
    except ClaimForgeError as e:
        _fail(e)
    try:
        if lookahead > 1:
            cands = lookahead_spans(bundle, context, lookahead, sc,
                                    constraints)
        else:
            cands = generate_candidates(bundle, GenerationRequest(
                context_text=context, direction=Direction(direction),
                extent=ExtentLevel(extent), k=k, constraints=constraints,
                sampling=sc))
    except ClaimForgeError as e:
        _fail(e)
    _write_json([{"text": c.text, "extent": c.extent.value,
                  "lm_logprob": c.lm_logprob, "relevancy": c.relevancy,
                  "score": c.score} for c in cands], out)


# -- measure ----------------------------------------------------------------

@main.command()
@click.option("--checkpoint", required=True, help="Classifier checkpoint.")
@click.option("--vocab", "vocab_path", required=True)
@click.option("--mode", type=click.Choice(["relevancy", "cpc"]),
              required=True)
@click.option("--in", "in_path", required=True,
              help="relevancy: JSONL of {first, second}; "
                   "cpc: JSONL of {text}.")
@click.option("--out", "out_path", required=True,
              help="Scores JSONL; input order is preserved.")
@click.option("--threshold", default=0.5, show_default=True,
              help="CPC label probability threshold.")
def measure(checkpoint, vocab_path, mode, in_path, out_path,
            threshold) -> None:
    """Score span relevancy or CPC section labels over a JSONL file."""
    from .measurement import classify_cpc, score_span_relevancy

    try:
        vocab = Vocabulary.load(vocab_path)
        model, _ = load_checkpoint(checkpoint,
                                   expect_vocab_hash=vocab.vocab_hash())
        if model.kind != "classifier":
            raise click.ClickException("measure needs a classifier "
                                       f"checkpoint; got {model.kind}")
        n = 0
        with open(in_path, encoding="utf-8") as fin, \
                open(out_path, "w", encoding="utf-8") as fout:
            for line in fin:
                if not line.strip():
                    continue
                d = json.loads(line)
                if mode == "relevancy":
                    d["relevancy"] = score_span_relevancy(
                        model, vocab, d["first"], d["second"])
                else:
                    d["sections"] = sorted(
                        s.value for s in classify_cpc(model, vocab,
                                                      d["text"], threshold))
                fout.write(json.dumps(d, ensure_ascii=False,
                                      sort_keys=True) + "\n")
                n += 1
    except (ClaimForgeError, ValueError, KeyError, OSError) as e:
        _fail(e)
    click.echo(f"scored {n} lines to {out_path}")


# -- experiment -------------------------------------------------------------

@main.group()
def experiment() -> None:
    """Fine-tuning experiments with per-checkpoint measurement."""


@experiment.command("slow-motion")
@click.option("--spec", "spec_path", required=True,
              help="Experiment spec JSON.")
@click.option("--out", "rundir", required=True,
              help="Run directory (resumable; metrics.jsonl inside).")
@click.option("--csv", "csv_out", is_flag=True,
              help="Also write metrics.csv for plotting.")
def slow_motion(spec_path, rundir, csv_out) -> None:
    """Fine-tune in small segments, generating and label-counting at every
    checkpoint; writes metrics.jsonl, trend.json, and optionally a CSV."""
    from .experiment import ExperimentSpec, analyze_trend, run_slow_motion

    try:
        with open(spec_path, encoding="utf-8") as f:
            spec = ExperimentSpec.from_dict(json.load(f))
    except (OSError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as e:
        _fail(e)
    try:
        metrics = run_slow_motion(spec, rundir)
        report = analyze_trend(metrics)
    except ClaimForgeError as e:
        _fail(e)

    observed = sorted({s for m in metrics for s in m.label_counts.counts},
                      key=lambda s: s.value)
    trend_path = Path(rundir) / "trend.json"
    trend_path.write_text(json.dumps({
        "per_section": {
            s.value: {"delta_first_to_last":
                      report.get(s).delta_first_to_last,
                      "spearman_rho_vs_step":
                      report.get(s).spearman_rho_vs_step}
            for s in observed}}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    if csv_out:
        joint_keys = sorted({k for m in metrics for k in m.joint_counts})
        csv_path = Path(rundir) / "metrics.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["step"] + [s.value for s in observed]
                       + [f"{a.value}+{b.value}" for a, b in joint_keys])
            for m in metrics:
                w.writerow([m.step]
                           + [m.label_counts.get(s) for s in observed]
                           + [m.joint_counts.get(k, 0) for k in joint_keys])
        click.echo(f"wrote {csv_path}")

    click.echo(f"{len(metrics)} checkpoints "
               f"(steps {metrics[0].step}..{metrics[-1].step})")
    for s in observed:
        t = report.get(s)
        click.echo(f"  section {s.value}: delta "
                   f"{t.delta_first_to_last:+d}, rho "
                   f"{t.spearman_rho_vs_step:+.3f}")
    click.echo(f"trend report written to {trend_path}")


# -- serve ------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", help="Service config JSON; "
              "CLAIMFORGE_* environment variables override fields.")
@click.option("--host", help="Override the bind address.")
@click.option("--port", type=int, help="Override the port.")
def serve(config_path, host, port) -> None:
    """Run the HTTP autocomplete service."""
    import uvicorn

    from .service import create_app, load_config

    try:
        cfg = load_config(config_path)
    except ClaimForgeError as e:
        _fail(e)
    app = create_app(cfg)
    if app.state.load_errors:
        for err in app.state.load_errors:
            click.echo(f"warning: {err}", err=True)
        click.echo("serving degraded (see /v1/health)", err=True)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port,
                log_level="info")


if __name__ == "__main__":
    main()
