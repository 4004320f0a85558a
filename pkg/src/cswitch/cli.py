"""Single cswitch entry point exposing the full pipeline as subcommands."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import augment, lm, pipeline, synth
from .corpus import corpus_stats, load_manifest
from .cslg import read_cslg
from .ctc import DecodeParams, beam_decode, greedy_decode
from .errors import PipelineError, ToolError


def _add_stats(sub) -> None:
    p = sub.add_parser("stats", help="corpus summary per language pair")
    p.add_argument("--manifest", required=True)


def _add_augment(sub) -> None:
    p = sub.add_parser("augment", help="render transcripts under a scheme")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scheme", choices=augment.SCHEMES, default="plain")
    p.add_argument("--out", help="output file (default stdout)")


def _add_lm_train(sub) -> None:
    p = sub.add_parser("lm-train", help="train an n-gram model, write ARPA")
    p.add_argument("--manifest", required=True)
    p.add_argument("--order", type=int, choices=(2, 3), default=3)
    p.add_argument(
        "--smoothing", choices=("kneser_ney", "add_k", "mle"), default="kneser_ney"
    )
    p.add_argument("--discount", type=float, default=0.75)
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--scheme", choices=augment.SCHEMES, default="plain")
    p.add_argument("--out", required=True)


def _add_lm_score(sub) -> None:
    p = sub.add_parser("lm-score", help="log10 score sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--sentence", action="append", default=[])
    p.add_argument("--text", help="file with one sentence per line")


def _add_lm_ppl(sub) -> None:
    p = sub.add_parser("lm-ppl", help="perplexity of a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest")
    p.add_argument("--text", help="file with one sentence per line")
    p.add_argument("--scheme", choices=augment.SCHEMES, default="plain")


def _add_decode(sub) -> None:
    p = sub.add_parser("decode", help="decode CSLG logit files")
    p.add_argument("--logits", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--manifest", help="decode these utterances, in manifest order")
    p.add_argument("--lm", help="ARPA model for shallow fusion")
    p.add_argument("--alpha", type=float, default=1.5, help="LM weight")
    p.add_argument("--beta", type=float, default=1.0, help="word bonus")
    p.add_argument("--beam", type=int, default=0, help="beam width (0 = greedy)")
    p.add_argument("--out", help="output hypotheses file (default stdout)")


def _add_lid_eval(sub) -> None:
    p = sub.add_parser("lid-eval", help="score frame-level language-ID posteriors")
    p.add_argument("--posteriors", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", choices=("text", "records"), default="text")


def _add_evaluate(sub) -> None:
    p = sub.add_parser("evaluate", help="WER/CER report for a hypotheses file")
    p.add_argument("--ref", required=True, help="reference manifest")
    p.add_argument("--hyp", required=True, help="hypotheses file (id TAB text)")
    p.add_argument("--scheme", choices=augment.SCHEMES, default="plain")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.add_argument("--worst", type=int, default=10)


def _add_synth(sub) -> None:
    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-utts", type=int, default=100)
    p.add_argument("--eng-lexicon", type=int, default=30)
    p.add_argument("--bantu-lexicon", type=int, default=30)
    p.add_argument("--switch-prob", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.0)


def _add_pipeline(sub) -> None:
    p = sub.add_parser("pipeline", help="train LM, decode, and report WER")
    p.add_argument("--manifest", required=True)
    p.add_argument("--logits", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", choices=augment.SCHEMES, default="plain")
    p.add_argument("--order", type=int, choices=(0, 2, 3), default=0)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cswitch",
        description="code-switched ASR decoding, language modeling, and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for adder in (
        _add_stats,
        _add_augment,
        _add_lm_train,
        _add_lm_score,
        _add_lm_ppl,
        _add_decode,
        _add_lid_eval,
        _add_evaluate,
        _add_synth,
        _add_pipeline,
    ):
        adder(sub)
    return parser


def _manifest_sentences(path: str, scheme: str) -> list[list[str]]:
    return [augment.render(u, scheme).split() for u in load_manifest(path)]


def _text_sentences(path: str) -> list[list[str]]:
    with open(path, encoding="utf-8") as handle:
        return [line.split() for line in handle.read().splitlines() if line.strip()]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n" if text else "", encoding="utf-8")
    else:
        print(text)


def _cmd_stats(args) -> int:
    stats = corpus_stats(load_manifest(args.manifest))
    print(f"{'pair':<8} {'utterances':>10} {'hours':>8}")
    for pair, count, hours in stats.rows():
        print(f"{pair:<8} {count:>10} {hours:>8.2f}")
    return 0


def _cmd_augment(args) -> int:
    lines = [
        f"{utt.id}\t{augment.render(utt, args.scheme)}"
        for utt in load_manifest(args.manifest)
    ]
    _emit("\n".join(lines), args.out)
    return 0


def _smoothing_from(args) -> lm.Smoothing:
    if args.smoothing == "kneser_ney":
        return lm.Smoothing.kneser_ney(args.discount)
    if args.smoothing == "add_k":
        return lm.Smoothing.add_k(args.k)
    return lm.Smoothing.mle()


def _cmd_lm_train(args) -> int:
    sentences = _manifest_sentences(args.manifest, args.scheme)
    model = lm.train(sentences, args.order, _smoothing_from(args))
    lm.write_arpa(model, args.out)
    print(f"wrote {args.out} (order {model.order}, vocab {len(model.vocab)})")
    return 0


def _cmd_lm_score(args) -> int:
    model = lm.read_arpa(args.model)
    sentences = [s.split() for s in args.sentence]
    if args.text:
        sentences.extend(_text_sentences(args.text))
    if not sentences:
        raise PipelineError("nothing to score: pass --sentence or --text")
    for sent in sentences:
        print(f"{lm.score_sentence(model, sent):.6f}\t{' '.join(sent)}")
    return 0


def _cmd_lm_ppl(args) -> int:
    model = lm.read_arpa(args.model)
    if args.manifest:
        sentences = _manifest_sentences(args.manifest, args.scheme)
    elif args.text:
        sentences = _text_sentences(args.text)
    else:
        raise PipelineError("pass --manifest or --text")
    print(f"perplexity {lm.perplexity(model, sentences):.4f}")
    return 0


def _cmd_decode(args) -> int:
    vocab = augment.read_vocab(args.vocab)
    logits_dir = Path(args.logits)
    if args.manifest:
        ids = [u.id for u in load_manifest(args.manifest)]
        missing = [i for i in ids if not (logits_dir / f"{i}.cslg").is_file()]
        if missing:
            raise PipelineError(f"missing logit files for: {', '.join(missing[:20])}")
    else:
        ids = sorted(p.stem for p in logits_dir.glob("*.cslg"))
        if not ids:
            raise PipelineError(f"no .cslg files in {logits_dir}")
    params = None
    if args.lm or args.beam:
        model = lm.read_arpa(args.lm) if args.lm else None
        params = DecodeParams(
            beam_width=max(args.beam, 1),
            lm_weight=args.alpha if model is not None else 0.0,
            word_bonus=args.beta,
            lm=model,
        )
    lines = []
    for utt_id in ids:
        matrix, symbols = read_cslg(logits_dir / f"{utt_id}.cslg")
        if list(symbols) != list(vocab.symbols):
            raise PipelineError(f"vocabulary mismatch for {utt_id!r}")
        if params is None:
            text = greedy_decode(matrix, vocab)
        else:
            text = beam_decode(matrix, vocab, params)[0].text
        lines.append(f"{utt_id}\t{text}")
    _emit("\n".join(lines), args.out)
    return 0


def _cmd_lid_eval(args) -> int:
    report = pipeline.lid_eval_corpus(load_manifest(args.manifest), args.posteriors)
    print(report.to_text() if args.format == "text" else report.to_records())
    return 0


def _cmd_evaluate(args) -> int:
    utts = load_manifest(args.ref)
    hyps = pipeline.read_hypotheses(args.hyp)
    report = pipeline.evaluate_hypotheses(utts, hyps, args.scheme)
    print(
        report.to_text(worst_n=args.worst)
        if args.format == "text"
        else report.to_records()
    )
    return 0


def _cmd_synth(args) -> int:
    params = synth.SynthParams(
        seed=args.seed,
        n_utts=args.n_utts,
        eng_lexicon=args.eng_lexicon,
        bantu_lexicon=args.bantu_lexicon,
        switch_prob=args.switch_prob,
        noise=args.noise,
    )
    paths = synth.synth_corpus(args.out, params)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_pipeline(args) -> int:
    workers = int(os.environ.get("CSWITCH_THREADS", args.workers))
    config = pipeline.ExperimentConfig(
        manifest=Path(args.manifest),
        logits_dir=Path(args.logits),
        vocab=Path(args.vocab),
        out_dir=Path(args.out),
        scheme=args.scheme,
        lm_order=args.order,
        beam_width=args.beam,
        lm_weight=args.alpha,
        word_bonus=args.beta,
        seed=args.seed,
        workers=workers,
    )
    report = pipeline.run_pipeline(config)
    print(report.to_text())
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "augment": _cmd_augment,
    "lm-train": _cmd_lm_train,
    "lm-score": _cmd_lm_score,
    "lm-ppl": _cmd_lm_ppl,
    "decode": _cmd_decode,
    "lid-eval": _cmd_lid_eval,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ToolError as err:
        print(f"{err.code}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"E_IO: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
