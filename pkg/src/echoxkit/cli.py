"""Command-line entry point: ``echoxkit <subcommand> [options]``.

Record outputs are JSONL (``--out``, default stdout). When records go to a
file, a one-line JSON summary is printed on stdout; ``--pretty`` swaps it
for a human-readable table where one exists. Failures print a JSON error
object on stderr: exit 2 for usage errors, 3 for malformed input, 1 for
anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .codebook import Codebook, assign, train_codebook
from .dataqc import TranscriptPair, corpus_stats, filter_corpus, format_stats, read_manifest
from .errors import EchoxError, FormatError
from .losses import (
    DEFAULT_LAMBDA,
    AdapterParams,
    combined_loss,
    cross_entropy,
    cross_entropy_grad,
    denoising_loss,
    grad_check,
)
from .pipeline import ToySystem
from .segmenter import compression_report, segment
from .streamer import TriggerConfig, latency_report, stream_segment
from .unitlm import SpanModel, train_span_model
from .unitseq import UnitSequence, dedup_adjacent, length_ratio

EXIT_USAGE = 2
EXIT_FORMAT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _threads() -> int:
    raw = os.environ.get("ECHOXKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ECHOXKIT_THREADS must be an integer, got {raw!r}") from None
    return (os.cpu_count() or 1) if n == 0 else max(1, n)


def _map(fn, items):
    """Ordered map, threaded when ECHOXKIT_THREADS allows it."""
    items = list(items)
    workers = _threads()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit(args, records):
    lines = "".join(io.iter_jsonl_lines(records))
    if args.out == "-":
        sys.stdout.write(lines)
    else:
        Path(args.out).write_text(lines, encoding="utf-8")


def _summary(args, obj, pretty_text=None):
    if args.out != "-":
        if getattr(args, "pretty", False) and pretty_text is not None:
            print(pretty_text)
        else:
            print(io.dumps(obj))


def _read_units(path) -> list[UnitSequence]:
    return [UnitSequence.from_record(r) for r in io.read_jsonl(path)]


def _field(record, name):
    try:
        return record[name]
    except KeyError:
        raise FormatError(f"record missing field {name!r}") from None


# subcommand handlers -------------------------------------------------------

def cmd_train_codebook(args):
    frames = np.concatenate([io.read_matrix(p) for p in args.frames])
    cb = train_codebook(frames, args.k, args.max_iters, args.seed)
    io.write_matrix(args.out, cb.centroids, io.CODEBOOK_MAGIC)
    print(io.dumps({"k": cb.k, "dim": cb.dim, "iterations": len(cb.inertia_history),
                    "inertia": cb.inertia_history[-1]}))


def cmd_quantize(args):
    cb = Codebook(io.read_matrix(args.codebook, io.CODEBOOK_MAGIC))
    records = [assign(io.read_matrix(p), cb, id=Path(p).stem).to_record() for p in args.frames]
    _emit(args, records)
    _summary(args, {"sequences": len(records), "frames": sum(len(r["units"]) for r in records)})


def cmd_dedup(args):
    seqs = _read_units(args.input)
    out = [dedup_adjacent(s) for s in seqs]
    _emit(args, [s.to_record() for s in out])
    _summary(args, {"sequences": len(out), "units_in": sum(map(len, seqs)),
                    "units_out": sum(map(len, out))})


def cmd_train_unitlm(args):
    model = train_span_model(_read_units(args.input), args.K, args.alpha)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(io.dumps({"K": model.K, "alpha": model.alpha, "vocab_size": model.vocab_size,
                    "spans": len(model.counts)}))


def _load_model(path) -> SpanModel:
    return SpanModel.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_segment(args):
    model = _load_model(args.model)
    seqs = [s for s in _read_units(args.input)]
    out = _map(lambda s: segment(s, model).to_record() if len(s) else
               {"id": s.id, "tokens": [], "score": 0.0}, seqs)
    _emit(args, out)
    _summary(args, {"sequences": len(out), "units": sum(map(len, seqs)),
                    "tokens": sum(len(r["tokens"]) for r in out)})


def cmd_compress_report(args):
    model = _load_model(args.model)
    records = io.read_jsonl(args.input)
    seqs = [UnitSequence.from_record(r) for r in records]
    report = compression_report(seqs, model)
    text_tokens = [r.get("text_tokens") for r in records]
    if all(isinstance(t, int) and t > 0 for t in text_tokens):
        total_text = sum(text_tokens)
        report["unit_length_ratio"] = length_ratio(sum(map(len, seqs)), total_text)
        report["token_length_ratio"] = length_ratio(
            sum(d["tokens"] for d in report["detail"]), total_text)
    if args.pretty:
        lines = [f"{'':<16}{'mean/seq':>10}",
                 f"{'units':<16}{report['mean_units']:>10.2f}",
                 f"{'unit language':<16}{report['mean_tokens']:>10.2f}",
                 f"{'tokens/units':<16}{report['ratio']:>10.3f}"]
        if "unit_length_ratio" in report:
            lines.append(f"{'Length R. unit':<16}{report['unit_length_ratio']:>10.2f}")
            lines.append(f"{'Length R. u.l.':<16}{report['token_length_ratio']:>10.2f}")
        print("\n".join(lines))
    else:
        print(io.dumps(report))


def cmd_losses_eval(args):
    adapter = None
    if args.adapter:
        try:
            adapter = AdapterParams.from_dict(json.loads(Path(args.adapter).read_text()))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed adapter file: {exc}") from None
    out = []
    for rec in io.read_jsonl(args.input):
        try:
            echo_logits = np.asarray(_field(rec, "echo_logits"), dtype=np.float64)
            s2t_logits = np.asarray(_field(rec, "s2t_logits"), dtype=np.float64)
            H = np.asarray(_field(rec, "H"), dtype=np.float64)
            E = np.asarray(_field(rec, "embeddings"), dtype=np.float64)
        except (TypeError, ValueError):
            raise FormatError("loss record holds non-numeric or ragged arrays") from None
        echo = cross_entropy(echo_logits, _field(rec, "echo_targets"))
        s2t = cross_entropy(s2t_logits, _field(rec, "s2t_targets"))
        if H.ndim != 2 or E.ndim != 2:
            raise FormatError("'H' and 'embeddings' must be matrices")
        if adapter is None:
            adapter = AdapterParams.init(H.shape[1], E.shape[1], args.hidden, seed=args.seed)
        den, _ = denoising_loss(H, adapter, E)
        out.append(combined_loss(echo, den, s2t, args.lam).to_dict())
    _emit(args, out)


def cmd_grad_check(args):
    rng = np.random.default_rng(args.seed)
    worst_den = worst_ce = 0.0
    for _ in range(args.instances):
        n, d, h, dout, V = (int(x) for x in rng.integers(1, 9, 5))
        H = rng.normal(size=(n, d))
        E = rng.normal(size=(n, dout))
        adapter = AdapterParams.init(d, dout, h, seed=int(rng.integers(2**31)))

        def den(flat):
            loss, grad = denoising_loss(H, adapter.with_flat(flat), E)
            return loss, grad.flatten()

        worst_den = max(worst_den, grad_check(den, adapter.flatten(), args.step))
        m = int(rng.integers(1, 9))
        logits = rng.normal(size=(m, V))
        targets = rng.integers(0, V, m)

        def ce(flat):
            z = flat.reshape(m, V)
            return cross_entropy(z, targets), cross_entropy_grad(z, targets).ravel()

        worst_ce = max(worst_ce, grad_check(ce, logits.ravel(), args.step))
    print(io.dumps({"instances": args.instances, "step": args.step,
                    "denoising_max_rel_err": worst_den, "cross_entropy_max_rel_err": worst_ce}))


def cmd_stream_sim(args):
    H = io.read_matrix(args.hidden)
    if args.config:
        config = TriggerConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        rng = np.random.default_rng(args.seed)
        config = TriggerConfig(rng.normal(size=H.shape[1]))
    if args.threshold is not None:
        config.threshold = args.threshold
    if args.window is not None:
        config = TriggerConfig(config.trigger_vector, config.threshold, args.window)
    decisions, segments = stream_segment(H, config)
    _emit(args, [d.to_record() for d in decisions])
    summary = {
        "threshold": config.threshold,
        "window": config.window,
        "streaming": latency_report(decisions, config.window),
        "offline": latency_report(decisions, config.window, offline=True),
        "segments": [[r.start, r.stop] for r in segments],
    }
    _summary(args, summary)


def cmd_pipeline_run(args):
    system = ToySystem.build(seed=args.seed)
    out = []
    for i, batch, breakdown in system.run(args.steps, args.lam, args.lr):
        rec = breakdown.to_dict()
        rec.update(step=i, text_len=len(batch.x_prime), speech_len=len(batch.y_prime))
        out.append(rec)
    _emit(args, out)
    manifest = system.manifest()
    if args.manifest:
        Path(args.manifest).write_text(io.dumps(manifest) + "\n", encoding="utf-8")
    _summary(args, {"steps": args.steps, "manifest": manifest})


def cmd_wer_filter(args):
    pairs = [TranscriptPair.from_record(r) for r in io.read_jsonl(args.input)]
    retained, report = filter_corpus(pairs, args.threshold)
    _emit(args, [{"id": p.id, "ref": " ".join(p.reference), "hyp": " ".join(p.hypothesis)}
                 for p in retained])
    _summary(args, report)


def cmd_corpus_stats(args):
    stats = corpus_stats(read_manifest(args.manifest))
    print(format_stats(stats) if args.pretty else io.dumps(stats))


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="echoxkit", description="Speech-unit, echo-training and data-QC toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="<subcommand>")

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help, description=help)
        sp.set_defaults(func=fn)
        return sp

    def out(sp):
        sp.add_argument("--out", default="-", help="output path (default: stdout)")

    sp = add("train-codebook", cmd_train_codebook, "train a k-means codebook on EFX1 frame files")
    sp.add_argument("--frames", nargs="+", required=True)
    sp.add_argument("--k", type=int, default=1000)
    sp.add_argument("--max-iters", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("quantize", cmd_quantize, "map EFX1 frame files to unit sequences")
    sp.add_argument("--frames", nargs="+", required=True)
    sp.add_argument("--codebook", required=True)
    out(sp)

    sp = add("dedup", cmd_dedup, "collapse adjacent repeated units")
    sp.add_argument("--input", required=True)
    out(sp)

    sp = add("train-unitlm", cmd_train_unitlm, "count spans for the unit-language model")
    sp.add_argument("--input", required=True)
    sp.add_argument("--K", type=int, default=4)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--out", required=True)

    sp = add("segment", cmd_segment, "segment unit sequences into unit-language tokens")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", required=True)
    out(sp)

    sp = add("compress-report", cmd_compress_report, "units vs unit-language token counts")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--pretty", action="store_true")

    sp = add("losses-eval", cmd_losses_eval, "evaluate echo, denoising and S2T losses per batch")
    sp.add_argument("--input", required=True)
    sp.add_argument("--adapter")
    sp.add_argument("--hidden", type=int, default=32)
    sp.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    sp.add_argument("--seed", type=int, default=0)
    out(sp)

    sp = add("grad-check", cmd_grad_check, "finite-difference check of the loss gradients")
    sp.add_argument("--instances", type=int, default=50)
    sp.add_argument("--step", type=float, default=1e-5)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("stream-sim", cmd_stream_sim, "simulate the streaming read/write policy")
    sp.add_argument("--hidden", required=True, help="EFX1 matrix of hidden states")
    sp.add_argument("--config", help="TriggerConfig JSON")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--window", type=int)
    sp.add_argument("--seed", type=int, default=0)
    out(sp)

    sp = add("pipeline-run", cmd_pipeline_run, "run seeded echo-training steps on toy models")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--manifest")
    out(sp)

    sp = add("wer-filter", cmd_wer_filter, "keep transcript pairs with WER below a threshold")
    sp.add_argument("--input", required=True)
    sp.add_argument("--threshold", type=float, default=0.05)
    out(sp)

    sp = add("corpus-stats", cmd_corpus_stats, "aggregate a dataset manifest CSV")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--pretty", action="store_true")
    return p


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(io.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return _fail("UsageError", "no subcommand given", EXIT_USAGE)
        args.func(args)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_USAGE)
    except FormatError as exc:
        return _fail("FormatError", str(exc), EXIT_FORMAT)
    except EchoxError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except OSError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
