"""Fixture files and an in-process runner for exercising the CLI."""

import contextlib
import io as _io
import json
from pathlib import Path

import numpy as np

from echoxkit import io
from echoxkit.cli import main
from echoxkit.synthetic import TOY_CORPUS, planted_clusters

DATA = Path(__file__).parent / "data"
PACKAGE_DATA = Path(__file__).parents[1] / "src" / "echoxkit" / "data"


def run_cli(argv):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    out, err = _io.StringIO(), _io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def build_inputs(root: Path) -> dict:
    """Write every input file the subcommands need under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    points, _ = planted_clusters(seed=1, n_points=120, n_centers=6, dim=3, spread=0.4)
    frames = []
    for i in range(3):
        path = root / f"utt{i}.efx"
        io.write_matrix(path, points[rng.permutation(120)[:40]], io.FRAMES_MAGIC)
        frames.append(path)

    hidden = root / "hidden.efx"
    H = rng.normal(0.0, 1.0, (30, 4))
    H[:, 0] = -np.abs(H[:, 0])
    H[[6, 15, 24]] = [1.0, 0.2, 0.0, 0.0]
    io.write_matrix(hidden, H, io.FRAMES_MAGIC)
    trigger = root / "trigger.json"
    trigger.write_text(json.dumps({"trigger_vector": [1, 0, 0, 0], "threshold": 0.1, "window": 5}))

    losses = root / "losses.jsonl"
    records = []
    for i in range(3):
        records.append({
            "echo_logits": rng.normal(size=(4, 6)).tolist(), "echo_targets": rng.integers(0, 6, 4).tolist(),
            "s2t_logits": rng.normal(size=(3, 5)).tolist(), "s2t_targets": rng.integers(0, 5, 3).tolist(),
            "H": rng.normal(size=(3, 4)).tolist(), "embeddings": rng.normal(size=(3, 5)).tolist(),
        })
    io.write_jsonl(losses, records)

    transcripts = root / "pairs.jsonl"
    io.write_jsonl(transcripts, [
        {"id": "a", "ref": "the cat sat on the mat", "hyp": "the cat sat on the mat"},
        {"id": "b", "ref": "the cat sat", "hyp": "the bat sat"},
        {"id": "c", "ref": " ".join(["word"] * 20), "hyp": " ".join(["word"] * 19 + ["bird"])},
        {"id": "d", "ref": " ".join(["word"] * 25), "hyp": " ".join(["word"] * 24 + ["bird"])},
    ])
    return {"frames": frames, "hidden": hidden, "trigger": trigger, "losses": losses,
            "pairs": transcripts, "manifest": DATA / "corpus_manifest.csv",
            "toy": PACKAGE_DATA / TOY_CORPUS}


def command_lines(inp: dict, out: Path) -> dict:
    """Argument lists for every subcommand, writing artifacts into ``out``.

    Later commands read artifacts produced by earlier ones, so run them in order.
    """
    out.mkdir(parents=True, exist_ok=True)
    return {
        "train-codebook": ["train-codebook", "--frames", *inp["frames"], "--k", 6, "--seed", 3,
                           "--out", out / "codebook.ecb"],
        "quantize": ["quantize", "--frames", *inp["frames"], "--codebook", out / "codebook.ecb",
                     "--out", out / "units.jsonl"],
        "dedup": ["dedup", "--input", inp["toy"], "--out", out / "dedup.jsonl"],
        "train-unitlm": ["train-unitlm", "--input", out / "dedup.jsonl", "--K", 4, "--out", out / "model.json"],
        "segment": ["segment", "--input", out / "dedup.jsonl", "--model", out / "model.json",
                    "--out", out / "segments.jsonl"],
        "compress-report": ["compress-report", "--input", out / "dedup.jsonl", "--model", out / "model.json"],
        "losses-eval": ["losses-eval", "--input", inp["losses"], "--seed", 1, "--out", out / "losses.jsonl"],
        "grad-check": ["grad-check", "--instances", 5, "--seed", 2],
        "stream-sim": ["stream-sim", "--hidden", inp["hidden"], "--config", inp["trigger"],
                       "--out", out / "decisions.jsonl"],
        "pipeline-run": ["pipeline-run", "--seed", 4, "--steps", 5, "--out", out / "steps.jsonl",
                         "--manifest", out / "manifest.json"],
        "wer-filter": ["wer-filter", "--input", inp["pairs"], "--out", out / "kept.jsonl"],
        "corpus-stats": ["corpus-stats", "--manifest", inp["manifest"]],
    }
