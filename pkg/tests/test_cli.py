import json
import subprocess
import sys

import numpy as np
import pytest

from clikit import build_inputs, command_lines, run_cli
from echoxkit import io
from echoxkit.segmenter import segment_brute_force
from echoxkit.unitlm import SpanModel
from echoxkit.unitseq import UnitSequence, dedup_adjacent


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    inputs = build_inputs(root / "in")
    cmds = command_lines(inputs, root / "out")
    results = {name: run_cli(argv) for name, argv in cmds.items()}
    return inputs, root / "out", results


def records(path):
    return io.read_jsonl(path)


class TestSubcommands:
    def test_all_succeed(self, workspace):
        _, _, results = workspace
        for name, (code, _, err) in results.items():
            assert code == 0, (name, err)

    def test_codebook_and_quantize(self, workspace):
        inputs, out, results = workspace
        assert io.read_matrix(out / "codebook.ecb", io.CODEBOOK_MAGIC).shape == (6, 3)
        units = records(out / "units.jsonl")
        assert [r["id"] for r in units] == ["utt0", "utt1", "utt2"]
        assert all(len(r["units"]) == 40 and r["vocab_size"] == 6 for r in units)
        assert json.loads(results["train-codebook"][1])["k"] == 6

    def test_segment_scores_match_oracle(self, workspace):
        _, out, _ = workspace
        model = SpanModel.from_json((out / "model.json").read_text())
        seqs = [UnitSequence.from_record(r) for r in records(out / "dedup.jsonl")]
        checked = 0
        for seq, rec in zip(seqs, records(out / "segments.jsonl")):
            assert [u for tok in rec["tokens"] for u in tok] == list(seq.units)
            if len(seq) <= 12:
                oracle = segment_brute_force(seq, model)
                assert rec["score"] == oracle.score
                assert rec["tokens"] == [list(t) for t in oracle.tokens]
                checked += 1
        assert checked >= 10

    def test_round_trip_quantize_dedup_segment(self, workspace, tmp_path):
        _, out, _ = workspace
        assert run_cli(["dedup", "--input", out / "units.jsonl", "--out", tmp_path / "d.jsonl"])[0] == 0
        assert run_cli(["train-unitlm", "--input", tmp_path / "d.jsonl", "--K", 3,
                        "--out", tmp_path / "m.json"])[0] == 0
        assert run_cli(["segment", "--input", tmp_path / "d.jsonl", "--model", tmp_path / "m.json",
                        "--out", tmp_path / "s.jsonl"])[0] == 0
        for u, d, s in zip(records(out / "units.jsonl"), records(tmp_path / "d.jsonl"),
                           records(tmp_path / "s.jsonl")):
            assert d["units"] == dedup_adjacent(u["units"])
            assert [x for tok in s["tokens"] for x in tok] == d["units"]

    def test_compress_report(self, workspace, tmp_path):
        _, out, results = workspace
        report = json.loads(results["compress-report"][1])
        assert report["sequences"] == 60 and report["ratio"] < 1.0
        with_text = tmp_path / "text.jsonl"
        io.write_jsonl(with_text, [dict(r, text_tokens=2) for r in records(out / "dedup.jsonl")])
        code, text, _ = run_cli(["compress-report", "--input", with_text, "--model",
                                 out / "model.json", "--pretty"])
        assert code == 0 and "Length R. unit" in text

    def test_losses_eval(self, workspace):
        _, out, _ = workspace
        for rec in records(out / "losses.jsonl"):
            assert rec["lambda"] == 0.2
            assert rec["total"] == rec["echo"] + 0.2 * rec["denoising"] + rec["s2t"]

    def test_grad_check(self, workspace):
        report = json.loads(workspace[2]["grad-check"][1])
        assert report["denoising_max_rel_err"] <= 1e-4
        assert report["cross_entropy_max_rel_err"] <= 1e-6

    def test_stream_sim(self, workspace):
        _, out, results = workspace
        decisions = records(out / "decisions.jsonl")
        writes = [d for d in decisions if d["action"] == "WRITE"]
        assert [d["position"] for d in writes] == [6, 15, 24]
        assert all(d["similarity"] > 0.1 for d in writes)
        summary = json.loads(results["stream-sim"][1])
        assert summary["streaming"]["latency"] == 8
        assert summary["offline"]["latency"] == 30

    def test_pipeline_run(self, workspace):
        _, out, results = workspace
        steps = records(out / "steps.jsonl")
        assert [s["step"] for s in steps] == list(range(5))
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest == json.loads(results["pipeline-run"][1])["manifest"]

    def test_wer_filter(self, workspace):
        _, out, results = workspace
        assert [r["id"] for r in records(out / "kept.jsonl")] == ["a", "d"]
        assert json.loads(results["wer-filter"][1])["dropped"] == 2

    def test_corpus_stats(self, workspace):
        stats = json.loads(workspace[2]["corpus-stats"][1])
        assert stats["total"]["size"] == 1_500_184
        code, text, _ = run_cli(["corpus-stats", "--manifest", workspace[0]["manifest"], "--pretty"])
        assert "6,194" in text

    def test_stdout_output(self, workspace):
        inputs, _, _ = workspace
        code, text, _ = run_cli(["wer-filter", "--input", inputs["pairs"]])
        assert code == 0
        assert [json.loads(line)["id"] for line in text.splitlines()] == ["a", "d"]

    def test_threads_keep_order(self, workspace, monkeypatch):
        _, out, _ = workspace
        argv = ["segment", "--input", out / "dedup.jsonl", "--model", out / "model.json"]
        serial = run_cli(argv)[1]
        monkeypatch.setenv("ECHOXKIT_THREADS", "4")
        assert run_cli(argv)[1] == serial


class TestErrors:
    def test_no_arguments(self):
        code, _, err = run_cli([])
        assert code == 2
        assert json.loads(err.splitlines()[-1])["error"] == "UsageError"

    def test_unknown_subcommand(self):
        assert run_cli(["transmogrify"])[0] == 2

    def test_malformed_input(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"units": [1, 2]\n')
        code, _, err = run_cli(["dedup", "--input", bad])
        assert code == 3
        assert json.loads(err)["error"] == "FormatError"

    def test_bad_matrix_magic(self, tmp_path):
        path = tmp_path / "f.efx"
        io.write_matrix(path, np.zeros((2, 2)), io.CODEBOOK_MAGIC)
        assert run_cli(["train-codebook", "--frames", path, "--k", 1, "--out", tmp_path / "c"])[0] == 3

    def test_missing_file(self, tmp_path):
        assert run_cli(["dedup", "--input", tmp_path / "nope.jsonl"])[0] == 1

    def test_domain_error(self, tmp_path):
        path = tmp_path / "f.efx"
        io.write_matrix(path, np.zeros((2, 2)), io.FRAMES_MAGIC)
        code, _, err = run_cli(["train-codebook", "--frames", path, "--k", 5, "--out", tmp_path / "c"])
        assert code == 1 and json.loads(err)["error"] == "InsufficientData"

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "echoxkit"], capture_output=True, text=True)
        assert proc.returncode == 2
        assert "usage" in proc.stderr
