import json
import subprocess
import sys

import pytest

from ftopipe.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, THREADS_ENV_VAR, dispatch
from ftopipe.corpus import write_corpus
from ftopipe.encoder import save_vocabulary, vocab_tokens_from_texts
from ftopipe.evalharness import synth_corpus


@pytest.fixture
def corpus_file(tmp_path):
    docs = synth_corpus(8, words_per_description=250, seed=17)
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, docs)
    return path


def run_cli(*argv):
    return dispatch([str(part) for part in argv])


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli("ingest", "--bogus") == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run_cli("frobnicate") == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_no_arguments_is_usage_error(self):
        assert run_cli() == EXIT_USAGE

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run_cli("slice", "--corpus", "x.jsonl") == EXIT_USAGE
        assert "--out" in capsys.readouterr().err

    def test_help_exits_zero_and_documents_defaults(self, capsys):
        assert run_cli("slice", "--help") == EXIT_OK
        out = capsys.readouterr().out
        assert "default: 100" in out
        assert "default: 200" in out

    def test_missing_corpus_file_is_data_error(self, capsys, tmp_path):
        assert run_cli("ingest", "--corpus", tmp_path / "absent.jsonl") == EXIT_DATA
        assert "error" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        assert run_cli("--version") == EXIT_OK
        assert "ftopipe" in capsys.readouterr().out


class TestIngest:
    def test_counts_reported(self, corpus_file, capsys):
        assert run_cli("ingest", "--corpus", corpus_file) == EXIT_OK
        assert "accepted=8 skipped=0 total=8" in capsys.readouterr().out

    def test_invalid_line_skipped_and_reported(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        docs = synth_corpus(3, seed=1)
        good_lines = corpus.read_text() if corpus.exists() else None
        assert good_lines is None
        write_corpus(corpus, docs)
        lines = corpus.read_text().splitlines()
        lines.insert(1, json.dumps({"id": "BROKEN"}))
        corpus.write_text("\n".join(lines) + "\n")
        assert run_cli("ingest", "--corpus", corpus) == EXIT_OK
        captured = capsys.readouterr()
        assert "accepted=3 skipped=1 total=4" in captured.out
        assert "skipped line 2" in captured.err

    def test_strict_mode_is_data_error(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(json.dumps({"id": "BROKEN"}) + "\n")
        assert run_cli("ingest", "--corpus", corpus, "--strict") == EXIT_DATA
        assert "error" in capsys.readouterr().err


class TestSliceAndPairs:
    def test_slice_writes_pieces(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "pieces.jsonl"
        code = run_cli(
            "slice", "--corpus", corpus_file, "--out", out,
            "--min-words", 40, "--max-words", 80,
        )
        assert code == EXIT_OK
        assert "docs=8 sliced=8" in capsys.readouterr().out
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert all(set(r) == {"patent_id", "piece_index", "text"} for r in records)

    def test_slice_deterministic_across_threads(self, corpus_file, tmp_path):
        out_1 = tmp_path / "pieces1.jsonl"
        out_4 = tmp_path / "pieces4.jsonl"
        run_cli("slice", "--corpus", corpus_file, "--out", out_1, "--threads", 1)
        run_cli("slice", "--corpus", corpus_file, "--out", out_4, "--threads", 4)
        assert out_1.read_bytes() == out_4.read_bytes()

    def test_pairs_balanced_stats_line(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "pairs.jsonl"
        code = run_cli(
            "pairs", "--corpus", corpus_file, "--out", out,
            "--min-words", 40, "--max-words", 80,
        )
        assert code == EXIT_OK
        stats = capsys.readouterr().out
        records = [json.loads(line) for line in out.read_text().splitlines()]
        label_1 = sum(r["label"] == 1 for r in records)
        assert f"pairs={len(records)}" in stats
        assert f"label_1={label_1}" in stats
        assert f"label_0={len(records) - label_1}" in stats
        assert label_1 == len(records) - label_1

    def test_pairs_validation_split(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "train.jsonl"
        val = tmp_path / "val.jsonl"
        code = run_cli(
            "pairs", "--corpus", corpus_file, "--out", out,
            "--min-words", 40, "--max-words", 80,
            "--validation", "0.25", "--validation-out", val,
        )
        assert code == EXIT_OK
        n_train = len(out.read_text().splitlines())
        n_val = len(val.read_text().splitlines())
        assert n_val == round((n_train + n_val) * 0.25)
        assert f"train={n_train} validation={n_val}" in capsys.readouterr().out

    def test_validation_without_out_path_is_data_error(self, corpus_file, tmp_path, capsys):
        code = run_cli(
            "pairs", "--corpus", corpus_file, "--out", tmp_path / "p.jsonl",
            "--validation", "0.2",
        )
        assert code == EXIT_DATA
        assert "--validation-out" in capsys.readouterr().err


class TestEncodeAndTrain:
    def make_pairs(self, corpus_file, tmp_path):
        pairs_path = tmp_path / "pairs.jsonl"
        run_cli(
            "pairs", "--corpus", corpus_file, "--out", pairs_path,
            "--min-words", 40, "--max-words", 80,
        )
        return pairs_path

    def test_encode_fixed_length_records(self, corpus_file, tmp_path, capsys):
        pairs_path = self.make_pairs(corpus_file, tmp_path)
        texts = []
        for line in pairs_path.read_text().splitlines():
            record = json.loads(line)
            texts.extend([record["description"], record["claim"]])
        vocab_path = tmp_path / "vocab.txt"
        save_vocabulary(vocab_path, vocab_tokens_from_texts(texts))
        out = tmp_path / "encoded.jsonl"
        code = run_cli(
            "encode", "--pairs", pairs_path, "--vocab", vocab_path,
            "--out", out, "--max-len", 128,
        )
        assert code == EXIT_OK
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) == len(pairs_path.read_text().splitlines())
        assert all(len(r["token_ids"]) == 128 for r in records)
        assert all(len(r["segment_ids"]) == 128 for r in records)
        assert all(len(r["attention_mask"]) == 128 for r in records)
        assert all(r["label"] in (0, 1) for r in records)
        assert "encoded=" in capsys.readouterr().out

    def test_train_baseline_writes_model(self, corpus_file, tmp_path, capsys):
        pairs_path = self.make_pairs(corpus_file, tmp_path)
        model_path = tmp_path / "model.json"
        code = run_cli(
            "train-baseline", "--pairs", pairs_path,
            "--model-out", model_path, "--epochs", 50,
        )
        assert code == EXIT_OK
        payload = json.loads(model_path.read_text())
        assert payload["version"] == 1
        assert len(payload["weights"]) == 5
        out = capsys.readouterr().out
        assert "final_loss=" in out
        assert "train_accuracy=" in out

    def test_single_class_pairs_is_data_error(self, tmp_path, capsys):
        pairs_path = tmp_path / "pairs.jsonl"
        record = {
            "desc_patent_id": "P1", "claim_patent_id": "P1", "piece_index": 0,
            "claim_number": 1, "description": "gear torque", "claim": "gear",
            "label": 1,
        }
        pairs_path.write_text(json.dumps(record) + "\n")
        code = run_cli(
            "train-baseline", "--pairs", pairs_path,
            "--model-out", tmp_path / "m.json",
        )
        assert code == EXIT_DATA
        assert "error" in capsys.readouterr().err


class TestRank:
    def test_rank_prints_table_and_jsonl(self, corpus_file, tmp_path, capsys):
        pairs_path = tmp_path / "pairs.jsonl"
        run_cli(
            "pairs", "--corpus", corpus_file, "--out", pairs_path,
            "--min-words", 40, "--max-words", 80,
        )
        model_path = tmp_path / "model.json"
        run_cli(
            "train-baseline", "--pairs", pairs_path,
            "--model-out", model_path, "--epochs", 80,
        )
        capsys.readouterr()

        docs = synth_corpus(8, words_per_description=250, seed=17)
        query_path = tmp_path / "query.txt"
        query_path.write_text(docs[2].abstract + "\n")
        jsonl_out = tmp_path / "ranked.jsonl"
        code = run_cli(
            "rank", "--query", query_path, "--pool", corpus_file,
            "--model", model_path, "--query-id", docs[2].id,
            "--top-k", 5, "--jsonl-out", jsonl_out,
        )
        assert code == EXIT_OK
        table = capsys.readouterr().out
        assert "Pos. / FTO-patent" in table
        assert f"1.  {docs[2].id}" in table
        rows = [json.loads(line) for line in jsonl_out.read_text().splitlines()]
        assert len(rows) == 5
        assert rows[0]["patent_id"] == docs[2].id
        assert rows[0]["rank"] == 1

    def test_rank_without_model_is_data_error(self, corpus_file, tmp_path, capsys):
        query_path = tmp_path / "query.txt"
        query_path.write_text("gear torque assembly\n")
        code = run_cli("rank", "--query", query_path, "--pool", corpus_file)
        assert code == EXIT_DATA
        assert "--model" in capsys.readouterr().err


class TestEval:
    def test_synth_eval_end_to_end(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code = run_cli(
            "eval", "--synth-patents", 16, "--out-dir", out_dir,
            "--n-references", 2, "--epochs", 60, "--seed", 3,
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "recall@1=" in out
        assert out.count("self_rank=") == 2
        assert (out_dir / "report.json").exists()
        assert (out_dir / "tables.txt").exists()

    def test_both_corpus_sources_is_data_error(self, corpus_file, tmp_path, capsys):
        code = run_cli(
            "eval", "--corpus", corpus_file, "--synth-patents", 8,
            "--out-dir", tmp_path / "run",
        )
        assert code == EXIT_DATA
        assert "error" in capsys.readouterr().err

    def test_no_corpus_source_is_data_error(self, tmp_path):
        assert run_cli("eval", "--out-dir", tmp_path / "run") == EXIT_DATA


class TestSynthCommand:
    def test_writes_requested_patent_count(self, tmp_path, capsys):
        out = tmp_path / "synth.jsonl"
        assert run_cli("synth", "--n-patents", 5, "--out", out) == EXIT_OK
        assert len(out.read_text().splitlines()) == 5
        assert "patents=5" in capsys.readouterr().out


class TestConfigFile:
    def test_config_supplies_values(self, corpus_file, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"seed": 9, "min_words": 40, "max_words": 80}))
        from_config = tmp_path / "from_config.jsonl"
        from_flags = tmp_path / "from_flags.jsonl"
        run_cli("slice", "--corpus", corpus_file, "--out", from_config, "--config", config_path)
        run_cli(
            "slice", "--corpus", corpus_file, "--out", from_flags,
            "--seed", 9, "--min-words", 40, "--max-words", 80,
        )
        assert from_config.read_bytes() == from_flags.read_bytes()

    def test_flags_override_config(self, corpus_file, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"min_words": 40, "max_words": 80, "seed": 9}))
        overridden = tmp_path / "overridden.jsonl"
        explicit = tmp_path / "explicit.jsonl"
        run_cli(
            "slice", "--corpus", corpus_file, "--out", overridden,
            "--config", config_path, "--seed", 123,
        )
        run_cli(
            "slice", "--corpus", corpus_file, "--out", explicit,
            "--seed", 123, "--min-words", 40, "--max-words", 80,
        )
        assert overridden.read_bytes() == explicit.read_bytes()

    def test_non_object_config_is_data_error(self, corpus_file, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text("[1, 2]")
        code = run_cli(
            "slice", "--corpus", corpus_file,
            "--out", tmp_path / "out.jsonl", "--config", config_path,
        )
        assert code == EXIT_DATA
        assert "JSON object" in capsys.readouterr().err


class TestThreadsEnv:
    def test_env_value_used(self, corpus_file, tmp_path, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        out_env = tmp_path / "env.jsonl"
        out_flag = tmp_path / "flag.jsonl"
        run_cli("slice", "--corpus", corpus_file, "--out", out_env)
        monkeypatch.delenv(THREADS_ENV_VAR)
        run_cli("slice", "--corpus", corpus_file, "--out", out_flag, "--threads", 1)
        assert out_env.read_bytes() == out_flag.read_bytes()

    def test_bad_env_value_is_data_error(self, corpus_file, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(THREADS_ENV_VAR, "lots")
        code = run_cli("slice", "--corpus", corpus_file, "--out", tmp_path / "o.jsonl")
        assert code == EXIT_DATA
        assert THREADS_ENV_VAR in capsys.readouterr().err


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ftopipe", "--version"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert "ftopipe" in proc.stdout
