"""Config parsing/overrides and the command-line pipeline surface."""

import json

import numpy as np
import pytest

from conceptlm import cli, model
from conceptlm.config import load_config, parse_kv_text
from conceptlm.errors import ConfigError
from conceptlm.grammar import default_grammar


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("demo")
    default_grammar().write_demo(tmp)
    return tmp


@pytest.fixture(scope="module")
def extracted(demo_dir):
    """One extract+augment run shared by the read-only CLI tests."""
    cfg = str(demo_dir / "demo.cfg")
    assert cli.main(["extract", "--config", cfg]) == 0
    assert cli.main(["augment", "--config", cfg]) == 0
    return demo_dir


class TestConfigParsing:
    def test_parse_kv_text(self):
        kv = parse_kv_text("a = 1\n# comment\nb.c = two words  # trailing\n\n")
        assert kv == {"a": "1", "b.c": "two words"}

    def test_line_without_equals_rejected(self):
        with pytest.raises(ConfigError, match=":1:"):
            parse_kv_text("nonsense")

    def test_missing_required_keys_listed(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("seed = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="missing required keys"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_env_override_and_cli_priority(self, demo_dir):
        cfg_path = demo_dir / "demo.cfg"
        env = {"CONCEPT_SERVICE_URL": "http://env.example/complete"}
        cfg = load_config(cfg_path, env=env)
        assert cfg.concept_url == "http://env.example/complete"
        cfg = load_config(cfg_path, overrides={"concept_service.url": "http://cli.example/x"},
                          env=env)
        assert cfg.concept_url == "http://cli.example/x"

    def test_dotted_override_changes_value(self, demo_dir):
        cfg = load_config(demo_dir / "demo.cfg", overrides={"train.epochs": "2"})
        assert cfg.epochs == 2

    def test_unknown_variant_rejected(self, demo_dir):
        with pytest.raises(ConfigError, match="valid ids"):
            load_config(demo_dir / "demo.cfg", overrides={"variants": "ncp-magic"})

    def test_relative_paths_resolve_against_config_dir(self, demo_dir):
        cfg = load_config(demo_dir / "demo.cfg")
        assert cfg.lexicon_path == (demo_dir / "lexicon.tsv").resolve()
        assert cfg.concept_url == f"replay:{(demo_dir / 'cassette.jsonl').resolve()}"


class TestCliErrors:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "none.cfg"
        assert cli.main(["extract", "--config", str(missing)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_variant_exits_3_and_lists_ids(self, extracted, capsys):
        rc = cli.main(["train", "--config", str(extracted / "demo.cfg"),
                       "--variant", "ncp-magic/synonym"])
        assert rc == 3
        err = capsys.readouterr().err
        assert "base" in err and "ntp/synonym" in err and "ncp-loss/synonym/context-free" in err

    def test_missing_checkpoint_exits_3_naming_it(self, extracted, capsys):
        rc = cli.main(["eval", "--config", str(extracted / "demo.cfg"),
                       "--checkpoint", str(extracted / "out/checkpoints/ghost.ckpt")])
        assert rc == 3
        assert "ghost.ckpt" in capsys.readouterr().err

    def test_unknown_override_flag_exits_2(self, extracted):
        rc = cli.main(["extract", "--config", str(extracted / "demo.cfg"),
                       "--bogus", "1"])
        assert rc == 2

    def test_trainable_variant_requires_domain(self, extracted):
        rc = cli.main(["train", "--config", str(extracted / "demo.cfg"),
                       "--variant", "ntp/synonym"])
        assert rc == 2


class TestPipelineOutputs:
    def test_extract_emits_all_level_source_files(self, extracted):
        for domain in ("cafe", "garage"):
            records_dir = extracted / "out" / domain / "records"
            names = sorted(p.name for p in records_dir.glob("*.jsonl"))
            assert names == [
                "records-hypernym-context-aware.jsonl",
                "records-hypernym-context-free.jsonl",
                "records-none-no-concept.jsonl",
                "records-synonym-context-aware.jsonl",
                "records-synonym-context-free.jsonl",
            ]

    def test_manifest_counts_equal_file_line_counts(self, extracted):
        # Independent check: count raw lines, not parsed records.
        split_dir = extracted / "out" / "cafe" / "splits"
        for manifest_path in split_dir.glob("*.manifest.json"):
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            for part in ("train", "val", "test"):
                path = split_dir / manifest[f"{part}_path"]
                lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l]
                assert len(lines) == manifest[f"{part}_n"]

    def test_matched_volume_per_level(self, extracted):
        # Inflated baseline file vs augmented context-free file, per level.
        for domain in ("cafe", "garage"):
            train_dir = extracted / "out" / domain / "train_files"
            for level in ("synonym", "hypernym"):
                ntp = (train_dir / f"ntp-{level}.train.jsonl").read_text().splitlines()
                aug = (train_dir / f"ncp-aug-{level}-context-free.train.jsonl"
                       ).read_text().splitlines()
                assert len(ntp) == len(aug)

    def test_base_checkpoint_is_untrained_init(self, extracted):
        cfg_path = str(extracted / "demo.cfg")
        assert cli.main(["train", "--config", cfg_path, "--variant", "base"]) == 0
        from conceptlm import tokenizer as tok

        cfg = load_config(extracted / "demo.cfg")
        vocab = tok.load_vocab(extracted / "out" / "vocab.tsv")
        expected = model.init(cfg.model_config(len(vocab)))
        loaded = model.load_checkpoint(extracted / "out" / "checkpoints" / "base.ckpt")
        assert all(np.array_equal(loaded.params[k], expected.params[k])
                   for k in expected.params)

    def test_train_eval_structure(self, extracted, capsys):
        cfg_path = str(extracted / "demo.cfg")
        for variant in ("ntp/synonym", "ncp-loss/synonym/context-free"):
            for domain in ("cafe", "garage"):
                assert cli.main(["train", "--config", cfg_path, "--variant",
                                 f"{variant}/{domain}"]) == 0
        assert cli.main(["eval", "--config", cfg_path]) == 0
        reports = extracted / "out" / "reports"
        lines = (reports / "results.jsonl").read_text().splitlines()
        # 5 checkpoints (4 trained + base) x 2 domains x 2 metrics
        assert len(lines) == 20
        results = [json.loads(l) for l in lines]
        for r in results:
            assert set(r) == {"value", "metric", "domain", "model_id", "token_count"}
        matrix_csv = (reports / "transfer_matrix.csv").read_text().splitlines()
        assert len(matrix_csv) == 5  # header + 2x2 cells
        for cell in matrix_csv[1:]:
            t, e, mean_ratio, _, _ = cell.split(",")
            if t == e:
                assert float(mean_ratio) == 1.0

    def test_report_totals_rederivable_from_score_dumps(self, extracted):
        reports = extracted / "out" / "reports"
        results = [json.loads(l) for l in
                   (reports / "results.jsonl").read_text().splitlines()]
        for r in results:
            fid = r["model_id"].replace("/", "+")
            dump = reports / "scores" / f"{fid}-{r['domain']}-{r['metric']}.jsonl"
            units = [json.loads(l) for l in dump.read_text().splitlines()]
            total = sum(u["nll"] for u in units)
            count = sum(u["count"] for u in units)
            assert count == r["token_count"]
            assert abs(float(np.exp(total / count)) - r["value"]) < 1e-12

    def test_inspect_command_prints_ranking(self, extracted, capsys):
        cfg_path = str(extracted / "demo.cfg")
        ckpt = extracted / "out" / "checkpoints" / "ntp+synonym+cafe.ckpt"
        rc = cli.main(["inspect", "--config", cfg_path, "--checkpoint", str(ckpt),
                       "--prefix", "the baker served the", "-k", "3"])
        assert rc == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 3

    def test_empty_prefix_list_skips_inspection_section(self, demo_dir, tmp_path):
        # A separate run dir so the module-scoped artifacts stay untouched.
        cfg = str(demo_dir / "demo.cfg")
        out = f"out-noprefix"
        args = ["--config", cfg, "--out", out, "--eval.prefixes", ""]
        assert cli.main(["extract"] + args) == 0
        assert cli.main(["augment"] + args) == 0
        assert cli.main(["train"] + args + ["--variant", "ntp/synonym/cafe"]) == 0
        assert cli.main(["eval"] + args) == 0
        reports = demo_dir / out / "reports"
        assert (reports / "results.jsonl").exists()
        assert not (reports / "inspect.txt").exists()

    def test_gradcheck_command(self, demo_dir, capsys):
        rc = cli.main(["gradcheck", "--config", str(demo_dir / "demo.cfg")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "ntp" in out and "ncp" in out and "OK" in out
