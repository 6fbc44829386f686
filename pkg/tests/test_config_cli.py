import json
import os

import pytest

from lyralign.cli import main
from lyralign.config import (
    ConfigError,
    ManifestError,
    PipelineConfig,
    parse_config,
    parse_manifest,
)
from lyralign.evaluate import EvalReport

from tone_corpus import build_tone_corpus, write_config


class TestConfigParsing:
    def test_defaults_and_overrides(self):
        cfg = parse_config("feature_config = C2-V\nseed = 5\n# comment\n")
        assert cfg.feature_config == "C2-V"
        assert cfg.seed == 5
        assert cfg.tolerance_sec == 0.25

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("no_such_key = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("seed = banana\n")

    def test_tuple_values(self):
        cfg = parse_config("adapt_lr_multipliers = 1.0,0.5\nadapt_epochs = 1,2,3\n")
        assert cfg.adapt_lr_multipliers == (1.0, 0.5)
        assert cfg.adapt_epochs == (1, 2, 3)

    def test_digest_changes_with_relevant_key(self):
        a = PipelineConfig(feature_config="C1")
        b = PipelineConfig(feature_config="C2")
        assert a.digest(("feature_config",)) != b.digest(("feature_config",))
        assert a.digest(("seed",)) == b.digest(("seed",))

    def test_invalid_preset(self):
        with pytest.raises(Exception):
            parse_config("feature_config = C7\n")


class TestManifest:
    def test_parse_and_resolve(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(b"x")
        (tmp_path / "a.txt").write_text("hi")
        manifest = parse_manifest("u1\ta.wav\ta.txt\n", str(tmp_path))
        assert manifest.rows[0].utt_id == "u1"
        assert manifest.rows[0].truth is None

    def test_duplicate_id(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(b"x")
        (tmp_path / "a.txt").write_text("hi")
        text = "u1\ta.wav\ta.txt\nu1\ta.wav\ta.txt\n"
        with pytest.raises(ManifestError, match="duplicate"):
            parse_manifest(text, str(tmp_path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError, match="missing"):
            parse_manifest("u1\tnope.wav\tnope.txt\n", str(tmp_path))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    manifest, dict_path = build_tone_corpus(root, n_utterances=3, seed=4)
    return str(root), manifest, dict_path


class TestPipelineCommands:
    def _workdir(self, tmp_path):
        return str(tmp_path / "work")

    def test_extract_dims_and_cache(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "c1.cfg", dict_path)
        work = self._workdir(tmp_path)
        assert main(["extract", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        out = capsys.readouterr().out
        assert "3 done, 0 skipped" in out and "dims=39" in out
        from lyralign.features.fileio import read_features
        mat = read_features(os.path.join(work, "features", "song00.lyf"))
        assert mat.total_dim == 39
        # rerun: everything cached
        assert main(["extract", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        assert "0 done, 3 skipped" in capsys.readouterr().out

    def test_extract_c2v_dims(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "c2v.cfg", dict_path, feature_config="C2-V")
        work = self._workdir(tmp_path)
        assert main(["extract", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        assert "dims=52" in capsys.readouterr().out

    def test_train_align_score_plot(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        work = self._workdir(tmp_path)
        assert main(["train", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        model_path = os.path.join(work, "model.lyam")
        assert os.path.exists(model_path)
        report_path = os.path.join(work, "train_report.jsonl")
        lls = [json.loads(line)["loglik"] for line in open(report_path)
               if json.loads(line).get("stage") == "em"]
        assert all(b >= a - 1e-6 * abs(a) for a, b in zip(lls, lls[1:]))
        # cached rerun
        assert main(["train", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        assert "up to date" in capsys.readouterr().out

        assert main(["align", "--config", config, "--manifest", manifest,
                     "--model", model_path, "--workdir", work]) == 0
        tsv = os.path.join(work, "align", "song00.tsv")
        assert os.path.exists(tsv)
        # align rerun is a no-op
        assert main(["align", "--config", config, "--manifest", manifest,
                     "--model", model_path, "--workdir", work]) == 0
        assert "3 skipped" in capsys.readouterr().out

        assert main(["score", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        report = EvalReport.from_json(open(os.path.join(work, "report.json")).read())
        assert report.n_words >= 9
        assert report.mean_ae_sec <= 0.08  # tones are trivially separable
        assert report.pct_correct == 100.0

        assert main(["plot", os.path.join(work, "report.json"),
                     "--out-dir", work]) == 0
        hist = open(os.path.join(work, "report.hist.csv")).read().splitlines()
        counts = [int(line.split(",")[2]) for line in hist[1:]]
        assert sum(counts) == report.n_words

    def test_perfect_alignment_scores_zero(self, corpus, tmp_path):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        work = self._workdir(tmp_path)
        os.makedirs(os.path.join(work, "align"), exist_ok=True)
        # fabricate alignments identical to the truth annotations
        for i in range(3):
            utt = f"song{i:02d}"
            rows = [line.split("\t") for line in
                    open(os.path.join(root, f"{utt}.truth.tsv")).read().splitlines()]
            with open(os.path.join(work, "align", f"{utt}.tsv"), "w") as fh:
                fh.write(f"#utt_id={utt}\n#frame_shift_sec=0.010\n#total_loglik=0.000\n")
                for token, start, end in rows:
                    fh.write(f"{token}\t{float(start):.3f}\t{float(end):.3f}\t0.000\n")
        assert main(["score", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        report = EvalReport.from_json(open(os.path.join(work, "report.json")).read())
        assert report.mean_ae_sec <= 5e-4  # truth written at 4 decimals, TSV at 3
        assert report.pct_correct == 100.0

    def test_train_determinism_byte_identical(self, corpus, tmp_path):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        work_a = str(tmp_path / "wa")
        work_b = str(tmp_path / "wb")
        for work in (work_a, work_b):
            assert main(["train", "--config", config, "--manifest", manifest,
                         "--workdir", work]) == 0
        bytes_a = open(os.path.join(work_a, "model.lyam"), "rb").read()
        bytes_b = open(os.path.join(work_b, "model.lyam"), "rb").read()
        assert bytes_a == bytes_b

    def test_gmm_only_flag(self, corpus, tmp_path):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        work = self._workdir(tmp_path)
        assert main(["train", "--config", config, "--manifest", manifest,
                     "--workdir", work, "--gmm-only"]) == 0
        from lyralign.am.io import load_model
        assert load_model(os.path.join(work, "model.lyam")).mlp is None

    def test_adapt_grid_report(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path,
                              adapt_lr_multipliers="1.0", adapt_epochs="1")
        work = self._workdir(tmp_path)
        assert main(["train", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        model_path = os.path.join(work, "model.lyam")
        assert main(["adapt", "--config", config, "--manifest", manifest,
                     "--dev-manifest", manifest, "--model", model_path,
                     "--workdir", work]) == 0
        report = json.load(open(os.path.join(work, "adapt_report.json")))
        assert len(report["cells"]) == 1
        assert report["cells"][0]["label"] == "LR, epoch1"
        assert report["best"] == "LR, epoch1"
        assert os.path.exists(report["cells"][0]["model"])

    def test_extract_failure_exit_code(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        bad_root = tmp_path / "bad"
        bad_root.mkdir()
        (bad_root / "broken.wav").write_bytes(b"not a wav at all")
        (bad_root / "broken.txt").write_text("ma\n")
        (bad_root / "m.tsv").write_text("broken\tbroken.wav\tbroken.txt\n")
        code = main(["extract", "--config", config, "--manifest", str(bad_root / "m.tsv"),
                     "--workdir", str(tmp_path / "wbad")])
        assert code == 1
        assert "failed" in capsys.readouterr().out

    def test_speed_perturb_training_hook(self, corpus, tmp_path):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path,
                              speed_perturb="0.9,1.1", mlp_epochs="2")
        work = self._workdir(tmp_path)
        assert main(["train", "--config", config, "--manifest", manifest,
                     "--workdir", work]) == 0
        from lyralign.am.io import load_model
        assert load_model(os.path.join(work, "model.lyam")).mlp is not None

    def test_oov_aborts_train(self, corpus, tmp_path, capsys):
        root, manifest, dict_path = corpus
        config = write_config(tmp_path / "cfg.cfg", dict_path)
        bad_root = tmp_path / "bad"
        bad_root.mkdir()
        import shutil
        shutil.copy(os.path.join(root, "song00.wav"), bad_root / "song00.wav")
        (bad_root / "song00.txt").write_text("zzzq unknown\n")
        (bad_root / "m.tsv").write_text("song00\tsong00.wav\tsong00.txt\n")
        with pytest.raises(SystemExit):
            main(["train", "--config", config, "--manifest", str(bad_root / "m.tsv"),
                  "--workdir", str(tmp_path / "w2")])
        assert "ZZZQ" in capsys.readouterr().out
