from extractor.cli import main


class TestExtractCommand:
    def test_clean_run_exit_zero(self, corpus, tmp_path, capsys):
        out = tmp_path / "w.hyfe"
        code = main(["extract", "--corpus", str(corpus), "--rep", "wavlm",
                     "--out", str(out), "--backend", "stub"])
        assert code == 0
        assert out.exists() and out.with_suffix(".hyfe.json").exists()
        assert "wrote 6 vectors of dim 768" in capsys.readouterr().out

    def test_skips_give_exit_four(self, corpus, tmp_path, capsys):
        (corpus / "utt002.wav").write_bytes(b"junk")
        code = main(["extract", "--corpus", str(corpus), "--rep", "dac",
                     "--out", str(tmp_path / "d.hyfe"), "--backend", "stub"])
        assert code == 4
        err = capsys.readouterr().err
        assert "skipped utt002" in err

    def test_unknown_rep_exit_one(self, corpus, tmp_path, capsys):
        code = main(["extract", "--corpus", str(corpus), "--rep", "plp",
                     "--out", str(tmp_path / "x.hyfe"), "--backend", "stub"])
        assert code == 1

    def test_missing_corpus_exit_two(self, tmp_path):
        code = main(["extract", "--corpus", str(tmp_path / "nowhere"), "--rep", "wavlm",
                     "--out", str(tmp_path / "x.hyfe"), "--backend", "stub"])
        assert code == 2

    def test_unavailable_backend_exit_three(self, corpus, tmp_path):
        code = main(["extract", "--corpus", str(corpus), "--rep", "soundstream",
                     "--out", str(tmp_path / "x.hyfe"), "--backend", "pretrained"])
        assert code == 3


class TestVerifyPairingCommand:
    def test_aligned_report(self, corpus, tmp_path, capsys):
        for rep, name in (("wavlm", "a"), ("soundstream", "b")):
            assert main(["extract", "--corpus", str(corpus), "--rep", rep,
                         "--out", str(tmp_path / f"{name}.hyfe"), "--backend", "stub"]) == 0
        capsys.readouterr()
        code = main(["verify-pairing", str(tmp_path / "a.hyfe"), str(tmp_path / "b.hyfe")])
        assert code == 0
        assert "aligned: yes" in capsys.readouterr().out
