import json

import pytest

from biasaudit.cli import main

from conftest import write_csv

CONFIG_MINIMAL = """
[audit]
n_perm = 199
outdir = "{outdir}"

[scorers.original]
kind = "hash"
amplitude = 0.004
key = 3

[[models]]
name = "affiliation_gender"
predictors = ["affiliation", "gender"]
conditions = ["raw_name"]
"""

CONFIG_NO_SCORER = """
[audit]
n_perm = 199
"""


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert main(["icc", "--annotations", "x.csv", "--bogus"]) == 1


def test_audit_runs_and_writes_outputs(tmp_path, capsys):
    outdir = tmp_path / "out"
    config = tmp_path / "c.toml"
    config.write_text(CONFIG_MINIMAL.format(outdir=outdir.as_posix()), encoding="utf-8")
    assert main(["audit", "--config", str(config), "--seed", "7"]) == 0
    report = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    assert report["config"]["seed"] == 7
    assert (outdir / "figure1.svg").exists()
    tables = list(outdir.glob("table_*.txt"))
    assert tables and "affiliation_gender" in tables[0].name


def test_audit_determinism_byte_identical(tmp_path):
    config = tmp_path / "c.toml"
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    config.write_text(CONFIG_MINIMAL.format(outdir="unused"), encoding="utf-8")
    assert main(["audit", "--config", str(config), "--seed", "7",
                 "--outdir", str(out1)]) == 0
    assert main(["audit", "--config", str(config), "--seed", "7",
                 "--outdir", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_probe_without_scorer_spec_exits_1(tmp_path, capsys):
    config = tmp_path / "c.toml"
    config.write_text(CONFIG_NO_SCORER, encoding="utf-8")
    code = main(["probe", "--config", str(config), "--output", str(tmp_path / "s.csv")])
    assert code == 1
    assert "scorer" in capsys.readouterr().err


def test_probe_writes_score_table(tmp_path):
    config = tmp_path / "c.toml"
    config.write_text(CONFIG_MINIMAL.format(outdir="unused"), encoding="utf-8")
    out = tmp_path / "scores.csv"
    assert main(["probe", "--config", str(config), "--output", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "entity_id,condition,template_id,valence100"
    assert len(lines) == 1 + 20 * 17


def test_prepare_pipeline(tmp_path):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"], [
        ["c1", "twitter", "zły dzień https://t.co/x"],
        ["c2", "twitter", "dobry kot"],
        ["c3", "facebook", "Dobry dom. Bardzo dobry kot."],
        ["c4", "twitter", "x" * 300],
        ["c5", "twitter", "nic specjalnego"],
    ])
    lexicon = write_csv(tmp_path / "lex.csv", ["word", "valence", "arousal", "dominance"],
                        [["zły", 1, 5, 5], ["dobry", 9, 5, 5], ["kot", 5, 5, 5]])
    out = tmp_path / "sample.csv"
    manifest = tmp_path / "manifest.csv"
    code = main(["prepare", "--input", str(corpus), "--output", str(out),
                 "--lexicon", str(lexicon), "--n-weighted", "2", "--n-unweighted", "1",
                 "--seed", "5", "--manifest", str(manifest)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4  # header + 3 sampled snippets
    assert "c4" not in out.read_text()  # over-length dropped before sampling
    manifest_lines = manifest.read_text(encoding="utf-8").splitlines()
    assert manifest_lines[0] == "id,weight,stage"
    assert len(manifest_lines) == 4


def test_prepare_filter_regex(tmp_path):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"], [
        ["c1", "twitter", "tekst z ż"],
        ["c2", "twitter", "plain ascii"],
        ["c3", "twitter", "żółty"],
    ])
    out = tmp_path / "out.csv"
    assert main(["prepare", "--input", str(corpus), "--output", str(out),
                 "--filter-regex", "ż"]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3 and "c2" not in out.read_text()


def test_prepare_bad_filter_regex(tmp_path, capsys):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"],
                       [["c1", "twitter", "abc"]])
    code = main(["prepare", "--input", str(corpus), "--output", str(tmp_path / "o.csv"),
                 "--filter-regex", "["])
    assert code == 1
    assert "filter-regex" in capsys.readouterr().err


def test_prepare_sampling_requires_seed(tmp_path, capsys):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"],
                       [["c1", "twitter", "abc"]])
    code = main(["prepare", "--input", str(corpus), "--output", str(tmp_path / "o.csv"),
                 "--n-weighted", "1"])
    assert code == 1
    assert "--seed" in capsys.readouterr().err


def test_prune_auto_confirm_stats_match_oracle(tmp_path):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"], [
        ["c1", "twitter", "Tusk przemawia"],
        ["c2", "twitter", "rozmowa z Tuskiem"],
        ["c3", "twitter", "Kaczyński odpowiada"],
        ["c4", "twitter", "nic tu nie ma"],
    ])
    entities = write_csv(
        tmp_path / "entities.csv",
        ["id", "full_name", "surname", "party", "gender", "mention_count"],
        [["t", "Donald Tusk", "Tusk", "KO", 0, 2],
         ["k", "Jarosław Kaczyński", "Kaczyński", "ZP", 0, 1]])
    stats_path = tmp_path / "stats.json"
    out = tmp_path / "pruned.csv"
    code = main(["prune", "--corpus", str(corpus), "--entities", str(entities),
                 "--auto-confirm", "--output", str(out), "--stats", str(stats_path)])
    assert code == 0
    stats = json.loads(stats_path.read_text(encoding="utf-8"))
    assert stats["per_entity"] == {"t": 2, "k": 1}
    assert stats["total"] == 3
    assert stats["median"] == 1.5
    pruned_lines = out.read_text(encoding="utf-8").splitlines()
    assert len(pruned_lines) == 2 and "c4" in pruned_lines[1]


def test_prune_review_round_trip(tmp_path):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"],
                       [["c1", "twitter", "Tusk przemawia"]])
    entities = write_csv(
        tmp_path / "entities.csv",
        ["id", "full_name", "surname", "party", "gender", "mention_count"],
        [["t", "Donald Tusk", "Tusk", "KO", 0, 1]])
    review = tmp_path / "review.csv"
    assert main(["prune", "--corpus", str(corpus), "--entities", str(entities),
                 "--review-out", str(review)]) == 0
    text = review.read_text(encoding="utf-8")
    assert "candidate" in text
    review.write_text(text.replace("candidate", "confirmed"), encoding="utf-8")
    out = tmp_path / "pruned.csv"
    assert main(["prune", "--corpus", str(corpus), "--entities", str(entities),
                 "--review-in", str(review), "--output", str(out)]) == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 1  # header only


def test_prune_requires_a_mode(tmp_path, capsys):
    corpus = write_csv(tmp_path / "corpus.csv", ["id", "platform", "text"],
                       [["c1", "twitter", "nic"]])
    code = main(["prune", "--corpus", str(corpus)])
    assert code == 1


def test_icc_command(tmp_path, capsys):
    annotations = write_csv(tmp_path / "ann.csv", ["text_id", "rater_id", "valence"], [
        ["t1", "r1", 1], ["t1", "r2", 2], ["t1", "r3", 3],
        ["t2", "r1", 4], ["t2", "r2", 4], ["t2", "r3", 4],
        ["t3", "r1", 2], ["t3", "r2", 3], ["t3", "r3", 4],
        ["t4", "r1", 5], ["t4", "r2", 3], ["t4", "r3", 4],
    ])
    out = tmp_path / "icc.json"
    assert main(["icc", "--annotations", str(annotations), "--output", str(out)]) == 0
    assert "ICC(1)" in capsys.readouterr().out
    value = json.loads(out.read_text(encoding="utf-8"))["icc1"]
    assert value == pytest.approx(8 / 17, abs=1e-10)


def test_report_rerender_matches_audit_outputs(tmp_path):
    config = tmp_path / "c.toml"
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    config.write_text(CONFIG_MINIMAL.format(outdir="unused"), encoding="utf-8")
    assert main(["audit", "--config", str(config), "--seed", "3",
                 "--outdir", str(out1)]) == 0
    assert main(["report", "--report", str(out1 / "report.json"),
                 "--outdir", str(out2)]) == 0
    for name in [p.name for p in out1.iterdir()]:
        assert (out2 / name).read_bytes() == (out1 / name).read_bytes()


def test_validation_error_exits_1(tmp_path, capsys):
    code = main(["audit", "--config", str(tmp_path / "missing.toml"), "--seed", "1"])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_runtime_error_exits_2(tmp_path, capsys):
    config = tmp_path / "c.toml"
    config.write_text(
        "[scorers.original]\n"
        'kind = "remote"\n'
        'endpoint = "http://127.0.0.1:9"\n'
        "max_retries = 0\n"
        "timeout = 0.2\n", encoding="utf-8")
    code = main(["probe", "--config", str(config), "--output", str(tmp_path / "s.csv")])
    assert code == 2
    assert "unreachable" in capsys.readouterr().err
