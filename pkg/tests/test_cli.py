import json
import subprocess
import sys

import pytest

from cliquescout.cli import main
from cliquescout.store import load_store

CLI = [sys.executable, "-m", "cliquescout"]
SYNTH = ["synth", "--seed", "7", "--n-users", "400", "--n-venues", "80", "--background-rate", "2", "--plant", "11,6,5"]


def run(args, **kw):
    return subprocess.run(CLI + args, capture_output=True, **kw)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    truth = root / "truth.json"
    assert main(SYNTH + ["--mean-friends", "5", "--out", str(root / "reviews.ndjson"), "--users-out", str(root / "users.ndjson"), "--truth-out", str(truth)]) == 0
    assert main(["ingest", str(root / "reviews.ndjson"), "--users", str(root / "users.ndjson"), "--out", str(root / "store.csct")]) == 0
    return root, json.loads(truth.read_text())


def test_pipeline_over_pipes_recovers_planted_group(tmp_path):
    synth = run(SYNTH)
    assert synth.returncode == 0
    ingest = run(["ingest"], input=synth.stdout)
    assert ingest.returncode == 0, ingest.stderr
    assert json.loads(ingest.stderr)["reviews"]["records_kept"] > 0
    build = run(["build", "--k", "6", "--d", "5"], input=ingest.stdout)
    assert build.returncode == 0, build.stderr
    cliques = run(["cliques", "--min-size", "9"], input=build.stdout)
    assert cliques.returncode == 0, cliques.stderr
    rows = [json.loads(x) for x in cliques.stdout.decode().splitlines()]
    truth = run(SYNTH + ["--out", str(tmp_path / "r.ndjson"), "--truth-out", str(tmp_path / "t.json")])
    assert truth.returncode == 0
    planted = json.loads((tmp_path / "t.json").read_text())["groups"][0]["members"]
    assert rows == [{"size": 11, "members": sorted(planted)}]


def test_outputs_are_deterministic(tmp_path):
    a = run(SYNTH).stdout
    b = run(SYNTH).stdout
    assert a == b
    s1 = run(["ingest"], input=a).stdout
    s2 = run(["ingest"], input=b).stdout
    assert s1 == s2


def test_table_emits_clique_grid_csv(workspace, capsys):
    root, _ = workspace
    args = ["table", "--store", str(root / "store.csct"), "--kind", "clique", "--k", "3,4,5,6", "--d", "5,6,8", "--sizes", "9,10,11"]
    assert main(args) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,d,size,count" and len(lines) == 1 + 4 * 3 * 3
    row = dict((tuple(x.split(",")[:3]), int(x.split(",")[3])) for x in lines[1:])
    assert row[("6", "5", "11")] >= 1


def test_table_out_dir_and_check(workspace, tmp_path, capsys):
    root, _ = workspace
    out = tmp_path / "tables"
    args = ["table", "--store", str(root / "store.csct"), "--kind", "quasiclique", "--k", "5,6", "--d", "5,8", "--out-dir", str(out), "--check", "--pretty"]
    assert main(args) == 0
    captured = capsys.readouterr()
    assert "12-quasiclique" in captured.out and "monotonicity checks passed" in captured.err
    assert (out / "quasiclique_counts.csv").read_text().startswith("k,d,size,count\n")
    assert (out / "quasiclique_counts_cumulative.csv").read_text().startswith("k,d,min_size,count\n")


def test_flag_verify_annotate_export(workspace, tmp_path, capsys):
    root, truth = workspace
    store = str(root / "store.csct")
    groups = tmp_path / "groups.jsonl"
    assert main(["flag", "--store", store, "--k", "6", "--d", "5", "--min-size", "9", "--out", str(groups)]) == 0
    records = [json.loads(x) for x in groups.read_text().splitlines()]
    assert [r["members"] for r in records] == [sorted(truth["groups"][0]["members"])]

    assert main(["verify", "--groups", str(groups), "--store", store]) == 0
    assert json.loads(capsys.readouterr().out) == {"evidence": "ok"}

    labels = tmp_path / "labels.tsv"
    labels.write_text("".join(f"{m}\tscout\n" for m in truth["groups"][0]["members"][:4]))
    graph = tmp_path / "graph.tsv"
    assert main(["build", "--store", store, "--k", "6", "--d", "5", "--out", str(graph)]) == 0
    stats_path = tmp_path / "stats.json"
    assert main(["annotate", "--groups", str(groups), "--labels", str(labels), "--store", store, "--graph", str(graph), "--out", str(stats_path)]) == 0
    stats = json.loads(stats_path.read_text())
    assert stats["fractions"] == {"scout": 4 / 11}
    assert stats["graph_users"] >= 11

    dot = tmp_path / "groups.dot"
    assert main(["export", "--store", store, "--groups", str(groups), "--mode", "friend_intersection", "--labels", str(labels), "--out", str(dot)]) == 0
    text = dot.read_text()
    assert text.count(" -- ") == 55 and text.count('user_label="scout"') == 4


def test_quasicliques_subcommand(workspace, tmp_path, capsys):
    root, _ = workspace
    graph = tmp_path / "g.tsv"
    assert main(["build", "--store", str(root / "store.csct"), "--k", "6", "--d", "5", "--mode", "co_review_count", "--out", str(graph)]) == 0
    assert main(["quasicliques", "--graph", str(graph), "--min-size", "10"]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert rows and rows[0]["size"] == 11 and rows[0]["theta"] == "9/10"


def test_ingest_empty_file(tmp_path, capsys):
    src = tmp_path / "empty.ndjson"
    src.write_text("")
    assert main(["ingest", str(src), "--out", str(tmp_path / "e.csct")]) == 0
    assert load_store(tmp_path / "e.csct").n_reviews == 0
    assert json.loads(capsys.readouterr().err)["reviews"]["lines_read"] == 0


def test_verify_differential_suite(capsys):
    assert main(["verify", "--graphs", "30"]) == 0
    assert json.loads(capsys.readouterr().out) == {"graphs": 30, "failures": 0}


def test_config_file_defaults_and_flag_override(workspace, tmp_path, capsys):
    root, _ = workspace
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[cliquescout]\nthreads = 1\n\n[table]\nstore = {root / 'store.csct'}\nk = 6\nd = 5\nsizes = 10,11\n")
    assert main(["--config", str(cfg), "table"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1:] == ["6,5,10,0", "6,5,11,1"]
    assert main(["--config", str(cfg), "table", "--k", "7"]) == 0
    assert capsys.readouterr().out.splitlines()[1:] == ["7,5,10,0", "7,5,11,0"]


def test_unknown_flag_is_usage_error():
    proc = run(["build", "--bogus"])
    assert proc.returncode == 2


def test_pipeline_failure_is_one_line_error(tmp_path):
    bad = tmp_path / "bad.csct"
    bad.write_bytes(b"CSCT\x09\x00" + b"\0" * 30)
    proc = run(["build", "--store", str(bad), "--k", "1", "--d", "1"])
    assert proc.returncode == 1
    err = proc.stderr.decode().strip().splitlines()
    assert len(err) == 1 and err[0].startswith("cliquescout: error: StoreFormatError: ")


@pytest.mark.parametrize("cmd", ["synth", "ingest", "build", "cliques", "quasicliques", "table", "flag", "annotate", "export", "verify"])
def test_help_on_every_subcommand(cmd):
    proc = run([cmd, "--help"])
    assert proc.returncode == 0 and b"usage:" in proc.stdout
