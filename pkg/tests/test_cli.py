from __future__ import annotations

import csv
import subprocess
import sys
from pathlib import Path

import pytest

from mapfold.cli import COLUMNS, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, TIMING_COLUMNS, main

KERNELS = Path(__file__).resolve().parent.parent / "kernels"
FAST = ["--size", "tiny", "--iters", "0,1"]


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


class TestAnalyze:
    def test_sum(self, capsys):
        assert main(["analyze", str(KERNELS / "sum.mr"), "--print-triple"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "sum: Combinable"
        assert "step 6: enable the combining flow: ok" in out
        assert "# combine\nfor v in values:\n  sum = add(sum, v)\n" in out

    def test_triple_is_opt_in(self, capsys):
        assert main(["analyze", str(KERNELS / "sum.mr")]) == EXIT_OK
        assert "# combine" not in capsys.readouterr().out

    def test_idioms(self, capsys):
        assert main(["analyze", str(KERNELS / "count.mr")]) == EXIT_OK
        assert "Idiomatic(Count)" in capsys.readouterr().out
        assert main(["analyze", str(KERNELS / "first.mr")]) == EXIT_OK
        assert "Idiomatic(First)" in capsys.readouterr().out

    def test_kmeans_triple(self, capsys):
        assert main(["analyze", str(KERNELS / "kmeans.mr"), "--print-triple"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Combinable" in out and "vec_scale" in out and "count" in out

    def test_not_combinable(self, capsys):
        assert main(["analyze", str(KERNELS / "key_init.mr")]) == EXIT_MISMATCH
        out = capsys.readouterr().out
        assert "NotCombinable(ExternalInitDependence) step 3" in out
        assert "failed at step 3" in out

    def test_parse_error(self, capsys):
        assert main(["analyze", str(KERNELS / "broken.mr")]) == EXIT_USAGE
        assert "EmitInsideLoop" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "nope.mr")]) == EXIT_USAGE


class TestRun:
    def test_run_writes_a_row(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        argv = ["run", "wc", "--flow", "combine", "--workers", "4", "--seed", "7", "--out", str(out), *FAST]
        assert main(argv) == EXIT_OK
        rows = read_csv(out)
        assert list(rows[0]) == list(COLUMNS)
        assert rows[0]["flow"] == "combine" and rows[0]["workers"] == "4" and rows[0]["seed"] == "7"
        assert rows[0]["cells_allocated"] == rows[0]["distinct_keys"]
        assert float(rows[0]["speedup_vs_seq"]) > 0
        assert "oracle=ok" in capsys.readouterr().err
        assert main(argv) == EXIT_OK
        assert len(read_csv(out)) == 2
        assert out.read_text().count("benchmark,flow") == 1

    def test_stdout(self, capsys):
        assert main(["run", "sm", "--flow", "combine", "--workers", "1", *FAST]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(COLUMNS) and lines[1].startswith("sm,combine,1,tiny,1,")

    def test_opaque_reducer_forced_to_combine(self, capsys):
        assert main(["run", "wc", "--flow", "combine", "--opaque-reducer", *FAST]) == EXIT_CONFIG

    def test_opaque_reducer_auto(self, capsys):
        assert main(["run", "wc", "--opaque-reducer", "--workers", "2", *FAST]) == EXIT_OK
        assert "flow=reduce" in capsys.readouterr().err

    def test_workers_env(self, monkeypatch, capsys):
        monkeypatch.setenv("MAPFOLD_WORKERS", "3")
        assert main(["run", "lr", *FAST]) == EXIT_OK
        assert "workers=3" in capsys.readouterr().err
        monkeypatch.setenv("MAPFOLD_WORKERS", "lots")
        assert main(["run", "lr", *FAST]) == EXIT_CONFIG

    def test_bad_config(self, capsys):
        assert main(["run", "wc", "--workers", "0", *FAST]) == EXIT_CONFIG
        assert main(["run", "wc", "--chunk-bytes", "0", *FAST]) == EXIT_CONFIG

    def test_usage_errors(self, capsys):
        assert main(["run", "nope", *FAST]) == EXIT_USAGE
        assert main(["run", "wc", "--flow", "sideways"]) == EXIT_USAGE
        assert main(["run", "wc", "--iters", "five"]) == EXIT_USAGE
        assert main([]) == EXIT_USAGE

    def test_gen_and_replay(self, tmp_path, capsys):
        data = tmp_path / "hg.bin"
        assert main(["gen", "hg", "--size", "tiny", "--seed", "3", "--out", str(data)]) == EXIT_OK
        assert main(["run", "hg", "--input", str(data), "--workers", "2", *FAST]) == EXIT_OK


class TestBenchAll:
    def test_rows_and_ratio(self, tmp_path, capsys):
        out = tmp_path / "all.csv"
        argv = ["bench-all", "--benchmarks", "wc,sm", "--workers-list", "1,2", "--out", str(out), *FAST]
        assert main(argv) == EXIT_OK
        rows = read_csv(out)
        assert [(r["benchmark"], r["flow"], r["workers"]) for r in rows] == [
            (b, f, w) for b in ("wc", "sm") for f in ("reduce", "combine") for w in ("1", "2")
        ]
        for r in rows:
            mate = next(
                m for m in rows if (m["benchmark"], m["workers"]) == (r["benchmark"], r["workers"]) and m is not r
            )
            assert r["speedup_combine_vs_reduce"] == mate["speedup_combine_vs_reduce"] != ""
        for bench in ("wc", "sm"):
            red, comb = (next(r for r in rows if (r["benchmark"], r["flow"], r["workers"]) == (bench, f, "1")) for f in ("reduce", "combine"))
            want = int(red["t_total_ns"]) / int(comb["t_total_ns"])
            assert float(red["speedup_combine_vs_reduce"]) == pytest.approx(want, abs=1e-4)

    def test_timing_columns(self):
        assert TIMING_COLUMNS == {
            "t_split_ns", "t_map_ns", "t_group_ns", "t_reduce_ns", "t_total_ns",
            "speedup_vs_seq", "speedup_combine_vs_reduce",
        }


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mapfold", "analyze", str(KERNELS / "count.mr")], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "Idiomatic(Count)" in proc.stdout
