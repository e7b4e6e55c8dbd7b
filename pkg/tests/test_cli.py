"""Command-line interface: document schema, determinism, files, exit codes."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sdid.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
EXAMPLE = FIXTURES / "staggered_example.csv"
GOLDEN = FIXTURES / "golden_staggered.json"
GOLDEN_ARGS = [
    str(EXAMPLE), "outcome", "unit", "year", "adopted",
    "--vce", "placebo", "--seed", "97", "--reps", "20",
    "--covariates", "xvar", "--covariate-type", "projected", "--mattitles",
]


def run_main(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def strip_timestamp(text: str) -> str:
    doc = json.loads(text)
    doc.pop("generated_at")
    return json.dumps(doc, indent=2)


class TestDocument:
    def test_matches_golden_file(self, capsys):
        code, out, _ = run_main(capsys, GOLDEN_ARGS)
        assert code == 0
        assert strip_timestamp(out) == strip_timestamp(GOLDEN.read_text())

    def test_all_returned_objects_present(self, capsys):
        code, out, _ = run_main(capsys, GOLDEN_ARGS)
        doc = json.loads(out)
        for key in (
            "att", "se", "ci", "reps", "N_clust", "method", "vce",
            "tau", "lambda", "omega", "adoption", "beta", "series", "difference",
        ):
            assert key in doc, key
        assert doc["design"] == "staggered"
        assert doc["adoption"] == [2004, 2006]
        assert [t["adoption"] for t in doc["tau"]] == [2004, 2006]
        weights = [t["weight"] for t in doc["tau"]]
        assert sum(weights) == pytest.approx(1.0)
        # per-adoption trends cover every period; time weights only pre ones
        for block, lam in zip(doc["series"], doc["lambda"]):
            assert len(block["rows"]) == doc["panel"]["T"]
            a_col = [r["time"] for r in block["rows"]].index(block["adoption"])
            assert len(lam["weights"]) == a_col

    def test_unit_labels_follow_mattitles(self, capsys):
        _, out_labeled, _ = run_main(capsys, GOLDEN_ARGS)
        _, out_plain, _ = run_main(capsys, GOLDEN_ARGS[:-1])
        labeled = json.loads(out_labeled)["omega"][0]["weights"]
        plain = json.loads(out_plain)["omega"][0]["weights"]
        assert labeled[0]["unit"] == "unit00"
        assert plain[0]["unit"] == 1  # alphabetical rank when ids are not numeric

    def test_noinference_skips_uncertainty(self, capsys):
        code, out, _ = run_main(
            capsys, [str(EXAMPLE), "outcome", "unit", "year", "adopted", "--covariates", "xvar"]
        )
        doc = json.loads(out)
        assert code == 0
        assert doc["se"] is None and doc["ci"] is None and doc["reps"] is None

    def test_block_design_inferred(self, capsys, tmp_path):
        path = tmp_path / "block.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "time", "outcome", "treated"])
            rng = np.random.default_rng(0)
            for u in range(6):
                for t in range(1, 7):
                    treated = int(u >= 4 and t >= 4)
                    writer.writerow([f"u{u}", t, f"{rng.normal() + 2.0 * treated:.6f}", treated])
        code, out, _ = run_main(capsys, [str(path), "outcome", "unit", "time", "treated"])
        doc = json.loads(out)
        assert doc["design"] == "block"
        assert doc["N_clust"] == 6


class TestDeterminism:
    def test_byte_identical_across_runs_and_threads(self, capsys):
        outs = []
        for threads in ("1", "4", "1"):
            code, out, _ = run_main(capsys, GOLDEN_ARGS + ["--threads", threads])
            assert code == 0
            outs.append(strip_timestamp(out))
        assert outs[0] == outs[1] == outs[2]


class TestPlotData:
    def test_trend_and_weight_files(self, capsys, tmp_path):
        code, _, _ = run_main(
            capsys,
            GOLDEN_ARGS + ["--plot-data", "--g1on", "--output-dir", str(tmp_path)],
        )
        assert code == 0
        trends = sorted(p.name for p in tmp_path.glob("trends*.csv"))
        weights = sorted(p.name for p in tmp_path.glob("weights*.csv"))
        assert trends == ["trends2004.csv", "trends2006.csv"]
        assert weights == ["weights2004.csv", "weights2006.csv"]
        with open(tmp_path / "trends2004.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["time"] for r in rows] == [str(y) for y in range(2000, 2008)]
        for r in rows:
            gap = float(r["treated"]) - float(r["control"])
            assert gap == pytest.approx(float(r["difference"]), abs=1e-12)
            if int(r["time"]) >= 2004:
                assert float(r["lambda_weight"]) == 0.0
        lam_sum = sum(float(r["lambda_weight"]) for r in rows)
        assert lam_sum == pytest.approx(1.0, abs=1e-8)
        with open(tmp_path / "weights2004.csv") as fh:
            wrows = list(csv.DictReader(fh))
        assert len(wrows) == 9  # one row per control unit
        assert sum(float(r["weight"]) for r in wrows) == pytest.approx(1.0, abs=1e-8)

    def test_weight_files_only_with_g1on(self, capsys, tmp_path):
        run_main(capsys, GOLDEN_ARGS + ["--plot-data", "--output-dir", str(tmp_path)])
        assert list(tmp_path.glob("weights*.csv")) == []
        assert len(list(tmp_path.glob("trends*.csv"))) == 2


class TestExitCodes:
    def test_validation_error_exits_2_with_error_object(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "unit,time,outcome,treated\n"
            "a,1,1.0,0\na,2,1.0,0\nb,1,2.0,1\nb,2,2.0,1\n"
        )
        code, out, err = run_main(capsys, [str(path), "outcome", "unit", "time", "treated"])
        assert code == 2
        assert out == ""
        payload = json.loads(err)
        assert payload["error"] == "AlwaysTreated"
        assert payload["ids"] == ["b"]

    def test_bootstrap_with_single_treated_unit_exits_2(self, capsys, tmp_path):
        path = tmp_path / "single.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "time", "outcome", "treated"])
            for u in range(4):
                for t in range(1, 6):
                    writer.writerow([f"u{u}", t, float(u + t), int(u == 3 and t >= 4)])
        code, _, err = run_main(
            capsys, [str(path), "outcome", "unit", "time", "treated", "--vce", "bootstrap"]
        )
        assert code == 2
        assert json.loads(err)["error"] == "TooFewTreated"

    def test_too_few_replicates_exits_2(self, capsys):
        code, _, err = run_main(capsys, GOLDEN_ARGS[:-1] + ["--reps", "1"])
        assert code == 2
        assert json.loads(err)["error"] == "InvalidConfig"

    def test_missing_file_exits_4(self, capsys):
        code, _, err = run_main(
            capsys, ["/nonexistent/input.csv", "outcome", "unit", "time", "treated"]
        )
        assert code == 4
        assert json.loads(err)["error"] == "IOError"

    def test_strict_escalates_nonconvergence_to_3(self, capsys):
        code, out, err = run_main(
            capsys, GOLDEN_ARGS + ["--strict", "--max-iterations", "1", "--tolerance", "1e-14"]
        )
        assert code == 3
        assert json.loads(out)["converged"] is False
        assert json.loads(err)["error"] == "NonConvergence"

    def test_without_strict_nonconvergence_is_exit_0(self, capsys):
        code, out, _ = run_main(
            capsys, GOLDEN_ARGS + ["--max-iterations", "1", "--tolerance", "1e-14"]
        )
        assert code == 0
        assert json.loads(out)["converged"] is False


class TestStdin:
    def test_dash_reads_standard_input(self):
        text = EXAMPLE.read_text()
        proc = subprocess.run(
            [sys.executable, "-m", "sdid.cli", "-", "outcome", "unit", "year", "adopted",
             "--vce", "placebo", "--seed", "97", "--reps", "20",
             "--covariates", "xvar", "--covariate-type", "projected", "--mattitles"],
            input=text,
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        assert strip_timestamp(proc.stdout) == strip_timestamp(GOLDEN.read_text())
