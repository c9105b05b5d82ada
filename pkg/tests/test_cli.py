import json
import subprocess
import sys

import pytest

import pqquad.cli as cli
from pqquad.search import search_pair
from pqquad.tuples import STuple


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestVerify:
    def test_certified_triple(self, capsys):
        code, out, _ = run(capsys, "verify", "--primes", "2,3", "--tuple", "1,3,5")
        d = json.loads(out)
        assert code == 0
        assert d["certified"] and d["exponents"] == [[2, 0], [1, 1], [4, 0]]
        assert d["nondivisibility"] is True

    def test_primes_in_any_order(self, capsys):
        code, out, _ = run(capsys, "verify", "--primes", "5,2", "--tuple", "1,4,31")
        assert code == 0 and json.loads(out)["certified"]

    def test_failure_reported(self, capsys):
        code, out, _ = run(capsys, "verify", "--primes", "2,3", "--tuple", "1,2,3")
        d = json.loads(out)
        assert code == 0
        assert not d["certified"] and d["failure"] == {"i": 1, "j": 2, "value": 7}

    def test_human(self, capsys):
        code, out, _ = run(capsys, "verify", "--format", "human", "--primes", "2,3", "--tuple", "1,3,5")
        assert code == 0 and "certified" in out and "s3 = 2^4 * 3^0" in out

    @pytest.mark.parametrize("argv", [
        ["verify", "--primes", "2,4", "--tuple", "1,3"],
        ["verify", "--primes", "2", "--tuple", "1,3"],
        ["verify", "--primes", "3,3", "--tuple", "1,3"],
        ["verify", "--primes", "2,3", "--tuple", "3,1"],
        ["verify", "--primes", "2,3", "--tuple", "a,b"],
    ])
    def test_usage_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 1 and "error" in err


class TestSearch:
    def test_empty(self, capsys):
        code, out, _ = run(capsys, "search", "--p", "3", "--q", "5")
        d = json.loads(out)
        assert code == 0 and d["quadruples"] == [] and d["triples_count"] == 2

    def test_jsonl_is_one_line(self, capsys):
        code, out, _ = run(capsys, "--format", "jsonl", "search", "--p", "2", "--q", "3")
        assert code == 0 and len(out.strip().splitlines()) == 1

    def test_human(self, capsys):
        code, out, _ = run(capsys, "search", "--p", "3", "--q", "5", "--format", "human")
        assert code == 0 and "quadruples: []" in out

    def test_swapped_primes(self, capsys):
        code, out, _ = run(capsys, "search", "--p", "5", "--q", "3")
        d = json.loads(out)
        assert code == 0 and (d["p"], d["q"]) == (3, 5)

    def test_not_prime(self, capsys):
        code, _, err = run(capsys, "search", "--p", "4", "--q", "5")
        assert code == 1 and "not prime" in err

    def test_constant_inapplicable(self, capsys):
        code, _, err = run(capsys, "search", "--p", "5", "--q", "13")
        assert code == 1 and "--override-c0" in err
        code, out, _ = run(capsys, "search", "--p", "5", "--q", "13", "--override-c0", "50000")
        assert code == 0 and json.loads(out)["c0"] == 50000

    def test_found_exits_two(self, capsys, monkeypatch):
        def fake(pair, **kw):
            report = search_pair(pair, **kw)
            report.quadruples = [STuple((1, 2, 3, 4), pair, ())]
            return report

        monkeypatch.setattr(cli, "search_pair", fake)
        code, out, _ = run(capsys, "search", "--p", "3", "--q", "5")
        assert code == 2 and json.loads(out)["quadruples"] == [[1, 2, 3, 4]]

    def test_precision_flag(self, capsys):
        code, out, _ = run(capsys, "--precision-bits", "256", "search", "--p", "3", "--q", "7")
        assert code == 0 and json.loads(out)["quadruples"] == []


class TestBounds:
    def test_trace_jsonl(self, capsys):
        code, out, _ = run(capsys, "bounds", "--p", "2", "--q", "3")
        rows = [json.loads(line) for line in out.splitlines()]
        assert code == 0
        assert [r["iteration"] for r in rows] == list(range(1, len(rows) + 1))
        assert set(rows[0]) == {"p", "q", "iteration", "C", "C1", "delta"}
        assert rows[-1]["C"] == pytest.approx(16.333, abs=0.01)

    def test_human_table(self, capsys):
        code, out, _ = run(capsys, "bounds", "--p", "2", "--q", "3", "--format", "human")
        assert code == 0 and "final C=" in out and "delta" in out


class TestWieferich:
    def test_single(self, capsys):
        code, out, _ = run(capsys, "wieferich", "--p", "83", "--q", "4871")
        d = json.loads(out)
        assert code == 0 and d["ordinary"] and d["extreme"]

    def test_scan_ordinary(self, capsys):
        code, out, _ = run(capsys, "wieferich", "--p-max", "100", "--q-max", "5000", "--only-ordinary")
        rows = [json.loads(line) for line in out.splitlines()]
        assert code == 0 and [(r["p"], r["q"]) for r in rows] == [(2, 1093), (83, 4871)]

    def test_scan_extreme(self, capsys):
        code, out, _ = run(capsys, "wieferich", "--p-max", "100", "--q-max", "5000", "--only-extreme")
        assert [json.loads(line)["q"] for line in out.splitlines()] == [4871]

    def test_scan_all_small(self, capsys):
        code, out, _ = run(capsys, "wieferich", "--p-max", "7", "--q-max", "11")
        assert len(out.splitlines()) == 4 + 3 + 2 + 1

    def test_missing_arguments(self, capsys):
        code, _, err = run(capsys, "wieferich", "--p", "3")
        assert code == 1


class TestCounting:
    def test_count_pairs(self, capsys):
        code, out, _ = run(capsys, "count-pairs", "--variant", "residual")
        assert code == 0 and out.strip() == "60321782"

    def test_count_pairs_human(self, capsys):
        code, out, _ = run(capsys, "count-pairs", "--variant", "main", "--format", "human")
        assert code == 0 and out.strip() == "main: 340306885 pairs"


class TestScan:
    def test_sampled_scan(self, capsys, tmp_path):
        out_path, ckpt = tmp_path / "r.jsonl", tmp_path / "c.json"
        code, out, _ = run(capsys, "--quiet", "scan", "--variant", "residual", "--sample-every", "20000",
                           "--block-size", "1000000", "--out", str(out_path), "--checkpoint", str(ckpt))
        d = json.loads(out)
        assert code == 0 and d["finished"] and d["quadruples_found"] == 0
        assert d["total_pairs"] == 60321782
        assert len(out_path.read_text().splitlines()) == d["pairs_searched"]
        assert json.loads(ckpt.read_text())["finished"]

    def test_mismatched_checkpoint(self, capsys, tmp_path):
        ckpt = tmp_path / "c.json"
        ckpt.write_text(json.dumps({"version": 1, "criteria_hash": "nope", "cursor_block": 0}))
        code, _, err = run(capsys, "scan", "--variant", "residual", "--count-only",
                           "--checkpoint", str(ckpt))
        assert code == 1 and "refusing" in err


class TestParser:
    def test_no_command(self, capsys):
        code, _, err = run(capsys)
        assert code == 1 and "usage" in err

    def test_unknown_command(self, capsys):
        assert run(capsys, "frobnicate")[0] == 1

    def test_bad_format(self, capsys):
        assert run(capsys, "--format", "xml", "count-pairs", "--variant", "main")[0] == 1

    def test_version(self, capsys):
        code, out, _ = run(capsys, "--version")
        assert code == 0 and out.startswith("pqquad ")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pqquad", "verify", "--primes", "2,5",
                           "--tuple", "1,4,31", "--format", "jsonl"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["certified"] is True
