import dataclasses
import json
import math
import os
import random
import signal
import subprocess
import sys
import textwrap
import time
from decimal import Decimal, getcontext
from pathlib import Path

import numpy as np
import pytest

from pqquad.campaign import (
    MAIN,
    RESIDUAL,
    CampaignCriteria,
    CampaignError,
    PairIndex,
    admits_below_log,
    count_pairs,
    log_threshold_floor,
    merge_shards,
    run_campaign,
)
from pqquad.ntcore import is_prime
from pqquad.primes import sieve_primes

# A small campaign in the MAIN shape: q < 400 log p gives 19723 pairs.
SMALL_MAIN = CampaignCriteria(variant="small-main", p_residue=(3, 4), q_residue=(1, 4),
                              q_below_log=True, log_constant=400)
SMALL_RESIDUAL = CampaignCriteria(variant="small-residual", p_residue=(3, 4), q_residue=(1, 4),
                                  q_at_least_log=True, q_max=4000, log_constant=400,
                                  extra_filter="p_square_divides")
RECORD_KEYS = {"p", "q", "u_p", "u_q", "triples_count", "quadruples", "c0", "c_final", "c1",
               "delta", "millis"}


def naive_pairs(c: CampaignCriteria, limit: int):
    primes = [n for n in range(2, limit + 1) if is_prime(n)]
    out = []
    for p in primes:
        if p < c.p_min or (c.p_max is not None and p > c.p_max):
            continue
        if c.p_residue and p % c.p_residue[1] != c.p_residue[0]:
            continue
        for q in primes:
            if q <= p or (c.q_max is not None and q > c.q_max):
                continue
            if c.q_residue and q % c.q_residue[1] != c.q_residue[0]:
                continue
            t = c.log_constant * math.log(p)
            if c.q_below_log and not q < t:
                continue
            if c.q_at_least_log and not q >= t:
                continue
            if c.extra_filter and pow(q, p - 1, p * p) != 1:
                continue
            out.append((p, q))
    return out


def read_records(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


def strip_timing(records):
    return [{k: v for k, v in r.items() if k != "millis"} for r in records]


class TestIndex:
    @pytest.mark.parametrize("criteria", [
        SMALL_MAIN,
        SMALL_RESIDUAL,
        CampaignCriteria(variant="x", q_at_least_log=True, q_max=3000, log_constant=200),
    ])
    def test_matches_naive(self, criteria):
        # the index enumerates before the extra filter is applied
        idx = PairIndex(criteria)
        expected = naive_pairs(dataclasses.replace(criteria, extra_filter=None), criteria.q_limit())
        ps, qs = idx.pairs_at(np.arange(len(idx)))
        assert list(zip(ps.tolist(), qs.tolist())) == expected

    def test_groups_cover_ranges(self):
        idx = PairIndex(SMALL_MAIN)
        ps, qs = idx.pairs_at(np.arange(len(idx)))
        everything = list(zip(ps.tolist(), qs.tolist()))
        rng = random.Random(1)
        for _ in range(50):
            lo = rng.randrange(len(idx))
            hi = rng.randrange(lo, len(idx) + 10)
            got = []
            for p, group, first in idx.groups(lo, hi):
                assert first == lo + len(got)
                got.extend((p, int(q)) for q in group)
            assert got == everything[lo:hi]

    def test_count_pairs(self):
        assert count_pairs(SMALL_MAIN) == len(naive_pairs(SMALL_MAIN, SMALL_MAIN.q_limit()))

    def test_q_limit_covers_main(self):
        # the largest admissible q for the real MAIN scan stays under the sieve bound
        assert MAIN.q_limit() >= 52038 * math.log(MAIN.q_limit() / math.log(MAIN.q_limit()))

    def test_criteria_json_roundtrip(self):
        for c in (MAIN, RESIDUAL, SMALL_RESIDUAL):
            again = CampaignCriteria.from_json(json.loads(json.dumps(c.to_json())))
            assert again == c and again.hash == c.hash
        assert MAIN.hash != RESIDUAL.hash

    def test_criteria_validation(self):
        with pytest.raises(ValueError):
            CampaignCriteria(q_max=10, extra_filter="bogus")
        with pytest.raises(ValueError):
            CampaignCriteria()


class TestBoundary:
    def test_hundred_random_p(self):
        getcontext().prec = 60
        primes = sieve_primes(10**6).primes.tolist()
        rng = random.Random(2024)
        for p in rng.sample(primes, 100):
            exact = 52038 * Decimal(p).ln()
            t = log_threshold_floor(p)
            assert t == int(exact)
            assert admits_below_log(p, t) and not admits_below_log(p, t + 1)

    def test_small_constants(self):
        getcontext().prec = 60
        for K in (1, 7, 400):
            for p in (2, 3, 7, 1093):
                assert log_threshold_floor(p, K) == int(K * Decimal(p).ln())


class TestRun:
    def test_count_only(self, tmp_path):
        state = run_campaign(SMALL_RESIDUAL, block_size=97, search=False)
        naive = naive_pairs(SMALL_RESIDUAL, 4000)
        assert state.pairs_passed == len(naive)
        assert state.pairs_seen == count_pairs(SMALL_RESIDUAL)
        assert state.pairs_searched == 0 and state.finished

    def test_stream_schema_and_counts(self, tmp_path):
        out = tmp_path / "res.jsonl"
        state = run_campaign(SMALL_RESIDUAL, block_size=50, output_path=out)
        records = read_records(out)
        assert len(records) == state.pairs_searched == state.pairs_passed
        assert [(r["p"], r["q"]) for r in records] == naive_pairs(SMALL_RESIDUAL, 4000)
        for r in records:
            assert set(r) == RECORD_KEYS
            assert r["quadruples"] == []
            assert r["c_final"] <= r["c0"]
        assert state.quadruples_found == 0

    def test_sampling(self, tmp_path):
        out = tmp_path / "s.jsonl"
        state = run_campaign(SMALL_MAIN, block_size=333, sample_every=100, output_path=out)
        idx = PairIndex(SMALL_MAIN)
        ps, qs = idx.pairs_at(np.arange(0, len(idx), 100))
        assert [(r["p"], r["q"]) for r in read_records(out)] == list(zip(ps.tolist(), qs.tolist()))
        assert state.pairs_searched == math.ceil(len(idx) / 100)

    def test_two_workers_match_one(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        sa = run_campaign(SMALL_MAIN, workers=1, block_size=512, sample_every=40, output_path=a)
        sb = run_campaign(SMALL_MAIN, workers=2, block_size=512, sample_every=40, output_path=b)
        assert strip_timing(read_records(a)) == strip_timing(read_records(b))
        assert sa.counts == sb.counts

    def test_resume_after_interruption(self, tmp_path):
        full, part = tmp_path / "full.jsonl", tmp_path / "part.jsonl"
        ckpt = tmp_path / "ck.json"
        ref = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=full)
        s1 = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=part,
                          checkpoint_path=ckpt, stop_after_blocks=3)
        assert not s1.finished and s1.cursor_block == 3
        assert not part.exists()
        data = json.loads(ckpt.read_text())
        assert {"criteria_hash", "cursor_block", "blocks_done", "version"} <= set(data)
        assert data["cursor_block"] == 3
        s2 = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=part,
                          checkpoint_path=ckpt, stop_after_blocks=4)
        assert s2.cursor_block == 7 < s2.blocks_total
        s3 = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=part,
                          checkpoint_path=ckpt)
        assert s3.finished and s3.counts == ref.counts
        assert strip_timing(read_records(part)) == strip_timing(read_records(full))
        assert json.loads(ckpt.read_text())["finished"] is True

    def test_refuses_mismatched_checkpoint(self, tmp_path):
        ckpt = tmp_path / "ck.json"
        run_campaign(SMALL_MAIN, block_size=1000, search=False, checkpoint_path=ckpt,
                     stop_after_blocks=1)
        with pytest.raises(CampaignError):
            run_campaign(SMALL_RESIDUAL, block_size=1000, search=False, checkpoint_path=ckpt)
        with pytest.raises(CampaignError):
            run_campaign(SMALL_MAIN, block_size=1001, search=False, checkpoint_path=ckpt)
        data = json.loads(ckpt.read_text())
        data["version"] = 99
        ckpt.write_text(json.dumps(data))
        with pytest.raises(CampaignError):
            run_campaign(SMALL_MAIN, block_size=1000, search=False, checkpoint_path=ckpt)

    def test_merge_requires_every_shard(self, tmp_path):
        out = tmp_path / "m.jsonl"
        shards = tmp_path / "m.jsonl.shards"
        shards.mkdir()
        (shards / "block-00000001.jsonl").write_text('{"b": 1}\n')
        (shards / "block-00000000.jsonl").write_text('{"b": 0}\n')
        assert merge_shards(out, 2) == 2
        assert [r["b"] for r in read_records(out)] == [0, 1]
        with pytest.raises(CampaignError):
            merge_shards(out, 3)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            run_campaign(SMALL_MAIN, block_size=0)


KILL_SCRIPT = textwrap.dedent("""
    import sys, time
    import pqquad.campaign as c
    from pqquad.campaign import CampaignCriteria, run_campaign
    crit = CampaignCriteria.from_json({crit})
    slow = c.process_block
    def process_block(*a, **k):
        time.sleep(0.2)
        return slow(*a, **k)
    c.process_block = process_block
    run_campaign(crit, block_size=1000, sample_every=40, output_path=sys.argv[1],
                 checkpoint_path=sys.argv[2])
""")


def test_sigkill_and_resume(tmp_path):
    out, ckpt, full = tmp_path / "o.jsonl", tmp_path / "ck.json", tmp_path / "full.jsonl"
    script = KILL_SCRIPT.format(crit=repr(SMALL_MAIN.to_json()))
    proc = subprocess.Popen([sys.executable, "-c", script, str(out), str(ckpt)])
    deadline = time.time() + 60
    try:
        while time.time() < deadline:
            if ckpt.exists() and json.loads(ckpt.read_text() or "{}").get("cursor_block", 0) >= 2:
                break
            time.sleep(0.05)
        else:
            pytest.fail("campaign made no progress")
    finally:
        os.kill(proc.pid, signal.SIGKILL)
        proc.wait()
    done = json.loads(ckpt.read_text())
    assert not done["finished"] and done["cursor_block"] < done["blocks_total"]
    state = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=out,
                         checkpoint_path=ckpt)
    ref = run_campaign(SMALL_MAIN, block_size=1000, sample_every=40, output_path=full)
    assert state.finished and state.counts == ref.counts
    assert strip_timing(read_records(out)) == strip_timing(read_records(full))
