"""Prime-pair scan campaigns.

Pairs (p, q) matching a `CampaignCriteria` are put in canonical
lexicographic order and addressed by their index in that order, so counts
come from prefix sums and any index range can be materialised directly.
A run processes fixed-size blocks of indices: each block writes its own
shard file, a single coordinator advances a checkpoint over the contiguous
prefix of finished blocks, and a final merge concatenates the shards.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterator, Optional

import mpmath
import numpy as np

from .bounds import EXPONENT_CONSTANT
from .ntcore import PrimePair, iv_precision, log_interval
from .primes import PrimeTable, sieve_primes
from .search import search_pair
from .wieferich import p_square_divides_batch

__all__ = [
    "CampaignCriteria",
    "CampaignState",
    "CampaignError",
    "PairIndex",
    "MAIN",
    "RESIDUAL",
    "RESIDUAL_Q_MAX",
    "CHECKPOINT_VERSION",
    "log_threshold_floor",
    "admits_below_log",
    "count_pairs",
    "run_campaign",
    "merge_shards",
]

log = logging.getLogger(__name__)

RESIDUAL_Q_MAX = 700393
CHECKPOINT_VERSION = 1
FILTERS = ("p_square_divides",)


class CampaignError(RuntimeError):
    pass


@dataclass(frozen=True)
class CampaignCriteria:
    """Which pairs p < q a campaign visits.

    q is bounded by K log p (K = log_constant) from above (`q_below_log`,
    strict) and/or from below (`q_at_least_log`), and optionally by q_max.
    """

    variant: str = "custom"
    p_residue: Optional[tuple[int, int]] = None  # (r, m): p = r mod m
    q_residue: Optional[tuple[int, int]] = None
    p_min: int = 2
    p_max: Optional[int] = None
    q_max: Optional[int] = None
    q_below_log: bool = False
    q_at_least_log: bool = False
    log_constant: int = EXPONENT_CONSTANT
    extra_filter: Optional[str] = None

    def __post_init__(self) -> None:
        if self.extra_filter is not None and self.extra_filter not in FILTERS:
            raise ValueError(f"unknown filter {self.extra_filter!r}")
        if self.q_max is None and not self.q_below_log:
            raise ValueError("criteria must bound q through q_max or q_below_log")

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("p_residue", "q_residue"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CampaignCriteria":
        d = dict(d)
        for k in ("p_residue", "q_residue"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def q_limit(self) -> int:
        """An upper bound for every admissible q (sieve size)."""
        caps = []
        if self.q_max is not None:
            caps.append(self.q_max)
        if self.q_below_log:
            # p < q < K log p forces p below the largest root of x = K log x
            p_top = _log_fixed_point(self.log_constant)
            if self.p_max is not None:
                p_top = min(p_top, self.p_max)
            caps.append(int(self.log_constant * math.log(max(p_top, 2))) + 2)
        return min(caps)


def _log_fixed_point(K: float) -> float:
    """Largest root of x = K log x (K > e)."""
    lo, hi = K, 4 * K * math.log(K)
    while hi - lo > 1e-6 * lo:
        mid = (lo + hi) / 2
        if mid < K * math.log(mid):
            lo = mid
        else:
            hi = mid
    return hi


# Both scans take q = 1 mod 4. Pairs with p = q = 3 mod 4 are already known to
# admit no quadruple, so only the mixed residue pattern needs a search.
MAIN = CampaignCriteria(
    variant="main", p_residue=(3, 4), q_residue=(1, 4), q_below_log=True
)
RESIDUAL = CampaignCriteria(
    variant="residual",
    p_residue=(3, 4),
    q_residue=(1, 4),
    q_at_least_log=True,
    q_max=RESIDUAL_Q_MAX,
    extra_filter="p_square_divides",
)
VARIANTS = {"main": MAIN, "residual": RESIDUAL}


# -- certified boundary ----------------------------------------------------

@lru_cache(maxsize=None)
def log_threshold_floor(p: int, K: int = EXPONENT_CONSTANT) -> int:
    """floor(K log p), certified (K log p is never an integer for p >= 2)."""
    prec = 64
    while True:
        x = log_interval(p, prec)
        with iv_precision(prec):
            t = K * x.as_interval()
            lo, hi = (mpmath.mp.make_mpf(v) for v in t._mpi_)
        if mpmath.floor(lo) == mpmath.floor(hi):
            return int(mpmath.floor(lo))
        prec *= 2


def admits_below_log(p: int, q: int, K: int = EXPONENT_CONSTANT) -> bool:
    """Decide q < K log p by a direct interval comparison (escalating precision)."""
    prec = 64
    while True:
        with iv_precision(prec):
            t = K * log_interval(p, prec).as_interval() - q
            lo, hi = (mpmath.mp.make_mpf(v) for v in t._mpi_)
        if lo > 0:
            return True
        if hi < 0:
            return False
        prec *= 2


# -- pair index ------------------------------------------------------------

class PairIndex:
    """Random access to the admissible pairs in canonical (p, q) order."""

    def __init__(self, criteria: CampaignCriteria, table: Optional[PrimeTable] = None):
        self.criteria = criteria
        limit = criteria.q_limit()
        self.table = table if table is not None and table.limit >= limit else sieve_primes(max(limit, 2))
        primes = self.table.primes[self.table.primes <= limit]
        qs = primes if criteria.q_residue is None else primes[primes % criteria.q_residue[1] == criteria.q_residue[0]]
        self.qs = qs
        ps = primes[primes >= criteria.p_min]
        if criteria.p_max is not None:
            ps = ps[ps <= criteria.p_max]
        if criteria.p_residue is not None:
            r, m = criteria.p_residue
            ps = ps[ps % m == r]
        starts = np.empty(len(ps), dtype=np.int64)
        stops = np.empty(len(ps), dtype=np.int64)
        for i, p in enumerate(ps.tolist()):
            lo, hi = self.q_range(p)
            starts[i] = np.searchsorted(qs, lo, side="left")
            stops[i] = np.searchsorted(qs, hi, side="right") if hi >= lo else starts[i]
        sizes = np.maximum(stops - starts, 0)
        keep = sizes > 0
        self.ps = ps[keep]
        self.starts = starts[keep]
        self.sizes = sizes[keep]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    def q_range(self, p: int) -> tuple[int, int]:
        """Closed integer range of admissible q for this p (before residue/primality)."""
        c = self.criteria
        lo = p + 1
        hi = c.q_max if c.q_max is not None else None
        if c.q_below_log or c.q_at_least_log:
            t = log_threshold_floor(p, c.log_constant)
            if c.q_below_log:
                hi = t if hi is None else min(hi, t)
            if c.q_at_least_log:
                lo = max(lo, t + 1)
        return lo, hi

    def __len__(self) -> int:
        return int(self.offsets[-1])

    def pairs_at(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(p, q) arrays for sorted canonical indices."""
        idx = np.asarray(idx, dtype=np.int64)
        k = np.searchsorted(self.offsets, idx, side="right") - 1
        q_pos = self.starts[k] + (idx - self.offsets[k])
        return self.ps[k], self.qs[q_pos]

    def groups(self, lo: int, hi: int) -> Iterator[tuple[int, np.ndarray, int]]:
        """Yield (p, q-array, first index) covering the index range [lo, hi)."""
        hi = min(hi, len(self))
        if lo >= hi:
            return
        k = int(np.searchsorted(self.offsets, lo, side="right")) - 1
        while k < len(self.ps) and self.offsets[k] < hi:
            a = max(lo, int(self.offsets[k]))
            b = min(hi, int(self.offsets[k + 1]))
            s = int(self.starts[k]) + a - int(self.offsets[k])
            yield int(self.ps[k]), self.qs[s : s + b - a], a
            k += 1


def count_pairs(criteria: CampaignCriteria, table: Optional[PrimeTable] = None) -> int:
    return len(PairIndex(criteria, table))


# -- running ---------------------------------------------------------------

@dataclass
class CampaignState:
    criteria: CampaignCriteria
    total_pairs: int
    block_size: int
    sample_every: int
    cursor_block: int = 0  # blocks [0, cursor_block) are complete
    blocks_total: int = 0
    pairs_seen: int = 0
    pairs_passed: int = 0
    pairs_searched: int = 0
    quadruples_found: int = 0
    output_path: Optional[str] = None
    finished: bool = False

    @property
    def counts(self) -> dict:
        return {
            "pairs_seen": self.pairs_seen,
            "pairs_passed": self.pairs_passed,
            "pairs_searched": self.pairs_searched,
            "quadruples_found": self.quadruples_found,
        }

    def run_hash(self) -> str:
        blob = json.dumps(
            [self.criteria.hash, self.block_size, self.sample_every], sort_keys=True
        ).encode()
        return hashlib.sha256(blob).hexdigest()

    def checkpoint_json(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "criteria_hash": self.run_hash(),
            "cursor_block": self.cursor_block,
            "blocks_done": self.cursor_block,
            "blocks_total": self.blocks_total,
            "counts": self.counts,
            "criteria": self.criteria.to_json(),
            "block_size": self.block_size,
            "sample_every": self.sample_every,
            "finished": self.finished,
        }


@dataclass
class BlockResult:
    block: int
    pairs_seen: int
    pairs_passed: int
    pairs_searched: int
    quadruples_found: int


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _shard_dir(output_path: Path) -> Path:
    return output_path.with_name(output_path.name + ".shards")


def _shard_path(output_path: Path, block: int) -> Path:
    return _shard_dir(output_path) / f"block-{block:08d}.jsonl"


def _apply_filter(name: Optional[str], p: int, qs: np.ndarray) -> np.ndarray:
    if name is None:
        return np.ones(len(qs), dtype=bool)
    if name == "p_square_divides":
        return p_square_divides_batch(p, qs)
    raise ValueError(name)


def process_block(
    index: PairIndex,
    block: int,
    block_size: int,
    sample_every: int,
    output_path: Optional[Path],
    search: bool = True,
) -> BlockResult:
    lo = block * block_size
    hi = min(lo + block_size, len(index))
    passed = searched = quads = 0
    lines: list[str] = []
    for p, qs, first in index.groups(lo, hi):
        if sample_every > 1:
            pos = np.arange(len(qs)) + first
            qs = qs[pos % sample_every == 0]
            if not len(qs):
                continue
        qs = qs[_apply_filter(index.criteria.extra_filter, p, qs)]
        passed += len(qs)
        if not search:
            continue
        for q in qs.tolist():
            report = search_pair(PrimePair(p, q))
            searched += 1
            quads += len(report.quadruples)
            if report.quadruples:
                log.warning("quadruple found for (%d, %d): %s", p, q, report.quadruples)
            lines.append(json.dumps(report.to_record()))
    if output_path is not None and search:
        _atomic_write(_shard_path(output_path, block), "".join(line + "\n" for line in lines))
    return BlockResult(block, hi - lo, passed, searched, quads)


# worker-process globals
_WORKER: dict = {}


def _worker_init(criteria_json: dict) -> None:
    _WORKER["index"] = PairIndex(CampaignCriteria.from_json(criteria_json))


def _worker_run(args) -> BlockResult:
    block, block_size, sample_every, output_path, search = args
    return process_block(
        _WORKER["index"], block, block_size, sample_every,
        Path(output_path) if output_path else None, search,
    )


def merge_shards(output_path: Path, blocks: int) -> int:
    """Concatenate block shards in order into output_path; returns line count."""
    output_path = Path(output_path)
    parts = []
    for b in range(blocks):
        shard = _shard_path(output_path, b)
        if not shard.exists():
            raise CampaignError(f"missing shard {shard}")
        parts.append(shard.read_text())
    text = "".join(parts)
    _atomic_write(output_path, text)
    return text.count("\n")


def _load_checkpoint(path: Path, state: CampaignState) -> None:
    data = json.loads(path.read_text())
    if data.get("version") != CHECKPOINT_VERSION:
        raise CampaignError(f"unsupported checkpoint version {data.get('version')}")
    if data.get("criteria_hash") != state.run_hash():
        raise CampaignError("checkpoint was written for different criteria; refusing to resume")
    state.cursor_block = int(data["cursor_block"])
    counts = data.get("counts", {})
    for k in state.counts:
        setattr(state, k, int(counts.get(k, 0)))
    state.finished = bool(data.get("finished", False))


def run_campaign(
    criteria: CampaignCriteria,
    workers: int = 1,
    checkpoint_path: Optional[os.PathLike] = None,
    output_path: Optional[os.PathLike] = None,
    block_size: int = 1 << 20,
    sample_every: int = 1,
    search: bool = True,
    stop_after_blocks: Optional[int] = None,
    progress: Optional[Callable[[CampaignState], None]] = None,
    index: Optional[PairIndex] = None,
) -> CampaignState:
    """Stream the criteria's pairs, filter, search, and persist results.

    Resumes from `checkpoint_path` when it exists. `stop_after_blocks`
    ends the run early (as an interruption would) after that many blocks
    in this invocation.
    """
    if block_size < 1 or sample_every < 1 or workers < 1:
        raise ValueError("block_size, sample_every and workers must be positive")
    index = index if index is not None and index.criteria == criteria else PairIndex(criteria)
    total = len(index)
    state = CampaignState(
        criteria=criteria,
        total_pairs=total,
        block_size=block_size,
        sample_every=sample_every,
        blocks_total=-(-total // block_size),
        output_path=str(output_path) if output_path else None,
    )
    ckpt = Path(checkpoint_path) if checkpoint_path else None
    out = Path(output_path) if output_path else None
    if ckpt is not None and ckpt.exists():
        _load_checkpoint(ckpt, state)
        log.info("resuming at block %d/%d", state.cursor_block, state.blocks_total)
    if out is not None:
        _shard_dir(out).mkdir(parents=True, exist_ok=True)
    if ckpt is not None:
        _atomic_write(ckpt, json.dumps(state.checkpoint_json(), indent=1))

    todo = list(range(state.cursor_block, state.blocks_total))
    if stop_after_blocks is not None:
        todo = todo[:stop_after_blocks]

    def absorb(res: BlockResult) -> None:
        if res.block != state.cursor_block:
            raise CampaignError(f"block {res.block} completed out of order")
        state.cursor_block += 1
        state.pairs_seen += res.pairs_seen
        state.pairs_passed += res.pairs_passed
        state.pairs_searched += res.pairs_searched
        state.quadruples_found += res.quadruples_found
        if ckpt is not None:
            _atomic_write(ckpt, json.dumps(state.checkpoint_json(), indent=1))
        if progress is not None:
            progress(state)

    if workers == 1 or len(todo) <= 1:
        for b in todo:
            absorb(process_block(index, b, block_size, sample_every, out, search))
    else:
        import multiprocessing as mp

        args = [(b, block_size, sample_every, str(out) if out else None, search) for b in todo]
        with mp.get_context("spawn").Pool(workers, _worker_init, (criteria.to_json(),)) as pool:
            for res in pool.imap(_worker_run, args):
                absorb(res)

    if state.cursor_block == state.blocks_total:
        if out is not None and search:
            merge_shards(out, state.blocks_total)
        state.finished = True
        if ckpt is not None:
            _atomic_write(ckpt, json.dumps(state.checkpoint_json(), indent=1))
    return state
