"""Triple intersection numbers T{a,b} = |D ∩ (D+a) ∩ (D+b)| and scaling orbits of D_7 image sets.

T is read off a Gram matrix: with A[a, j] = [d_j - a in D] for the elements d_j of D,
T{a,b} = (A A^T)[a, b]. Entries are integer counts below 2^24, so float32 BLAS is exact.
"""

import csv
import io
import json
import logging
import os
import time
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.errors import InvariantViolation, PreconditionError, UsageError
from app.models.design import ComparisonReport, DicksonSpec, MinMax, OrbitCheck, TripleDist
from app.services.field_service import FieldCtx, make_field
from app.services.sets_service import ElementSet, dickson_image_set, paley_set
from app.utils.parallel import merge_counts, shards, sharded_map

logger = logging.getLogger(__name__)

CONVENTIONS = ("unordered_distinct", "ordered_distinct")


def _check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise UsageError(f"unknown pair convention {convention!r}; expected one of {CONVENTIONS}")
    return convention


def _membership_matrix(ctx: FieldCtx, D: ElementSet, threads: int = None) -> np.ndarray:
    elems = D.elements
    mask = D.mask
    nonzero = np.arange(1, ctx.q, dtype=np.int64)

    def rows(block: np.ndarray) -> np.ndarray:
        return mask[ctx.sub_array(elems[None, :], nonzero[block][:, None])]

    return np.vstack(sharded_map(rows, shards(ctx.q - 1), threads)).astype(np.float32)


def _pair_values(A: np.ndarray, block: np.ndarray, convention: str) -> np.ndarray:
    gram = np.rint(A[block] @ A.T).astype(np.int64)
    cols = np.arange(A.shape[0])
    if convention == "unordered_distinct":
        keep = cols[None, :] > block[:, None]
    else:
        keep = cols[None, :] != block[:, None]
    return gram[keep]


def _expected_pairs(q: int, convention: str) -> int:
    n = q - 1
    return n * (n - 1) // 2 if convention == "unordered_distinct" else n * (n - 1)


def _expected_mass(k: int, convention: str) -> int:
    # every d in D lies in D + a for exactly k - 1 nonzero a
    unordered = k * (k - 1) * (k - 2) // 2
    return unordered if convention == "unordered_distinct" else 2 * unordered


def triple_distribution(
    ctx: FieldCtx, D: ElementSet, convention: str = None, threads: int = None
) -> TripleDist:
    convention = _check_convention(convention or settings.DEFAULT_CONVENTION)
    k = D.cardinality
    started = time.perf_counter()
    A = _membership_matrix(ctx, D, threads)

    def histogram(block: np.ndarray) -> np.ndarray:
        return np.bincount(_pair_values(A, block, convention), minlength=k + 1)

    counts = merge_counts(sharded_map(histogram, shards(ctx.q - 1), threads))
    values = np.flatnonzero(counts)
    entries = [(int(v), int(counts[v])) for v in values]

    total = int(counts.sum())
    mass = int((np.arange(counts.size) * counts).sum())
    if total != _expected_pairs(ctx.q, convention) or mass != _expected_mass(k, convention):
        raise InvariantViolation(
            "triple intersection histogram lost pairs",
            {"m": ctx.m, "label": D.label, "convention": convention, "total": total, "mass": mass},
        )
    logger.info(
        "triple distribution %s on %s (%s): %d values in %.2fs",
        D.label or "<set>", ctx.ctx_id, convention, len(entries), time.perf_counter() - started,
    )
    return TripleDist(
        family_label=D.label,
        m=ctx.m,
        modulus=list(ctx.modulus),
        pair_convention=convention,
        entries=entries,
    )


def minmax_triple(ctx: FieldCtx, D: ElementSet, convention: str = None, threads: int = None) -> MinMax:
    convention = _check_convention(convention or settings.DEFAULT_CONVENTION)
    started = time.perf_counter()
    A = _membership_matrix(ctx, D, threads)

    def extremes(block: np.ndarray) -> Optional[Tuple[int, int]]:
        values = _pair_values(A, block, convention)
        if values.size == 0:
            return None
        return int(values.min()), int(values.max())

    parts = [p for p in sharded_map(extremes, shards(ctx.q - 1), threads) if p is not None]
    if not parts:
        raise UsageError(f"no admissible pairs in {ctx.ctx_id}")
    lo = min(p[0] for p in parts)
    hi = max(p[1] for p in parts)
    logger.info(
        "triple min/max %s on %s (%s): (%d, %d) in %.2fs",
        D.label or "<set>", ctx.ctx_id, convention, lo, hi, time.perf_counter() - started,
    )
    return MinMax(family_label=D.label, m=ctx.m, pair_convention=convention, min=lo, max=hi)


def _signature(item: Union[TripleDist, MinMax]):
    if isinstance(item, TripleDist):
        return tuple(item.entries)
    return item.min, item.max


def compare_families(items: Sequence[Union[TripleDist, MinMax]]) -> ComparisonReport:
    if not items:
        raise UsageError("nothing to compare")
    first = items[0]
    for item in items[1:]:
        if item.m != first.m:
            raise UsageError(f"cannot compare m={first.m} with m={item.m}")
        if item.pair_convention != first.pair_convention:
            raise UsageError(
                f"cannot compare pair conventions {first.pair_convention} and {item.pair_convention}"
            )
        if type(item) is not type(first):
            raise UsageError("cannot compare a distribution with a min/max pair")

    sigs = [_signature(item) for item in items]
    n = len(items)
    distinct = [[i != j and sigs[i] != sigs[j] for j in range(n)] for i in range(n)]
    equal_pairs = [
        f"{items[i].family_label} == {items[j].family_label}"
        for i in range(n)
        for j in range(i + 1, n)
        if not distinct[i][j]
    ]
    pairwise = not equal_pairs
    summary = "pairwise distinct" if pairwise else "not pairwise distinct: " + "; ".join(equal_pairs)
    return ComparisonReport(
        m=first.m,
        pair_convention=first.pair_convention,
        labels=[item.family_label for item in items],
        distinct=distinct,
        pairwise_distinct=pairwise,
        summary=summary,
    )


def _require_d7_shds(ctx: FieldCtx) -> None:
    if ctx.m % 2 == 0 or ctx.m % 3 == 0:
        raise PreconditionError(f"D_7 scaling orbits need odd m with m % 3 != 0, got m={ctx.m}")


def _half_log_root(ctx: FieldCtx, square: int) -> int:
    return int(ctx.exp_table[int(ctx.log_table[square]) // 2])


def scaling_orbit_check(
    ctx: FieldCtx, u: int, d1: ElementSet = None, dminus1: ElementSet = None
) -> OrbitCheck:
    """Show D_u = ±b^7 D_{±1} elementwise via b^7 D_7(x, u) = D_7(bx, ub^2)."""
    _require_d7_shds(ctx)
    u = int(u)
    if u == 0:
        raise PreconditionError("u must be nonzero")
    minus_one = int(ctx.neg_array(1))
    if ctx.chi_table[u] == 1:
        b = _half_log_root(ctx, u)
        base = d1 if d1 is not None else dickson_image_set(ctx, DicksonSpec(n=7, u=1), "d7:1")
        cls = "equivalent_to_D1"
    else:
        b = _half_log_root(ctx, int(ctx.neg_array(u)))
        base = dminus1 if dminus1 is not None else dickson_image_set(ctx, DicksonSpec(n=7, u=minus_one), "d7:-1")
        cls = "equivalent_to_Dminus1"

    b_is_square = bool(ctx.chi_table[b] == 1)
    b7 = int(ctx.pow_array(b, 7))
    scale = b7 if b_is_square else int(ctx.neg_array(b7))
    d_u = dickson_image_set(ctx, DicksonSpec(n=7, u=u))
    if d_u != base.affine(scale):
        raise InvariantViolation(
            "D_u is not the predicted scaling of its class representative",
            {"m": ctx.m, "modulus": list(ctx.modulus), "u": u, "b": b, "scale": scale},
        )
    return OrbitCheck(u=u, b=b, b_is_square=b_is_square, scale=scale, equivalent_to=cls)


def scaling_orbit_scan(ctx: FieldCtx, threads: int = None) -> Dict[str, int]:
    _require_d7_shds(ctx)
    started = time.perf_counter()
    d1 = dickson_image_set(ctx, DicksonSpec(n=7, u=1), "d7:1")
    dminus1 = dickson_image_set(ctx, DicksonSpec(n=7, u=int(ctx.neg_array(1))), "d7:-1")

    def scan(block: np.ndarray) -> List[str]:
        return [scaling_orbit_check(ctx, int(u) + 1, d1, dminus1).equivalent_to for u in block]

    classes = [c for part in sharded_map(scan, shards(ctx.q - 1), threads) for c in part]
    counts = {
        "equivalent_to_D1": classes.count("equivalent_to_D1"),
        "equivalent_to_Dminus1": classes.count("equivalent_to_Dminus1"),
    }
    squares = int((ctx.chi_table == 1).sum())
    if counts["equivalent_to_D1"] != squares:
        raise InvariantViolation("D_1 class is not the set of square u", {"m": ctx.m, **counts})
    logger.info("scaling orbit scan on %s: %s in %.2fs", ctx.ctx_id, counts, time.perf_counter() - started)
    return counts


@lru_cache(maxsize=1)
def load_reference_tables(path: Optional[str] = None) -> dict:
    with open(path or settings.REFERENCE_FILE, "r") as f:
        data = json.load(f)
    if data.get("version") != 1:
        raise UsageError(f"unsupported reference table version {data.get('version')!r}")
    return data


def matches_reference(dist: TripleDist, reference: Sequence[Sequence[int]]) -> bool:
    """Every quoted (value, multiplicity) row occurs in the distribution, wherever it sits."""
    return all(dist.multiplicity(value) == mult for value, mult in reference)


def tail_is_maximum(dist: TripleDist, reference: Sequence[Sequence[int]]) -> bool:
    """The last quoted row is the largest triple intersection number of the distribution."""
    value, mult = reference[-1]
    return tuple(dist.entries[-1]) == (value, mult)


def calibrate_convention(ctx: FieldCtx = None, threads: int = None) -> Tuple[str, Dict[str, bool]]:
    """Pick the pair convention whose m = 5 Paley distribution reproduces the reference rows."""
    ctx = ctx or make_field(5)
    if ctx.m != 5:
        raise PreconditionError("convention calibration runs on m = 5")
    reference = load_reference_tables()["m5_distribution"]["paley"]
    paley = paley_set(ctx)
    evidence = {
        convention: matches_reference(triple_distribution(ctx, paley, convention, threads), reference)
        for convention in CONVENTIONS
    }
    chosen = next((c for c in CONVENTIONS if evidence[c]), None)
    if chosen is None:
        raise InvariantViolation("no pair convention reproduces the Paley reference rows", evidence)
    if chosen != settings.DEFAULT_CONVENTION:
        logger.warning("calibration flips the pair convention to %s", chosen)
    return chosen, evidence


class InvariantsService:
    """Triple-intersection statistics with an on-disk distribution cache keyed by set content."""

    def __init__(self, cache_dir: str = None, use_cache: bool = True, threads: int = None):
        self.cache_dir = cache_dir or settings.CACHE_DIR
        self.use_cache = use_cache
        self.threads = threads

    def _cache_path(self, D: ElementSet, convention: str) -> str:
        return os.path.join(self.cache_dir, f"{D.content_hash()}-{convention}.json")

    def distribution(self, ctx: FieldCtx, D: ElementSet, convention: str = None) -> TripleDist:
        convention = _check_convention(convention or settings.DEFAULT_CONVENTION)
        path = self._cache_path(D, convention)
        if self.use_cache and os.path.exists(path):
            try:
                with open(path, "r") as f:
                    cached = TripleDist.model_validate_json(f.read())
                logger.debug("distribution cache hit %s", path)
                return cached.model_copy(update={"family_label": D.label})
            except ValueError as e:
                logger.warning("ignoring corrupt cache file %s: %s", path, e)

        dist = triple_distribution(ctx, D, convention, self.threads)
        if self.use_cache:
            os.makedirs(self.cache_dir, exist_ok=True)
            with open(path, "w") as f:
                f.write(dist.model_dump_json(indent=4))
        return dist

    def minmax(self, ctx: FieldCtx, D: ElementSet, convention: str = None) -> MinMax:
        convention = _check_convention(convention or settings.DEFAULT_CONVENTION)
        path = self._cache_path(D, convention)
        if self.use_cache and os.path.exists(path):
            dist = self.distribution(ctx, D, convention)
            return MinMax(
                family_label=D.label, m=ctx.m, pair_convention=convention,
                min=dist.min_value, max=dist.max_value,
            )
        return minmax_triple(ctx, D, convention, self.threads)


def distributions_csv(dists: Sequence[TripleDist]) -> str:
    buf = io.StringIO()
    for dist in dists:
        buf.write(
            f"# family={dist.family_label} m={dist.m} modulus={dist.modulus} "
            f"convention={dist.pair_convention}\n"
        )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "value", "multiplicity"])
    for dist in dists:
        for value, mult in dist.entries:
            writer.writerow([dist.family_label, value, mult])
    return buf.getvalue()


def minmax_csv(rows: Sequence[MinMax], modulus: Sequence[int] = ()) -> str:
    buf = io.StringIO()
    if rows:
        buf.write(f"# m={rows[0].m} modulus={list(modulus)} convention={rows[0].pair_convention}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["family", "min", "max"])
    for row in rows:
        writer.writerow([row.family_label, row.min, row.max])
    return buf.getvalue()
