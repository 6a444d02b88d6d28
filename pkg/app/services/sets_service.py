import hashlib
import logging
import os
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, Optional, Union

import numpy as np

from app.core.config import settings
from app.core.errors import InvariantViolation, UsageError
from app.models.design import CountSummary, DicksonSpec, DsReport, SetFile
from app.services.dickson_service import dickson_values
from app.services.field_service import FieldCtx, make_field
from app.utils.parallel import shards, sharded_map

logger = logging.getLogger(__name__)

ValueMap = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class ElementSet:
    """Subset of GF(q) stored as a little-endian packed membership vector indexed by element."""

    ctx: FieldCtx
    bits: np.ndarray
    label: str = ""

    @classmethod
    def from_mask(cls, ctx: FieldCtx, mask: np.ndarray, label: str = "") -> "ElementSet":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (ctx.q,):
            raise ValueError(f"membership mask must have {ctx.q} entries")
        bits = np.packbits(mask, bitorder="little")
        bits.setflags(write=False)
        return cls(ctx=ctx, bits=bits, label=label)

    @classmethod
    def from_elements(cls, ctx: FieldCtx, elements: Iterable[int], label: str = "") -> "ElementSet":
        elements = np.fromiter((int(x) for x in elements), dtype=np.int64)
        if elements.size and (elements.min() < 0 or elements.max() >= ctx.q):
            raise UsageError(f"set element outside 0..{ctx.q - 1}")
        mask = np.zeros(ctx.q, dtype=bool)
        mask[elements] = True
        return cls.from_mask(ctx, mask, label)

    @cached_property
    def mask(self) -> np.ndarray:
        mask = np.unpackbits(self.bits, count=self.ctx.q, bitorder="little").astype(bool)
        mask.setflags(write=False)
        return mask

    @cached_property
    def elements(self) -> np.ndarray:
        return np.flatnonzero(self.mask).astype(np.int64)

    @property
    def ctx_id(self) -> str:
        return self.ctx.ctx_id

    @property
    def cardinality(self) -> int:
        return int(np.unpackbits(self.bits).sum())

    def __len__(self) -> int:
        return self.cardinality

    def __contains__(self, x: int) -> bool:
        return bool(self.mask[int(x)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ElementSet):
            return NotImplemented
        return self.ctx is other.ctx and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.ctx.ctx_id, self.bits.tobytes()))

    def negate(self) -> "ElementSet":
        return ElementSet.from_elements(self.ctx, self.ctx.neg_array(self.elements), f"-{self.label}")

    def affine(self, scale: int, shift: int = 0) -> "ElementSet":
        """The set scale * D + shift."""
        image = self.ctx.add_array(self.ctx.mul_array(scale, self.elements), shift)
        return ElementSet.from_elements(self.ctx, image, self.label)

    def to_set_file(self) -> SetFile:
        return SetFile(
            m=self.ctx.m,
            modulus=list(self.ctx.modulus),
            elements=self.elements.tolist(),
            family=self.label or None,
        )

    def content_hash(self) -> str:
        payload = SetFile(m=self.ctx.m, modulus=list(self.ctx.modulus), elements=self.elements.tolist())
        return hashlib.sha256(payload.model_dump_json().encode()).hexdigest()


def _value_table(ctx: FieldCtx, f: ValueMap) -> np.ndarray:
    if callable(f):
        return np.asarray(f(np.arange(ctx.q, dtype=np.int64)), dtype=np.int64)
    table = np.asarray(f, dtype=np.int64)
    if table.shape != (ctx.q,):
        raise ValueError(f"value table must have {ctx.q} entries")
    return table


def build_image_set(ctx: FieldCtx, f: ValueMap, squares_only: bool = True, label: str = "") -> ElementSet:
    """{f(x^2) : x != 0} when squares_only, otherwise {f(x) : x != 0}."""
    table = _value_table(ctx, f)
    xs = np.arange(1, ctx.q, dtype=np.int64)
    args = ctx.mul_array(xs, xs) if squares_only else xs
    return ElementSet.from_elements(ctx, np.unique(table[args]), label)


def dickson_image_set(ctx: FieldCtx, spec: DicksonSpec, label: str = "") -> ElementSet:
    """{D_n(x^2, u) : x != 0}."""
    return build_image_set(
        ctx, lambda xs: dickson_values(ctx, spec, xs), squares_only=True, label=label or f"D{spec.n}:{spec.u}"
    )


def paley_set(ctx: FieldCtx) -> ElementSet:
    return ElementSet.from_mask(ctx, ctx.chi_table == 1, "paley")


def is_skew(ctx: FieldCtx, D: ElementSet) -> bool:
    mask = D.mask
    if mask[0] or D.cardinality != (ctx.q - 1) // 2:
        return False
    return not bool((mask & mask[ctx.neg_array(np.arange(ctx.q))]).any())


def _summary(values: np.ndarray) -> Optional[CountSummary]:
    if values.size == 0:
        return None
    lo, hi = int(values.min()), int(values.max())
    return CountSummary(min=lo, max=hi, uniform=lo == hi, count=int(values.size))


def difference_counts(ctx: FieldCtx, D: ElementSet, threads: int = None) -> np.ndarray:
    """N(g) = |D ∩ (D + g)| for every g; entry 0 is |D|."""
    elems = D.elements
    mask = D.mask

    def count(block: np.ndarray) -> np.ndarray:
        # d - g in D  <=>  d in D + g
        idx = ctx.sub_array(elems[None, :], block[:, None])
        return mask[idx].sum(axis=1)

    return np.concatenate(sharded_map(count, shards(ctx.q), threads)).astype(np.int64)


def difference_report(ctx: FieldCtx, D: ElementSet, threads: int = None) -> DsReport:
    k = D.cardinality
    if k < 1:
        raise UsageError("difference_report needs a non-empty set")
    v = ctx.q
    started = time.perf_counter()
    counts = difference_counts(ctx, D, threads)
    nonzero = counts[1:]
    if int(nonzero.sum()) != k * (k - 1):
        raise InvariantViolation(
            "difference counts do not sum to k(k-1)",
            {"m": ctx.m, "k": k, "sum": int(nonzero.sum()), "label": D.label},
        )

    mask = D.mask
    sym = mask | mask[ctx.neg_array(np.arange(v))]
    inside = counts[sym & (np.arange(v) != 0)]
    outside = counts[~sym & (np.arange(v) != 0)]
    spectrum: Dict[str, CountSummary] = {"nonzero": _summary(nonzero)}
    for name, values in (("in_D_or_minus_D", inside), ("outside", outside)):
        summary = _summary(values)
        if summary is not None:
            spectrum[name] = summary

    skew = is_skew(ctx, D)
    if spectrum["nonzero"].uniform:
        verdict, lam, mu = "difference_set", spectrum["nonzero"].min, None
        if lam * (v - 1) != k * (k - 1):
            raise InvariantViolation("difference set parameters inconsistent", {"v": v, "k": k, "lam": lam})
        if skew and not (v == 4 * (k - lam) - 1 and 2 * k == v - 1 and 4 * lam == v - 3):
            raise InvariantViolation("skew difference set without Hadamard parameters", {"v": v, "k": k, "lam": lam})
    elif inside.size and outside.size and spectrum["in_D_or_minus_D"].uniform and spectrum["outside"].uniform:
        verdict = "partial_difference_set"
        lam, mu = spectrum["in_D_or_minus_D"].min, spectrum["outside"].min
    else:
        verdict, lam, mu = "neither", None, None

    logger.info(
        "difference report %s on %s: verdict=%s lam=%s mu=%s skew=%s (%.2fs)",
        D.label or "<set>", ctx.ctx_id, verdict, lam, mu, skew, time.perf_counter() - started,
    )
    return DsReport(v=v, k=k, lambda_spectrum=spectrum, verdict=verdict, lam=lam, mu=mu, skew=skew)


def save_set(D: ElementSet, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(D.to_set_file().model_dump_json(indent=4))
    return path


def load_set(path: str, ctx: Optional[FieldCtx] = None) -> ElementSet:
    if not os.path.exists(path):
        raise UsageError(f"set file not found: {path}")
    with open(path, "r") as f:
        data = SetFile.model_validate_json(f.read())
    if ctx is None:
        ctx = make_field(data.m, data.modulus)
    elif data.m != ctx.m or tuple(data.modulus) != ctx.modulus:
        raise UsageError(
            f"set file {path} is pinned to m={data.m} modulus={data.modulus}, "
            f"not {ctx.ctx_id}"
        )
    return ElementSet.from_elements(ctx, data.elements, data.family or os.path.basename(path))


def default_set_path(label: str, m: int) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)
    return os.path.join(settings.SETS_DIR, f"{safe}_m{m}.json")
