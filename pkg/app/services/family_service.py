import logging
import os
import re
from typing import Dict, List, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import PreconditionError, UsageError
from app.models.design import DicksonSpec, FamilySpec
from app.services.field_service import FieldCtx, make_field, parse_element
from app.services.invariants_service import (
    load_reference_tables,
    matches_reference,
    tail_is_maximum,
    triple_distribution,
)
from app.services.sets_service import (
    ElementSet,
    build_image_set,
    default_set_path,
    dickson_image_set,
    load_set,
    paley_set,
    save_set,
)

logger = logging.getLogger(__name__)

FAMILY_NAMES = ("paley", "dy1", "dy-1", "d7", "image", "set")


def parse_family(token: str, m: int, u: str = None, mode: str = "shds") -> FamilySpec:
    """Parse "paley", "dy1", "dy-1", "d7:<u>", "image:<e1>+<e2>..." or "set:<path>"."""
    name, _, arg = token.strip().partition(":")
    name = name.lower()
    if name not in FAMILY_NAMES:
        raise UsageError(f"unknown family {token!r}; expected one of {', '.join(FAMILY_NAMES)}")
    if name == "d7":
        u = arg or u
        if not u:
            raise UsageError("family d7 needs a u expression, as d7:<u> or --u")
        return FamilySpec(name="d7", m=m, u=u, mode=mode)
    if name == "image":
        try:
            exponents = [int(e) for e in re.split(r"[+\s]+", arg) if e]
        except ValueError:
            raise UsageError(f"cannot parse exponent list {arg!r}")
        if not exponents or min(exponents) < 0:
            raise UsageError("family image needs a list of nonnegative exponents, as image:7+3")
        return FamilySpec(name="image", m=m, exponents=exponents, mode=mode)
    if name == "set":
        if not arg:
            raise UsageError("family set needs a path, as set:<file>")
        return FamilySpec(name="set", m=m, set_file=arg, mode=mode)
    return FamilySpec(name=name, m=m, mode=mode)


def dy_parameter(label: str, swapped: bool = None) -> int:
    """The u of D_5(x^2, u) behind a DY label: DY(v) is the image of D_5(x^2, -v)."""
    swapped = settings.DY_SWAP_LABELS if swapped is None else swapped
    sign = -1 if label == "dy1" else 1
    return -sign if swapped else sign


def monomial_sum_table(ctx: FieldCtx, exponents: List[int]) -> np.ndarray:
    """Value table of x -> sum_e x^e."""
    xs = np.arange(ctx.q, dtype=np.int64)
    total = np.zeros(ctx.q, dtype=np.int64)
    for e in exponents:
        total = ctx.add_array(total, ctx.pow_array(xs, e))
    return total


class FamilyService:
    def __init__(self, sets_dir: str = None):
        self._sets_dir = sets_dir

    @property
    def sets_dir(self) -> str:
        return self._sets_dir or settings.SETS_DIR

    def check_preconditions(self, spec: FamilySpec) -> None:
        if spec.name == "d7" and spec.mode == "shds":
            if spec.m % 2 == 0:
                raise PreconditionError(
                    f"d7 needs odd m for a skew Hadamard difference set, got m={spec.m}; use --as pds"
                )
            if spec.m % 3 == 0:
                raise PreconditionError(
                    f"d7 needs m % 3 != 0 for D_7 to permute GF(3^{spec.m}); use --as pds"
                )
        if spec.name in ("dy1", "dy-1") and spec.mode == "shds" and spec.m % 2 == 0:
            raise PreconditionError(f"{spec.name} needs odd m, got m={spec.m}; use --as pds")

    def resolve(self, spec: FamilySpec, ctx: FieldCtx = None) -> ElementSet:
        self.check_preconditions(spec)
        if spec.name == "set":
            D = load_set(spec.set_file, ctx)
            if D.ctx.m != spec.m:
                raise UsageError(f"set file {spec.set_file} is for m={D.ctx.m}, not m={spec.m}")
            return D

        ctx = ctx or make_field(spec.m)
        if ctx.m != spec.m:
            raise UsageError(f"family asks for m={spec.m} but the field has m={ctx.m}")
        if spec.name == "paley":
            return paley_set(ctx)
        if spec.name in ("dy1", "dy-1"):
            u = int(ctx.neg_array(1)) if dy_parameter(spec.name) == -1 else 1
            return dickson_image_set(ctx, DicksonSpec(n=5, u=u), spec.name)
        if spec.name == "d7":
            u = parse_element(ctx, spec.u)
            if u == 0 and spec.mode == "shds":
                raise PreconditionError("d7 needs u != 0")
            return dickson_image_set(ctx, DicksonSpec(n=7, u=u), spec.label)
        # image
        table = monomial_sum_table(ctx, spec.exponents)
        if np.unique(table).size != ctx.q:
            logger.warning("%s is not a permutation of GF(3^%d)", spec.label, ctx.m)
        return build_image_set(ctx, table, squares_only=True, label=spec.label)

    def save(self, D: ElementSet, path: str = None) -> str:
        path = path or default_set_path(D.label or "set", D.ctx.m)
        if not os.path.isabs(path) and os.path.dirname(path) == "":
            path = os.path.join(self.sets_dir, path)
        save_set(D, path)
        logger.info("wrote %d-element set %s to %s", D.cardinality, D.label, path)
        return path

    def load(self, path: str, ctx: FieldCtx = None) -> ElementSet:
        return load_set(path, ctx)


def calibrate_dy_labels(ctx: FieldCtx = None, convention: str = None, threads: int = None) -> Tuple[bool, Dict[str, bool]]:
    """Check which D_5 image carries which DY label against the m = 5 reference rows.

    Returns (swapped, evidence) where swapped means dy1 is the image of D_5(x^2, 1).
    """
    ctx = ctx or make_field(5)
    if ctx.m != 5:
        raise PreconditionError("DY label calibration runs on m = 5")
    reference = load_reference_tables()["m5_distribution"]
    minus_one = int(ctx.neg_array(1))
    dists = {
        u_label: triple_distribution(ctx, dickson_image_set(ctx, DicksonSpec(n=5, u=u)), convention, threads)
        for u_label, u in (("-1", minus_one), ("1", 1))
    }
    evidence = {
        "dy1=D5(x^2,-1)": matches_reference(dists["-1"], reference["dy1"]),
        "dy-1=D5(x^2,1)": matches_reference(dists["1"], reference["dy-1"]),
        "dy1=D5(x^2,1)": matches_reference(dists["1"], reference["dy1"]),
        "dy-1=D5(x^2,-1)": matches_reference(dists["-1"], reference["dy-1"]),
    }
    straight = evidence["dy1=D5(x^2,-1)"] and evidence["dy-1=D5(x^2,1)"]
    swapped = evidence["dy1=D5(x^2,1)"] and evidence["dy-1=D5(x^2,-1)"]
    if not straight and not swapped:
        logger.warning("neither DY labelling reproduces the reference rows: %s", evidence)
    elif swapped and not straight:
        logger.warning("DY labels are swapped; set DY_SWAP_LABELS=true")
    if swapped and not straight:
        chosen = {"dy1": dists["1"], "dy-1": dists["-1"]}
    else:
        chosen = {"dy1": dists["-1"], "dy-1": dists["1"]}
    for label, dist in chosen.items():
        if not tail_is_maximum(dist, reference[label]):
            logger.warning("%s: quoted tail %s is not the maximum %s", label, reference[label][-1], list(dist.entries[-1]))
    return swapped and not straight, evidence
