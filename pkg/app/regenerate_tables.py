"""Recompute the m = 5 triple intersection distributions and m = 7 min/max pairs.

    python -m app.regenerate_tables [--threads N] [--skip-m7]

Results go to settings.TABLES_DIR as JSON and CSV, next to a comparison summary.
"""

import argparse
import logging
import os

from app.core.config import settings
from app.core.logger import configure_logging
from app.services.family_service import FamilyService, parse_family
from app.services.field_service import make_field
from app.services.invariants_service import (
    InvariantsService,
    compare_families,
    distributions_csv,
    load_reference_tables,
    matches_reference,
    minmax_csv,
    tail_is_maximum,
)

logger = logging.getLogger(__name__)

FAMILIES = ["paley", "dy1", "dy-1", "d7:1", "d7:-1"]


def _write(path: str, text: str) -> None:
    with open(path, "w") as f:
        f.write(text)
    logger.info("wrote %s", path)


def main(threads: int = None, skip_m7: bool = False) -> None:
    os.makedirs(settings.TABLES_DIR, exist_ok=True)
    families = FamilyService()
    invariants = InvariantsService(threads=threads)
    reference = load_reference_tables()

    ctx = make_field(5)
    dists = [invariants.distribution(ctx, families.resolve(parse_family(tok, 5), ctx)) for tok in FAMILIES]
    for token, dist in zip(FAMILIES, dists):
        if not matches_reference(dist, reference["m5_distribution"][token]):
            logger.warning("m=5 %s does not reproduce its reference row", token)
        elif not tail_is_maximum(dist, reference["m5_distribution"][token]):
            logger.warning(
                "m=5 %s: quoted tail %s is not the maximum, which is %s",
                token, reference["m5_distribution"][token][-1], list(dist.entries[-1]),
            )
        _write(os.path.join(settings.TABLES_DIR, f"dist_m5_{token.replace(':', '_')}.json"), dist.model_dump_json(indent=4))
    _write(os.path.join(settings.TABLES_DIR, "dist_m5.csv"), distributions_csv(dists))
    logger.info("m=5: %s", compare_families(dists).summary)

    if skip_m7:
        return
    ctx = make_field(7)
    rows = [invariants.minmax(ctx, families.resolve(parse_family(tok, 7), ctx)) for tok in FAMILIES]
    for token, row in zip(FAMILIES, rows):
        if [row.min, row.max] != reference["m7_minmax"][token]:
            logger.warning("m=7 %s gives (%d, %d), reference %s", token, row.min, row.max, reference["m7_minmax"][token])
    _write(os.path.join(settings.TABLES_DIR, "minmax_m7.csv"), minmax_csv(rows, ctx.modulus))
    logger.info("m=7: %s", compare_families(rows).summary)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Regenerate the triple intersection tables")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--skip-m7", action="store_true")
    args = parser.parse_args()
    configure_logging()
    main(args.threads, args.skip_m7)
