import os
from collections import Counter
from itertools import combinations

import pytest

from app.core.errors import PreconditionError, UsageError
from app.models.design import DicksonSpec
from app.services import field_service as fs
from app.services.family_service import FamilyService, calibrate_dy_labels, parse_family
from app.services.invariants_service import (
    InvariantsService,
    calibrate_convention,
    compare_families,
    distributions_csv,
    load_reference_tables,
    matches_reference,
    minmax_triple,
    scaling_orbit_check,
    scaling_orbit_scan,
    tail_is_maximum,
    triple_distribution,
)
from app.services.sets_service import dickson_image_set, paley_set

FAMILIES = ["paley", "dy1", "dy-1", "d7:1", "d7:-1"]


@pytest.fixture(scope="module")
def m5_sets():
    ctx = fs.make_field(5)
    service = FamilyService()
    return ctx, {tok: service.resolve(parse_family(tok, 5), ctx) for tok in FAMILIES}


def brute_force_triples(ctx, D, ordered=False):
    members = set(D.elements.tolist())
    shifted = {a: {fs.add(ctx, d, a) for d in members} for a in range(1, ctx.q)}
    pairs = combinations(range(1, ctx.q), 2)
    values = Counter(len(members & shifted[a] & shifted[b]) for a, b in pairs)
    if ordered:
        values = Counter({v: 2 * c for v, c in values.items()})
    return sorted(values.items())


# ---------------------------------------------------------
# Distributions
# ---------------------------------------------------------
def test_distribution_matches_brute_force(gf3):
    D = paley_set(gf3)
    for convention, ordered in (("unordered_distinct", False), ("ordered_distinct", True)):
        dist = triple_distribution(gf3, D, convention)
        assert [tuple(e) for e in dist.entries] == brute_force_triples(gf3, D, ordered)


def test_distribution_totals(gf5):
    D = paley_set(gf5)
    dist = triple_distribution(gf5, D)
    assert dist.total == 242 * 241 // 2
    assert dist.max_value <= D.cardinality


def test_reference_rows_m5(m5_sets):
    ctx, sets = m5_sets
    reference = load_reference_tables()["m5_distribution"]
    for token in FAMILIES:
        dist = triple_distribution(ctx, sets[token])
        assert matches_reference(dist, reference[token]), (token, dist.entries[:5], dist.entries[-1])


def test_paley_m5_head_and_tail(gf5):
    dist = triple_distribution(gf5, paley_set(gf5))
    for value, mult in [(26, 1815), (27, 3630), (28, 1815), (29, 7260), (33, 1815)]:
        assert dist.multiplicity(value) == mult
    assert dist.max_value == 33


def test_d1_m5_extremes(m5_sets):
    ctx, sets = m5_sets
    dist = triple_distribution(ctx, sets["d7:1"])
    assert dist.entries[0] == (23, 30)
    assert dist.entries[-1] == (36, 45)


def test_dy1_m5_head_and_real_tail(m5_sets):
    ctx, sets = m5_sets
    dist = triple_distribution(ctx, sets["dy1"])
    assert dist.entries[:4] == [(23, 15), (24, 30), (25, 285), (26, 1245)]
    assert dist.entries[-1] == (36, 15)
    assert dist.multiplicity(35) == 45
    reference = load_reference_tables()["m5_distribution"]
    assert matches_reference(dist, reference["dy1"])
    assert not tail_is_maximum(dist, reference["dy1"])


def test_quoted_tails_are_maxima_for_paley_and_d7(m5_sets):
    ctx, sets = m5_sets
    reference = load_reference_tables()["m5_distribution"]
    for token in ("paley", "d7:1", "d7:-1"):
        assert tail_is_maximum(triple_distribution(ctx, sets[token]), reference[token]), token


def test_m5_families_pairwise_distinct(m5_sets):
    ctx, sets = m5_sets
    report = compare_families([triple_distribution(ctx, sets[t]) for t in FAMILIES])
    assert report.pairwise_distinct
    assert report.summary == "pairwise distinct"


def test_identical_inputs_compare_equal(gf5):
    dist = triple_distribution(gf5, paley_set(gf5))
    report = compare_families([dist, dist])
    assert not report.pairwise_distinct
    assert report.distinct == [[False, False], [False, False]]


def test_compare_rejects_mixed_inputs(gf3, gf5):
    a = triple_distribution(gf3, paley_set(gf3))
    b = triple_distribution(gf5, paley_set(gf5))
    with pytest.raises(UsageError):
        compare_families([a, b])
    c = triple_distribution(gf3, paley_set(gf3), "ordered_distinct")
    with pytest.raises(UsageError):
        compare_families([a, c])


def test_minmax_agrees_with_distribution(m5_sets):
    ctx, sets = m5_sets
    for token in ("paley", "d7:-1"):
        dist = triple_distribution(ctx, sets[token])
        mm = minmax_triple(ctx, sets[token])
        assert (mm.min, mm.max) == (dist.min_value, dist.max_value)


def test_affine_images_share_the_distribution(m5_sets):
    ctx, sets = m5_sets
    D = sets["d7:1"]
    base = triple_distribution(ctx, D).entries
    for scale, shift in ((ctx.generator, 0), (2, 17), (fs.pow(ctx, ctx.generator, 5), 200)):
        assert triple_distribution(ctx, D.affine(scale, shift)).entries == base


def test_distribution_is_thread_count_independent(gf5):
    D = paley_set(gf5)
    assert triple_distribution(gf5, D, threads=1).entries == triple_distribution(gf5, D, threads=4).entries


def test_unknown_convention(gf3):
    with pytest.raises(UsageError):
        triple_distribution(gf3, paley_set(gf3), "ordered_with_diagonal")


def test_csv_has_metadata_header(gf3):
    text = distributions_csv([triple_distribution(gf3, paley_set(gf3))])
    lines = text.splitlines()
    assert lines[0].startswith("# family=paley m=3")
    assert lines[1] == "family,value,multiplicity"


@pytest.mark.slow
def test_reference_minmax_m7():
    ctx = fs.make_field(7)
    service = FamilyService()
    reference = load_reference_tables()["m7_minmax"]
    rows = [minmax_triple(ctx, service.resolve(parse_family(token, 7), ctx)) for token in FAMILIES]
    observed = {mm.family_label: [mm.min, mm.max] for mm in rows}
    for token in FAMILIES:
        assert observed[token] == reference[token], token
    assert compare_families(rows).pairwise_distinct


# ---------------------------------------------------------
# Calibration
# ---------------------------------------------------------
def test_calibrated_convention_is_unordered(gf5):
    convention, evidence = calibrate_convention(gf5)
    assert convention == "unordered_distinct"
    assert evidence["unordered_distinct"] and not evidence["ordered_distinct"]


def test_dy_labels_reproduce_reference_rows(gf5):
    swapped, evidence = calibrate_dy_labels(gf5)
    assert not swapped
    assert evidence["dy1=D5(x^2,-1)"] and evidence["dy-1=D5(x^2,1)"]
    assert not evidence["dy1=D5(x^2,1)"]


# ---------------------------------------------------------
# Scaling orbits
# ---------------------------------------------------------
def test_orbit_identity(gf5):
    check = scaling_orbit_check(gf5, 1)
    assert check.equivalent_to == "equivalent_to_D1"
    assert check.b == 1 and check.scale == 1


def test_orbit_nonsquare_b(gf5):
    g = gf5.generator
    check = scaling_orbit_check(gf5, fs.pow(gf5, g, 2))
    assert check.equivalent_to == "equivalent_to_D1"
    assert check.b == g and not check.b_is_square
    assert check.scale == fs.neg(gf5, fs.pow(gf5, g, 7))


def test_orbit_square_b(gf5):
    g = gf5.generator
    check = scaling_orbit_check(gf5, fs.pow(gf5, g, 4))
    assert check.b_is_square
    assert check.scale == fs.pow(gf5, g, 14)
    D_u = dickson_image_set(gf5, DicksonSpec(n=7, u=fs.pow(gf5, g, 4)))
    D_1 = dickson_image_set(gf5, DicksonSpec(n=7, u=1))
    assert D_u == D_1.affine(fs.pow(gf5, g, 14))


def test_orbit_nonsquare_u(gf5):
    assert scaling_orbit_check(gf5, gf5.generator).equivalent_to == "equivalent_to_Dminus1"


def test_orbit_scan_splits_by_squares(gf5):
    counts = scaling_orbit_scan(gf5)
    assert counts == {"equivalent_to_D1": 121, "equivalent_to_Dminus1": 121}


def test_orbit_preconditions(gf4, gf5):
    with pytest.raises(PreconditionError):
        scaling_orbit_check(gf4, 1)
    with pytest.raises(PreconditionError):
        scaling_orbit_check(gf5, 0)


# ---------------------------------------------------------
# Cache
# ---------------------------------------------------------
def test_distribution_cache_round_trip(gf5, tmp_path):
    cache = tmp_path / "dists"
    service = InvariantsService(cache_dir=str(cache))
    D = paley_set(gf5)
    first = service.distribution(gf5, D)
    assert len(os.listdir(cache)) == 1
    second = service.distribution(gf5, D)
    assert second.entries == first.entries
    mm = service.minmax(gf5, D)
    assert (mm.min, mm.max) == (first.min_value, first.max_value)


def test_corrupt_cache_is_recomputed(gf3, tmp_path):
    cache = tmp_path / "dists"
    service = InvariantsService(cache_dir=str(cache))
    D = paley_set(gf3)
    first = service.distribution(gf3, D)
    (path,) = [cache / name for name in os.listdir(cache)]
    path.write_text("{not json")
    assert service.distribution(gf3, D).entries == first.entries
