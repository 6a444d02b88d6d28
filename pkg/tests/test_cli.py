import json

import numpy as np

from app.main import main
from app.services.field_service import make_field
from app.services.sets_service import ElementSet, save_set


def run(capsys, *argv):
    code = main(list(argv) + ["--log-level", "WARNING"])
    return code, capsys.readouterr().out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out) if out.strip() else None


# ---------------------------------------------------------
# construct / verify
# ---------------------------------------------------------
def test_construct_then_verify(capsys, tmp_path):
    path = str(tmp_path / "d1.json")
    code, report = run_json(capsys, "construct", "--family", "d7", "--u", "1", "--m", "5", "--out", path)
    assert code == 0
    assert report["cardinality"] == 121
    assert report["family"] == "d7:1"
    assert report["meta"]["m"] == 5

    code, report = run_json(capsys, "verify", "--set", path)
    assert code == 0
    assert report["checks"] == {"skew": True, "ds": True}
    assert report["parameters"] == [243, 121, 60]


def test_construct_refuses_m_divisible_by_3(capsys, tmp_path):
    code, out = run(capsys, "construct", "--family", "d7:1", "--m", "6", "--out", str(tmp_path / "x.json"))
    assert code == 2
    assert out == ""


def test_verify_all_checks(capsys):
    code, report = run_json(
        capsys, "verify", "--family", "d7:g", "--m", "5", "--checks", "skew,ds,lemma3,eq4,norm", "--threads", "2"
    )
    assert code == 0
    assert report["all_pass"]
    assert set(report["checks"]) == {"skew", "ds", "lemma3", "eq4", "norm"}


def test_verify_even_m_as_pds(capsys):
    code, report = run_json(capsys, "verify", "--family", "d7:1", "--m", "4", "--checks", "pds")
    assert code == 0
    assert report["verdict"] == "partial_difference_set"
    assert report["parameters"] == [81, 40, 19, 20]


def test_verify_random_set_fails(capsys, tmp_path, rng):
    ctx = make_field(5)
    D = ElementSet.from_elements(ctx, rng.choice(np.arange(1, ctx.q), size=121, replace=False), "random")
    path = save_set(D, str(tmp_path / "random.json"))
    code, report = run_json(capsys, "verify", "--set", path)
    assert code == 1
    assert not report["all_pass"]
    assert report["verdict"] == "neither"


def test_verify_unknown_check(capsys):
    code, _ = run(capsys, "verify", "--family", "paley", "--m", "3", "--checks", "skew,planar")
    assert code == 2


def test_verify_needs_a_family(capsys):
    code, _ = run(capsys, "verify", "--m", "3")
    assert code == 2


# ---------------------------------------------------------
# invariants
# ---------------------------------------------------------
def test_invariants_minmax_compare(capsys):
    code, report = run_json(
        capsys, "invariants", "--m", "5", "--families", "paley,d7:1,d7:-1", "--stat", "minmax", "--compare", "--no-cache"
    )
    assert code == 0
    rows = {row["family_label"]: (row["min"], row["max"]) for row in report["minmax"]}
    assert list(rows) == ["paley", "d7:1", "d7:-1"]
    assert rows["paley"] == (26, 33)
    assert rows["d7:1"] == rows["d7:-1"] == (23, 36)
    assert not report["comparison"]["pairwise_distinct"]
    assert "d7:1 == d7:-1" in report["comparison"]["summary"]


def test_invariants_dist_compare_separates_d7(capsys):
    code, report = run_json(
        capsys, "invariants", "--m", "5", "--families", "paley,d7:1,d7:-1", "--stat", "dist", "--compare", "--no-cache"
    )
    assert code == 0
    assert report["comparison"]["pairwise_distinct"]


def test_invariants_csv(capsys):
    code, out = run(capsys, "invariants", "--m", "5", "--families", "paley", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# family=paley m=5")
    assert lines[1] == "family,value,multiplicity"
    assert lines[2] == "paley,26,1815"


def test_invariants_ordered_convention(capsys):
    code, report = run_json(
        capsys, "invariants", "--m", "3", "--families", "paley", "--convention", "ordered_distinct"
    )
    assert code == 0
    dist = report["distributions"][0]
    assert dist["pair_convention"] == "ordered_distinct"
    assert sum(mult for _, mult in dist["entries"]) == 26 * 25


# ---------------------------------------------------------
# appendix
# ---------------------------------------------------------
def test_appendix_goal41(capsys):
    code, report = run_json(capsys, "appendix", "goal41", "--m", "5")
    assert code == 0
    assert report["holds"]
    assert report["theorem"] == "goal41"


def test_appendix_carry_bounds_sampled(capsys):
    code, report = run_json(
        capsys, "appendix", "carry-bounds", "--m", "5", "--mode", "sampled", "--samples", "5000", "--seed", "9"
    )
    assert code == 0
    assert report["seed"] == 9
    assert report["instances"] == 5000


def test_appendix_even_m_is_a_usage_error(capsys):
    code, out = run(capsys, "appendix", "goal41", "--m", "4")
    assert code == 2
    assert out == ""


# ---------------------------------------------------------
# scan / calibrate / charsum
# ---------------------------------------------------------
def test_scan_rows(capsys):
    code, report = run_json(capsys, "scan", "--orders", "5,7", "--m", "5")
    assert code == 0
    rows = {row["n"]: row for row in report["rows"]}
    assert set(rows) == {5, 7}
    d7 = rows[7]
    assert d7["is_permutation"] and d7["is_skew"] and d7["is_ds"]
    assert not d7["is_planar"]
    assert report["moduli"]["5"]


def test_scan_csv_over_m1(capsys):
    code, out = run(capsys, "scan", "--orders", "1,7", "--m", "1", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "n,m,u,is_permutation,is_skew,is_ds,is_pds,is_planar"
    assert len(lines) == 4
    assert out.endswith("\n") and not out.endswith("\n\n")


def test_scan_higher_orders_are_not_difference_sets(capsys):
    code, report = run_json(capsys, "scan", "--orders", "11,13", "--m", "5")
    assert code == 0
    rows = {row["n"]: row for row in report["rows"]}
    assert set(rows) == {11, 13}
    assert not rows[11]["is_permutation"]
    assert rows[13]["is_permutation"]
    assert not any(row["is_ds"] for row in rows.values())


def test_scan_rejects_bad_orders(capsys):
    assert run(capsys, "scan", "--orders", "0", "--m", "3")[0] == 2
    assert run(capsys, "scan", "--orders", "x", "--m", "3")[0] == 2


def test_calibrate(capsys):
    code, report = run_json(capsys, "calibrate")
    assert code == 0
    assert report["convention"] == "unordered_distinct"
    assert report["meta"]["m"] == 5


def test_charsum_d7(capsys):
    code, report = run_json(capsys, "charsum", "--family", "d7:1", "--m", "5", "--checks", "norm,lemma3,eq4,identity")
    assert code == 0
    assert [c["check"] for c in report["checks"]] == ["norm", "lemma3", "eq4", "identity"]


def test_charsum_numeric_layer(capsys):
    code, report = run_json(capsys, "charsum", "--family", "paley", "--m", "3", "--checks", "gauss,fourier")
    assert code == 0
    assert report["all_pass"]


def test_charsum_eq4_needs_d7(capsys):
    code, _ = run(capsys, "charsum", "--family", "paley", "--m", "5", "--checks", "eq4")
    assert code == 2


def test_appendix_carry_bounds_m9(capsys):
    code, report = run_json(
        capsys, "appendix", "carry-bounds", "--m", "9", "--mode", "sampled", "--samples", "2000", "--seed", "5"
    )
    assert code == 0
    assert report["holds"]
    assert not any(report["violations"].values())


# ---------------------------------------------------------
# reproducibility
# ---------------------------------------------------------
def test_reports_are_byte_identical_across_runs(capsys):
    argv = ["appendix", "carry-bounds", "--m", "5", "--mode", "sampled", "--samples", "3000", "--seed", "4"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second
    assert json.loads(first[1])["meta"]["seed"] == 4


def test_csv_output_is_byte_identical_across_runs(capsys):
    argv = ["invariants", "--m", "3", "--families", "paley", "--format", "csv", "--no-cache"]
    first = run(capsys, *argv)
    assert first == run(capsys, *argv)
    assert first[1].endswith("\n") and not first[1].endswith("\n\n")
