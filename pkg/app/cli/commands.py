"""Handlers behind the `python -m app.main` subcommands.

Each handler takes the parsed argparse namespace, writes its JSON or CSV document to
stdout (or --out) and returns the process exit code.
"""

import logging
import os
import sys
from typing import List, Optional

from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import EXIT_CHECK_FAILED, EXIT_OK, UsageError
from app.models.design import DicksonSpec, FamilySpec, ScanRow
from app.models.reports import (
    CalibrationReport,
    CharsumReport,
    CheckReport,
    ConstructReport,
    InvariantsReport,
    ReportMeta,
    ScanReport,
    VerifyReport,
)
from app.services import charsum_service, digits_service
from app.services.dickson_service import composed_square_table, is_permutation, is_planar
from app.services.family_service import FamilyService, calibrate_dy_labels, parse_family
from app.services.field_service import FieldCtx, make_field, parse_element, parse_modulus
from app.services.invariants_service import (
    InvariantsService,
    calibrate_convention,
    compare_families,
    distributions_csv,
    minmax_csv,
)
from app.services.sets_service import build_image_set, difference_report, is_skew

logger = logging.getLogger(__name__)

family_service = FamilyService()

VERIFY_CHECKS = ("skew", "ds", "pds", "lemma3", "eq4", "norm")
CHARSUM_CHECKS = ("norm", "lemma3", "eq4", "identity", "gauss", "fourier")


def _split(text: str) -> List[str]:
    return [tok.strip() for tok in (text or "").split(",") if tok.strip()]


def _ints(text: str, flag: str) -> List[int]:
    try:
        return [int(tok) for tok in _split(text)]
    except ValueError:
        raise UsageError(f"{flag} expects a comma separated list of integers, got {text!r}")


def _context(args, m: int) -> FieldCtx:
    modulus = parse_modulus(args.modulus) if getattr(args, "modulus", None) else None
    return make_field(m, modulus)


def _meta(ctx: FieldCtx, convention: str = None, seed: int = None) -> ReportMeta:
    return ReportMeta(
        tool_version=settings.TOOL_VERSION,
        m=ctx.m,
        modulus=list(ctx.modulus),
        generator=ctx.generator,
        convention=convention,
        seed=seed,
    )


def _emit(args, payload) -> None:
    text = payload.model_dump_json(indent=4) if isinstance(payload, BaseModel) else str(payload)
    out = getattr(args, "out", None)
    if out:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w") as f:
            f.write(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _family_spec(args, m: int, mode: str) -> FamilySpec:
    if getattr(args, "set", None):
        return FamilySpec(name="set", m=m, set_file=args.set, mode=mode)
    if not getattr(args, "family", None):
        raise UsageError("pass --family or --set")
    return parse_family(args.family, m, u=getattr(args, "u", None), mode=mode)


def _resolve_m(args) -> int:
    if getattr(args, "m", None) is not None:
        return args.m
    if getattr(args, "set", None):
        return family_service.load(args.set).ctx.m
    raise UsageError("pass --m")


def cmd_construct(args) -> int:
    mode = args.as_mode or "shds"
    spec = _family_spec(args, args.m, mode)
    ctx = _context(args, spec.m)
    D = family_service.resolve(spec, ctx)
    path = family_service.save(D, args.out)
    report = ConstructReport(meta=_meta(ctx), family=spec.label, mode=mode, path=path, cardinality=D.cardinality)
    print(report.model_dump_json(indent=4))
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = _split(args.checks) or ["skew", "ds"]
    unknown = [c for c in checks if c not in VERIFY_CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; expected a subset of {VERIFY_CHECKS}")
    mode = args.as_mode or ("pds" if set(checks) <= {"pds"} else "shds")
    m = _resolve_m(args)
    spec = _family_spec(args, m, mode)
    ctx = _context(args, m)
    D = family_service.resolve(spec, ctx)

    results, details = {}, {}
    ds = None
    if {"ds", "pds"} & set(checks):
        ds = difference_report(ctx, D, args.threads)
        details["difference_report"] = ds.model_dump()
    for check in checks:
        if check == "skew":
            results[check] = is_skew(ctx, D)
        elif check == "ds":
            results[check] = ds.verdict == "difference_set"
        elif check == "pds":
            results[check] = ds.verdict == "partial_difference_set"
        elif check == "lemma3":
            report = charsum_service.lemma_sim_congruence(ctx, D, args.threads)
            results[check], details[check] = report.all_pass, report.model_dump()
        elif check == "norm":
            report = charsum_service.norm_check(ctx, D, args.threads)
            results[check], details[check] = report.all_pass, report.model_dump()
        elif check == "eq4":
            if spec.name != "d7":
                raise UsageError("check eq4 applies to the d7 family only")
            report = charsum_service.s_beta_congruence(ctx, parse_element(ctx, spec.u), args.threads)
            results[check], details[check] = report.all_pass, report.model_dump()

    all_pass = all(results.values())
    report = VerifyReport(
        meta=_meta(ctx),
        family=spec.label,
        checks=results,
        parameters=ds.parameters if ds is not None else [ctx.q, D.cardinality],
        verdict=ds.verdict if ds is not None else None,
        all_pass=all_pass,
        details=details,
    )
    _emit(args, report)
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def cmd_invariants(args) -> int:
    convention = args.convention or settings.DEFAULT_CONVENTION
    tokens = _split(args.families)
    if not tokens:
        raise UsageError("--families is empty")
    ctx = _context(args, args.m)
    service = InvariantsService(use_cache=not args.no_cache, threads=args.threads)
    sets = [family_service.resolve(parse_family(tok, args.m), ctx) for tok in tokens]

    report = InvariantsReport(meta=_meta(ctx, convention=convention), stat=args.stat)
    if args.stat == "dist":
        report.distributions = [service.distribution(ctx, D, convention) for D in sets]
        rows = report.distributions
    else:
        report.minmax = [service.minmax(ctx, D, convention) for D in sets]
        rows = report.minmax
    if args.compare:
        report.comparison = compare_families(rows)

    if args.format == "csv":
        text = distributions_csv(rows) if args.stat == "dist" else minmax_csv(rows, ctx.modulus)
        if report.comparison is not None:
            text += f"# {report.comparison.summary}\n"
        _emit(args, text)
    else:
        _emit(args, report)
    return EXIT_OK


def cmd_appendix(args) -> int:
    seed = args.seed if args.seed is not None else settings.SEED
    if args.theorem == "goal41":
        report = digits_service.verify_goal41(args.m, args.mode, args.samples, seed)
    elif args.theorem == "goal42":
        report = digits_service.verify_goal42(args.m, args.mode, args.samples, seed, args.threads)
    elif args.theorem == "goal41-carries":
        report = digits_service.goal41_carry_check(args.m)
    else:
        report = digits_service.carry_lemma_audit(args.m, args.mode, args.samples, seed, args.threads)
    report.meta = ReportMeta(tool_version=settings.TOOL_VERSION, m=args.m, modulus=[], seed=report.seed)
    _emit(args, report)
    return EXIT_OK if report.holds else EXIT_CHECK_FAILED


def scan_row(ctx: FieldCtx, n: int, u_expr: str, threads: int = None) -> ScanRow:
    spec = DicksonSpec(n=n, u=parse_element(ctx, u_expr))
    table = composed_square_table(ctx, spec)
    D = build_image_set(ctx, table, squares_only=False, label=f"D{n}:{u_expr}")
    ds = difference_report(ctx, D, threads)
    return ScanRow(
        n=n,
        m=ctx.m,
        u=u_expr,
        is_permutation=is_permutation(ctx, spec).is_permutation,
        is_skew=is_skew(ctx, D),
        is_ds=ds.verdict == "difference_set",
        is_pds=ds.verdict == "partial_difference_set",
        is_planar=is_planar(ctx, table, threads),
    )


def _csv_cell(value) -> str:
    return str(value).lower() if isinstance(value, bool) else str(value)


def cmd_scan(args) -> int:
    orders = _ints(args.orders, "--orders")
    ms = _ints(args.m, "--m")
    us = _split(args.u) or ["1"]
    if not orders or not ms:
        raise UsageError("--orders and --m must not be empty")
    if min(orders) < 1:
        raise UsageError("Dickson orders start at 1")
    rows, moduli = [], {}
    for m in ms:
        ctx = _context(args, m)
        moduli[str(m)] = list(ctx.modulus)
        for n in orders:
            for u in us:
                rows.append(scan_row(ctx, n, u, args.threads))

    report = ScanReport(tool_version=settings.TOOL_VERSION, moduli=moduli, rows=rows)
    if args.format == "csv":
        fields = list(ScanRow.model_fields)
        lines = [f"# tool_version={settings.TOOL_VERSION} moduli={moduli}", ",".join(fields)]
        lines += [",".join(_csv_cell(getattr(row, f)) for f in fields) for row in rows]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, report)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ctx = _context(args, 5)
    convention, evidence = calibrate_convention(ctx, args.threads)
    swapped, dy_evidence = calibrate_dy_labels(ctx, convention, args.threads)
    report = CalibrationReport(
        meta=_meta(ctx, convention=convention),
        convention=convention,
        convention_evidence=evidence,
        dy_labels_swapped=swapped,
        dy_evidence=dy_evidence,
    )
    _emit(args, report)
    return EXIT_OK if evidence[convention] else EXIT_CHECK_FAILED


def cmd_charsum(args) -> int:
    checks = _split(args.checks) or ["norm", "lemma3"]
    unknown = [c for c in checks if c not in CHARSUM_CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; expected a subset of {CHARSUM_CHECKS}")
    m = _resolve_m(args)
    spec = _family_spec(args, m, "shds")
    ctx = _context(args, m)
    D = family_service.resolve(spec, ctx)

    reports = []
    u: Optional[int] = parse_element(ctx, spec.u) if spec.name == "d7" else None
    for check in checks:
        if check == "norm":
            reports.append(charsum_service.norm_check(ctx, D, args.threads))
        elif check == "lemma3":
            reports.append(charsum_service.lemma_sim_congruence(ctx, D, args.threads))
        elif check in ("eq4", "identity"):
            if u is None:
                raise UsageError(f"check {check} applies to the d7 family only")
            fn = charsum_service.s_beta_congruence if check == "eq4" else charsum_service.reduction_identity
            reports.append(fn(ctx, u, args.threads))
        elif check == "gauss":
            reports.append(charsum_service.gauss_norm_check(ctx))
        elif check == "fourier":
            err = charsum_service.fourier_inversion_check(ctx, args.samples, args.seed)
            reports.append(
                CheckReport(
                    check="fourier", m=ctx.m, subject="psi", all_pass=err < settings.GAUSS_TOLERANCE,
                    details={"max_error": err},
                )
            )
    all_pass = all(r.all_pass for r in reports)
    _emit(args, CharsumReport(meta=_meta(ctx, seed=args.seed), family=spec.label, checks=reports, all_pass=all_pass))
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED
