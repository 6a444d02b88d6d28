"""Exact additive character sums in Z[w], w a primitive cube root of unity.

psi_beta(x) = w^tr(beta x). A sum of such values over a multiset collapses to
n0 + n1 w + n2 w^2 = (n0 - n2) + (n1 - n2) w, with n_t the number of terms of trace t.
Gauss sums and Fourier inversion live in a separate floating point sanity layer.
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from app.core.config import settings
from app.core.errors import PreconditionError
from app.models.design import DicksonSpec
from app.models.reports import CheckReport
from app.services.dickson_service import dickson_values
from app.services.field_service import FieldCtx
from app.services.sets_service import ElementSet, dickson_image_set, is_skew
from app.utils.parallel import shards, sharded_map

logger = logging.getLogger(__name__)

MAX_WITNESSES = 10


@dataclass(frozen=True)
class Eisenstein:
    """a0 + a1 w with w^2 = -1 - w."""

    a0: int
    a1: int = 0

    @classmethod
    def from_counts(cls, n0: int, n1: int, n2: int) -> "Eisenstein":
        return cls(int(n0) - int(n2), int(n1) - int(n2))

    def _coerce(self, other: Union["Eisenstein", int]) -> "Eisenstein":
        return other if isinstance(other, Eisenstein) else Eisenstein(int(other), 0)

    def __add__(self, other):
        other = self._coerce(other)
        return Eisenstein(self.a0 + other.a0, self.a1 + other.a1)

    __radd__ = __add__

    def __neg__(self):
        return Eisenstein(-self.a0, -self.a1)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        a0, a1, b0, b1 = self.a0, self.a1, other.a0, other.a1
        return Eisenstein(a0 * b0 - a1 * b1, a0 * b1 + a1 * b0 - a1 * b1)

    __rmul__ = __mul__

    def conj(self) -> "Eisenstein":
        # w -> w^2 = -1 - w
        return Eisenstein(self.a0 - self.a1, -self.a1)

    def norm(self) -> int:
        return self.a0 * self.a0 - self.a0 * self.a1 + self.a1 * self.a1

    def divisible_by(self, n: int) -> bool:
        return self.a0 % n == 0 and self.a1 % n == 0

    def to_complex(self) -> complex:
        return self.a0 + self.a1 * complex(-0.5, np.sqrt(3) / 2)


def _tally(trace_rows: np.ndarray, weights: np.ndarray = None) -> np.ndarray:
    """Per-row (a0, a1) from trace values; weights multiply each term (default 1)."""
    if weights is None:
        weights = np.ones(trace_rows.shape[-1], dtype=np.int64)
    n = [((trace_rows == t) * weights).sum(axis=-1) for t in range(3)]
    return np.stack([n[0] - n[2], n[1] - n[2]], axis=-1).astype(np.int64)


def additive_char_sum(ctx: FieldCtx, D: ElementSet, beta: int) -> Eisenstein:
    tr = ctx.trace_table[ctx.mul_array(int(beta), D.elements)]
    return Eisenstein.from_counts(*(int((tr == t).sum()) for t in range(3)))


def additive_char_sums(ctx: FieldCtx, D: ElementSet, threads: int = None) -> np.ndarray:
    """(a0, a1) of psi_beta(D) for every beta in 0..q-1, shape (q, 2)."""
    elems = D.elements

    def block_sums(block: np.ndarray) -> np.ndarray:
        return _tally(ctx.trace_table[ctx.mul_array(block[:, None], elems[None, :])])

    return np.concatenate(sharded_map(block_sums, shards(ctx.q), threads))


def _half_modulus(m: int):
    if m % 2 == 0:
        raise PreconditionError(f"m={m} is even; the congruences need odd m")
    mod = 3 ** ((m - 1) // 2)
    return mod, (mod - 1) // 2


def lemma_sim_hypotheses(ctx: FieldCtx, D: ElementSet) -> bool:
    """D + D^(-1) = G - 1 in Z[G]; D^(t) = D for the only nonzero square t = 1 of GF(3)."""
    return is_skew(ctx, D)


def lemma_sim_congruence(ctx: FieldCtx, D: ElementSet, threads: int = None) -> CheckReport:
    """psi_beta(D) = (3^((m-1)/2) - 1)/2 modulo 3^((m-1)/2) for every beta != 0."""
    mod, shift = _half_modulus(ctx.m)
    sums = additive_char_sums(ctx, D, threads)[1:]
    ok = ((sums[:, 0] - shift) % mod == 0) & (sums[:, 1] % mod == 0)
    bad = np.flatnonzero(~ok)[:MAX_WITNESSES] + 1
    return CheckReport(
        check="lemma3",
        m=ctx.m,
        subject=D.label or "<set>",
        all_pass=bool(ok.all()),
        checked=int(ok.size),
        witnesses=[int(b) for b in bad],
        details={"modulus": mod, "residue": shift, "hypotheses": lemma_sim_hypotheses(ctx, D)},
    )


def norm_check(ctx: FieldCtx, D: ElementSet, threads: int = None) -> CheckReport:
    """|psi_beta(D)|^2 = (q+1)/4 for every beta != 0, exactly."""
    sums = additive_char_sums(ctx, D, threads)[1:]
    a0, a1 = sums[:, 0], sums[:, 1]
    norms = a0 * a0 - a0 * a1 + a1 * a1
    target = (ctx.q + 1) // 4
    ok = (norms == target) if (ctx.q + 1) % 4 == 0 else np.zeros(norms.shape, dtype=bool)
    bad = np.flatnonzero(~ok)[:MAX_WITNESSES] + 1
    return CheckReport(
        check="norm",
        m=ctx.m,
        subject=D.label or "<set>",
        all_pass=bool(ok.all()),
        checked=int(ok.size),
        witnesses=[int(b) for b in bad],
        details={"target": target, "min_norm": int(norms.min()), "max_norm": int(norms.max())},
    )


def s_beta_sums(ctx: FieldCtx, u: int, threads: int = None) -> np.ndarray:
    """(a0, a1) of S_beta = sum_{x != 0} psi_beta(D_7(x, u)) chi(x) for every beta, shape (q, 2)."""
    xs = np.arange(1, ctx.q, dtype=np.int64)
    values = dickson_values(ctx, DicksonSpec(n=7, u=int(u)), xs)
    chi = ctx.chi_table[xs].astype(np.int64)

    def block_sums(block: np.ndarray) -> np.ndarray:
        return _tally(ctx.trace_table[ctx.mul_array(block[:, None], values[None, :])], chi)

    return np.concatenate(sharded_map(block_sums, shards(ctx.q), threads))


def _require_d7(ctx: FieldCtx, u: int) -> None:
    if ctx.m % 2 == 0 or ctx.m % 3 == 0:
        raise PreconditionError(f"S_beta congruence needs odd m with m % 3 != 0, got m={ctx.m}")
    if int(u) == 0:
        raise PreconditionError("u must be nonzero")


def s_beta_congruence(ctx: FieldCtx, u: int, threads: int = None) -> CheckReport:
    _require_d7(ctx, u)
    mod, _ = _half_modulus(ctx.m)
    sums = s_beta_sums(ctx, u, threads)[1:]
    ok = (sums[:, 0] % mod == 0) & (sums[:, 1] % mod == 0)
    bad = np.flatnonzero(~ok)[:MAX_WITNESSES] + 1
    return CheckReport(
        check="eq4",
        m=ctx.m,
        subject=f"d7:{int(u)}",
        all_pass=bool(ok.all()),
        checked=int(ok.size),
        witnesses=[int(b) for b in bad],
        details={"modulus": mod},
    )


def reduction_identity(ctx: FieldCtx, u: int, threads: int = None) -> CheckReport:
    """2 psi_beta(D_u) = S_beta - 1 in Z[w] for every beta != 0."""
    _require_d7(ctx, u)
    D = dickson_image_set(ctx, DicksonSpec(n=7, u=int(u)))
    lhs = 2 * additive_char_sums(ctx, D, threads)[1:]
    rhs = s_beta_sums(ctx, u, threads)[1:] - np.array([1, 0])
    ok = (lhs == rhs).all(axis=1)
    bad = np.flatnonzero(~ok)[:MAX_WITNESSES] + 1
    return CheckReport(
        check="identity",
        m=ctx.m,
        subject=f"d7:{int(u)}",
        all_pass=bool(ok.all()),
        checked=int(ok.size),
        witnesses=[int(b) for b in bad],
    )


def gauss_sum_numeric(ctx: FieldCtx, k: int) -> complex:
    """g(chi_k) = sum_{x != 0} chi_k(x) psi(x) with chi_k(g^j) = exp(2 pi i k j / (q-1))."""
    j = np.arange(ctx.order, dtype=np.int64)
    tr = ctx.trace_table[ctx.exp_table].astype(np.float64)
    phase = 2 * np.pi * ((int(k) * j) % ctx.order) / ctx.order + 2 * np.pi * tr / 3
    return complex(np.exp(1j * phase).sum())


def gauss_norm_check(ctx: FieldCtx, ks: List[int] = None) -> CheckReport:
    ks = list(range(1, ctx.order)) if ks is None else [int(k) for k in ks]
    errors = [abs(abs(gauss_sum_numeric(ctx, k)) ** 2 - ctx.q) / ctx.q for k in ks if k % ctx.order]
    worst = max(errors) if errors else 0.0
    return CheckReport(
        check="gauss",
        m=ctx.m,
        subject="gauss sums",
        all_pass=worst < settings.GAUSS_TOLERANCE,
        checked=len(errors),
        details={"max_relative_error": worst},
    )


def fourier_inversion_check(ctx: FieldCtx, samples: int = None, seed: int = None) -> float:
    """Max |psi(x) - (1/(q-1)) sum_k g(chi_k) chi_k^-1(x)| over sampled x != 0."""
    if ctx.m > settings.FOURIER_MAX_M:
        raise PreconditionError(
            f"Fourier inversion needs q-1 Gauss sums per point; m={ctx.m} exceeds {settings.FOURIER_MAX_M}"
        )
    started = time.perf_counter()
    order = ctx.order
    k = np.arange(order, dtype=np.int64)
    gauss = np.array([gauss_sum_numeric(ctx, int(kk)) for kk in k])
    if samples is None or samples >= order:
        j = np.arange(order, dtype=np.int64)
    else:
        rng = np.random.default_rng(settings.SEED if seed is None else seed)
        j = rng.choice(order, size=samples, replace=False)
    inverse_chars = np.exp(-2j * np.pi * ((j[:, None] * k[None, :]) % order) / order)
    recon = inverse_chars @ gauss / order
    exact = np.exp(2j * np.pi * ctx.trace_table[ctx.exp_table[j]].astype(np.float64) / 3)
    err = float(np.abs(recon - exact).max())
    logger.info("fourier inversion on %s: %d points, max error %.3g (%.2fs)", ctx.ctx_id, j.size, err, time.perf_counter() - started)
    return err
