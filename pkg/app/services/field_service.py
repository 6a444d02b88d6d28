"""Table-driven arithmetic in GF(3^m).

Elements are integer indices 0..q-1 read little-endian in base 3: the index
sum(c_i 3^i) stands for the residue class of sum(c_i x^i) modulo the context's
monic irreducible modulus. Addition is therefore digit-wise mod 3 and needs no
tables; multiplication goes through exp/log tables built once per context.
"""

import json
import logging
import re
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sympy import Poly, symbols, factorint

from app.core.config import settings
from app.core.errors import (
    CapacityError,
    FieldDomainError,
    InvariantViolation,
    ReducibleModulusError,
    UsageError,
)

logger = logging.getLogger(__name__)

P = 3


@dataclass(frozen=True, eq=False)
class FieldCtx:
    m: int
    q: int
    modulus: Tuple[int, ...]
    generator: int
    exp_table: np.ndarray
    log_table: np.ndarray
    trace_table: np.ndarray
    digits: np.ndarray
    powers: np.ndarray
    chi_table: np.ndarray

    @property
    def ctx_id(self) -> str:
        return f"GF(3^{self.m})/{list(self.modulus)}"

    @property
    def order(self) -> int:
        return self.q - 1

    # Vectorized helpers. Inputs are integer arrays of element indices.

    def from_digits(self, digits: np.ndarray) -> np.ndarray:
        return (np.asarray(digits, dtype=np.int64) % P) @ self.powers

    def add_array(self, a, b) -> np.ndarray:
        return self.from_digits(self.digits[a].astype(np.int64) + self.digits[b])

    def sub_array(self, a, b) -> np.ndarray:
        return self.from_digits(self.digits[a].astype(np.int64) - self.digits[b])

    def neg_array(self, a) -> np.ndarray:
        return self.from_digits(-self.digits[a].astype(np.int64))

    def mul_array(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        a, b = np.broadcast_arrays(a, b)
        out = np.zeros(a.shape, dtype=np.int64)
        nz = (a != 0) & (b != 0)
        out[nz] = self.exp_table[(self.log_table[a[nz]] + self.log_table[b[nz]]) % self.order]
        return out

    def pow_array(self, a, e: int) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        out = np.zeros(a.shape, dtype=np.int64)
        nz = a != 0
        out[nz] = self.exp_table[(self.log_table[a[nz]] * (e % self.order)) % self.order]
        if e == 0:
            out[~nz] = 1
        elif e < 0 and not nz.all():
            raise FieldDomainError("negative power of 0")
        return out


def _poly_mulmod(a: Sequence[int], b: Sequence[int], modulus: Sequence[int]) -> List[int]:
    m = len(modulus) - 1
    prod = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % P
    # modulus is monic
    for k in range(len(prod) - 1, m - 1, -1):
        c = prod[k]
        if c:
            for j in range(m + 1):
                prod[k - m + j] = (prod[k - m + j] - c * modulus[j]) % P
    return (prod + [0] * m)[:m]


def _index_digits(index: int, m: int) -> List[int]:
    out = []
    for _ in range(m):
        index, d = divmod(index, P)
        out.append(d)
    return out


def _poly_pow(base: List[int], e: int, modulus: Sequence[int]) -> List[int]:
    m = len(modulus) - 1
    result = [1] + [0] * (m - 1)
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, modulus)
        base = _poly_mulmod(base, base, modulus)
        e >>= 1
    return result


@lru_cache(maxsize=1)
def load_default_moduli(path: Optional[str] = None) -> dict:
    with open(path or settings.MODULI_FILE, "r") as f:
        data = json.load(f)
    if data.get("version") != 1:
        raise UsageError(f"unsupported moduli file version {data.get('version')!r}")
    return {int(k): tuple(v) for k, v in data["moduli"].items()}


def parse_modulus(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in re.split(r"[,\s]+", text.strip()) if tok)
    except ValueError as e:
        raise UsageError(f"cannot parse modulus {text!r}: {e}")


def check_irreducible(modulus: Sequence[int]) -> None:
    """Raise ReducibleModulusError naming one irreducible factor if `modulus` splits."""
    X = symbols("x")
    poly = Poly(list(reversed(modulus)), X, modulus=P)
    if poly.degree() <= 1 or poly.is_irreducible:
        return
    _, factors = poly.factor_list()
    factor = [int(c) % P for c in reversed(factors[0][0].all_coeffs())]
    raise ReducibleModulusError(list(modulus), factor)


def _find_generator(m: int, modulus: Sequence[int]) -> int:
    q = P ** m
    cofactors = [(q - 1) // r for r in factorint(q - 1)]
    one = [1] + [0] * (m - 1)
    for cand in range(1, q):
        base = _index_digits(cand, m)
        if all(_poly_pow(base, e, modulus) != one for e in cofactors):
            return cand
    raise InvariantViolation("no primitive element found", {"m": m, "modulus": list(modulus)})


def make_field(m: int, modulus: Optional[Sequence[int]] = None) -> FieldCtx:
    if not isinstance(m, int) or m < 1 or m > settings.MAX_M:
        raise CapacityError(f"extension degree m={m} outside supported range 1..{settings.MAX_M}")
    if modulus is None:
        defaults = load_default_moduli()
        if m not in defaults:
            raise CapacityError(f"no default modulus shipped for m={m}")
        modulus = defaults[m]
    return _build_field(m, tuple(int(c) for c in modulus))


@lru_cache(maxsize=16)
def _build_field(m: int, modulus: Tuple[int, ...]) -> FieldCtx:
    if len(modulus) != m + 1:
        raise UsageError(f"modulus {list(modulus)} has degree {len(modulus) - 1}, expected {m}")
    if any(c not in (0, 1, 2) for c in modulus):
        raise UsageError(f"modulus {list(modulus)} has digits outside 0..2")
    if modulus[-1] != 1:
        raise UsageError(f"modulus {list(modulus)} is not monic")
    check_irreducible(modulus)

    started = time.perf_counter()
    q = P ** m
    powers = P ** np.arange(m, dtype=np.int64)
    digits = np.zeros((q, m), dtype=np.int8)
    idx = np.arange(q, dtype=np.int64)
    for i in range(m):
        digits[:, i] = (idx // powers[i]) % P

    generator = _find_generator(m, modulus)

    # multiplication by the generator is GF(3)-linear; row j holds g * x^j
    g_digits = _index_digits(generator, m)
    rows = np.array(
        [_poly_mulmod(g_digits, [0] * j + [1], modulus) for j in range(m)], dtype=np.int64
    )
    times_g = ((digits.astype(np.int64) @ rows) % P) @ powers

    step = times_g.tolist()
    exp_list = [0] * (q - 1)
    x = 1
    for k in range(q - 1):
        exp_list[k] = x
        x = step[x]
    if x != 1:
        raise InvariantViolation("generator cycle does not close", {"m": m, "g": generator})
    exp_table = np.array(exp_list, dtype=np.int64)
    log_table = np.full(q, -1, dtype=np.int64)
    log_table[exp_table] = np.arange(q - 1, dtype=np.int64)
    if (log_table[1:] < 0).any():
        raise InvariantViolation("exp table is not a bijection", {"m": m, "g": generator})

    # trace(x) = sum of the m Frobenius conjugates x^(3^i)
    frob = np.zeros(q, dtype=np.int64)
    frob[1:] = exp_table[(log_table[1:] * P) % (q - 1)]
    acc = digits.astype(np.int16)
    cur = idx
    for _ in range(m - 1):
        cur = frob[cur]
        acc = acc + digits[cur]
    acc %= P
    if acc[:, 1:].any():
        raise InvariantViolation("trace landed outside GF(3)", {"m": m, "modulus": list(modulus)})
    trace_table = acc[:, 0].astype(np.int8)

    chi_table = np.zeros(q, dtype=np.int8)
    chi_table[1:] = np.where(log_table[1:] % 2 == 0, 1, -1)

    for arr in (digits, powers, exp_table, log_table, trace_table, chi_table):
        arr.setflags(write=False)

    logger.info(
        "built GF(3^%d) modulus=%s generator=%d in %.2fs",
        m, list(modulus), generator, time.perf_counter() - started,
    )
    return FieldCtx(
        m=m,
        q=q,
        modulus=modulus,
        generator=generator,
        exp_table=exp_table,
        log_table=log_table,
        trace_table=trace_table,
        digits=digits,
        powers=powers,
        chi_table=chi_table,
    )


def _check(ctx: FieldCtx, a: int) -> int:
    a = int(a)
    if not 0 <= a < ctx.q:
        raise FieldDomainError(f"{a} is not an element index of {ctx.ctx_id}")
    return a


def add(ctx: FieldCtx, a: int, b: int) -> int:
    return int(ctx.add_array(_check(ctx, a), _check(ctx, b)))


def neg(ctx: FieldCtx, a: int) -> int:
    return int(ctx.neg_array(_check(ctx, a)))


def sub(ctx: FieldCtx, a: int, b: int) -> int:
    return int(ctx.sub_array(_check(ctx, a), _check(ctx, b)))


def mul(ctx: FieldCtx, a: int, b: int) -> int:
    a, b = _check(ctx, a), _check(ctx, b)
    if a == 0 or b == 0:
        return 0
    return int(ctx.exp_table[(ctx.log_table[a] + ctx.log_table[b]) % ctx.order])


def inv(ctx: FieldCtx, a: int) -> int:
    if _check(ctx, a) == 0:
        raise FieldDomainError("0 has no multiplicative inverse")
    return int(ctx.exp_table[(-ctx.log_table[a]) % ctx.order])


def pow(ctx: FieldCtx, a: int, e: int) -> int:
    a = _check(ctx, a)
    if a == 0:
        if e < 0:
            raise FieldDomainError("negative power of 0")
        return 1 if e == 0 else 0
    return int(ctx.exp_table[(int(ctx.log_table[a]) * e) % ctx.order])


def log(ctx: FieldCtx, a: int) -> int:
    if _check(ctx, a) == 0:
        raise FieldDomainError("discrete log of 0 is undefined")
    return int(ctx.log_table[a])


def trace(ctx: FieldCtx, a: int) -> int:
    return int(ctx.trace_table[_check(ctx, a)])


def quadratic_character(ctx: FieldCtx, a: int) -> int:
    return int(ctx.chi_table[_check(ctx, a)])


def element_digits(ctx: FieldCtx, a: int) -> List[int]:
    return [int(d) for d in ctx.digits[_check(ctx, a)]]


_ELEMENT_RE = re.compile(r"^([+-]?)\s*(?:(\d+)|g(?:\^\(?(-?\d+)\)?)?)$")


def parse_element(ctx: FieldCtx, expr: str) -> int:
    """Resolve "0", "1", "-1", "2", "g", "g^k", "-g^3" against the context's generator."""
    match = _ELEMENT_RE.match(str(expr).strip().replace(" ", ""))
    if not match:
        raise UsageError(f"cannot resolve element expression {expr!r}")
    sign, integer, exponent = match.groups()
    if integer is not None:
        value = int(integer) % P
    else:
        value = pow(ctx, ctx.generator, int(exponent) if exponent is not None else 1)
    return neg(ctx, value) if sign == "-" else value
