"""Conjunctions of linear rational constraints: Fourier-Motzkin with
nonnegative-multiplier certificate tracking, and certificate-based partial
interpolants for theory lemmas."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .logic import (FALSE, LE, LT, TRUE, Formula, RelAtom, Term, Var, rel,
                    var_key)


class LraError(Exception):
    pass


class InvalidCertificate(LraError):
    pass


@dataclass(frozen=True)
class LinConstraint:
    """sum(coeffs . vars) <= bound, or < bound when strict."""

    coeffs: tuple  # tuple[(Var, Fraction), ...] sorted, no zeros
    bound: Fraction
    strict: bool = False

    @staticmethod
    def make(coeff_map: Mapping[Var, Fraction], bound, strict=False):
        items = tuple(sorted(((v, Fraction(c)) for v, c in coeff_map.items()
                              if c != 0), key=lambda it: var_key(it[0])))
        return LinConstraint(items, Fraction(bound), strict)

    @staticmethod
    def from_atom(a: RelAtom, positive: bool) -> "LinConstraint":
        """Constraint asserted by atom `a` being true (or false)."""
        if a.op not in (LE, LT):
            raise LraError(f"equality atom {a} reaches the theory solver")
        if positive:
            return LinConstraint(a.coeffs, a.bound, a.op == LT)
        # not (t <= b) is -t < -b ; not (t < b) is -t <= -b
        neg = tuple((v, -c) for v, c in a.coeffs)
        return LinConstraint(neg, -a.bound, a.op == LE)

    def holds(self, model: Mapping[Var, Fraction]) -> bool:
        lhs = sum((c * model.get(v, Fraction(0)) for v, c in self.coeffs),
                  Fraction(0))
        return lhs < self.bound if self.strict else lhs <= self.bound

    def __str__(self) -> str:
        op = "<" if self.strict else "<="
        return f"{Term(self.coeffs, Fraction(0))} {op} {self.bound}"


@dataclass(frozen=True)
class FarkasCertificate:
    multipliers: tuple  # tuple[(index, Fraction > 0), ...] sorted by index

    @staticmethod
    def make(mults: Mapping[int, Fraction]) -> "FarkasCertificate":
        items = tuple(sorted((i, Fraction(m)) for i, m in mults.items()
                             if m != 0))
        return FarkasCertificate(items)

    def as_dict(self) -> Dict[int, Fraction]:
        return dict(self.multipliers)


@dataclass
class Feasible:
    model: Dict[Var, Fraction]


@dataclass
class Infeasible:
    certificate: FarkasCertificate


def combine(cs: Sequence[LinConstraint],
            mults: Mapping[int, Fraction]) -> Tuple[dict, Fraction, bool]:
    """Exact nonnegative combination: (coeff map, bound, strict)."""
    coeffs: Dict[Var, Fraction] = {}
    bound = Fraction(0)
    strict = False
    for i, m in mults.items():
        if m < 0:
            raise InvalidCertificate(f"negative multiplier for {i}")
        if m == 0:
            continue
        c = cs[i]
        for v, k in c.coeffs:
            coeffs[v] = coeffs.get(v, Fraction(0)) + m * k
            if coeffs[v] == 0:
                del coeffs[v]
        bound += m * c.bound
        strict = strict or c.strict
    return coeffs, bound, strict


def certificate_valid(cs: Sequence[LinConstraint],
                      cert: FarkasCertificate) -> bool:
    mults = cert.as_dict()
    if not mults or any(m <= 0 for m in mults.values()):
        return False
    if any(i < 0 or i >= len(cs) for i in mults):
        return False
    coeffs, bound, strict = combine(cs, mults)
    if coeffs:
        return False
    return bound < 0 or (strict and bound <= 0)


def check_conjunction(cs: Sequence[LinConstraint]):
    """Decide a conjunction; Feasible carries a witness, Infeasible a
    certificate. Elimination order is lexicographic for determinism."""
    # working rows: (coeff map, bound, strict, lincomb over input indices)
    rows = []
    for i, c in enumerate(cs):
        m = dict(c.coeffs)
        if not m:
            if c.bound < 0 or (c.strict and c.bound <= 0):
                return Infeasible(FarkasCertificate.make({i: Fraction(1)}))
            continue
        rows.append((m, c.bound, c.strict, {i: Fraction(1)}))

    all_vars = sorted({v for r in rows for v in r[0]}, key=var_key)
    stages = []  # (var, rows mentioning it) for back-substitution

    for x in all_vars:
        ups, downs, rest = [], [], []
        for r in rows:
            cx = r[0].get(x, Fraction(0))
            if cx > 0:
                ups.append(r)
            elif cx < 0:
                downs.append(r)
            else:
                rest.append(r)
        stages.append((x, ups + downs))
        new_rows = rest
        seen = set()
        for u in ups:
            mu = Fraction(1) / u[0][x]
            for d in downs:
                md = Fraction(1) / -d[0][x]
                m = {}
                for v, k in u[0].items():
                    m[v] = k * mu
                for v, k in d[0].items():
                    m[v] = m.get(v, Fraction(0)) + k * md
                    if m[v] == 0:
                        del m[v]
                m.pop(x, None)
                bound = u[1] * mu + d[1] * md
                strict = u[2] or d[2]
                comb = {i: c * mu for i, c in u[3].items()}
                for i, c in d[3].items():
                    comb[i] = comb.get(i, Fraction(0)) + c * md
                if not m:
                    if bound < 0 or (strict and bound <= 0):
                        return Infeasible(FarkasCertificate.make(comb))
                    continue
                key = (tuple(sorted(m.items(), key=lambda it: var_key(it[0]))),
                       bound, strict)
                if key in seen:
                    continue
                seen.add(key)
                new_rows.append((m, bound, strict, comb))
        rows = new_rows

    # feasible: assign variables in reverse elimination order
    model: Dict[Var, Fraction] = {}
    for x, xr in reversed(stages):
        lo = hi = None
        lo_strict = hi_strict = False
        for m, bound, strict, _ in xr:
            cx = m[x]
            residual = bound - sum((k * model.get(v, Fraction(0))
                                    for v, k in m.items() if v != x),
                                   Fraction(0))
            val = residual / cx
            if cx > 0:  # x <= val
                if hi is None or val < hi or (val == hi and strict):
                    hi, hi_strict = val, strict
            else:  # x >= val
                if lo is None or val > lo or (val == lo and strict):
                    lo, lo_strict = val, strict
        if lo is None and hi is None:
            model[x] = Fraction(0)
        elif lo is None:
            model[x] = hi - 1 if hi_strict else hi
        elif hi is None:
            model[x] = lo + 1 if lo_strict else lo
        elif lo == hi:
            model[x] = lo
        else:
            model[x] = (lo + hi) / 2
    return Feasible(model)


def farkas_interpolant(cs: Sequence[LinConstraint], cert: FarkasCertificate,
                       in_a: Callable[[int], bool]) -> Formula:
    """Nonnegative combination of the A-side constraints of a refuted
    conjunction: implied by A, inconsistent with B, over shared variables."""
    if not certificate_valid(cs, cert):
        raise InvalidCertificate("certificate does not refute the input")
    a_mults = {i: m for i, m in cert.multipliers if in_a(i)}
    coeffs, bound, strict = combine(cs, a_mults)
    lhs = Term.make(coeffs)
    op = LT if strict else LE
    out = rel(op, lhs, Term.constant(bound))
    return out
