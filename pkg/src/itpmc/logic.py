"""Terms, atoms, and formulas over primed/unprimed symbols.

State formulas mention only unprimed symbols; transition formulas may add one
prime. Arithmetic is exact (Fraction) throughout. Array reads a[x] are opaque:
each (array symbol, index symbol) pair acts as a single nullary value holder,
so aliasing is visible only through explicit case splits made by callers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

INDIVIDUAL = "individual"
PROPOSITIONAL = "propositional"
ARRAY = "array"

# Reserved in generated names; the program parser rejects it in identifiers,
# so hiding and predicate variables can never collide with user symbols.
RESERVED_SEP = "#"

_KIND_RANK = {INDIVIDUAL: 0, PROPOSITIONAL: 1, ARRAY: 2}


class LogicError(Exception):
    pass


class NegativeShiftInfeasible(LogicError):
    pass


class SortMismatch(LogicError):
    pass


class UnsupportedNesting(LogicError):
    pass


@dataclass(frozen=True)
class Symbol:
    base_name: str
    prime_count: int = 0
    kind: str = INDIVIDUAL

    def __post_init__(self) -> None:
        if not self.base_name:
            raise LogicError("empty symbol name")
        if self.prime_count < 0:
            raise NegativeShiftInfeasible(self.base_name)

    def shifted(self, i: int) -> "Symbol":
        if self.prime_count + i < 0:
            raise NegativeShiftInfeasible(str(self))
        return Symbol(self.base_name, self.prime_count + i, self.kind)

    def primed(self) -> "Symbol":
        return self.shifted(1)

    def sort_key(self):
        return (self.base_name, self.prime_count, _KIND_RANK[self.kind])

    def __str__(self) -> str:
        return self.base_name + "'" * self.prime_count


@dataclass(frozen=True)
class ArrayRead:
    """Opaque read a[x]; priming shifts array and index together."""

    array: Symbol
    index: Symbol

    def __post_init__(self) -> None:
        if self.array.kind != ARRAY:
            raise SortMismatch(f"{self.array} is not an array")
        if self.index.kind != INDIVIDUAL:
            raise SortMismatch(f"{self.index} cannot index an array")

    def shifted(self, i: int) -> "ArrayRead":
        return ArrayRead(self.array.shifted(i), self.index.shifted(i))

    def sort_key(self):
        return (self.array.base_name, self.array.prime_count,
                3, self.index.base_name, self.index.prime_count)

    def __str__(self) -> str:
        return f"{self.array}[{self.index}]"


# A value-carrying variable of a linear term: a plain individual symbol or an
# opaque array read. Never propositional.
Var = Union[Symbol, ArrayRead]


def var_key(v: Var):
    k = v.sort_key()
    # pad plain-symbol keys so reads and symbols compare cleanly
    return k if len(k) == 5 else (k[0], k[1], k[2], "", 0)


def _check_var(v: Var) -> None:
    if isinstance(v, Symbol) and v.kind != INDIVIDUAL:
        raise SortMismatch(f"{v} cannot carry a rational value")


@dataclass(frozen=True)
class Term:
    """Linear combination of Vars plus a constant, exact rationals."""

    coeffs: tuple = ()  # tuple[(Var, Fraction), ...] sorted, no zeros
    const: Fraction = Fraction(0)

    @staticmethod
    def make(coeff_map: Mapping[Var, Fraction], const=Fraction(0)) -> "Term":
        items = [(v, Fraction(c)) for v, c in coeff_map.items() if c != 0]
        for v, _ in items:
            _check_var(v)
        items.sort(key=lambda it: var_key(it[0]))
        return Term(tuple(items), Fraction(const))

    @staticmethod
    def of(v: Var) -> "Term":
        _check_var(v)
        return Term(((v, Fraction(1)),), Fraction(0))

    @staticmethod
    def constant(c) -> "Term":
        return Term((), Fraction(c))

    def coeff_map(self) -> dict:
        return dict(self.coeffs)

    def __add__(self, other: "Term") -> "Term":
        m = self.coeff_map()
        for v, c in other.coeffs:
            m[v] = m.get(v, Fraction(0)) + c
        return Term.make(m, self.const + other.const)

    def __sub__(self, other: "Term") -> "Term":
        return self + other.scale(Fraction(-1))

    def scale(self, k) -> "Term":
        k = Fraction(k)
        return Term.make({v: c * k for v, c in self.coeffs}, self.const * k)

    def vars(self) -> frozenset:
        return frozenset(v for v, _ in self.coeffs)

    def evaluate(self, model: Mapping[Var, Fraction]) -> Fraction:
        total = self.const
        for v, c in self.coeffs:
            total += c * model.get(v, Fraction(0))
        return total

    def __str__(self) -> str:
        parts = []
        for v, c in self.coeffs:
            if c == 1:
                parts.append(str(v))
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{c}*{v}")
        if self.const != 0 or not parts:
            parts.append(str(self.const))
        return " + ".join(parts).replace("+ -", "- ")


class Formula:
    """Base class; leaves are atoms or constants, inner nodes Boolean."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return and_(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return or_(self, other)

    def __invert__(self) -> "Formula":
        return not_(self)


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = BoolConst(True)
FALSE = BoolConst(False)

LE, LT, EQ, NE = "<=", "<", "==", "!="
_NEG_OP = {LE: LT, LT: LE, EQ: NE, NE: EQ}


@dataclass(frozen=True)
class RelAtom(Formula):
    """Normalized relation: coeffs . vars  op  bound."""

    coeffs: tuple  # tuple[(Var, Fraction), ...]
    op: str
    bound: Fraction

    def term(self) -> Term:
        return Term(self.coeffs, Fraction(0))

    def holds(self, model: Mapping[Var, Fraction]) -> bool:
        lhs = self.term().evaluate(model)
        if self.op == LE:
            return lhs <= self.bound
        if self.op == LT:
            return lhs < self.bound
        if self.op == EQ:
            return lhs == self.bound
        return lhs != self.bound

    def __str__(self) -> str:
        return f"{Term(self.coeffs, Fraction(0))} {self.op} {self.bound}"


@dataclass(frozen=True)
class PropAtom(Formula):
    sym: Symbol

    def __post_init__(self) -> None:
        if self.sym.kind != PROPOSITIONAL:
            raise SortMismatch(f"{self.sym} is not propositional")

    def __str__(self) -> str:
        return str(self.sym)


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self) -> str:
        return f"!({self.arg})"


@dataclass(frozen=True)
class And(Formula):
    args: tuple

    def __str__(self) -> str:
        return "(" + " & ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: tuple

    def __str__(self) -> str:
        return "(" + " | ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        return f"({self.lhs} => {self.rhs})"


def and_(*args: Formula) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if a is TRUE or a == TRUE:
            continue
        if a is FALSE or a == FALSE:
            return FALSE
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    seen: list[Formula] = []
    for a in flat:
        if a not in seen:
            seen.append(a)
    if not seen:
        return TRUE
    if len(seen) == 1:
        return seen[0]
    return And(tuple(seen))


def or_(*args: Formula) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if a is FALSE or a == FALSE:
            continue
        if a is TRUE or a == TRUE:
            return TRUE
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    seen: list[Formula] = []
    for a in flat:
        if a not in seen:
            seen.append(a)
    if not seen:
        return FALSE
    if len(seen) == 1:
        return seen[0]
    return Or(tuple(seen))


def not_(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies_(a: Formula, b: Formula) -> Formula:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    if b == FALSE:
        return not_(a)
    return Implies(a, b)


def iff_(a: Formula, b: Formula) -> Formula:
    return and_(implies_(a, b), implies_(b, a))


def rel(op: str, lhs: Term, rhs: Term) -> Formula:
    """Build a normalized relation atom; ground relations fold to true/false.

    >= and > are flipped into <= and <. Inequalities are scaled so the leading
    coefficient is +-1; (dis)equalities additionally get a positive leading
    coefficient, so syntactic equality coincides with scaled-atom identity.
    """
    if op == ">=":
        return rel(LE, rhs, lhs)
    if op == ">":
        return rel(LT, rhs, lhs)
    if op not in (LE, LT, EQ, NE):
        raise LogicError(f"unknown relation {op}")
    diff = lhs - rhs
    coeffs, bound = diff.coeffs, -diff.const
    if not coeffs:
        zero = Fraction(0)
        value = {LE: zero <= bound, LT: zero < bound,
                 EQ: zero == bound, NE: zero != bound}[op]
        return TRUE if value else FALSE
    lead = coeffs[0][1]
    scale = abs(lead) if op in (LE, LT) else lead
    coeffs = tuple((v, c / scale) for v, c in coeffs)
    return RelAtom(coeffs, op, bound / scale)


def negate_atom(a: RelAtom) -> RelAtom:
    """Complement of a relation atom, renormalized."""
    if a.op == EQ:
        return RelAtom(a.coeffs, NE, a.bound)
    if a.op == NE:
        return RelAtom(a.coeffs, EQ, a.bound)
    # not (t <= b)  is  -t < -b ; not (t < b)  is  -t <= -b
    out = rel(_NEG_OP[a.op], Term(a.coeffs, Fraction(0)).scale(-1),
              Term.constant(-a.bound))
    assert isinstance(out, RelAtom)
    return out


def atoms(f: Formula) -> frozenset:
    acc: set = set()
    _walk_atoms(f, acc)
    return frozenset(acc)


def _walk_atoms(f: Formula, acc: set) -> None:
    if isinstance(f, (RelAtom, PropAtom)):
        acc.add(f)
    elif isinstance(f, Not):
        _walk_atoms(f.arg, acc)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _walk_atoms(a, acc)
    elif isinstance(f, Implies):
        _walk_atoms(f.lhs, acc)
        _walk_atoms(f.rhs, acc)


def vocabulary(f: Formula) -> frozenset:
    """Uninterpreted value carriers: prop symbols, plain vars, opaque reads."""
    acc: set = set()
    for a in atoms(f):
        if isinstance(a, PropAtom):
            acc.add(a.sym)
        else:
            for v, _ in a.coeffs:
                acc.add(v)
    return frozenset(acc)


def symbols(f: Formula) -> frozenset:
    """All Symbols, with array reads flattened into their components."""
    acc: set = set()
    for v in vocabulary(f):
        if isinstance(v, ArrayRead):
            acc.add(v.array)
            acc.add(v.index)
        else:
            acc.add(v)
    return frozenset(acc)


def is_state_formula(f: Formula) -> bool:
    return all(s.prime_count == 0 for s in symbols(f))


def is_transition_formula(f: Formula) -> bool:
    return all(s.prime_count <= 1 for s in symbols(f))


def map_symbols(f: Formula, fn) -> Formula:
    """Rebuild f with every Symbol s replaced by fn(s); structure preserved."""
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, PropAtom):
        return PropAtom(fn(f.sym))
    if isinstance(f, RelAtom):
        def on_var(v):
            if isinstance(v, ArrayRead):
                return ArrayRead(fn(v.array), fn(v.index))
            return fn(v)
        coeffs = tuple(sorted(((on_var(v), c) for v, c in f.coeffs),
                              key=lambda it: var_key(it[0])))
        return RelAtom(coeffs, f.op, f.bound)
    if isinstance(f, Not):
        return not_(map_symbols(f.arg, fn))
    if isinstance(f, And):
        return and_(*(map_symbols(a, fn) for a in f.args))
    if isinstance(f, Or):
        return or_(*(map_symbols(a, fn) for a in f.args))
    if isinstance(f, Implies):
        return implies_(map_symbols(f.lhs, fn), map_symbols(f.rhs, fn))
    raise LogicError(f"unknown node {f!r}")


def prime_shift(f: Formula, i: int) -> Formula:
    """Add i primes to every uninterpreted symbol (remove for negative i)."""
    if i == 0:
        return f
    return map_symbols(f, lambda s: s.shifted(i))


def substitute_vars(f: Formula, mapping: Mapping[Var, Term]) -> Formula:
    """Simultaneous substitution of Vars (plain symbols or reads) by terms."""
    if not mapping:
        return f
    sym_map = {v: t for v, t in mapping.items() if isinstance(v, Symbol)}

    def on_term(coeffs) -> Term:
        acc = Term.constant(0)
        for v, c in coeffs:
            if isinstance(v, ArrayRead) and v in mapping:
                acc = acc + mapping[v].scale(c)
            elif isinstance(v, ArrayRead):
                idx = v.index
                if idx in sym_map:
                    rep = sym_map[idx]
                    if (len(rep.coeffs) == 1 and rep.const == 0
                            and rep.coeffs[0][1] == 1
                            and isinstance(rep.coeffs[0][0], Symbol)):
                        v = ArrayRead(v.array, rep.coeffs[0][0])
                    else:
                        raise UnsupportedNesting(
                            f"read index {idx} would become {rep}")
                acc = acc + Term.of(v).scale(c)
            elif v in sym_map:
                acc = acc + sym_map[v].scale(c)
            else:
                acc = acc + Term.of(v).scale(c)
        return acc

    def go(g: Formula) -> Formula:
        if isinstance(g, BoolConst):
            return g
        if isinstance(g, PropAtom):
            return g
        if isinstance(g, RelAtom):
            return rel(g.op, on_term(g.coeffs), Term.constant(g.bound))
        if isinstance(g, Not):
            return not_(go(g.arg))
        if isinstance(g, And):
            return and_(*(go(a) for a in g.args))
        if isinstance(g, Or):
            return or_(*(go(a) for a in g.args))
        if isinstance(g, Implies):
            return implies_(go(g.lhs), go(g.rhs))
        raise LogicError(f"unknown node {g!r}")

    return go(f)


def substitute(f: Formula, mapping: Mapping[Symbol, Term]) -> Formula:
    """Substitute individual symbols by terms of individual sort."""
    for s in mapping:
        if not isinstance(s, Symbol) or s.kind != INDIVIDUAL:
            raise SortMismatch(f"cannot substitute for {s}")
    return substitute_vars(f, dict(mapping))


class FreshCounter:
    """Explicit counter for fresh-name generation; one per verification run."""

    def __init__(self, start: int = 0) -> None:
        self._it = itertools.count(start)

    def next(self) -> int:
        return next(self._it)


def hide_symbols(f: Formula, keep: Iterable[Symbol],
                 counter: Optional[FreshCounter] = None) -> Formula:
    """Rename every symbol outside `keep` to a fresh reserved-suffix symbol.

    Distinct symbols (including the same base at different prime depths) get
    distinct fresh bases, so hidden state is never shared across prime shifts.
    """
    keep_set = set(keep)
    counter = counter or FreshCounter()
    ren: dict[Symbol, Symbol] = {}
    for s in sorted(symbols(f), key=Symbol.sort_key):
        if s not in keep_set:
            fresh = f"{s.base_name}{RESERVED_SEP}h{counter.next()}"
            ren[s] = Symbol(fresh, s.prime_count, s.kind)
    if not ren:
        return f
    return map_symbols(f, lambda s: ren.get(s, s))


def evaluate(f: Formula, model: Mapping) -> bool:
    """Exact evaluation; missing vars default to 0, missing props to false."""
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, PropAtom):
        return bool(model.get(f.sym, False))
    if isinstance(f, RelAtom):
        return f.holds(model)
    if isinstance(f, Not):
        return not evaluate(f.arg, model)
    if isinstance(f, And):
        return all(evaluate(a, model) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, model) for a in f.args)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, model)) or evaluate(f.rhs, model)
    raise LogicError(f"unknown node {f!r}")


# ---------------------------------------------------------------------------
# CNF conversion


@dataclass
class CnfResult:
    clauses: list  # list[list[int]]
    atom_map: dict  # var -> RelAtom | PropAtom (aux vars absent)
    aux_vars: set  # set[int]


class AtomEnv:
    """Shared atom-to-variable map so atom identity is global across
    partitions; auxiliary variables are always fresh."""

    def __init__(self) -> None:
        self.var_of_atom: dict = {}
        self.atom_of_var: dict = {}
        self._next = 1

    def atom_var(self, atom) -> int:
        v = self.var_of_atom.get(atom)
        if v is None:
            v = self._next
            self._next += 1
            self.var_of_atom[atom] = v
            self.atom_of_var[v] = atom
        return v

    def fresh_aux(self) -> int:
        v = self._next
        self._next += 1
        return v

    @property
    def num_vars(self) -> int:
        return self._next - 1


def split_eq(f: Formula) -> Formula:
    """Rewrite =/!= atoms into <=,< structure (two opposing constraints)."""
    if isinstance(f, RelAtom):
        if f.op == EQ:
            t, b = Term(f.coeffs, Fraction(0)), Term.constant(f.bound)
            return and_(rel(LE, t, b), rel(LE, b, t))
        if f.op == NE:
            t, b = Term(f.coeffs, Fraction(0)), Term.constant(f.bound)
            return or_(rel(LT, t, b), rel(LT, b, t))
        return f
    if isinstance(f, (BoolConst, PropAtom)):
        return f
    if isinstance(f, Not):
        return not_(split_eq(f.arg))
    if isinstance(f, And):
        return and_(*(split_eq(a) for a in f.args))
    if isinstance(f, Or):
        return or_(*(split_eq(a) for a in f.args))
    if isinstance(f, Implies):
        return implies_(split_eq(f.lhs), split_eq(f.rhs))
    raise LogicError(f"unknown node {f!r}")


def to_cnf(f: Formula, env: Optional[AtomEnv] = None) -> CnfResult:
    """Equisatisfiable structural CNF. Theory atoms share Boolean variables
    through `env`; Tseitin auxiliaries are local to this call."""
    env = env if env is not None else AtomEnv()
    f = split_eq(f)
    clauses: list[list[int]] = []
    aux: set[int] = set()
    memo: dict[Formula, int] = {}

    def lit(g: Formula) -> int:
        if isinstance(g, Not):
            return -lit(g.arg)
        if isinstance(g, (RelAtom, PropAtom)):
            return env.atom_var(g)
        if isinstance(g, Implies):
            return lit(or_(not_(g.lhs), g.rhs))
        if g in memo:
            return memo[g]
        if isinstance(g, And):
            v = env.fresh_aux()
            aux.add(v)
            ls = [lit(a) for a in g.args]
            for l in ls:
                clauses.append([-v, l])
            clauses.append([v] + [-l for l in ls])
        elif isinstance(g, Or):
            v = env.fresh_aux()
            aux.add(v)
            ls = [lit(a) for a in g.args]
            for l in ls:
                clauses.append([v, -l])
            clauses.append([-v] + ls)
        else:
            raise LogicError(f"cannot clausify {g!r}")
        memo[g] = v
        return v

    def top(g: Formula) -> None:
        if g == TRUE:
            return
        if g == FALSE:
            clauses.append([])
            return
        if isinstance(g, And):
            for a in g.args:
                top(a)
        elif isinstance(g, Implies):
            top(or_(not_(g.lhs), g.rhs))
        elif isinstance(g, Or):
            clauses.append([lit(a) for a in g.args])
        else:
            clauses.append([lit(g)])

    top(f)
    atom_map = {v: a for a, v in env.var_of_atom.items()}
    return CnfResult(clauses, atom_map, aux)
