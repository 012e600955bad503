"""Lazy-theory refuter with resolution proof logging.

The SAT core is conflict-driven clause learning with clause-level resolution
logging, so every unsat answer carries a checkable refutation DAG. Theory
reasoning is total-assignment checking: once the Boolean search completes an
assignment, the conjunction of asserted linear constraints is decided exactly;
an infeasible core (nonzero Farkas multipliers) becomes a theory-lemma clause.

Interpolants are extracted from a single refutation with one fixed convention:
hypotheses from the A side contribute the disjunction of their B-common
literals, hypotheses from B contribute true, theory lemmas contribute the
certificate combination of their A-side constraints, and derived vertices
join their parents with "or" on A-local pivots and "and" otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from . import lra
from .logic import (FALSE, TRUE, AtomEnv, Formula, Not, PropAtom, RelAtom,
                    and_, atoms, evaluate, negate_atom, not_, or_, to_cnf,
                    vocabulary)
from .lra import FarkasCertificate, LinConstraint, farkas_interpolant


class ProverError(Exception):
    pass


class InvalidProof(ProverError):
    pass


# --------------------------------------------------------------------------
# Proof representation


@dataclass(frozen=True)
class Hypothesis:
    part: int


@dataclass(frozen=True)
class TheoryLemma:
    constraints: tuple  # tuple[LinConstraint, ...]
    lits: tuple  # lits[j] asserted constraints[j]
    certificate: FarkasCertificate


class Derived:
    __slots__ = ("pivot", "pos", "neg")

    def __init__(self, pivot: int, pos: "ProofVertex", neg: "ProofVertex"):
        self.pivot = pivot
        self.pos = pos
        self.neg = neg


class ProofVertex:
    __slots__ = ("id", "clause", "origin", "successor_count")

    def __init__(self, vid: int, clause: FrozenSet[int], origin):
        self.id = vid
        self.clause = clause
        self.origin = origin
        self.successor_count = 0

    def is_root(self) -> bool:
        return not isinstance(self.origin, Derived)

    def __repr__(self) -> str:
        return f"<v{self.id} {sorted(self.clause)}>"


class Refutation:
    """Resolution proof DAG; `leaf` derives the empty clause."""

    def __init__(self, leaf: ProofVertex, vertices: Dict[int, ProofVertex],
                 n_parts: int, atom_of_var: Dict[int, Formula],
                 parts_of_var: Dict[int, FrozenSet[int]],
                 hyp_clauses: List[Set[FrozenSet[int]]], next_id: int):
        self.leaf = leaf
        self.vertices = vertices
        self.n_parts = n_parts
        self.atom_of_var = atom_of_var
        self.parts_of_var = parts_of_var
        self.hyp_clauses = hyp_clauses
        self.next_id = next_id
        self.transform_stats = None

    def new_vertex(self, clause: FrozenSet[int], origin) -> ProofVertex:
        v = ProofVertex(self.next_id, clause, origin)
        self.next_id += 1
        self.vertices[v.id] = v
        return v

    def topo_order(self) -> List[ProofVertex]:
        """Vertices reachable from the leaf, antecedents before consequents,
        ties broken by creation index."""
        order: List[ProofVertex] = []
        state: Dict[int, int] = {}
        stack = [self.leaf]
        while stack:
            v = stack.pop()
            st = state.get(v.id, 0)
            if st == 2:
                continue
            if st == 1:
                state[v.id] = 2
                order.append(v)
                continue
            state[v.id] = 1
            stack.append(v)
            if isinstance(v.origin, Derived):
                for p in (v.origin.neg, v.origin.pos):
                    if state.get(p.id, 0) == 1:
                        raise InvalidProof("cycle in proof DAG")
                    if state.get(p.id, 0) == 0:
                        stack.append(p)
        return order

    def recount_successors(self) -> None:
        for v in self.vertices.values():
            v.successor_count = 0
        for v in self.topo_order():
            if isinstance(v.origin, Derived):
                v.origin.pos.successor_count += 1
                v.origin.neg.successor_count += 1

    def validate(self) -> None:
        if self.leaf.clause:
            raise InvalidProof("leaf clause is not empty")
        reachable = self.topo_order()
        counts: Dict[int, int] = {}
        for v in reachable:
            if v.id not in self.vertices:
                raise InvalidProof(f"vertex {v.id} not registered")
            o = v.origin
            if isinstance(o, Derived):
                if o.pivot not in o.pos.clause:
                    raise InvalidProof(f"pivot missing in pos parent of {v.id}")
                if -o.pivot not in o.neg.clause:
                    raise InvalidProof(f"pivot missing in neg parent of {v.id}")
                want = (o.pos.clause | o.neg.clause) - {o.pivot, -o.pivot}
                if v.clause != want:
                    raise InvalidProof(f"resolvent mismatch at {v.id}")
                counts[o.pos.id] = counts.get(o.pos.id, 0) + 1
                counts[o.neg.id] = counts.get(o.neg.id, 0) + 1
            elif isinstance(o, Hypothesis):
                if v.clause not in self.hyp_clauses[o.part]:
                    raise InvalidProof(f"hypothesis {v.id} not an input clause")
            elif isinstance(o, TheoryLemma):
                if len(o.constraints) != len(o.lits):
                    raise InvalidProof(f"lemma arity mismatch at {v.id}")
                if v.clause != frozenset(-l for l in o.lits):
                    raise InvalidProof(f"lemma clause mismatch at {v.id}")
                if not lra.certificate_valid(list(o.constraints),
                                             o.certificate):
                    raise InvalidProof(f"bad certificate at {v.id}")
            else:
                raise InvalidProof(f"unknown origin at {v.id}")
        for v in reachable:
            if v.successor_count != counts.get(v.id, 0):
                raise InvalidProof(f"successor count stale at {v.id}")

    def dump(self) -> str:
        lines = []
        for v in self.topo_order():
            cl = " ".join(str(l) for l in sorted(v.clause)) or "()"
            o = v.origin
            if isinstance(o, Hypothesis):
                lines.append(f"{v.id}: {cl} | HYP part={o.part}")
            elif isinstance(o, TheoryLemma):
                ms = ",".join(f"{i}:{m}" for i, m in o.certificate.multipliers)
                lines.append(f"{v.id}: {cl} | LEMMA mult={ms}")
            else:
                lines.append(f"{v.id}: {cl} | RES piv={o.pivot} "
                             f"left={o.pos.id} right={o.neg.id}")
        return "\n".join(lines)


@dataclass
class SymmetricInterpolant:
    parts: Dict[int, Formula]


@dataclass
class Sat:
    model: "Model"


@dataclass
class Unsat:
    proof: Refutation


@dataclass
class Model:
    bools: Dict  # propositional Symbol -> bool
    rationals: Dict  # Var -> Fraction

    def assignment(self) -> Dict:
        out = dict(self.rationals)
        out.update(self.bools)
        return out

    def eval(self, f: Formula) -> bool:
        return evaluate(f, self.assignment())


# --------------------------------------------------------------------------
# CDCL core


class _Solver:
    def __init__(self, proof_vertices: Dict[int, ProofVertex]):
        self.vertices = proof_vertices
        self.next_vid = 0
        self.clauses: List[Tuple[List[int], ProofVertex]] = []
        self.occur: Dict[int, List[int]] = {}
        self.value: Dict[int, Optional[bool]] = {}
        self.level: Dict[int, int] = {}
        self.reason: Dict[int, Optional[int]] = {}  # var -> clause index
        self.trail: List[int] = []
        self.order: List[int] = []
        self.empty_vertex: Optional[ProofVertex] = None

    def _vertex(self, clause: FrozenSet[int], origin) -> ProofVertex:
        v = ProofVertex(self.next_vid, clause, origin)
        self.next_vid += 1
        self.vertices[v.id] = v
        return v

    def _register_var(self, var: int) -> None:
        if var not in self.value:
            self.value[var] = None
            self.level[var] = 0
            self.reason[var] = None
            self.order.append(var)

    def add_clause(self, lits: Sequence[int], origin) -> Optional[ProofVertex]:
        """Returns the vertex, or None for tautologies (skipped)."""
        seen: List[int] = []
        for l in lits:
            if l not in seen:
                seen.append(l)
        if any(-l in seen for l in seen):
            return None
        clause = frozenset(seen)
        vertex = self._vertex(clause, origin)
        if not seen:
            if self.empty_vertex is None:
                self.empty_vertex = vertex
            return vertex
        idx = len(self.clauses)
        self.clauses.append((seen, vertex))
        for l in seen:
            self._register_var(abs(l))
            self.occur.setdefault(-l, []).append(idx)
        return vertex

    def _lit_true(self, l: int) -> Optional[bool]:
        v = self.value[abs(l)]
        if v is None:
            return None
        return v == (l > 0)

    def _assign(self, l: int, lvl: int, reason_idx: Optional[int]) -> None:
        var = abs(l)
        self.value[var] = l > 0
        self.level[var] = lvl
        self.reason[var] = reason_idx
        self.trail.append(l)

    def _current_level(self) -> int:
        return self._lvl

    def _propagate(self) -> Optional[int]:
        """Exhaustive unit propagation; returns a conflicting clause index."""
        changed = True
        while changed:
            changed = False
            for idx, (lits, _) in enumerate(self.clauses):
                unassigned = None
                satisfied = False
                n_un = 0
                for l in lits:
                    t = self._lit_true(l)
                    if t is True:
                        satisfied = True
                        break
                    if t is None:
                        n_un += 1
                        unassigned = l
                if satisfied:
                    continue
                if n_un == 0:
                    return idx
                if n_un == 1:
                    self._assign(unassigned, self._lvl, idx)
                    changed = True
        return None

    def _backtrack(self, lvl: int) -> None:
        while self.trail and self.level[abs(self.trail[-1])] > lvl:
            l = self.trail.pop()
            self.value[abs(l)] = None
            self.reason[abs(l)] = None
        self._lvl = lvl

    def _trail_pos(self) -> Dict[int, int]:
        return {abs(l): i for i, l in enumerate(self.trail)}

    def _analyze(self, conflict_idx: int):
        """Resolve the conflict clause against reasons until one literal of
        the conflict level remains (or none, proving unsat). Returns
        (learned_vertex, backjump_level, asserting_literal) or the empty-
        clause vertex when the conflict is at level zero."""
        _, cur_v = self.clauses[conflict_idx]
        pos = self._trail_pos()
        clvl = max((self.level[abs(l)] for l in cur_v.clause), default=0)
        self._backtrack(clvl)

        def lits_at(v: ProofVertex, lvl: int) -> List[int]:
            return [l for l in v.clause if self.level[abs(l)] == lvl]

        while True:
            at_level = lits_at(cur_v, clvl)
            if clvl == 0:
                if not cur_v.clause:
                    return cur_v
                target = max(cur_v.clause, key=lambda l: pos[abs(l)])
            elif len(at_level) <= 1:
                break
            else:
                target = max(at_level, key=lambda l: pos[abs(l)])
            r_idx = self.reason[abs(target)]
            assert r_idx is not None, "resolution target lacks a reason"
            _, r_v = self.clauses[r_idx]
            cur_v = self._resolve(abs(target), cur_v, r_v)

        uip = lits_at(cur_v, clvl)[0]
        bj = max((self.level[abs(l)] for l in cur_v.clause if l != uip),
                 default=0)
        return cur_v, bj, uip

    def _resolve(self, pivot: int, a: ProofVertex, b: ProofVertex):
        if pivot in a.clause:
            pos, neg = a, b
        else:
            pos, neg = b, a
        clause = (pos.clause | neg.clause) - {pivot, -pivot}
        v = self._vertex(clause, Derived(pivot, pos, neg))
        pos.successor_count += 1
        neg.successor_count += 1
        return v

    def solve(self, theory_vars: Dict[int, RelAtom]):
        """Returns ('sat', bool assignment, rational model) or
        ('unsat', empty-clause vertex)."""
        if self.empty_vertex is not None:
            return ("unsat", self.empty_vertex)
        self._lvl = 0
        while True:
            conflict = self._propagate()
            if conflict is not None:
                res = self._analyze(conflict)
                if isinstance(res, ProofVertex):
                    return ("unsat", res)
                learned, bj, uip = res
                self._backtrack(bj)
                if learned.clause:
                    idx = len(self.clauses)
                    self.clauses.append((sorted(learned.clause), learned))
                    for l in learned.clause:
                        self.occur.setdefault(-l, []).append(idx)
                    self._assign(uip, bj, idx)
                continue
            decision = None
            for var in self.order:
                if self.value[var] is None:
                    decision = var
                    break
            if decision is not None:
                self._lvl += 1
                self._assign(-decision, self._lvl, None)  # phase false first
                continue
            # total assignment: check the theory
            constraints: List[LinConstraint] = []
            lits: List[int] = []
            for var in self.order:
                atom = theory_vars.get(var)
                if atom is None:
                    continue
                positive = self.value[var]
                constraints.append(LinConstraint.from_atom(atom, positive))
                lits.append(var if positive else -var)
            result = lra.check_conjunction(constraints)
            if isinstance(result, lra.Feasible):
                assignment = {v: self.value[v] for v in self.order}
                return ("sat", assignment, result.model)
            support = [i for i, _ in result.certificate.multipliers]
            lemma_cs = tuple(constraints[i] for i in support)
            lemma_lits = tuple(lits[i] for i in support)
            cert = FarkasCertificate.make(
                {j: result.certificate.as_dict()[i]
                 for j, i in enumerate(support)})
            clause = [-l for l in lemma_lits]
            origin = TheoryLemma(lemma_cs, lemma_lits, cert)
            vertex = self.add_clause(clause, origin)
            assert vertex is not None and vertex.clause, "degenerate lemma"
            conflict_idx = len(self.clauses) - 1
            res = self._analyze(conflict_idx)
            if isinstance(res, ProofVertex):
                return ("unsat", res)
            learned, bj, uip = res
            self._backtrack(bj)
            if learned.clause:
                idx = len(self.clauses)
                self.clauses.append((sorted(learned.clause), learned))
                for l in learned.clause:
                    self.occur.setdefault(-l, []).append(idx)
                self._assign(uip, bj, idx)


# --------------------------------------------------------------------------
# Public refuter


class Refuter:
    """Owns the per-run statistics; each refute() call is self-contained."""

    def __init__(self, dump_dir: Optional[str] = None):
        self.calls = 0

    def refute(self, partitions: Sequence[Formula]):
        self.calls += 1
        env = AtomEnv()
        vertices: Dict[int, ProofVertex] = {}
        solver = _Solver(vertices)
        hyp_clauses: List[Set[FrozenSet[int]]] = []
        parts_of_var: Dict[int, Set[int]] = {}
        for part, formula in enumerate(partitions):
            cnf = to_cnf(formula, env)
            emitted: Set[FrozenSet[int]] = set()
            for cl in cnf.clauses:
                v = solver.add_clause(cl, Hypothesis(part))
                if v is not None:
                    emitted.add(v.clause)
                for l in cl:
                    parts_of_var.setdefault(abs(l), set()).add(part)
            hyp_clauses.append(emitted)
        theory_vars = {v: a for v, a in env.atom_of_var.items()
                       if isinstance(a, RelAtom)}
        outcome = solver.solve(theory_vars)
        if outcome[0] == "sat":
            _, assignment, rationals = outcome
            bools = {}
            for var, val in assignment.items():
                atom = env.atom_of_var.get(var)
                if isinstance(atom, PropAtom):
                    bools[atom.sym] = bool(val)
            return Sat(Model(bools, dict(rationals)))
        leaf = outcome[1]
        proof = Refutation(
            leaf=leaf,
            vertices=vertices,
            n_parts=len(partitions),
            atom_of_var=dict(env.atom_of_var),
            parts_of_var={v: frozenset(ps) for v, ps in parts_of_var.items()},
            hyp_clauses=hyp_clauses,
            next_id=solver.next_vid,
        )
        proof.recount_successors()
        return Unsat(proof)


def refute(partitions: Sequence[Formula]):
    return Refuter().refute(partitions)


# --------------------------------------------------------------------------
# Interpolants


def _lit_formula(proof: Refutation, lit: int) -> Formula:
    atom = proof.atom_of_var.get(abs(lit))
    assert atom is not None, "auxiliary variable leaked into an interpolant"
    if lit > 0:
        return atom
    if isinstance(atom, RelAtom):
        return negate_atom(atom)
    return not_(atom)


def _b_vars(proof: Refutation, b_side: FrozenSet[int]) -> Set[int]:
    return {v for v, ps in proof.parts_of_var.items() if ps & b_side}


def interpolant(proof: Refutation, a_side: Iterable[int]) -> Formula:
    """Interpolant for (conjunction of a_side partitions, rest), derived
    from this proof."""
    a = frozenset(a_side)
    all_parts = frozenset(range(proof.n_parts))
    if not a or not (all_parts - a):
        raise InvalidProof("a_side must be a nonempty proper subset")
    b = all_parts - a
    bvars = _b_vars(proof, b)
    memo: Dict[int, Formula] = {}
    for v in proof.topo_order():
        o = v.origin
        if isinstance(o, Hypothesis):
            if o.part in a:
                memo[v.id] = or_(*(_lit_formula(proof, l)
                                   for l in sorted(v.clause)
                                   if abs(l) in bvars))
            else:
                memo[v.id] = TRUE
        elif isinstance(o, TheoryLemma):
            memo[v.id] = farkas_interpolant(
                list(o.constraints), o.certificate,
                lambda j: abs(o.lits[j]) not in bvars)
        else:
            left, right = memo[o.pos.id], memo[o.neg.id]
            if o.pivot in bvars:
                memo[v.id] = and_(left, right)
            else:
                memo[v.id] = or_(left, right)
    return memo[proof.leaf.id]


def symmetric_interpolant(proof: Refutation) -> SymmetricInterpolant:
    """One interpolant per partition, all from the same proof, so their
    conjunction is inconsistent."""
    return SymmetricInterpolant(
        {i: interpolant(proof, {i}) for i in range(proof.n_parts)})


def check_interpolant(a: Formula, b: Formula, itp: Formula,
                      refuter: Optional[Refuter] = None) -> bool:
    """True iff a => itp is valid, itp & b is unsat, and itp stays within the
    shared vocabulary."""
    r = refuter or Refuter()
    if not vocabulary(itp) <= (vocabulary(a) & vocabulary(b)):
        return False
    if isinstance(r.refute([and_(a, not_(itp))]), Sat):
        return False
    if isinstance(r.refute([and_(itp, b)]), Sat):
        return False
    return True
