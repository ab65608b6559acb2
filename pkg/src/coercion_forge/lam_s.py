"""The space-efficient source calculus.

Terms keep at most one pending coercion per value: stacked coercion
applications merge eagerly (composition steps, kind "c") before ordinary
evaluation steps (kind "e") may look past them.  The two-sort context
grammar is realized by a single flag while searching for the redex: a
composition step may not fire directly under a pending coercion frame, and
coercion frames never nest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .coercions import (
    Coercion,
    CoercionTypeError,
    Fail,
    Fun,
    Id,
    IdStar,
    InjSeq,
    ProjSeq,
    check_crc,
    compose,
    crc_source,
    is_delayed,
    size,
)
from .types import ANY, BOOL, DYN, INT, AnyT, FunT, Type, matches, merge_types


@dataclass(frozen=True)
class Const:
    val: object  # int or bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs:
    var: str
    var_ty: Type
    body: TermS


@dataclass(frozen=True)
class Op:
    op: str
    left: TermS
    right: TermS


@dataclass(frozen=True)
class App:
    fun: TermS
    arg: TermS


@dataclass(frozen=True)
class CrcApp:
    subject: TermS
    crc: Coercion


@dataclass(frozen=True)
class CoercedVal:
    """A value carrying its single delayed coercion (injection or arrow)."""

    subject: TermS
    crc: Coercion


@dataclass(frozen=True)
class Blame:
    label: str


@dataclass(frozen=True)
class If:
    cond: TermS
    then: TermS
    els: TermS


@dataclass(frozen=True)
class GlobalRef:
    name: str


TermS = Union[Const, Var, Abs, Op, App, CrcApp, CoercedVal, Blame, If, GlobalRef]

TRUE = Const(True)
FALSE = Const(False)

# op name -> (left type, right type, result type)
OPS: dict[str, tuple[Type, Type, Type]] = {
    "+": (INT, INT, INT),
    "-": (INT, INT, INT),
    "*": (INT, INT, INT),
    "=": (INT, INT, BOOL),
    "<": (INT, INT, BOOL),
}


def const_type(v: object) -> Type:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    raise TypeCheckError(f"unknown constant {v!r}")


def delta(op: str, a: object, b: object) -> object:
    match op:
        case "+":
            return a + b
        case "-":
            return a - b
        case "*":
            return a * b
        case "=":
            return a == b
        case "<":
            return a < b
    raise AssertionError(op)


_UNCOERCED_CLASSES = frozenset((Const, Abs, GlobalRef))
_VALUE_CLASSES = frozenset((Const, Abs, GlobalRef, Var, CoercedVal))


def is_uncoerced(t: TermS) -> bool:
    return t.__class__ in _UNCOERCED_CLASSES


def is_value(t: TermS) -> bool:
    return t.__class__ in _VALUE_CLASSES


# ---------------------------------------------------------------------------
# Typing


class TypeCheckError(Exception):
    pass


@dataclass(frozen=True)
class Typed:
    """Typing derivation: the term, its type, and typed immediate subterms."""

    term: TermS
    ty: Type
    children: tuple[Typed, ...] = ()


@dataclass(frozen=True)
class DefS:
    name: str
    ty: FunT
    fun: Abs


@dataclass(frozen=True)
class ProgramS:
    defs: tuple[DefS, ...]
    main: TermS

    def def_terms(self) -> dict[str, TermS]:
        return {d.name: d.fun for d in self.defs}

    def def_types(self) -> dict[str, Type]:
        return {d.name: d.ty for d in self.defs}


def typecheck(
    term: TermS,
    env: Optional[Mapping[str, Type]] = None,
    defs: Optional[Mapping[str, Type]] = None,
    expected: Optional[Type] = None,
) -> Typed:
    """Build a typing derivation; ``expected`` constrains ambiguous terms.

    Blame and failure-targeted coercion applications can be given any type;
    without an expectation they type as a wildcard that later defaults to
    Dyn at reporting time.  Every answer is a derivable instance.
    """
    env = dict(env) if env else {}
    defs = dict(defs) if defs else {}
    return _tc(term, env, defs, expected)


def _done(term: TermS, ty: Type, expected: Optional[Type], children: tuple[Typed, ...]) -> Typed:
    if expected is not None:
        if not matches(ty, expected):
            raise TypeCheckError(f"expected {expected!r}, found {ty!r}")
        ty = merge_types(ty, expected)
    return Typed(term, ty, children)


def _tc(term: TermS, env, defs, expected: Optional[Type]) -> Typed:
    match term:
        case Const(v):
            return _done(term, const_type(v), expected, ())
        case Var(x):
            if x not in env:
                raise TypeCheckError(f"unbound variable {x}")
            return _done(term, env[x], expected, ())
        case GlobalRef(f):
            if f not in defs:
                raise TypeCheckError(f"unknown definition {f}")
            return _done(term, defs[f], expected, ())
        case Abs(x, a, m):
            body_exp = None
            if isinstance(expected, FunT) and matches(expected.arg, a):
                body_exp = expected.res
            elif expected is not None and not isinstance(expected, AnyT):
                if not isinstance(expected, FunT):
                    raise TypeCheckError(f"expected {expected!r}, found a function")
                raise TypeCheckError(
                    f"function argument annotated {a!r}, expected {expected.arg!r}"
                )
            body = _tc(m, {**env, x: a}, defs, body_exp)
            return _done(term, FunT(a, body.ty), expected, (body,))
        case Op(op, l, r):
            if op not in OPS:
                raise TypeCheckError(f"unknown operator {op}")
            t1, t2, res = OPS[op]
            lt = _tc(l, env, defs, t1)
            rt = _tc(r, env, defs, t2)
            return _done(term, res, expected, (lt, rt))
        case App(m, n):
            if isinstance(m, Blame) or (isinstance(m, CrcApp) and isinstance(m.crc, Fail)):
                # the function side can take any type; pin it from the argument
                nt = _tc(n, env, defs, None)
                res = expected if expected is not None else ANY
                mt = _tc(m, env, defs, FunT(nt.ty, res))
                return _done(term, res, expected, (mt, nt))
            mt = _tc(m, env, defs, None)
            fty = mt.ty
            if isinstance(fty, AnyT):
                fty = FunT(ANY, ANY)
            if not isinstance(fty, FunT):
                raise TypeCheckError(f"applied non-function of type {mt.ty!r}")
            nt = _tc(n, env, defs, fty.arg)
            return _done(term, fty.res, expected, (mt, nt))
        case CrcApp(m, s):
            src = crc_source(s, FunT)
            sub = _tc(m, env, defs, None if isinstance(src, AnyT) else src)
            try:
                tgt = check_crc(s, sub.ty, FunT)
            except CoercionTypeError as e:
                raise TypeCheckError(str(e)) from None
            return _done(term, tgt, expected, (sub,))
        case CoercedVal(u, d):
            if not is_uncoerced(u):
                raise TypeCheckError("coerced-value subject must be an uncoerced value")
            if not is_delayed(d):
                raise TypeCheckError("coerced values carry injections or arrows only")
            sub = _tc(u, env, defs, None)
            try:
                tgt = check_crc(d, sub.ty, FunT)
            except CoercionTypeError as e:
                raise TypeCheckError(str(e)) from None
            return _done(term, tgt, expected, (sub,))
        case Blame():
            return _done(term, ANY if expected is None else expected, expected, ())
        case If(c, m, n):
            ct = _tc(c, env, defs, BOOL)
            mt = _tc(m, env, defs, expected)
            nt = _tc(n, env, defs, expected)
            if not matches(mt.ty, nt.ty):
                raise TypeCheckError(f"branch types {mt.ty!r} and {nt.ty!r} differ")
            return _done(term, merge_types(mt.ty, nt.ty), expected, (ct, mt, nt))
    raise AssertionError(term)


def typecheck_program(p: ProgramS) -> Typed:
    """Check the definitions against their signatures, then the main term."""
    sigs = p.def_types()
    for d in p.defs:
        if not isinstance(d.ty, FunT):
            raise TypeCheckError(f"definition {d.name} needs a function signature")
        typecheck(d.fun, {}, sigs, d.ty)
    return typecheck(p.main, {}, sigs, None)


# ---------------------------------------------------------------------------
# Substitution


def free_vars(t: TermS) -> frozenset[str]:
    match t:
        case Var(x):
            return frozenset((x,))
        case Abs(x, _, m):
            return free_vars(m) - {x}
        case Op(_, l, r) | App(l, r):
            return free_vars(l) | free_vars(r)
        case CrcApp(m, _) | CoercedVal(m, _):
            return free_vars(m)
        case If(c, m, n):
            return free_vars(c) | free_vars(m) | free_vars(n)
        case _:
            return frozenset()


def fresh_name(base: str, avoid: frozenset[str]) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def substitute(t: TermS, sub: Mapping[str, TermS]) -> TermS:
    """Simultaneous capture-avoiding substitution."""
    if not sub:
        return t
    match t:
        case Var(x):
            return sub.get(x, t)
        case Abs(x, a, m):
            inner = {k: v for k, v in sub.items() if k != x}
            if not inner:
                return t
            clash = frozenset().union(*(free_vars(v) for v in inner.values()))
            if x in clash:
                x2 = fresh_name(x, clash | free_vars(m) | set(inner))
                m = substitute(m, {x: Var(x2)})
                x = x2
            return Abs(x, a, substitute(m, inner))
        case Op(op, l, r):
            return Op(op, substitute(l, sub), substitute(r, sub))
        case App(f, a):
            return App(substitute(f, sub), substitute(a, sub))
        case CrcApp(m, s):
            return CrcApp(substitute(m, sub), s)
        case CoercedVal(u, d):
            return CoercedVal(substitute(u, sub), d)
        case If(c, m, n):
            return If(substitute(c, sub), substitute(m, sub), substitute(n, sub))
        case _:
            return t


# ---------------------------------------------------------------------------
# Small-step semantics


@dataclass(frozen=True)
class Stepped:
    kind: str  # "e" or "c"
    rule: str
    term: TermS


@dataclass(frozen=True)
class IsValue:
    pass


@dataclass(frozen=True)
class IsBlame:
    pass


StepResult = Union[Stepped, IsValue, IsBlame]
IS_VALUE = IsValue()
IS_BLAME = IsBlame()


class StuckTerm(Exception):
    """No rule applies to a non-value, non-blame term (ill-typed or open)."""


def step(term: TermS, defs: Optional[Mapping[str, TermS]] = None) -> StepResult:
    if is_value(term):
        return IS_VALUE
    if isinstance(term, Blame):
        return IS_BLAME
    r = _find(term, defs or {}, under_crc=False)
    if r is None:
        raise StuckTerm(repr(term))
    return r


def _abort(t: TermS) -> Optional[Stepped]:
    if isinstance(t, Blame):
        return Stepped("e", "E-Abort", t)
    return None


def _descend(t: TermS, defs, under_crc: bool, rebuild) -> Optional[Stepped]:
    r = _abort(t) or _find(t, defs, under_crc)
    if r is None or r.rule == "E-Abort":
        return r
    return Stepped(r.kind, r.rule, rebuild(r.term))


def _find(t: TermS, defs, under_crc: bool) -> Optional[Stepped]:
    match t:
        case Op(op, l, r):
            if not is_value(l):
                return _descend(l, defs, False, lambda n: Op(op, n, r))
            if not is_value(r):
                return _descend(r, defs, False, lambda n: Op(op, l, n))
            if isinstance(l, Const) and isinstance(r, Const):
                return Stepped("e", "R-Op", Const(delta(op, l.val, r.val)))
            return None
        case App(f, a):
            if not is_value(f):
                return _descend(f, defs, False, lambda n: App(n, a))
            if not is_value(a):
                return _descend(a, defs, False, lambda n: App(f, n))
            match f:
                case Abs(x, _, m):
                    return Stepped("e", "R-Beta", substitute(m, {x: a}))
                case CoercedVal(u, Fun(s, c2)):
                    return Stepped("e", "R-Wrap", CrcApp(App(u, CrcApp(a, s)), c2))
                case GlobalRef(g) if g in defs:
                    return Stepped("e", "R-Unfold", App(defs[g], a))
            return None
        case If(c, m, n):
            if not is_value(c):
                return _descend(c, defs, False, lambda x: If(x, m, n))
            if c == TRUE:
                return Stepped("e", "R-IfTrue", m)
            if c == FALSE:
                return Stepped("e", "R-IfFalse", n)
            return None
        case CrcApp(m, s):
            if under_crc:
                # pending coercions never stack in evaluation position: the
                # enclosing frame merges first
                return None
            match m:
                case CrcApp(m2, s2):
                    return Stepped("c", "R-MergeC", CrcApp(m2, compose(s2, s, FunT)))
                case CoercedVal(u, d):
                    return Stepped("c", "R-MergeV", CrcApp(u, compose(d, s, FunT)))
                case Blame():
                    return Stepped("e", "E-Abort", m)
                case _ if not is_value(m):
                    return _descend(m, defs, True, lambda n: CrcApp(n, s))
                case _ if is_uncoerced(m):
                    match s:
                        case Id() | IdStar():
                            return Stepped("c", "R-Id", m)
                        case Fail(_, p, _):
                            return Stepped("c", "R-Fail", Blame(p))
                        case InjSeq() | Fun():
                            return Stepped("c", "R-Crc", CoercedVal(m, s))
                    return None
            return None
    return None


@dataclass(frozen=True)
class EvalOutcome:
    kind: str  # "value", "blame", "out_of_fuel"
    term: TermS
    steps: int


DEFAULT_FUEL = 10**6


def evaluate(
    term: TermS,
    defs: Optional[Mapping[str, TermS]] = None,
    fuel: int = DEFAULT_FUEL,
    on_step=None,
    detect_cycles: bool = False,
) -> EvalOutcome:
    """Run to a value or blame; ``on_step`` sees every intermediate state."""
    defs = dict(defs) if defs else {}
    seen: set[TermS] = set()
    n = 0
    while n < fuel:
        r = step(term, defs)
        if isinstance(r, IsValue):
            return EvalOutcome("value", term, n)
        if isinstance(r, IsBlame):
            return EvalOutcome("blame", term, n)
        term = r.term
        n += 1
        if on_step is not None:
            on_step(n, r)
        # A repeated state proves divergence, so any fuel would run out.
        # Sampling every 64th state keeps the hashing cost negligible.
        if detect_cycles and n % 64 == 0:
            if term in seen:
                return EvalOutcome("diverges", term, n)
            seen.add(term)
    return EvalOutcome("out_of_fuel", term, n)


def evaluate_program(
    p: ProgramS, fuel: int = DEFAULT_FUEL, on_step=None, detect_cycles: bool = False
) -> EvalOutcome:
    return evaluate(p.main, p.def_terms(), fuel, on_step, detect_cycles)


# ---------------------------------------------------------------------------
# Decomposition oracle: a grammar-driven search, independent of step()


@dataclass(frozen=True)
class Decomposition:
    path: tuple[int, ...]
    rule: str
    kind: str
    term: TermS  # the full term after firing this redex


def _subterm(t: TermS, path: tuple[int, ...]) -> TermS:
    for i in path:
        t = _children(t)[i]
    return t


def _children(t: TermS) -> tuple[TermS, ...]:
    match t:
        case Op(_, l, r):
            return (l, r)
        case App(f, a):
            return (f, a)
        case CrcApp(m, _) | CoercedVal(m, _):
            return (m,)
        case If(c, m, n):
            return (c, m, n)
        case Abs(_, _, m):
            return (m,)
        case _:
            return ()


def _replace(t: TermS, path: tuple[int, ...], new: TermS) -> TermS:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = list(_children(t))
    kids[i] = _replace(kids[i], rest, new)
    match t:
        case Op(op, _, _):
            return Op(op, *kids)
        case App(_, _):
            return App(*kids)
        case CrcApp(_, s):
            return CrcApp(kids[0], s)
        case CoercedVal(_, d):
            return CoercedVal(kids[0], d)
        case If(_, _, _):
            return If(*kids)
        case Abs(x, a, _):
            return Abs(x, a, kids[0])
    raise AssertionError(t)


def _frame_ok(t: TermS, i: int) -> Optional[str]:
    """Frame class if descending into child ``i`` is an evaluation frame."""
    match t:
        case Op(_, l, _):
            if i == 0:
                return "plain"
            return "plain" if is_value(l) else None
        case App(f, _):
            if i == 0:
                return "plain"
            return "plain" if is_value(f) else None
        case If(_, _, _):
            return "plain" if i == 0 else None
        case CrcApp(_, _):
            return "crc" if i == 0 else None
        case _:
            return None


def _context_sort(t: TermS, path: tuple[int, ...]) -> Optional[str]:
    """"F" or "E" if the path is a legal context of that sort, else None.

    Coercion frames may not nest directly; a context qualifies as the
    restricted sort "F" when its innermost frame is not a coercion frame.
    """
    prev = None
    node = t
    for i in path:
        cls = _frame_ok(node, i)
        if cls is None or (cls == "crc" and prev == "crc"):
            return None
        prev = cls
        node = _children(node)[i]
    return "E" if prev == "crc" else "F"


def _local_redexes(t: TermS, defs) -> Iterator[tuple[str, str, TermS]]:
    match t:
        case Op(op, Const(a), Const(b)):
            yield ("R-Op", "e", Const(delta(op, a, b)))
        case App(Abs(x, _, m), a) if is_value(a):
            yield ("R-Beta", "e", substitute(m, {x: a}))
        case App(CoercedVal(u, Fun(s, c2)), a) if is_value(a):
            yield ("R-Wrap", "e", CrcApp(App(u, CrcApp(a, s)), c2))
        case App(GlobalRef(g), a) if is_value(a) and g in defs:
            yield ("R-Unfold", "e", App(defs[g], a))
        case If(Const(True), m, _):
            yield ("R-IfTrue", "e", m)
        case If(Const(False), _, n):
            yield ("R-IfFalse", "e", n)
        case CrcApp(CrcApp(m, s), s2):
            yield ("R-MergeC", "c", CrcApp(m, compose(s, s2, FunT)))
        case CrcApp(CoercedVal(u, d), s2):
            yield ("R-MergeV", "c", CrcApp(u, compose(d, s2, FunT)))
        case CrcApp(u, s) if is_uncoerced(u):
            match s:
                case Id() | IdStar():
                    yield ("R-Id", "c", u)
                case Fail(_, p, _):
                    yield ("R-Fail", "c", Blame(p))
                case InjSeq() | Fun():
                    yield ("R-Crc", "c", CoercedVal(u, s))


def decompose_oracle(term: TermS, defs: Optional[Mapping[str, TermS]] = None) -> list[Decomposition]:
    """Every (context, redex) split licensed by the context grammar.

    On closed well-typed non-value terms exactly one decomposition exists;
    zero or several signal an interpreter or typing bug.
    """
    defs = dict(defs) if defs else {}
    out: list[Decomposition] = []

    def walk(path: tuple[int, ...]) -> None:
        sub = _subterm(term, path)
        sort = _context_sort(term, path)
        if sort is None:
            return
        if isinstance(sub, Blame) and path:
            out.append(Decomposition(path, "E-Abort", "e", sub))
        for rule, kind, red in _local_redexes(sub, defs):
            if kind == "c" and sort != "F":
                continue
            out.append(Decomposition(path, rule, kind, _replace(term, path, red)))
        for i in range(len(_children(sub))):
            if _frame_ok(sub, i) is not None:
                walk(path + (i,))

    walk(())
    return out


# ---------------------------------------------------------------------------
# Size accounting


def coercion_size(c: Coercion) -> int:
    return size(c)


def term_size(t: TermS) -> int:
    n = 1
    match t:
        case CrcApp(m, s) | CoercedVal(m, s):
            return 1 + term_size(m) + size(s)
        case _:
            for k in _children(t):
                n += term_size(k)
    return n


def max_coercion_size(t: TermS) -> int:
    best = 0
    match t:
        case CrcApp(m, s) | CoercedVal(m, s):
            best = max(size(s), max_coercion_size(m))
        case _:
            for k in _children(t):
                best = max(best, max_coercion_size(k))
    return best


def metric_f(t: TermS) -> int:
    """4*(pending + delayed coercion sizes) + 2*#pending + #delayed.

    Strictly decreases along composition steps, bounding how long
    evaluation can stay inside them.
    """
    match t:
        case CrcApp(m, s):
            return 4 * size(s) + 2 + metric_f(m)
        case CoercedVal(m, s):
            return 4 * size(s) + 1 + metric_f(m)
        case _:
            return sum(metric_f(k) for k in _children(t))
