"""The continuation-coercion calculus.

Functions take a value plus the coercion that the caller would otherwise
apply to the result; coercions are first-class terms, composed by an
object-level operator.  Evaluation contexts are the ordinary left-to-right
call-by-value ones, so unlike the source calculus no context restriction is
needed: composition steps can fire anywhere.
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
    check_crc,
    compose,
    crc_source,
    crc_target,
    is_delayed,
    size,
)
from .types import (
    ANY,
    BOOL,
    INT,
    AnyT,
    CrcT,
    Fun2T,
    TyVar,
    Type,
    matches,
    merge_types,
    occurs,
)
from .lam_s import OPS, TypeCheckError, const_type, delta, fresh_name


@dataclass(frozen=True)
class Const:
    val: object


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs2:
    """Two-argument abstraction: a value and the continuation coercion."""

    var: str
    var_ty: Type
    kvar: str
    k_src: Type  # the continuation converts from this type to the answer type
    body: TermX


@dataclass(frozen=True)
class Op:
    op: str
    left: TermX
    right: TermX


@dataclass(frozen=True)
class App2:
    fun: TermX
    arg: TermX
    cont: TermX


@dataclass(frozen=True)
class Let:
    var: str
    bound: TermX
    body: TermX


@dataclass(frozen=True)
class Compose:
    left: TermX
    right: TermX


@dataclass(frozen=True)
class CrcApp:
    subject: TermX
    crc: TermX  # a general term of coercion type


@dataclass(frozen=True)
class CoercedVal:
    subject: TermX
    crc: Coercion


@dataclass(frozen=True)
class CrcLit:
    crc: Coercion


@dataclass(frozen=True)
class Blame:
    label: str


@dataclass(frozen=True)
class If:
    cond: TermX
    then: TermX
    els: TermX


@dataclass(frozen=True)
class GlobalRef:
    name: str


TermX = Union[
    Const, Var, Abs2, Op, App2, Let, Compose, CrcApp, CoercedVal, CrcLit, Blame, If, GlobalRef
]

TRUE = Const(True)
FALSE = Const(False)


_UNCOERCED_CLASSES = frozenset((Const, Abs2, CrcLit, GlobalRef))
_VALUE_CLASSES = frozenset((Const, Abs2, CrcLit, GlobalRef, Var, CoercedVal))


def is_uncoerced(t: TermX) -> bool:
    return t.__class__ in _UNCOERCED_CLASSES


def is_value(t: TermX) -> bool:
    return t.__class__ in _VALUE_CLASSES


# ---------------------------------------------------------------------------
# Typing


class EscapedTyVar(TypeCheckError):
    """A function body's answer type leaked its rigid type variable."""


@dataclass(frozen=True)
class TypedX:
    term: TermX
    ty: Type
    children: tuple[TypedX, ...] = ()


@dataclass(frozen=True)
class DefX:
    name: str
    ty: Fun2T
    fun: Abs2


@dataclass(frozen=True)
class ProgramX:
    defs: tuple[DefX, ...]
    main: TermX

    def def_terms(self) -> dict[str, TermX]:
        return {d.name: d.fun for d in self.defs}

    def def_types(self) -> dict[str, Type]:
        return {d.name: d.ty for d in self.defs}


def _max_uid(t: TermX) -> int:
    """Largest rigid-variable id mentioned in annotations, -1 if none."""

    def ty_uid(a: Type) -> int:
        match a:
            case TyVar(u):
                return u
            case Fun2T(x, y) | CrcT(x, y):
                return max(ty_uid(x), ty_uid(y))
            case _:
                return -1

    best = -1
    match t:
        case Abs2(_, a, _, b, m):
            best = max(ty_uid(a), ty_uid(b), _max_uid(m))
        case Op(_, l, r) | Compose(l, r):
            best = max(_max_uid(l), _max_uid(r))
        case App2(f, a, k):
            best = max(_max_uid(f), _max_uid(a), _max_uid(k))
        case Let(_, m, n):
            best = max(_max_uid(m), _max_uid(n))
        case CrcApp(m, c):
            best = max(_max_uid(m), _max_uid(c))
        case CoercedVal(m, _):
            best = _max_uid(m)
        case If(c, m, n):
            best = max(_max_uid(c), _max_uid(m), _max_uid(n))
        case _:
            pass
    return best


def typecheck(
    term: TermX,
    env: Optional[Mapping[str, Type]] = None,
    defs: Optional[Mapping[str, Type]] = None,
    expected: Optional[Type] = None,
) -> TypedX:
    env = dict(env) if env else {}
    defs = dict(defs) if defs else {}
    counter = [_max_uid(term) + 1]
    return _tc(term, env, defs, expected, counter)


def _done(term: TermX, ty: Type, expected: Optional[Type], children) -> TypedX:
    if expected is not None:
        if not matches(ty, expected):
            raise TypeCheckError(f"expected {expected!r}, found {ty!r}")
        ty = merge_types(ty, expected)
    return TypedX(term, ty, tuple(children))


def _as_crc_type(ty: Type, what: str) -> CrcT:
    if isinstance(ty, AnyT):
        return CrcT(ANY, ANY)
    if not isinstance(ty, CrcT):
        raise TypeCheckError(f"{what} must have a coercion type, found {ty!r}")
    return ty


def _tc(term: TermX, env, defs, expected: Optional[Type], counter) -> TypedX:
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
        case Abs2(x, a, kv, b, m):
            if isinstance(expected, Fun2T):
                if not (matches(expected.arg, a) and matches(expected.res, b)):
                    raise TypeCheckError(
                        f"function annotated {a!r}/{b!r}, expected {expected!r}"
                    )
            x_var = TyVar(counter[0])
            counter[0] += 1
            body = _tc(m, {**env, x: a, kv: CrcT(b, x_var)}, defs, None, counter)
            if not (isinstance(body.ty, AnyT) or body.ty == x_var):
                if occurs(x_var, body.ty):
                    raise EscapedTyVar(
                        f"answer type {body.ty!r} leaks the rigid variable {x_var!r}"
                    )
                raise TypeCheckError(
                    f"body must produce the continuation's answer type, found {body.ty!r}"
                )
            return _done(term, Fun2T(a, b), expected, (body,))
        case Op(op, l, r):
            if op not in OPS:
                raise TypeCheckError(f"unknown operator {op}")
            t1, t2, res = OPS[op]
            lt = _tc(l, env, defs, t1, counter)
            rt = _tc(r, env, defs, t2, counter)
            return _done(term, res, expected, (lt, rt))
        case App2(f, a, k):
            if isinstance(f, Blame):
                at = _tc(a, env, defs, None, counter)
                kt = _tc(k, env, defs, None, counter)
                kty = _as_crc_type(kt.ty, "continuation argument")
                ft = _tc(f, env, defs, Fun2T(at.ty, kty.src), counter)
                return _done(term, kty.tgt, expected, (ft, at, kt))
            ft = _tc(f, env, defs, None, counter)
            fty = ft.ty
            if isinstance(fty, AnyT):
                fty = Fun2T(ANY, ANY)
            if not isinstance(fty, Fun2T):
                raise TypeCheckError(f"applied non-function of type {ft.ty!r}")
            at = _tc(a, env, defs, fty.arg, counter)
            kt = _tc(k, env, defs, CrcT(fty.res, ANY), counter)
            kty = _as_crc_type(kt.ty, "continuation argument")
            return _done(term, kty.tgt, expected, (ft, at, kt))
        case Let(x, m, n):
            mt = _tc(m, env, defs, None, counter)
            nt = _tc(n, {**env, x: mt.ty}, defs, expected, counter)
            return _done(term, nt.ty, expected, (mt, nt))
        case Compose(l, r):
            lt = _tc(l, env, defs, None, counter)
            lty = _as_crc_type(lt.ty, "composition operand")
            rt = _tc(r, env, defs, CrcT(lty.tgt, ANY), counter)
            rty = _as_crc_type(rt.ty, "composition operand")
            return _done(term, CrcT(lty.src, rty.tgt), expected, (lt, rt))
        case CrcApp(m, c):
            mt = _tc(m, env, defs, None, counter)
            ct = _tc(c, env, defs, CrcT(mt.ty, ANY), counter)
            cty = _as_crc_type(ct.ty, "applied coercion")
            return _done(term, cty.tgt, expected, (mt, ct))
        case CoercedVal(u, d):
            if not is_uncoerced(u):
                raise TypeCheckError("coerced-value subject must be an uncoerced value")
            if not is_delayed(d):
                raise TypeCheckError("coerced values carry injections or arrows only")
            sub = _tc(u, env, defs, None, counter)
            try:
                tgt = check_crc(d, sub.ty, Fun2T)
            except CoercionTypeError as e:
                raise TypeCheckError(str(e)) from None
            return _done(term, tgt, expected, (sub,))
        case CrcLit(c):
            src = crc_source(c, Fun2T)
            if isinstance(expected, CrcT) and isinstance(src, AnyT):
                src = expected.src
            try:
                tgt = check_crc(c, src, Fun2T)
            except CoercionTypeError as e:
                raise TypeCheckError(str(e)) from None
            return _done(term, CrcT(src, tgt), expected, ())
        case Blame():
            return _done(term, ANY if expected is None else expected, expected, ())
        case If(c, m, n):
            ct = _tc(c, env, defs, BOOL, counter)
            mt = _tc(m, env, defs, expected, counter)
            nt = _tc(n, env, defs, expected, counter)
            if not matches(mt.ty, nt.ty):
                raise TypeCheckError(f"branch types {mt.ty!r} and {nt.ty!r} differ")
            return _done(term, merge_types(mt.ty, nt.ty), expected, (ct, mt, nt))
    raise AssertionError(term)


def typecheck_program(p: ProgramX) -> TypedX:
    sigs = p.def_types()
    for d in p.defs:
        if not isinstance(d.ty, Fun2T):
            raise TypeCheckError(f"definition {d.name} needs a function signature")
        typecheck(d.fun, {}, sigs, d.ty)
    return typecheck(p.main, {}, sigs, None)


# ---------------------------------------------------------------------------
# Substitution


def free_vars(t: TermX) -> frozenset[str]:
    match t:
        case Var(x):
            return frozenset((x,))
        case Abs2(x, _, kv, _, m):
            return free_vars(m) - {x, kv}
        case Op(_, l, r) | Compose(l, r):
            return free_vars(l) | free_vars(r)
        case App2(f, a, k):
            return free_vars(f) | free_vars(a) | free_vars(k)
        case Let(x, m, n):
            return free_vars(m) | (free_vars(n) - {x})
        case CrcApp(m, c):
            return free_vars(m) | free_vars(c)
        case CoercedVal(m, _):
            return free_vars(m)
        case If(c, m, n):
            return free_vars(c) | free_vars(m) | free_vars(n)
        case _:
            return frozenset()


def substitute(t: TermX, sub: Mapping[str, TermX]) -> TermX:
    if not sub:
        return t
    match t:
        case Var(x):
            return sub.get(x, t)
        case Abs2(x, a, kv, b, m):
            inner = {k: v for k, v in sub.items() if k not in (x, kv)}
            if not inner:
                return t
            clash = frozenset().union(*(free_vars(v) for v in inner.values()))
            ren: dict[str, TermX] = {}
            avoid = clash | free_vars(m) | set(inner)
            if x in clash:
                x2 = fresh_name(x, avoid)
                ren[x] = Var(x2)
                avoid |= {x2}
                x = x2
            if kv in clash:
                k2 = fresh_name(kv, avoid)
                ren[kv] = Var(k2)
                kv = k2
            if ren:
                m = substitute(m, ren)
            return Abs2(x, a, kv, b, substitute(m, inner))
        case Let(x, m, n):
            m2 = substitute(m, sub)
            inner = {k: v for k, v in sub.items() if k != x}
            if not inner:
                return Let(x, m2, n)
            clash = frozenset().union(*(free_vars(v) for v in inner.values()))
            if x in clash:
                x2 = fresh_name(x, clash | free_vars(n) | set(inner))
                n = substitute(n, {x: Var(x2)})
                x = x2
            return Let(x, m2, substitute(n, inner))
        case Op(op, l, r):
            return Op(op, substitute(l, sub), substitute(r, sub))
        case App2(f, a, k):
            return App2(substitute(f, sub), substitute(a, sub), substitute(k, sub))
        case Compose(l, r):
            return Compose(substitute(l, sub), substitute(r, sub))
        case CrcApp(m, c):
            return CrcApp(substitute(m, sub), substitute(c, sub))
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
    kind: str
    rule: str
    term: TermX


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
    pass


def step(term: TermX, defs: Optional[Mapping[str, TermX]] = None) -> StepResult:
    if is_value(term):
        return IS_VALUE
    if isinstance(term, Blame):
        return IS_BLAME
    r = _find(term, defs or {})
    if r is None:
        raise StuckTerm(repr(term))
    return r


def _abort(t: TermX) -> Optional[Stepped]:
    if isinstance(t, Blame):
        return Stepped("e", "E-Abort", t)
    return None


def _descend(t: TermX, defs, rebuild) -> Optional[Stepped]:
    r = _abort(t) or _find(t, defs)
    if r is None or r.rule == "E-Abort":
        return r
    return Stepped(r.kind, r.rule, rebuild(r.term))


def _find(t: TermX, defs) -> Optional[Stepped]:
    match t:
        case Op(op, l, r):
            if not is_value(l):
                return _descend(l, defs, lambda n: Op(op, n, r))
            if not is_value(r):
                return _descend(r, defs, lambda n: Op(op, l, n))
            if isinstance(l, Const) and isinstance(r, Const):
                return Stepped("e", "R-Op", Const(delta(op, l.val, r.val)))
            return None
        case App2(f, a, k):
            if not is_value(f):
                return _descend(f, defs, lambda n: App2(n, a, k))
            if not is_value(a):
                return _descend(a, defs, lambda n: App2(f, n, k))
            if not is_value(k):
                return _descend(k, defs, lambda n: App2(f, a, n))
            match f:
                case Abs2(x, _, kv, _, m):
                    return Stepped("e", "R-Beta", substitute(m, {x: a, kv: k}))
                case CoercedVal(u, Fun(s, c2)):
                    kn = fresh_name("k", free_vars(u) | free_vars(a) | free_vars(k))
                    wrapped = Let(
                        kn,
                        Compose(CrcLit(c2), k),
                        App2(u, CrcApp(a, CrcLit(s)), Var(kn)),
                    )
                    return Stepped("e", "R-Wrap", wrapped)
                case GlobalRef(g) if g in defs:
                    return Stepped("e", "R-Unfold", App2(defs[g], a, k))
            return None
        case Let(x, m, n):
            if not is_value(m):
                return _descend(m, defs, lambda v: Let(x, v, n))
            return Stepped("c", "R-Let", substitute(n, {x: m}))
        case Compose(l, r):
            if not is_value(l):
                return _descend(l, defs, lambda n: Compose(n, r))
            if not is_value(r):
                return _descend(r, defs, lambda n: Compose(l, n))
            if isinstance(l, CrcLit) and isinstance(r, CrcLit):
                return Stepped("c", "R-Cmp", CrcLit(compose(l.crc, r.crc, Fun2T)))
            return None
        case CrcApp(m, c):
            if not is_value(m):
                return _descend(m, defs, lambda n: CrcApp(n, c))
            if not is_value(c):
                return _descend(c, defs, lambda n: CrcApp(m, n))
            if isinstance(m, CoercedVal) and isinstance(c, CrcLit):
                return Stepped("c", "R-MergeV", CrcApp(m.subject, Compose(CrcLit(m.crc), c)))
            if is_uncoerced(m) and isinstance(c, CrcLit):
                match c.crc:
                    case Id() | IdStar():
                        return Stepped("c", "R-Id", m)
                    case Fail(_, p, _):
                        return Stepped("c", "R-Fail", Blame(p))
                    case InjSeq() | Fun():
                        return Stepped("c", "R-Crc", CoercedVal(m, c.crc))
            return None
        case If(c, m, n):
            if not is_value(c):
                return _descend(c, defs, lambda x: If(x, m, n))
            if c == TRUE:
                return Stepped("e", "R-IfTrue", m)
            if c == FALSE:
                return Stepped("e", "R-IfFalse", n)
            return None
    return None


@dataclass(frozen=True)
class EvalOutcome:
    kind: str
    term: TermX
    steps: int


DEFAULT_FUEL = 10**6


def evaluate(
    term: TermX,
    defs: Optional[Mapping[str, TermX]] = None,
    fuel: int = DEFAULT_FUEL,
    on_step=None,
    detect_cycles: bool = False,
) -> EvalOutcome:
    defs = dict(defs) if defs else {}
    seen: set[TermX] = set()
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
    p: ProgramX, fuel: int = DEFAULT_FUEL, on_step=None, detect_cycles: bool = False
) -> EvalOutcome:
    return evaluate(p.main, p.def_terms(), fuel, on_step, detect_cycles)


# ---------------------------------------------------------------------------
# Decomposition oracle


@dataclass(frozen=True)
class Decomposition:
    path: tuple[int, ...]
    rule: str
    kind: str
    term: TermX


def _children(t: TermX) -> tuple[TermX, ...]:
    match t:
        case Op(_, l, r) | Compose(l, r):
            return (l, r)
        case App2(f, a, k):
            return (f, a, k)
        case Let(_, m, n):
            return (m, n)
        case CrcApp(m, c):
            return (m, c)
        case CoercedVal(m, _):
            return (m,)
        case If(c, m, n):
            return (c, m, n)
        case Abs2(_, _, _, _, m):
            return (m,)
        case _:
            return ()


def _subterm(t: TermX, path: tuple[int, ...]) -> TermX:
    for i in path:
        t = _children(t)[i]
    return t


def _replace(t: TermX, path: tuple[int, ...], new: TermX) -> TermX:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = list(_children(t))
    kids[i] = _replace(kids[i], rest, new)
    match t:
        case Op(op, _, _):
            return Op(op, *kids)
        case Compose(_, _):
            return Compose(*kids)
        case App2(_, _, _):
            return App2(*kids)
        case Let(x, _, _):
            return Let(x, *kids)
        case CrcApp(_, _):
            return CrcApp(*kids)
        case CoercedVal(_, d):
            return CoercedVal(kids[0], d)
        case If(_, _, _):
            return If(*kids)
        case Abs2(x, a, kv, b, _):
            return Abs2(x, a, kv, b, kids[0])
    raise AssertionError(t)


def _frame_ok(t: TermX, i: int) -> bool:
    match t:
        case Op(_, l, _) | Compose(l, _):
            return i == 0 or is_value(l)
        case App2(f, a, _):
            if i == 0:
                return True
            if i == 1:
                return is_value(f)
            return is_value(f) and is_value(a)
        case Let(_, _, _):
            return i == 0
        case CrcApp(m, _):
            return i == 0 or is_value(m)
        case If(_, _, _):
            return i == 0
        case _:
            return False


def _local_redexes(t: TermX, defs) -> Iterator[tuple[str, str, TermX]]:
    match t:
        case Op(op, Const(a), Const(b)):
            yield ("R-Op", "e", Const(delta(op, a, b)))
        case App2(Abs2(x, _, kv, _, m), a, k) if is_value(a) and is_value(k):
            yield ("R-Beta", "e", substitute(m, {x: a, kv: k}))
        case App2(CoercedVal(u, Fun(s, c2)), a, k) if is_value(a) and is_value(k):
            kn = fresh_name("k", free_vars(u) | free_vars(a) | free_vars(k))
            yield (
                "R-Wrap",
                "e",
                Let(kn, Compose(CrcLit(c2), k), App2(u, CrcApp(a, CrcLit(s)), Var(kn))),
            )
        case App2(GlobalRef(g), a, k) if is_value(a) and is_value(k) and g in defs:
            yield ("R-Unfold", "e", App2(defs[g], a, k))
        case Let(x, m, n) if is_value(m):
            yield ("R-Let", "c", substitute(n, {x: m}))
        case Compose(CrcLit(a), CrcLit(b)):
            yield ("R-Cmp", "c", CrcLit(compose(a, b, Fun2T)))
        case CrcApp(CoercedVal(u, d), CrcLit(c)):
            yield ("R-MergeV", "c", CrcApp(u, Compose(CrcLit(d), CrcLit(c))))
        case CrcApp(u, CrcLit(c)) if is_uncoerced(u):
            match c:
                case Id() | IdStar():
                    yield ("R-Id", "c", u)
                case Fail(_, p, _):
                    yield ("R-Fail", "c", Blame(p))
                case InjSeq() | Fun():
                    yield ("R-Crc", "c", CoercedVal(u, c))
        case If(Const(True), m, _):
            yield ("R-IfTrue", "e", m)
        case If(Const(False), _, n):
            yield ("R-IfFalse", "e", n)


def decompose_oracle(term: TermX, defs: Optional[Mapping[str, TermX]] = None) -> list[Decomposition]:
    defs = dict(defs) if defs else {}
    out: list[Decomposition] = []

    def walk(path: tuple[int, ...]) -> None:
        sub = _subterm(term, path)
        if isinstance(sub, Blame) and path:
            out.append(Decomposition(path, "E-Abort", "e", sub))
        for rule, kind, red in _local_redexes(sub, defs):
            out.append(Decomposition(path, rule, kind, _replace(term, path, red)))
        for i in range(len(_children(sub))):
            if _frame_ok(sub, i):
                walk(path + (i,))

    walk(())
    return out


# ---------------------------------------------------------------------------
# Size accounting (the composition metric is reported, not asserted, here)


def term_size(t: TermX) -> int:
    match t:
        case CrcLit(c):
            return size(c)
        case CoercedVal(m, d):
            return 1 + term_size(m) + size(d)
        case _:
            return 1 + sum(term_size(k) for k in _children(t))


def max_coercion_size(t: TermX) -> int:
    match t:
        case CrcLit(c):
            return size(c)
        case CoercedVal(m, d):
            return max(size(d), max_coercion_size(m))
        case _:
            best = 0
            for k in _children(t):
                best = max(best, max_coercion_size(k))
            return best


def metric_f(t: TermX) -> int:
    """Shape of the source-calculus metric, for observation only."""
    match t:
        case CrcApp(m, CrcLit(c)):
            return 4 * size(c) + 2 + metric_f(m)
        case CoercedVal(m, d):
            return 4 * size(d) + 1 + metric_f(m)
        case _:
            return sum(metric_f(k) for k in _children(t))
