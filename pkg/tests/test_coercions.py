"""Unit tests for canonical coercions and eager composition.

Covers every composition rule individually plus the worked examples that
exercise collapse, conflict, and arrow composition end to end.
"""

import pytest

from coercion_forge.coercions import (
    CoercionTypeError,
    CompositionTypeMismatch,
    Fail,
    Fun,
    Id,
    IdStar,
    InjSeq,
    ProjSeq,
    check_crc,
    compose,
    crc_source,
    crc_target,
    is_canonical,
    mk_fun,
    size,
)
from coercion_forge.types import BOOL, DYN, INT, Fun2T, FunT


def inj(g):
    """Bare injection G! in canonical form: id_G ; G!."""
    return InjSeq(Id(g), g)


def proj(g, label="p"):
    """Bare projection G?^p in canonical form: G?^p ; id_G."""
    return ProjSeq(g, label, Id(g))


STAR_FUN = FunT(DYN, DYN)


class TestWorkedExamples:
    """The five composition walkthroughs, one assertion each."""

    def test_injection_meets_matching_projection(self):
        assert compose(inj(BOOL), proj(BOOL), FunT) == Id(BOOL)

    def test_injection_meets_clashing_projection(self):
        got = compose(inj(STAR_FUN), proj(INT), FunT)
        assert got == Fail(STAR_FUN, "p", INT)

    def test_arrow_composition(self):
        left = Fun(proj(INT), inj(BOOL))
        right = Fun(inj(INT), IdStar())
        assert compose(left, right, FunT) == Fun(Id(INT), inj(BOOL))

    def test_projection_then_injection_stays_pending(self):
        got = compose(proj(INT), inj(INT), FunT)
        assert got == ProjSeq(INT, "p", inj(INT))

    def test_pending_pair_simplifies_under_injection(self):
        pending = ProjSeq(INT, "p", inj(INT))
        assert compose(inj(INT), pending, FunT) == inj(INT)


class TestCompositionRules:
    """One case per rule of the composition function."""

    def test_identity_at_dyn_on_the_left(self):
        assert compose(IdStar(), proj(INT), FunT) == proj(INT)

    def test_projection_on_the_left_recurses(self):
        left = ProjSeq(INT, "p", inj(INT))
        got = compose(left, proj(INT, "q"), FunT)
        assert got == proj(INT, "p")

    def test_injection_absorbs_identity_at_dyn(self):
        assert compose(inj(BOOL), IdStar(), FunT) == inj(BOOL)

    def test_collapse_on_matching_tags(self):
        assert compose(inj(INT), proj(INT, "q"), FunT) == Id(INT)

    def test_failure_on_the_left_wins(self):
        failure = Fail(INT, "p", BOOL)
        assert compose(failure, proj(BOOL), FunT) == failure

    def test_conflict_on_distinct_tags(self):
        got = compose(inj(BOOL), proj(INT, "q"), FunT)
        assert got == Fail(BOOL, "q", INT)

    def test_failure_on_the_right_wins(self):
        failure = Fail(INT, "p", BOOL)
        assert compose(Id(INT), failure, FunT) == failure

    def test_injection_on_the_right_recurses(self):
        assert compose(Id(INT), inj(INT), FunT) == inj(INT)

    def test_identity_on_the_left_vanishes(self):
        arrow = Fun(proj(INT), inj(BOOL))
        assert compose(Id(FunT(INT, BOOL)), arrow, FunT) == arrow

    def test_identity_on_the_right_vanishes(self):
        arrow = Fun(inj(INT), proj(INT))
        assert compose(arrow, Id(FunT(INT, INT)), FunT) == arrow

    def test_arrow_composition_collapses_to_identity(self):
        left = Fun(proj(INT), inj(BOOL))
        right = Fun(inj(INT), ProjSeq(BOOL, "q", Id(BOOL)))
        assert compose(left, right, FunT) == Id(FunT(INT, BOOL))
        assert compose(left, right, Fun2T) == Id(Fun2T(INT, BOOL))

    def test_ill_typed_pair_is_rejected(self):
        with pytest.raises(CompositionTypeMismatch):
            compose(inj(INT), Id(INT), FunT)
        with pytest.raises(CompositionTypeMismatch):
            compose(Id(INT), IdStar(), FunT)


class TestShapes:
    def test_sizes(self):
        assert size(IdStar()) == 1
        assert size(inj(INT)) == 2
        assert size(ProjSeq(INT, "p", inj(INT))) == 3
        assert size(Fun(proj(INT), inj(BOOL))) == 5
        assert size(Fail(INT, "p", BOOL)) == 1

    def test_identity_at_dyn_is_not_spelled_id(self):
        with pytest.raises(ValueError):
            Id(DYN)

    def test_failure_tags_must_differ(self):
        with pytest.raises(ValueError):
            Fail(INT, "p", INT)

    def test_canonical_positives(self):
        for c in (IdStar(), Id(INT), inj(INT), proj(BOOL),
                  ProjSeq(INT, "p", inj(INT)), Fun(proj(INT), inj(BOOL)),
                  Fail(INT, "p", BOOL)):
            assert is_canonical(c, FunT), c

    def test_canonical_negatives(self):
        assert not is_canonical(InjSeq(IdStar(), INT), FunT)
        assert not is_canonical(Fun(Id(INT), Id(BOOL)), FunT)
        assert not is_canonical(InjSeq(inj(INT), INT), FunT)

    def test_mk_fun_collapses_double_identity(self):
        assert mk_fun(Id(INT), Id(BOOL), FunT) == Id(FunT(INT, BOOL))
        assert mk_fun(Id(INT), inj(BOOL), FunT) == Fun(Id(INT), inj(BOOL))


class TestTyping:
    def test_endpoints(self):
        c = ProjSeq(INT, "p", inj(INT))
        assert crc_source(c, FunT) == DYN
        assert crc_target(c, FunT) == DYN
        arrow = Fun(proj(INT), inj(BOOL))
        assert crc_source(arrow, FunT) == FunT(INT, BOOL)
        assert crc_target(arrow, FunT) == FunT(DYN, DYN)

    def test_check_accepts_well_typed(self):
        assert check_crc(inj(INT), INT, FunT) == DYN
        assert check_crc(proj(BOOL), DYN, FunT) == BOOL

    def test_check_rejects_wrong_source(self):
        with pytest.raises(CoercionTypeError):
            check_crc(inj(INT), BOOL, FunT)
        with pytest.raises(CoercionTypeError):
            check_crc(proj(BOOL), INT, FunT)
