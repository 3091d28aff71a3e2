import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from qdet import expr as X
from qdet.generators import gen_matmul
from qdet.qterm import (DeterminantParseError, DeterminantTooLarge, GuardedPair, QDeterminant, QTerm,
                        Undetermined, classify, expression_list, expression_set,
                        outputs_agree, parse_qdet, qdet_value, serialize_qdet, single_pair,
                        written_size)

from conftest import built, gj_inputs, grid, scalar_inputs

b1, b2 = X.var('b1'), X.var('b2')


def simple():
    return QDeterminant({'y': QTerm.conditional([(X.binary('gt', b1, X.const(0)), b2),
                                                 (X.binary('le', b1, X.const(0)), -b2)])})


def test_first_true_guard_wins():
    assert qdet_value(simple(), {'b1': 1, 'b2': 7}) == {'y': 7}
    assert qdet_value(simple(), {'b1': -1, 'b2': 7}) == {'y': -7}


def test_lowest_index_breaks_ties():
    g = X.binary('gt', b1, X.const(0))
    q = QDeterminant({'y': QTerm.conditional([(g, b2), (g, b2 + 1)])})
    assert qdet_value(q, {'b1': 1, 'b2': 3}) == {'y': 3}


def test_no_true_guard_is_undetermined():
    q = QDeterminant({'y': QTerm.truncated([(X.binary('gt', b1, X.const(0)), b2)], 1)})
    assert isinstance(qdet_value(q, {'b1': -1, 'b2': 7})['y'], Undetermined)


def test_guard_errors_become_causes():
    bad = X.binary('gt', b1 / (b2 - b2), X.const(0))
    q = QDeterminant({'y': QTerm.conditional([(bad, b2)])})
    v = qdet_value(q, {'b1': 1, 'b2': 2})['y']
    assert isinstance(v, Undetermined) and v.causes


def test_selected_value_error_propagates():
    q = QDeterminant({'y': QTerm.conditional([(X.binary('gt', b1, X.const(0)), b1 / (b2 - b2))])})
    with pytest.raises(X.DivisionByZero):
        qdet_value(q, {'b1': 1, 'b2': 2})


def test_pair_kind_checks():
    with pytest.raises(TypeError):
        GuardedPair(b1, b2)
    with pytest.raises(TypeError):
        QTerm.unconditional(X.binary('lt', b1, b2))
    with pytest.raises(ValueError):
        QTerm.conditional([])


def test_outputs_must_not_be_inputs():
    with pytest.raises(ValueError):
        QDeterminant({'b1': QTerm.unconditional(b1 + b2)})


def test_classify():
    assert classify(built('scalar', 4)).U == ('S',)
    p = classify(built('gj', 2))
    assert p.C == ('X(1)', 'X(2)') and not p.U and not p.I
    p = classify(built('jacobi', 2, 3))
    assert p.I == ('X(1)', 'X(2)') and not p.U and not p.C


def test_expression_set_sizes():
    q = built('gj', 2)
    assert len(expression_list(q)) == 8
    assert len(expression_set(q)) < 8
    assert expression_set(q) == expression_set(q)
    g = grid(2, 2, 2)
    assert len(expression_set(g)) == 2 + 8


def test_unconditional_line_format():
    q = QDeterminant({'y': QTerm.unconditional(b1 + b2)})
    text = serialize_qdet(q)
    assert text == '#iterations 0\ny =   ; {"op":"add","fO":"b1","sO":"b2"}\n'
    assert parse_qdet(text).outputs['y'].expr is b1 + b2


def test_round_trip_of_generated_determinants():
    for q in (built('scalar', 5), built('gj', 3), built('seidel', 2, 3),
              gen_matmul(2, 3, 2, True), grid(2, 3, 2)):
        text = serialize_qdet(q)
        back = parse_qdet(text)
        assert back.outputs == q.outputs
        assert back.params == q.params and back.iterations == q.iterations
        assert serialize_qdet(back) == text


def _json_nodes(doc):
    if isinstance(doc, dict):
        return 1 + sum(_json_nodes(doc[k]) for k in ('fO', 'sO', 'od') if k in doc)
    return 1


def test_written_size_counts_what_the_file_spells_out():
    for q in (built('scalar', 5), built('gj', 2), grid(2, 2, 2)):
        total = 0
        for line in serialize_qdet(q).splitlines()[len(q.params) + 1:]:
            guard, value = line.split(' = ', 1)[1].split(' ; ')
            total += _json_nodes(json.loads(value))
            if guard.strip():
                total += _json_nodes(json.loads(guard))
        assert written_size(q) == total
    shared = b1 + b2
    assert written_size(QDeterminant({'y': QTerm.unconditional(shared * shared)})) == 7


def test_refuses_to_write_huge_files():
    q = grid(2, 2, 2)
    with pytest.raises(DeterminantTooLarge) as exc:
        serialize_qdet(q, max_nodes=100)
    assert exc.value.nodes == written_size(q) > 100
    assert serialize_qdet(q, max_nodes=None) == serialize_qdet(q)


def test_parse_errors_name_the_line():
    with pytest.raises(DeterminantParseError) as exc:
        parse_qdet('#iterations 0\ny = {"op":"add","fO":"b1","sO":"b2"}\n')
    assert exc.value.line == 2
    with pytest.raises(DeterminantParseError) as exc:
        parse_qdet('#frob\n')
    assert exc.value.line == 1
    with pytest.raises(DeterminantParseError) as exc:
        parse_qdet('#iterations 0\ny =   ; {"op":"add","fO":"b1"}\n')
    assert exc.value.line == 2


def test_single_pair_matches_whole_term_when_its_guard_holds():
    q = built('gj', 2)
    interp, _, _ = gj_inputs(random.Random(3), 2)
    full = qdet_value(q, interp)
    hits = []
    for j in range(2):
        one = single_pair(q, j)
        v = qdet_value(one, interp)
        if not any(isinstance(x, Undetermined) for x in v.values()):
            hits.append(v)
    assert len(hits) == 1 and outputs_agree(hits[0], full)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_pivot_guards_are_exclusive(seed):
    for n in (2, 3):
        q = built('gj', n)
        interp, _, _ = gj_inputs(random.Random(seed), n)
        term = q.outputs['X(1)']
        true = [j for j, p in enumerate(term.pairs)
                if _safe(p.guard, interp) is True]
        assert len(true) == 1


def _safe(e, interp):
    try:
        return X.evaluate(e, interp)
    except X.ExprError:
        return None


@given(st.permutations(['x', 'y', 'z']), st.integers(0, 10 ** 6))
def test_output_order_does_not_matter(order, seed):
    terms = {'x': QTerm.unconditional(b1 * b2), 'y': QTerm.unconditional(b1 - b2),
             'z': QTerm.conditional([(X.binary('lt', b1, b2), b1)])}
    rng = random.Random(seed)
    interp = {'b1': rng.uniform(-1, 1), 'b2': rng.uniform(-1, 1)}
    a = qdet_value(QDeterminant(terms), interp)
    c = qdet_value(QDeterminant({k: terms[k] for k in order}), interp)
    assert a == c


def test_classify_partitions_outputs():
    for q in (built('scalar', 3), built('gj', 3), built('jacobi', 3, 2), grid(2, 2, 1)):
        p = classify(q)
        assert len(p.U) + len(p.C) + len(p.I) == len(q.outputs)
        assert not (set(p.U) & set(p.C) or set(p.C) & set(p.I) or set(p.U) & set(p.I))


def test_scalar_values():
    interp = scalar_inputs(random.Random(1), 4)
    got = qdet_value(built('scalar', 4), interp)['S']
    want = sum(interp[f'A1({i})'] * interp[f'A2({i})'] for i in range(1, 5))
    assert abs(got - want) < 1e-12
