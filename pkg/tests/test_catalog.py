import multiprocessing
import os

import pytest
from hypothesis import given, settings, strategies as st, HealthCheck

from qdet.catalog import Catalog, DuplicateId, NotFound, StoreCorrupt
from qdet.compare import NoCommonParameters
from qdet.generators import gen_matmul
from qdet.qterm import serialize_qdet

from conftest import built


def text(n, doubling=False):
    return serialize_qdet(gen_matmul(n, n, n, doubling))


@pytest.fixture
def cat(tmp_path):
    return Catalog(tmp_path / 'store')


def test_count_follows_determinants(cat):
    a = cat.algorithm_add('matmul', 'plain triple loop')
    cat.determinant_add(a, text(2))
    cat.determinant_add(a, text(3))
    [rec] = cat.algorithm_list()
    assert rec.determinant_count == 2 and rec.name == 'matmul'


def test_download_is_verbatim(cat):
    a = cat.algorithm_add('x')
    raw = text(2).replace('\n', '\r\n')  # odd line endings survive too
    r = cat.determinant_add(a, raw)
    assert cat.determinant_download(r.id) == raw


def test_insert_time_characteristics(cat):
    a = cat.algorithm_add('x')
    r = cat.determinant_add(a, serialize_qdet(built('scalar', 8)))
    assert (r.D, r.P, r.params, r.iterations) == (4, 8, {'n': 8}, 0)
    r = cat.determinant_add(a, serialize_qdet(built('jacobi', 2, 2)))
    assert r.iterations == 2


def test_no_parameters_sentinel(cat):
    from qdet import expr as X
    from qdet.qterm import QDeterminant, QTerm
    a = cat.algorithm_add('x')
    q = QDeterminant({'y': QTerm.unconditional(X.var('b1') + X.var('b2'))})
    assert cat.determinant_add(a, serialize_qdet(q)).params == 0


def test_cascade_delete(cat):
    a = cat.algorithm_add('x')
    ids = [cat.determinant_add(a, text(n)).id for n in (2, 3)]
    cat.algorithm_remove(a)
    assert not any((cat.dets / f'{i}{s}').exists() for i in ids for s in ('.qd', '.json'))
    assert cat.algorithm_list() == []
    with pytest.raises(NotFound):
        cat.determinant_download(ids[0])


def test_update_and_errors(cat):
    a = cat.algorithm_add('x', id='alg')
    with pytest.raises(DuplicateId):
        cat.algorithm_add('y', id='alg')
    assert cat.algorithm_update(a, description='new').description == 'new'
    for bad in (lambda: cat.algorithm_update('nope', name='z'),
                lambda: cat.algorithm_remove('nope'),
                lambda: cat.determinant_add('nope', text(2)),
                lambda: cat.determinant_remove('nope.1')):
        with pytest.raises(NotFound):
            bad()


def test_generated_ids_do_not_collide(cat):
    assert cat.algorithm_add('Gauss Jordan') == 'Gauss-Jordan'
    assert cat.algorithm_add('Gauss Jordan') == 'Gauss-Jordan-2'


def test_remove_one_determinant(cat):
    a = cat.algorithm_add('x')
    r1 = cat.determinant_add(a, text(2))
    r2 = cat.determinant_add(a, text(3))
    cat.determinant_remove(r1.id)
    assert [r.id for r in cat.determinant_list(a)] == [r2.id]
    # ids are never reused
    assert cat.determinant_add(a, text(4)).id not in (r1.id, r2.id)


def test_compare_via_catalog(cat):
    fast = cat.algorithm_add('fast')
    slow = cat.algorithm_add('slow')
    for n in (2, 4, 8):
        cat.determinant_add(fast, text(n, True), doubling=False)
        cat.determinant_add(slow, text(n, False), doubling=False)
    r = cat.compare_via_catalog(fast, slow)
    assert r.dP == 0 and r.dD < 0
    other = cat.algorithm_add('other')
    cat.determinant_add(other, text(3), doubling=False)
    with pytest.raises(NoCommonParameters):
        cat.compare_via_catalog(fast, other)


def test_corrupt_index(cat):
    (cat.root / 'algorithms.json').write_text('{not json')
    with pytest.raises(StoreCorrupt):
        cat.algorithm_list()


def test_missing_metadata(cat):
    a = cat.algorithm_add('x')
    r = cat.determinant_add(a, text(2))
    (cat.dets / f'{r.id}.json').unlink()
    with pytest.raises(StoreCorrupt):
        cat.determinant_list(a)


def test_store_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('QDET_HOME', str(tmp_path / 'env'))
    c = Catalog()
    c.algorithm_add('x')
    assert (tmp_path / 'env' / 'algorithms.json').exists()


def _writer(root, k):
    c = Catalog(root)
    for i in range(5):
        c.algorithm_add(f'w{k}-{i}')


def test_concurrent_writers(tmp_path):
    root = str(tmp_path / 'store')
    Catalog(root)
    ctx = multiprocessing.get_context('fork')
    procs = [ctx.Process(target=_writer, args=(root, k)) for k in range(4)]
    for p in procs:
        p.start()
    for p in procs:
        p.join()
    assert len(Catalog(root).algorithm_list()) == 20


ops = st.lists(st.tuples(st.sampled_from(['add_alg', 'add_det', 'rm_alg', 'rm_det', 'upd']),
                         st.integers(0, 5)), max_size=15)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(ops)
def test_reopen_gives_identical_listings(tmp_path, seq):
    root = tmp_path / f'store-{os.urandom(4).hex()}'
    c = Catalog(root)
    for op, k in seq:
        algs = [r.id for r in c.algorithm_list()]
        dets = [r.id for r in c.determinant_list()]
        if op == 'add_alg':
            c.algorithm_add(f'a{k}')
        elif op == 'add_det' and algs:
            c.determinant_add(algs[k % len(algs)], text(2 + k % 2))
        elif op == 'rm_alg' and algs:
            c.algorithm_remove(algs[k % len(algs)])
        elif op == 'rm_det' and dets:
            c.determinant_remove(dets[k % len(dets)])
        elif op == 'upd' and algs:
            c.algorithm_update(algs[k % len(algs)], description=str(k))
    again = Catalog(root)
    assert again.algorithm_list() == c.algorithm_list()
    assert again.determinant_list() == c.determinant_list()
    for r in again.algorithm_list():
        assert r.determinant_count == len(again.determinant_list(r.id))
    assert again.verify() == []
    leftovers = {p.name for p in again.dets.iterdir()}
    expected = {f'{r.id}{s}' for r in again.determinant_list() for s in ('.qd', '.json')}
    assert leftovers == expected
