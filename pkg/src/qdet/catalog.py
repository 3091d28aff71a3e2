"""File-backed catalog of algorithms and their determinants.

Layout under the store root::

    algorithms.json          index of algorithm records
    determinants/<id>.qd     determinant file, stored verbatim
    determinants/<id>.json   metadata: algorithm, parameters, D, P, flags
    .lock                    writers hold this while changing anything

Every file is written to a temporary name first and renamed into place.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .analyzer import DAG, EXACT, Characteristics, analyze
from .compare import ComparisonReport, compare
from .qterm import parse_qdet

INDEX = 'algorithms.json'
SCHEMA = 1
_ID_RE = re.compile(r'[A-Za-z0-9][A-Za-z0-9_.-]*\Z')


class CatalogError(Exception):
    pass


class NotFound(CatalogError):
    def __init__(self, id_: str):
        super().__init__(f'not found: {id_}')
        self.id = id_


class DuplicateId(CatalogError):
    def __init__(self, id_: str):
        super().__init__(f'id already exists: {id_}')
        self.id = id_


class StoreCorrupt(CatalogError):
    def __init__(self, path, reason: str):
        super().__init__(f'{path}: {reason}')
        self.path = str(path)
        self.reason = reason


@dataclass(frozen=True)
class AlgorithmRecord:
    id: str
    name: str
    description: str
    determinant_count: int


@dataclass(frozen=True)
class DeterminantRecord:
    id: str
    algorithm_id: str
    params: dict | int      # 0 when the algorithm has no dimension parameters
    iterations: int
    D: int
    P: int
    sharing: str
    doubling: bool
    chain_count: str
    file: str

    def characteristics(self) -> Characteristics:
        params = tuple(sorted(self.params.items())) if self.params else ()
        return Characteristics(self.D, self.P, params, self.iterations,
                               self.sharing, self.doubling, self.chain_count)

    def to_json(self) -> dict:
        return {'id': self.id, 'algorithm_id': self.algorithm_id, 'params': self.params,
                'iterations': self.iterations, 'D': self.D, 'P': self.P,
                'sharing': self.sharing, 'doubling': self.doubling,
                'chain_count': self.chain_count, 'file': self.file}


def default_root() -> Path:
    env = os.environ.get('QDET_HOME')
    return Path(env) if env else Path.home() / '.qdet'


def _write_atomic(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _dump(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + '\n').encode()


class Catalog:
    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_root()
        self.dets = self.root / 'determinants'
        self.dets.mkdir(parents=True, exist_ok=True)
        self.lock = FileLock(str(self.root / '.lock'))

    # -- index --

    def _load(self) -> dict:
        path = self.root / INDEX
        if not path.exists():
            return {'schema': SCHEMA, 'algorithms': {}}
        try:
            doc = json.loads(path.read_text(encoding='utf-8'))
        except (ValueError, UnicodeDecodeError) as exc:
            raise StoreCorrupt(path, f'unreadable index: {exc}') from None
        if not isinstance(doc, dict) or not isinstance(doc.get('algorithms'), dict):
            raise StoreCorrupt(path, 'index lacks an "algorithms" object')
        return doc

    def _save(self, doc: dict):
        _write_atomic(self.root / INDEX, _dump(doc))

    def _alg(self, doc, alg_id):
        try:
            return doc['algorithms'][alg_id]
        except KeyError:
            raise NotFound(alg_id) from None

    def _meta(self, det_id: str) -> DeterminantRecord:
        path = self.dets / f'{det_id}.json'
        try:
            d = json.loads(path.read_text(encoding='utf-8'))
            return DeterminantRecord(**d)
        except FileNotFoundError:
            raise StoreCorrupt(path, 'metadata file missing') from None
        except (ValueError, TypeError) as exc:
            raise StoreCorrupt(path, f'bad metadata: {exc}') from None

    # -- algorithms --

    def algorithm_add(self, name: str, description: str = '', id: str | None = None) -> str:
        with self.lock:
            doc = self._load()
            if id is None:
                base = re.sub(r'[^A-Za-z0-9_.-]+', '-', name).strip('-.') or 'algorithm'
                id, k = base, 2
                while id in doc['algorithms']:
                    id, k = f'{base}-{k}', k + 1
            elif not _ID_RE.match(id):
                raise ValueError(f'bad id {id!r}')
            if id in doc['algorithms']:
                raise DuplicateId(id)
            doc['algorithms'][id] = {'name': name, 'description': description,
                                     'determinants': [], 'next': 1}
            self._save(doc)
            return id

    def algorithm_update(self, alg_id: str, name: str | None = None,
                         description: str | None = None) -> AlgorithmRecord:
        with self.lock:
            doc = self._load()
            rec = self._alg(doc, alg_id)
            if name is not None:
                rec['name'] = name
            if description is not None:
                rec['description'] = description
            self._save(doc)
        return self._record(alg_id, rec)

    @staticmethod
    def _record(alg_id, rec) -> AlgorithmRecord:
        return AlgorithmRecord(alg_id, rec['name'], rec['description'], len(rec['determinants']))

    def algorithm_list(self) -> list[AlgorithmRecord]:
        doc = self._load()
        return [self._record(k, v) for k, v in sorted(doc['algorithms'].items())]

    def algorithm_get(self, alg_id: str) -> AlgorithmRecord:
        return self._record(alg_id, self._alg(self._load(), alg_id))

    def algorithm_remove(self, alg_id: str) -> None:
        with self.lock:
            doc = self._load()
            rec = self._alg(doc, alg_id)
            del doc['algorithms'][alg_id]
            self._save(doc)
            # the index no longer names these, so a crash here leaves only orphans
            for det_id in rec['determinants']:
                for suffix in ('.qd', '.json'):
                    (self.dets / f'{det_id}{suffix}').unlink(missing_ok=True)

    # -- determinants --

    def determinant_add(self, alg_id: str, text: str, sharing: str = DAG,
                        doubling: bool = True, chain_count: str = EXACT) -> DeterminantRecord:
        q = parse_qdet(text)
        ch = analyze(q, sharing, doubling, chain_count)
        with self.lock:
            doc = self._load()
            rec = self._alg(doc, alg_id)
            det_id = f'{alg_id}.{rec["next"]}'
            meta = DeterminantRecord(det_id, alg_id, dict(q.params) or 0, q.iterations,
                                     ch.D, ch.P, sharing, doubling, chain_count, f'{det_id}.qd')
            _write_atomic(self.dets / meta.file, text.encode())
            _write_atomic(self.dets / f'{det_id}.json', _dump(meta.to_json()))
            rec['next'] += 1
            rec['determinants'].append(det_id)
            self._save(doc)
        return meta

    def determinant_list(self, alg_id: str | None = None) -> list[DeterminantRecord]:
        doc = self._load()
        ids = [alg_id] if alg_id is not None else sorted(doc['algorithms'])
        out = []
        for a in ids:
            for det_id in self._alg(doc, a)['determinants']:
                out.append(self._meta(det_id))
        return out

    def _owner(self, doc, det_id):
        for a, rec in doc['algorithms'].items():
            if det_id in rec['determinants']:
                return a, rec
        raise NotFound(det_id)

    def determinant_download(self, det_id: str) -> str:
        doc = self._load()
        self._owner(doc, det_id)
        path = self.dets / f'{det_id}.qd'
        try:
            return path.read_bytes().decode()
        except FileNotFoundError:
            raise StoreCorrupt(path, 'determinant file missing') from None

    def determinant_remove(self, det_id: str) -> None:
        with self.lock:
            doc = self._load()
            _, rec = self._owner(doc, det_id)
            rec['determinants'].remove(det_id)
            self._save(doc)
            for suffix in ('.qd', '.json'):
                (self.dets / f'{det_id}{suffix}').unlink(missing_ok=True)

    def compare_via_catalog(self, id_a: str, id_b: str) -> ComparisonReport:
        a = [r.characteristics() for r in self.determinant_list(id_a)]
        b = [r.characteristics() for r in self.determinant_list(id_b)]
        return compare(a, b)

    def verify(self) -> list[str]:
        """Re-analyse every stored determinant; returns the ids that disagree."""
        bad = []
        for r in self.determinant_list():
            q = parse_qdet(self.determinant_download(r.id))
            ch = analyze(q, r.sharing, r.doubling, r.chain_count)
            if (ch.D, ch.P) != (r.D, r.P):
                bad.append(r.id)
        return bad
