"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 file or store error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

from . import __version__
from . import expr as X
from .analyzer import (DAG, EXACT, FLOOR, TREE, Characteristics, analyze, export_schedule,
                       make_schedule, prepare, realizability, schedule_to_json)
from .builder import FULL, LAST, BuildConfig, BuildError, build_qdet
from .catalog import Catalog, CatalogError
from .compare import CompareError, compare
from .evaluator import run_flowchart, run_q_effective
from .flowchart import FlowchartError, parse_flowchart, serialize_flowchart
from .formulas import FORMULAS
from .generators import (DETERMINANT_GENERATORS, FLOWCHART_GENERATORS, GRID_BOUNDARIES)
from .qterm import (DeterminantParseError, QDeterminant, Undetermined, expression_set,
                    parse_qdet, qdet_value, serialize_qdet)

log = logging.getLogger('qdet')

USAGE, DOMAIN, STORE = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f'{self.prog}: error: {message}\n')


# -- flag helpers --

def _name_value(text: str):
    name, sep, value = text.partition('=')
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f'expected name=value, got {text!r}')
    return name.strip(), value.strip()


def _param(text: str):
    name, value = _name_value(text)
    try:
        return name, int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'parameter {name} needs an integer value') from None


_INPUT_RE = re.compile(r'\s*([A-Za-z_]\w*(?:\([^()]*\))?)\s*=\s*([^,]*?)\s*(?:,|\Z)')


def _inputs(text: str):
    """Parse "A(1,2)=3, e=0.1"; commas inside an index do not split."""
    out = []
    pos = 0
    while pos < len(text) and text[pos:].strip():
        m = _INPUT_RE.match(text, pos)
        if m is None:
            raise argparse.ArgumentTypeError(f'expected name=value at {text[pos:]!r}')
        name, value = m.group(1).replace(' ', ''), m.group(2)
        try:
            out.append((name, float(value)))
        except ValueError:
            raise argparse.ArgumentTypeError(f'input {name} needs a number') from None
        pos = m.end()
    return out


def _on_off(text: str) -> bool:
    if text not in ('on', 'off'):
        raise argparse.ArgumentTypeError('expected on or off')
    return text == 'on'


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group('global flags')
    g.add_argument('--store', help='catalog directory (default: $QDET_HOME or ~/.qdet)')
    g.add_argument('--json', action='store_true', help='wrap the output in a JSON envelope')
    g.add_argument('--doubling', type=_on_off, default=True, metavar='on|off')
    g.add_argument('--sharing', choices=(DAG, TREE), default=DAG)
    g.add_argument('--chain-count', choices=(EXACT, FLOOR), default=EXACT)
    g.add_argument('--param', type=_param, action='append', default=[], metavar='NAME=VALUE')
    g.add_argument('--iterations', type=int, metavar='N')
    g.add_argument('--input', type=_inputs, action='append', default=[], metavar='NAME=VALUE,...')
    g.add_argument('-v', '--verbose', action='store_true', help='log progress to standard error')
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    top = _Parser(prog='qdet', description='Q-determinants: build, analyse, evaluate, compare.')
    top.add_argument('--version', action='version', version=f'qdet {__version__}')
    sub = top.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def cmd(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    p = cmd('gen', 'write a built-in algorithm as a chart or a determinant file')
    p.add_argument('name', choices=sorted(FLOWCHART_GENERATORS) + sorted(DETERMINANT_GENERATORS))
    for dim in ('n', 'k', 'm', 'K', 'J', 'L'):
        p.add_argument(f'--{dim}', type=int)
    p.add_argument('--boundary', choices=GRID_BOUNDARIES, default='zero')
    p.add_argument('-o', '--output')

    p = cmd('build', 'construct a determinant from a chart')
    p.add_argument('chart')
    p.add_argument('--guard-mode', choices=(FULL, LAST))
    p.add_argument('--max-branches', type=int, default=10 ** 5)
    p.add_argument('--max-steps', type=int, default=10 ** 6)
    p.add_argument('-o', '--output')

    p = cmd('analyze', 'print height and width of a determinant')
    p.add_argument('determinant')

    p = cmd('eval', 'evaluate a chart or a determinant on concrete inputs')
    p.add_argument('file')
    p.add_argument('--mode', choices=('value', 'effective'), default='value',
                   help='for determinants: pair order, or level-by-level execution')

    p = cmd('compare', 'compare two algorithms over shared parameter values')
    p.add_argument('a', help='catalog algorithm id, or comma-separated determinant files')
    p.add_argument('b')
    p.add_argument('--metric', choices=('height', 'width', 'both'), default='both')

    p = cmd('formula', 'evaluate a closed-form characteristic')
    p.add_argument('name', choices=sorted(FORMULAS))
    p.add_argument('--n', type=int)
    p.add_argument('--kj', type=int)
    p.add_argument('--n0', type=int)
    p.add_argument('--s', type=int)

    p = cmd('schedule', 'export the level schedule of a determinant as JSON')
    p.add_argument('determinant')
    p.add_argument('-o', '--output')

    p = cmd('catalog', 'manage the algorithm catalog')
    csub = p.add_subparsers(dest='action', required=True, parser_class=_Parser)

    def act(name, help_):
        return csub.add_parser(name, parents=[common], help=help_, description=help_)

    a = act('algorithm-add', 'record a new algorithm')
    a.add_argument('--name', required=True)
    a.add_argument('--description', default='')
    a.add_argument('--id')
    a = act('algorithm-update', 'change the name or description of an algorithm')
    a.add_argument('id')
    a.add_argument('--name')
    a.add_argument('--description')
    act('algorithm-list', 'list algorithms')
    a = act('algorithm-remove', 'remove an algorithm and its determinants')
    a.add_argument('id')
    a = act('determinant-add', 'store a determinant with its height and width')
    a.add_argument('algorithm')
    a.add_argument('file')
    a = act('determinant-list', 'list stored determinants')
    a.add_argument('algorithm', nargs='?')
    a = act('determinant-download', 'write a stored determinant file')
    a.add_argument('id')
    a.add_argument('-o', '--output')
    a = act('determinant-remove', 'remove a stored determinant')
    a.add_argument('id')
    a = act('compare', 'compare two stored algorithms')
    a.add_argument('a')
    a.add_argument('b')
    a.add_argument('--metric', choices=('height', 'width', 'both'), default='both')
    return top


# -- IO --

def _read(path: str) -> str:
    if path == '-':
        return sys.stdin.read()
    return Path(path).read_bytes().decode('utf-8')


def _write(path: str | None, text: str):
    if path is None or path == '-':
        sys.stdout.write(text)
    else:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)


def _is_chart(text: str) -> bool:
    return text.lstrip().startswith('{')


def _params(args) -> dict:
    return dict(args.param)


def _interp(args) -> dict:
    return {name: v for group in args.input for name, v in group}


def _fmt(v) -> str:
    if isinstance(v, Undetermined):
        return 'undetermined'
    return X.canonical_number(v)


def _flags(args) -> dict:
    d = {}
    for k, v in sorted(vars(args).items()):
        if k in ('verbose',):
            continue
        if k == 'param':
            v = dict(v)
        elif k == 'input':
            v = [dict(g) for g in v]
        d[k] = v
    return d


# -- commands --

def _gen(args):
    name = args.name
    dims = {k: getattr(args, k) for k in ('n', 'k', 'm', 'K', 'J', 'L')
            if getattr(args, k) is not None}
    if name in ('scalar-product', 'matmul'):
        dims['doubling'] = args.doubling
    if name == 'grid-jacobi':
        dims['boundary'] = args.boundary
    gen = FLOWCHART_GENERATORS.get(name) or DETERMINANT_GENERATORS[name]
    try:
        made = gen(**dims)
    except TypeError as exc:
        raise UsageError(f'{name}: {exc}') from None
    if name in FLOWCHART_GENERATORS:
        text = serialize_flowchart(made)
    else:
        text = serialize_qdet(made)
    _write(args.output, text)
    return {'generator': name, 'arguments': dims, 'output': args.output}, None


def _build(args):
    fc = parse_flowchart(_read(args.chart))
    pnames, inputs, _ = fc.declarations()
    params = _params(args)
    missing = [p for p in pnames if p not in params]
    extra = [p for p in params if p not in pnames]
    if missing:
        raise UsageError(f'--param needed for {", ".join(missing)}')
    if extra:
        raise UsageError(f'the chart declares no parameter {", ".join(extra)}')
    if fc.has_iterations and args.iterations is None:
        raise UsageError('the chart declares iterations; --iterations is required')
    if not fc.has_iterations and args.iterations is not None:
        raise UsageError('the chart does not declare iterations')
    cfg = BuildConfig(params, args.iterations, args.guard_mode, args.max_branches, args.max_steps)
    q = build_qdet(fc, cfg)
    _write(args.output, serialize_qdet(q))
    terms = {name: len(t) for name, t in q.outputs.items()}
    return {'outputs': terms, 'output': args.output}, None


def _analyze_text(text, args) -> tuple[QDeterminant, Characteristics]:
    q = parse_qdet(text)
    return q, analyze(q, args.sharing, args.doubling, args.chain_count)


def _analyze(args):
    q, ch = _analyze_text(_read(args.determinant), args)
    res = ch.to_json()
    res['realizability'] = realizability(q)
    return res, f'D={ch.D} P={ch.P}\n'


def _eval(args):
    text = _read(args.file)
    interp = _interp(args)
    if _is_chart(text):
        fc = parse_flowchart(text)
        outs = run_flowchart(fc, _params(args), interp, args.iterations)
    else:
        q = parse_qdet(text)
        if args.mode == 'effective':
            outs = run_q_effective(q, interp, args.doubling).outputs
        else:
            outs = qdet_value(q, interp)
    lines = ''.join(f'{k} = {_fmt(v)}\n' for k, v in outs.items())
    res = {k: (None if isinstance(v, Undetermined) else v) for k, v in outs.items()}
    return {'outputs': res}, lines


def _side(side: str, args):
    paths = [s for s in side.split(',') if s]
    if paths and all(os.path.exists(p) for p in paths):
        out = []
        for p in paths:
            text = _read(p)
            if p.endswith('.json'):
                out.extend(Characteristics.from_json(d) for d in json.loads(text))
            else:
                out.append(_analyze_text(text, args)[1])
        return out
    cat = Catalog(args.store)
    return [r.characteristics() for r in cat.determinant_list(side)]


def _report(rep, metric):
    lines = []
    if metric in ('height', 'both'):
        lines.append(f'dD={rep.dD} ({rep.verdict_D})\n')
    if metric in ('width', 'both'):
        lines.append(f'dP={rep.dP} ({rep.verdict_P})\n')
    return rep.to_json(), ''.join(lines)


def _compare(args):
    return _report(compare(_side(args.a, args), _side(args.b, args)), args.metric)


def _formula(args):
    name = args.name
    f = FORMULAS[name]
    needed = {'scalar': ['n'], 'gauss-jordan-height': ['n'], 'gauss-jordan-width': ['n'],
              'grid-jacobi-height': ['kj', 'n0'], 'grid-jacobi-width': ['kj'],
              'grid-jacobi-width-pow2': ['s'], 'grid-jacobi-width-increment': ['kj']}[name]
    vals = []
    for k in needed:
        v = getattr(args, k)
        if v is None:
            raise UsageError(f'{name} needs --{k}')
        vals.append(v)
    value = f(*vals)
    if isinstance(value, tuple):
        return {'D': value[0], 'P': value[1]}, f'D={value[0]} P={value[1]}\n'
    return {'value': value}, f'{value}\n'


def _schedule(args):
    q = parse_qdet(_read(args.determinant))
    W = prepare(expression_set(q), args.doubling)
    s = make_schedule(W, args.sharing)
    if args.output:
        export_schedule(s, args.output)
        return {'height': s.height, 'width': s.width, 'output': args.output}, None
    if args.json:
        return schedule_to_json(s), None
    return None, export_schedule(s)


def _catalog(args):
    cat = Catalog(args.store)
    a = args.action
    if a == 'algorithm-add':
        alg_id = cat.algorithm_add(args.name, args.description, args.id)
        return {'id': alg_id}, f'{alg_id}\n'
    if a == 'algorithm-update':
        r = cat.algorithm_update(args.id, args.name, args.description)
        return vars(r), None
    if a == 'algorithm-list':
        rows = cat.algorithm_list()
        text = ''.join(f'{r.id}\t{r.determinant_count}\t{r.name}\t{r.description}\n' for r in rows)
        return [vars(r) for r in rows], text
    if a == 'algorithm-remove':
        cat.algorithm_remove(args.id)
        return {'removed': args.id}, None
    if a == 'determinant-add':
        r = cat.determinant_add(args.algorithm, _read(args.file), args.sharing,
                                args.doubling, args.chain_count)
        return r.to_json(), f'{r.id} D={r.D} P={r.P}\n'
    if a == 'determinant-list':
        rows = cat.determinant_list(args.algorithm)
        text = ''.join(f'{r.id}\t{json.dumps(r.params)}\t{r.iterations}\tD={r.D} P={r.P}\n'
                       for r in rows)
        return [r.to_json() for r in rows], text
    if a == 'determinant-download':
        text = cat.determinant_download(args.id)
        if args.output:
            Path(args.output).write_bytes(text.encode())
            return {'id': args.id, 'output': args.output}, None
        if args.json:
            return {'id': args.id, 'text': text}, None
        return None, text
    if a == 'determinant-remove':
        cat.determinant_remove(args.id)
        return {'removed': args.id}, None
    if a == 'compare':
        return _report(cat.compare_via_catalog(args.a, args.b), args.metric)
    raise AssertionError(a)


COMMANDS = {'gen': _gen, 'build': _build, 'analyze': _analyze, 'eval': _eval,
            'compare': _compare, 'formula': _formula, 'schedule': _schedule,
            'catalog': _catalog}


def _envelope(args, ok, result=None, error=None):
    doc = {'command': args.command, 'flags': _flags(args), 'ok': ok}
    if ok:
        doc['result'] = result
    else:
        doc['error'] = error
    sys.stdout.write(json.dumps(doc, sort_keys=True, default=str) + '\n')


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(name)s: %(message)s', stream=sys.stderr)
    try:
        result, text = COMMANDS[args.command](args)
    except UsageError as exc:
        code, msg = USAGE, str(exc)
    except (CompareError, FlowchartError, BuildError, X.ExprError,
            DeterminantParseError, ValueError) as exc:
        code, msg = DOMAIN, str(exc)
    except (CatalogError, OSError) as exc:
        code, msg = STORE, str(exc)
    else:
        if args.json:
            _envelope(args, True, result)
        elif text:
            sys.stdout.write(text)
        return 0
    print(f'qdet: {msg}', file=sys.stderr)
    if args.json:
        _envelope(args, False, error=msg)
    return code


if __name__ == '__main__':
    sys.exit(main())
