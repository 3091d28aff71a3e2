"""Signed height and width differences over shared parameter points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .analyzer import Characteristics

LESS = 'less'
EQUAL = 'equal'
GREATER = 'greater'


class CompareError(ValueError):
    pass


class NoCommonParameters(CompareError):
    def __init__(self):
        super().__init__('comparison is not possible: no common parameter values')


class MixedFlags(CompareError):
    def __init__(self, flags):
        super().__init__(f'characteristics computed under different flags: {sorted(flags)}')


def verdict(delta: int) -> str:
    return LESS if delta < 0 else GREATER if delta > 0 else EQUAL


@dataclass(frozen=True)
class ComparisonReport:
    shared_keys: tuple
    dD: int
    dP: int

    @property
    def verdict_D(self) -> str:
        return verdict(self.dD)

    @property
    def verdict_P(self) -> str:
        return verdict(self.dP)

    def to_json(self) -> dict:
        return {'shared_keys': [{'params': dict(p), 'iterations': L} for p, L in self.shared_keys],
                'dD': self.dD, 'dP': self.dP,
                'verdict_D': self.verdict_D, 'verdict_P': self.verdict_P}


def _index(side: Iterable[Characteristics]) -> dict:
    out = {}
    for c in side:
        old = out.get(c.key)
        if old is not None and (old.D, old.P) != (c.D, c.P):
            raise CompareError(f'conflicting characteristics for {c.key}')
        out[c.key] = c
    return out


def compare(a: Iterable[Characteristics], b: Iterable[Characteristics]) -> ComparisonReport:
    '''Sum D_A - D_B and P_A - P_B over the keys both sides share.'''
    ia, ib = _index(a), _index(b)
    flags = {c.flags for c in ia.values()} | {c.flags for c in ib.values()}
    if len(flags) > 1:
        raise MixedFlags(flags)
    shared = sorted(set(ia) & set(ib))
    if not shared:
        raise NoCommonParameters()
    dD = sum(ia[k].D - ib[k].D for k in shared)
    dP = sum(ia[k].P - ib[k].P for k in shared)
    return ComparisonReport(tuple(shared), dD, dP)
