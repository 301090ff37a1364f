"""Classical Lie algebra tables and the layout of the Hamiltonian vector."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .curves import MonomialBasis, monomial_basis
from .errors import UnsupportedRank, UnsupportedType


@dataclass(frozen=True)
class LieType:
    series: str
    rank: int

    def __post_init__(self):
        if self.series not in "ABCD" or len(self.series) != 1:
            raise UnsupportedType(f"unknown series {self.series!r}")
        if self.rank < 1:
            raise UnsupportedRank(f"rank must be positive, got {self.rank}")
        if self.series == "D" and self.rank < 2:
            raise UnsupportedRank("series D needs rank >= 2")

    @classmethod
    def parse(cls, name: str) -> "LieType":
        m = re.fullmatch(r"\s*([ABCDabcd])\s*(\d+)\s*", str(name))
        if not m:
            raise UnsupportedType(f"cannot parse Lie type {name!r}")
        return cls(m.group(1).upper(), int(m.group(2)))

    def __str__(self):
        return f"{self.series}{self.rank}"


@dataclass(frozen=True)
class ClassicalData:
    n: int
    degrees: tuple
    dim_g: int
    pfaffian: bool


def classical_data(t: LieType) -> ClassicalData:
    l = t.rank
    if t.series == "A":
        return ClassicalData(l + 1, tuple(i + 1 for i in range(1, l + 1)), (l + 1) ** 2 - 1, False)
    if t.series == "B":
        return ClassicalData(2 * l + 1, tuple(2 * i for i in range(1, l + 1)), l * (2 * l + 1), False)
    if t.series == "C":
        return ClassicalData(2 * l, tuple(2 * i for i in range(1, l + 1)), l * (2 * l + 1), False)
    degrees = tuple(2 * i for i in range(1, l)) + (l,)
    return ClassicalData(2 * l, degrees, l * (2 * l - 1), True)


@dataclass(frozen=True)
class Block:
    """One basis invariant: its degree, monomials and flat offset."""

    index: int
    degree: int
    basis: MonomialBasis
    offset: int
    pfaffian: bool = False

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class HamiltonianLayout:
    lie: LieType
    genus: int
    blocks: tuple

    @property
    def N(self) -> int:
        return sum(b.size for b in self.blocks)

    def labels(self) -> list:
        out = []
        for b in self.blocks:
            out += [f"H{b.index}_x{k}" for k in b.basis.family0]
            out += [f"H{b.index}_yx{s}" for s in b.basis.family1]
        return out


def hamiltonian_layout(t: LieType, g: int) -> HamiltonianLayout:
    if g < 2:
        raise ValueError("Hitchin systems here need base genus g >= 2")
    data = classical_data(t)
    blocks, offset = [], 0
    for i, d in enumerate(data.degrees, start=1):
        pf = data.pfaffian and i == len(data.degrees)
        basis = monomial_basis(d, g)
        blocks.append(Block(i, d, basis, offset, pf))
        offset += len(basis)
    return HamiltonianLayout(t, g, tuple(blocks))
