"""Exact arithmetic for the built-in finitely generated groups.

Three families are supported:

* ``Zd(d)``: the free abelian group Z^d with generators +-e_k.
* ``ZdTimesCyclic(d, m)``: Z^d x C_m, with H = Z^d x {0} of index m.
* ``Heisenberg``: the discrete Heisenberg group in normal form x^a y^b z^c
  with z = [x, y] = x^-1 y^-1 x y central.

Elements are stored in normal form so equality is tuple equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class ModelMismatchError(ValueError):
    """Raised when an element does not have the shape a model expects."""


class DomainError(ValueError):
    """Raised when an operation is applied outside its domain."""


class GroupElement(NamedTuple):
    coords: tuple[int, ...]
    finite_part: int = 0

    def __repr__(self) -> str:
        if self.finite_part:
            return f"<{','.join(map(str, self.coords))}|{self.finite_part}>"
        return f"<{','.join(map(str, self.coords))}>"


@dataclass(frozen=True)
class GroupModel:
    """A group together with a symmetric generating set and a coset structure.

    ``kind`` is one of ``"Zd"``, ``"ZdTimesCyclic"`` or ``"Heisenberg"``.
    """

    kind: str
    d: int = 1
    m: int = 1
    generators: tuple[GroupElement, ...] = field(default=(), compare=False)
    coset_reps: tuple[GroupElement, ...] = field(default=(), compare=False)

    # construction ---------------------------------------------------------
    @classmethod
    def Zd(cls, d: int) -> "GroupModel":
        if d < 1:
            raise ValueError("d must be >= 1")
        gens = []
        for k in range(d):
            for sign in (1, -1):
                c = [0] * d
                c[k] = sign
                gens.append(GroupElement(tuple(c)))
        ident = GroupElement((0,) * d)
        return cls("Zd", d, 1, tuple(gens), (ident,))

    @classmethod
    def ZdTimesCyclic(cls, d: int, m: int) -> "GroupModel":
        if d < 1 or m < 2:
            raise ValueError("need d >= 1 and m >= 2")
        gens = []
        for k in range(d):
            for sign in (1, -1):
                c = [0] * d
                c[k] = sign
                gens.append(GroupElement(tuple(c)))
        zero = (0,) * d
        gens.append(GroupElement(zero, 1))
        if m > 2:
            gens.append(GroupElement(zero, m - 1))
        reps = tuple(GroupElement(zero, i) for i in range(m))
        return cls("ZdTimesCyclic", d, m, tuple(gens), reps)

    @classmethod
    def Heisenberg(cls) -> "GroupModel":
        gens = (
            GroupElement((1, 0, 0)),
            GroupElement((-1, 0, 0)),
            GroupElement((0, 1, 0)),
            GroupElement((0, -1, 0)),
        )
        return cls("Heisenberg", 3, 1, gens, (GroupElement((0, 0, 0)),))

    @classmethod
    def from_name(cls, name: str, d: int = 2, m: int = 2) -> "GroupModel":
        key = name.lower()
        if key in ("zd", "z"):
            return cls.Zd(d)
        if key in ("zdtimescyclic", "zxc", "zd_times_cyclic"):
            return cls.ZdTimesCyclic(d, m)
        if key == "heisenberg":
            return cls.Heisenberg()
        raise ValueError(f"unknown group model {name!r}")

    # basic data -------------------------------------------------------------
    @property
    def name(self) -> str:
        if self.kind == "Zd":
            return f"Z^{self.d}"
        if self.kind == "ZdTimesCyclic":
            return f"Z^{self.d}xC{self.m}"
        return "Heisenberg"

    @property
    def rank(self) -> int:
        """Length of the coordinate vector (and of the Mal'cev vector of H)."""
        return 3 if self.kind == "Heisenberg" else self.d

    subgroup_rank = rank

    @property
    def index_n(self) -> int:
        return len(self.coset_reps)

    @property
    def degree(self) -> int:
        return len(self.generators)

    @property
    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.rank)

    def malcev_basis(self) -> list[GroupElement]:
        out = []
        for k in range(self.rank):
            c = [0] * self.rank
            c[k] = 1
            out.append(GroupElement(tuple(c)))
        return out

    def element(self, coords, finite_part: int = 0) -> GroupElement:
        g = GroupElement(tuple(int(c) for c in coords), int(finite_part))
        self.check(g)
        return g

    def check(self, g: GroupElement) -> None:
        if len(g.coords) != self.rank:
            raise ModelMismatchError(
                f"{self.name} expects {self.rank} coordinates, got {len(g.coords)}"
            )
        if not 0 <= g.finite_part < self.m:
            raise ModelMismatchError(f"finite part {g.finite_part} out of range for {self.name}")

    # arithmetic -------------------------------------------------------------
    def multiply(self, a: GroupElement, b: GroupElement) -> GroupElement:
        ac, bc = a.coords, b.coords
        if len(ac) != self.rank or len(bc) != self.rank:
            raise ModelMismatchError(f"{self.name} expects {self.rank} coordinates")
        if self.kind == "Heisenberg":
            # (a,b,c)(a',b',c') = (a+a', b+b', c+c'-a'b)
            return GroupElement((ac[0] + bc[0], ac[1] + bc[1], ac[2] + bc[2] - bc[0] * ac[1]))
        coords = tuple(x + y for x, y in zip(ac, bc))
        if self.kind == "Zd":
            return GroupElement(coords)
        return GroupElement(coords, (a.finite_part + b.finite_part) % self.m)

    def inverse(self, g: GroupElement) -> GroupElement:
        c = g.coords
        if self.kind == "Heisenberg":
            return GroupElement((-c[0], -c[1], -c[2] - c[0] * c[1]))
        return GroupElement(tuple(-x for x in c), (-g.finite_part) % self.m)

    def power(self, g: GroupElement, k: int) -> GroupElement:
        out = self.identity
        base = g if k >= 0 else self.inverse(g)
        for _ in range(abs(k)):
            out = self.multiply(out, base)
        return out

    def word_to_element(self, word) -> GroupElement:
        """Multiply generator indices left to right."""
        g = self.identity
        for i in word:
            g = self.multiply(g, self.generators[i])
        return g

    # cosets and coordinates -------------------------------------------------
    def coset_decompose(self, g: GroupElement) -> tuple[GroupElement, int]:
        """Return ``(h, i)`` with h in H and ``h * coset_reps[i-1] == g`` (i is 1-based)."""
        if self.kind == "ZdTimesCyclic":
            return GroupElement(g.coords, 0), g.finite_part + 1
        return g, 1

    def in_subgroup(self, g: GroupElement) -> bool:
        return g.finite_part == 0

    def malcev_coordinates(self, h: GroupElement) -> tuple[int, ...]:
        if h.finite_part != 0:
            raise DomainError(f"{h!r} is not in the subgroup H")
        # normal-form coordinates are Mal'cev coordinates for the fixed bases
        return h.coords

    def from_malcev(self, coords) -> GroupElement:
        return GroupElement(tuple(int(c) for c in coords))

    # vectorised right multiplication by a generator, used by large BFS sweeps
    def right_multiply_array(self, arr: np.ndarray, s: GroupElement) -> np.ndarray:
        """``arr`` has one row per element: coords followed by the finite part."""
        out = arr.copy()
        r = self.rank
        if self.kind == "Heisenberg":
            out[:, 0] += s.coords[0]
            out[:, 1] += s.coords[1]
            out[:, 2] += s.coords[2] - s.coords[0] * arr[:, 1]
            return out
        out[:, :r] += np.asarray(s.coords, dtype=arr.dtype)
        if self.kind == "ZdTimesCyclic":
            out[:, r] = (out[:, r] + s.finite_part) % self.m
        return out

    def as_row(self, g: GroupElement) -> tuple[int, ...]:
        return (*g.coords, g.finite_part)

    def from_row(self, row) -> GroupElement:
        return GroupElement(tuple(int(x) for x in row[: self.rank]), int(row[self.rank]))


def heisenberg_matrix(g: GroupElement) -> np.ndarray:
    """Upper unitriangular integer matrix of x^a y^b z^c."""
    a, b, c = g.coords
    return np.array([[1, a, c + a * b], [0, 1, b], [0, 0, 1]], dtype=object)
