"""Coalitions as integer bitsets, and partitions of the player set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from ..errors import PartitionError


class Coalition:
    """Immutable subset of players ``0..n_players-1`` stored as an int bitset."""

    __slots__ = ("bits", "n_players")

    def __init__(self, n_players: int, bits: int = 0):
        if bits < 0 or bits >> n_players:
            raise ValueError(f"bits {bits:#x} exceed {n_players} players")
        self.n_players = n_players
        self.bits = bits

    @classmethod
    def from_members(cls, n_players: int, members: Iterable[int]) -> "Coalition":
        bits = 0
        for i in members:
            if not 0 <= i < n_players:
                raise ValueError(f"player {i} outside 0..{n_players - 1}")
            bits |= 1 << i
        return cls(n_players, bits)

    @classmethod
    def from_mask(cls, mask) -> "Coalition":
        mask = np.asarray(mask, dtype=bool)
        return cls.from_members(len(mask), np.flatnonzero(mask).tolist())

    @classmethod
    def empty(cls, n_players: int) -> "Coalition":
        return cls(n_players, 0)

    @classmethod
    def grand(cls, n_players: int) -> "Coalition":
        return cls(n_players, (1 << n_players) - 1)

    def add(self, i: int) -> "Coalition":
        return Coalition(self.n_players, self.bits | (1 << i))

    def remove(self, i: int) -> "Coalition":
        return Coalition(self.n_players, self.bits & ~(1 << i))

    def union(self, other: "Coalition") -> "Coalition":
        return Coalition(self.n_players, self.bits | other.bits)

    def complement(self) -> "Coalition":
        return Coalition(self.n_players, ((1 << self.n_players) - 1) & ~self.bits)

    def __contains__(self, i: int) -> bool:
        return bool((self.bits >> i) & 1)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __iter__(self) -> Iterator[int]:
        bits, i = self.bits, 0
        while bits:
            if bits & 1:
                yield i
            bits >>= 1
            i += 1

    def isdisjoint(self, other: "Coalition") -> bool:
        return not (self.bits & other.bits)

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_players, dtype=bool)
        mask[list(self)] = True
        return mask

    def __eq__(self, other) -> bool:
        return isinstance(other, Coalition) and (self.n_players, self.bits) == (other.n_players, other.bits)

    def __hash__(self) -> int:
        return hash((self.n_players, self.bits))

    def __repr__(self) -> str:
        return f"Coalition({self.n_players}, {sorted(self)})"


def all_masks(n_players: int) -> np.ndarray:
    """Row ``k`` is the membership mask of the coalition with bitset ``k``."""
    idx = np.arange(1 << n_players, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_players)) & 1).astype(bool)


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of players that together cover all of them."""

    n_players: int
    groups: tuple[Coalition, ...]

    def __post_init__(self):
        seen = 0
        for g in self.groups:
            if g.n_players != self.n_players:
                raise PartitionError("group built for a different player count")
            if not g.bits:
                raise PartitionError("empty group")
            if seen & g.bits:
                overlap = sorted(Coalition(self.n_players, seen & g.bits))
                raise PartitionError(f"groups overlap on players {overlap}")
            seen |= g.bits
        missing = sorted(Coalition(self.n_players, seen).complement())
        if missing:
            raise PartitionError(f"players {missing} belong to no group")

    @classmethod
    def from_lists(cls, n_players: int, groups: Iterable[Iterable[int]]) -> "Partition":
        try:
            return cls(n_players, tuple(Coalition.from_members(n_players, g) for g in groups))
        except ValueError as exc:
            raise PartitionError(str(exc)) from exc

    @classmethod
    def singletons(cls, n_players: int) -> "Partition":
        return cls.from_lists(n_players, [[i] for i in range(n_players)])

    def __len__(self) -> int:
        return len(self.groups)

    def membership(self) -> np.ndarray:
        """Boolean matrix ``(n_groups, n_players)``."""
        return np.vstack([g.to_mask() for g in self.groups])
