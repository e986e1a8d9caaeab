"""Reference games and independent Shapley oracles for the test suite."""

from fractions import Fraction
from itertools import permutations
from math import factorial

import numpy as np

from finshap.game import FunctionGame, TableGame
from finshap.models import TrainedModel


def glove_game():
    # player 0 holds a left glove, players 1 and 2 right gloves
    return FunctionGame(3, lambda c: float(0 in c and (1 in c or 2 in c)))


def unanimity_game(M, carrier):
    carrier = set(carrier)
    return FunctionGame(M, lambda c: float(carrier <= set(c)))


def additive_game(weights):
    w = np.asarray(weights, dtype=float)
    return FunctionGame(len(w), lambda masks: masks.astype(float) @ w, vectorized=True)


def random_table(M, rng, zero_empty=False):
    t = rng.normal(size=1 << M)
    if zero_empty:
        t[0] = 0.0
    return t


def structured_table(M, rng, n_pairs=6, n_triples=3):
    """Additive part plus a few pairwise and triple synergies (Harsanyi dividends)."""
    idx = np.arange(1 << M)
    bits = (idx[:, None] >> np.arange(M)) & 1
    table = bits @ rng.normal(size=M)
    for size, count, scale in ((2, n_pairs, 0.7), (3, n_triples, 0.5)):
        for _ in range(count):
            members = rng.choice(M, size=size, replace=False)
            table = table + scale * rng.normal() * bits[:, members].all(axis=1)
    return table.astype(float)


def permutation_oracle(value, M):
    """Shapley values by averaging marginal contributions over all M! orders.

    ``value`` maps a frozenset of players to a number; exact in rational
    arithmetic when values are Fractions or ints.
    """
    phi = [Fraction(0)] * M
    for order in permutations(range(M)):
        s = frozenset()
        prev = Fraction(value(s))
        for p in order:
            s = s | {p}
            cur = Fraction(value(s))
            phi[p] += cur - prev
            prev = cur
    n = factorial(M)
    return [float(v / n) for v in phi]


def table_value(table):
    def value(s):
        return table[sum(1 << i for i in s)]

    return value


def dividend_oracle(M, dividends):
    """Shapley values of a game given by Harsanyi dividends {coalition: d}: each
    member of T receives d_T / |T|."""
    phi = np.zeros(M)
    for members, d in dividends.items():
        for i in members:
            phi[i] += d / len(members)
    return phi


def dividend_table(M, dividends):
    idx = np.arange(1 << M)
    table = np.zeros(1 << M)
    for members, d in dividends.items():
        mask = sum(1 << i for i in members)
        table += d * ((idx & mask) == mask)
    return table


def table_game(table):
    return TableGame(table)


class StubModel(TrainedModel):
    """A fixed scoring function posing as a trained model."""

    def __init__(self, feature_count, fn):
        self.feature_count = feature_count
        self.training_meta = {}
        self.fn = fn

    def _proba(self, X):
        return np.asarray(self.fn(X), dtype=np.float64)


def constant_model(M, p=0.7):
    return StubModel(M, lambda X: np.full(len(X), p))


def linear_model(w):
    w = np.asarray(w, dtype=float)
    return StubModel(len(w), lambda X: X @ w)


def glove_model():
    # with instance (1,1,1) and a zero background row this is the glove game
    return StubModel(3, lambda X: X[:, 0] * np.maximum(X[:, 1], X[:, 2]))
