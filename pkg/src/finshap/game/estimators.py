"""Shapley value estimators: exact, permutation sampling, kernel regression, partition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import CapacityError, ConfigError, NumericalError
from ..seeding import rng_for
from .coalition import Partition, all_masks
from .games import CoalitionGame, QuotientGame

EXACT_CAP = 20
PERMUTATION_CHUNK = 256


class ShapleyMethod(str, Enum):
    EXACT = "Exact"
    PERMUTATION = "Permutation"
    KERNEL = "Kernel"
    PARTITION = "Partition"


@dataclass(frozen=True, eq=False)
class ShapleyResult:
    phi: np.ndarray
    stderr: np.ndarray | None
    method: ShapleyMethod
    evaluations_used: int
    seed: int | None = None

    def to_dict(self) -> dict:
        def clean(a):
            return None if a is None else [None if not math.isfinite(v) else float(v) for v in a]

        return {
            "method": self.method.value,
            "phi": clean(self.phi),
            "stderr": clean(self.stderr),
            "evaluations_used": int(self.evaluations_used),
            "seed": self.seed,
        }


def shapley_weights(M: int) -> np.ndarray:
    """``w[s] = s!(M-s-1)!/M!`` for ``s = 0..M-1``."""
    return np.array([1.0 / (M * math.comb(M - 1, s)) for s in range(M)])


def shapley_from_table(table: np.ndarray) -> np.ndarray:
    """Exact Shapley values from a value table indexed by coalition bitset.

    Computed as the average over sizes ``s`` of the mean marginal
    contribution to coalitions of size ``s``, which equals the weighted
    sum with ``shapley_weights`` but stays exact whenever the table
    arithmetic is (integer or dyadic values).
    """
    n = len(table)
    M = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    size = np.zeros(n, dtype=np.int64)
    for i in range(M):
        size += (idx >> i) & 1
    per_size = np.array([math.comb(M - 1, s) for s in range(M)], dtype=np.float64)
    phi = np.empty(M)
    for i in range(M):
        without = idx[((idx >> i) & 1) == 0]
        sums = np.bincount(size[without], weights=table[without | (1 << i)] - table[without], minlength=M)
        phi[i] = np.sum(sums / per_size) / M
    return phi


def exact_shapley(game: CoalitionGame, cap: int = EXACT_CAP) -> ShapleyResult:
    M = game.n_players
    if M > cap:
        raise CapacityError(
            f"exact enumeration of {M} players needs 2^{M} coalitions (cap {cap}); "
            "use sampled_shapley or kernel_shap instead"
        )
    before = game.evaluations
    table = game.values(all_masks(M))
    return ShapleyResult(shapley_from_table(table), None, ShapleyMethod.EXACT, game.evaluations - before)


def sampled_shapley(game: CoalitionGame, n_permutations: int, seed: int) -> ShapleyResult:
    """Monte Carlo average of marginal contributions along random join orders.

    Permutations are drawn in fixed-size chunks, each from its own seed
    derived from ``seed`` and the chunk index.
    """
    if n_permutations < 1:
        raise ConfigError("n_permutations must be at least 1")
    M = game.n_players
    before = game.evaluations
    contrib = np.empty((n_permutations, M))
    for c, lo in enumerate(range(0, n_permutations, PERMUTATION_CHUNK)):
        n = min(PERMUTATION_CHUNK, n_permutations - lo)
        rng = rng_for(seed, "permutation", c)
        perms = rng.permuted(np.tile(np.arange(M), (n, 1)), axis=1)
        # masks[p, j] holds the first j players of permutation p
        masks = np.zeros((n, M + 1, M), dtype=bool)
        rows = np.arange(n)
        for j in range(M):
            masks[:, j + 1] = masks[:, j]
            masks[rows, j + 1, perms[:, j]] = True
        vals = game.values(masks.reshape(-1, M)).reshape(n, M + 1)
        marg = np.diff(vals, axis=1)
        block = np.empty((n, M))
        block[rows[:, None], perms] = marg
        contrib[lo : lo + n] = block
    phi = contrib.mean(axis=0)
    if n_permutations > 1:
        stderr = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    else:
        stderr = np.full(M, np.nan)
    return ShapleyResult(phi, stderr, ShapleyMethod.PERMUTATION, game.evaluations - before, seed)


def kernel_size_mass(M: int) -> np.ndarray:
    """Total Shapley-kernel weight of each coalition size ``s = 0..M``."""
    mass = np.zeros(M + 1)
    for s in range(1, M):
        mass[s] = (M - 1) / (s * (M - s))
    return mass


def kernel_design(M: int, budget: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Non-trivial coalitions and their regression weights.

    Complete size pairs ``(s, M-s)`` are taken from the extremes inward
    while their coalition count fits the remaining budget. The rest of the
    budget goes to paired (S, complement) draws over the remaining sizes,
    each draw carrying an equal share of those sizes' kernel mass.
    """
    mass = kernel_size_mass(M)
    masks: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    remaining = budget
    s = 1
    while s <= M - s:
        sizes = (s,) if s == M - s else (s, M - s)
        count = sum(math.comb(M, t) for t in sizes)
        if count > remaining:
            break
        for t in sizes:
            block = _masks_of_size(M, t)
            masks.append(block)
            weights.append(np.full(len(block), mass[t] / len(block)))
        remaining -= count
        s += 1
    free = [t for t in range(s, M - s + 1)]
    if free and remaining >= 2:
        rng = rng_for(seed, "kernel")
        p = mass[free] / mass[free].sum()
        seen: dict[bytes, int] = {}
        drawn: list[np.ndarray] = []
        hits: list[int] = []
        n_draws = 0
        attempts = 0
        max_attempts = 100 * remaining + 1000
        while remaining >= 2 and attempts < max_attempts:
            batch = max(1, min(remaining // 2, 4096))
            sz = rng.choice(free, size=batch, p=p)
            order = np.argsort(rng.random((batch, M)), axis=1)
            rank = np.empty_like(order)
            rank[np.arange(batch)[:, None], order] = np.arange(M)
            S = rank < sz[:, None]
            for row in S:
                attempts += 1
                if remaining < 2:
                    break
                for m in (row, ~row):
                    key = np.packbits(m).tobytes()
                    k = seen.get(key)
                    if k is None:
                        seen[key] = len(drawn)
                        drawn.append(m)
                        hits.append(1)
                        remaining -= 1
                    else:
                        hits[k] += 1
                n_draws += 2
        if drawn:
            masks.append(np.array(drawn))
            weights.append(np.asarray(hits, dtype=np.float64) * (mass[free].sum() / n_draws))
    if not masks:
        return np.zeros((0, M), dtype=bool), np.zeros(0)
    return np.vstack(masks), np.concatenate(weights)


def _masks_of_size(M: int, s: int) -> np.ndarray:
    from itertools import combinations

    out = np.zeros((math.comb(M, s), M), dtype=bool)
    for r, members in enumerate(combinations(range(M), s)):
        out[r, list(members)] = True
    return out


def kernel_shap(game: CoalitionGame, n_coalitions: int | str, seed: int, regularization: float = 1e-10) -> ShapleyResult:
    """Weighted least-squares Shapley estimate with the efficiency constraint built in.

    ``n_coalitions`` counts every evaluated coalition, the empty and the
    grand coalition included; ``"all"`` enumerates all ``2^M`` of them.
    """
    M = game.n_players
    before = game.evaluations
    if isinstance(n_coalitions, str):
        if n_coalitions.lower() != "all":
            raise ConfigError(f"n_coalitions must be an integer or 'all', got {n_coalitions!r}")
        if M > 30:
            raise CapacityError(f"full enumeration of {M} players is not affordable")
        budget = (1 << M) - 2
    else:
        if n_coalitions < 2 * M:
            raise ConfigError(f"n_coalitions must be at least 2M = {2 * M}, got {n_coalitions}")
        budget = min(int(n_coalitions) - 2, (1 << min(M, 62)) - 2)
    if regularization < 0:
        raise ConfigError("regularization must be non-negative")
    v0 = game.empty_value()
    vN = game.grand_value()
    delta = vN - v0
    if M == 1:
        return ShapleyResult(np.array([delta]), None, ShapleyMethod.KERNEL, game.evaluations - before, seed)
    Z, w = kernel_design(M, budget, seed)
    y = game.values(Z) - v0
    Zf = Z.astype(np.float64)
    # phi_last = delta - sum(others)
    A = Zf[:, :-1] - Zf[:, -1:]
    b = y - Zf[:, -1] * delta
    G = (A.T * w) @ A
    rhs = (A.T * w) @ b
    scale = float(np.trace(G)) / (M - 1) if len(w) else 1.0
    G[np.diag_indices_from(G)] += regularization * max(scale, 1e-300)
    diag = f"M={M}, coalitions={len(w)}, regularization={regularization}"
    if regularization * scale <= 0 and np.linalg.cond(G) > 1e14:
        raise NumericalError(f"kernel system is singular ({diag})")
    try:
        beta = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"kernel system is singular ({diag})") from exc
    if not np.isfinite(beta).all():
        raise NumericalError(f"kernel system produced non-finite values ({diag})")
    phi = np.append(beta, delta - beta.sum())
    return ShapleyResult(phi, None, ShapleyMethod.KERNEL, game.evaluations - before, seed)


def partition_shapley(game: CoalitionGame, partition: Partition | list, cap: int = EXACT_CAP) -> ShapleyResult:
    """Exact Shapley values of the quotient game whose players are the groups."""
    if not isinstance(partition, Partition):
        partition = Partition.from_lists(game.n_players, partition)
    if len(partition) > cap:
        raise CapacityError(f"{len(partition)} groups exceed the exact cap {cap}")
    before = game.evaluations
    quotient = QuotientGame(game, partition)
    table = quotient.values(all_masks(len(partition)))
    return ShapleyResult(shapley_from_table(table), None, ShapleyMethod.PARTITION, game.evaluations - before)
