"""Synchronous-round network simulation: sparse matrix-vector rounds,
pairwise gossip averaging, and per-node complexity accounting.

The simulator advances all nodes together.  Communication cost is tracked
per node: matrix-vector rounds charge one real sent and one multiply-add
per nonzero (about d per node), which is the budget ``chi ~ t d``.  Norm
and Gram-matrix gossip traffic goes to a separate overhead column so
experiments can include or neglect it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxRoundsExceeded, NonFiniteValue, ValidationError
from .sparsify import SparseSample


@dataclass
class ComplexityLedger:
    """Cumulative per-node communication and arithmetic counts.

    ``chi`` is the headline budget: reals sent per node by matrix-vector
    rounds.  ``overhead_reals_per_node`` accumulates the gossip-averaging
    traffic used for norms and Gram matrices.
    """

    reals_sent_per_node: float = 0.0
    mults_per_node: float = 0.0
    overhead_reals_per_node: float = 0.0

    @property
    def chi(self) -> float:
        return self.reals_sent_per_node

    @property
    def total_reals_per_node(self) -> float:
        return self.reals_sent_per_node + self.overhead_reals_per_node

    def charge_spmv(self, nnz: int, n: int, vectors: int = 1) -> None:
        per_node = vectors * nnz / n
        self.reals_sent_per_node += per_node
        self.mults_per_node += per_node

    def charge_gossip(self, participants: int, n: int, reals_per_message: int = 1) -> None:
        self.overhead_reals_per_node += reals_per_message * participants / n

    def copy(self) -> "ComplexityLedger":
        return ComplexityLedger(
            self.reals_sent_per_node, self.mults_per_node, self.overhead_reals_per_node
        )


@dataclass
class NetworkState:
    """Per-node values at the current round: shape (n,) for one tracked
    vector or (n, r) for a block."""

    values: np.ndarray
    round: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class GossipAvgConfig:
    """Pairwise-averaging parameters.

    epsilon is the target relative precision of the average.  The round cap
    defaults to a value derived from n, epsilon, and the initial spread.
    Pairing is uniformly random and disjoint: each round pairs off a random
    perfect matching (one node idles when n is odd).
    """

    epsilon: float = 1e-6
    pair_schedule: str = "random_uniform"
    max_rounds: int | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValidationError(f"need 0 < epsilon < 1, got {self.epsilon}")
        if self.pair_schedule != "random_uniform":
            raise ValidationError(f"unknown pair schedule {self.pair_schedule!r}")

    def derived_cap(self, n: int, initial_ratio: float) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        spread = max(initial_ratio, 2.0)
        return 32 + math.ceil(4.0 * (math.log2(max(n, 2)) + math.log2(spread)))


def spmv_round(state: NetworkState, s: SparseSample, ledger: ComplexityLedger) -> NetworkState:
    """One synchronous multiply round: node i receives S_ij x_j from each
    sparse neighbor and accumulates.  Raises ``NonFiniteValue`` on overflow,
    which means the caller forgot to renormalize."""
    if s.n != state.n:
        raise ValidationError(f"sample is {s.n}-dimensional, state is {state.n}-dimensional")
    x = state.values
    if x.ndim == 1:
        y = s.apply(x)
        vectors = 1
    else:
        y = s.apply_block(x)
        vectors = x.shape[1]
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("non-finite node value after multiply round; renormalize each round")
    ledger.charge_spmv(s.nnz, s.n, vectors)
    return NetworkState(values=y, round=state.round + 1)


def _pairwise_rounds(
    values: np.ndarray,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
    reals_per_message: int,
) -> tuple[np.ndarray, int]:
    """Run disjoint random pairwise averaging until every node is within
    epsilon (relative) of the true mean of every tracked component.

    The simulator peeks at the true mean purely for the stopping check; the
    logged round count is what a deployed stopping rule would need to match.
    """
    v = np.array(values, dtype=np.float64)
    flat = v.reshape(v.shape[0], -1)
    n = flat.shape[0]
    if n < 2:
        raise ValidationError("gossip averaging needs at least 2 nodes")
    target = flat.mean(axis=0)
    scale = float(np.max(np.abs(target)))
    tol = cfg.epsilon * scale
    dev0 = float(np.max(np.abs(flat - target)))
    if tol > 0:
        ratio = dev0 / tol
    else:
        # Zero mean: only exactly-converged inputs can pass the relative test.
        ratio = 1.0 if dev0 == 0.0 else 2.0**60
    cap = cfg.derived_cap(n, ratio)
    half = n // 2
    rounds = 0
    while float(np.max(np.abs(flat - target))) > tol:
        if rounds >= cap:
            raise MaxRoundsExceeded(
                f"gossip averaging did not reach epsilon = {cfg.epsilon:g} in {cap} rounds"
            )
        perm = rng.permutation(n)
        a = perm[:half]
        b = perm[half : 2 * half]
        avg = 0.5 * (flat[a] + flat[b])
        flat[a] = avg
        flat[b] = avg
        rounds += 1
        ledger.charge_gossip(2 * half, n, reals_per_message)
    return flat.reshape(v.shape), rounds


def gossip_average_detailed(
    values: np.ndarray,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
) -> tuple[np.ndarray, int]:
    """As ``gossip_average`` but also reports the rounds used."""
    return _pairwise_rounds(np.asarray(values, dtype=np.float64), cfg, rng, ledger, 1)


def gossip_average(
    values: np.ndarray,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
) -> np.ndarray:
    """Pairwise gossip averaging of one real per node.

    Every node ends within epsilon (relative) of the true average; the sum
    of the values is conserved by construction.
    """
    out, _ = gossip_average_detailed(values, cfg, rng, ledger)
    return out


def gossip_average_block(
    values: np.ndarray,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
) -> np.ndarray:
    """Gossip averaging of a small per-node record; each message carries the
    whole record, so the ledger is charged record-size reals per exchange."""
    values = np.asarray(values, dtype=np.float64)
    k = 1 if values.ndim == 1 else values.shape[1]
    out, _ = _pairwise_rounds(values, cfg, rng, ledger, k)
    return out


def distributed_norm(
    state_or_values,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
) -> float:
    """Euclidean norm of the network vector via gossip on squared values.

    Returns sqrt(n * consensus average); relative error at most about
    2 epsilon.  The consensus value (node 0 after averaging) is used as a
    single shared normalizer, so scaling by it never perturbs directions.
    """
    values = state_or_values.values if isinstance(state_or_values, NetworkState) else state_or_values
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValidationError("distributed_norm expects one value per node")
    averaged, _ = _pairwise_rounds(values * values, cfg, rng, ledger, 1)
    return float(math.sqrt(values.shape[0] * averaged[0]))
