"""Eigenvector and eigenvalue estimation from products of independent
random sparsifications.

The core iteration multiplies a fresh sparsification each round,

    x(l) = S(l) x(l-1),

normalizes (distributedly) every round to keep magnitudes representable,
and estimates the leading eigenvector by the normalized running average of
the normalized iterates,

    u_hat(t) = c(t) sum_{l<=t} sign_l x(l)/||x(l)||,

where sign_l aligns iterate l with the running partial sum; this realizes
sign-coherent averaging without access to the true eigenvector, because
inside the absorbing ball every iterate has overlap close to one with it.
Magnitudes are carried separately as cumulative logs, which is what the
log-scale eigenvalue estimator

    lambda_hat(t) = |<x(0), x(t)>|^(1/t)

needs to avoid overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds
from .errors import (
    InvalidGap,
    NonFiniteValue,
    RankDeficientGram,
    ValidationError,
    ZeroInnerProduct,
)
from .linalg import SymmetricMatrix, operator_norm, proj_distance_vec
from .network import (
    ComplexityLedger,
    GossipAvgConfig,
    NetworkState,
    distributed_norm,
    gossip_average_block,
    spmv_round,
)
from .sparsify import Sparsifier, SparsifyScheme, analytic_scale, d_for_theta

_UNIT_TOL = 1e-6
_GRAM_DET_MIN = 1e-12


@dataclass
class Trajectory:
    """Normalized iterates plus cumulative log magnitudes.

    ``normalized_iterates[l]`` is the unit vector of round l (index 0 is the
    start) and the un-normalized iterate is recovered as
    exp(log_magnitudes[l]) * normalized_iterates[l].
    """

    normalized_iterates: np.ndarray  # (t + 1, n)
    log_magnitudes: np.ndarray  # (t + 1,)

    @property
    def t(self) -> int:
        return self.normalized_iterates.shape[0] - 1

    def final(self) -> np.ndarray:
        return self.normalized_iterates[-1]


@dataclass
class EigvecEstimate:
    u_hat: np.ndarray
    t: int
    chi: float
    err_vs_oracle: float | None = None
    checkpoint_list: list = field(default_factory=list)

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.u_hat)) - 1.0) > 1e-9:
            raise ValidationError("estimate representative must be unit norm")


@dataclass
class MultiEigvecEstimate:
    """Estimates of the r leading eigenvectors, as columns of ``U_hat``."""

    U_hat: np.ndarray
    t: int
    chi: float
    checkpoint_list: list = field(default_factory=list)


@dataclass
class EigvalEstimate:
    lambda_hat: float
    t: int
    x0_kind: str
    log_inner: float

    def __post_init__(self):
        if not self.lambda_hat > 0:
            raise ValidationError("eigenvalue estimate must be positive")


@dataclass
class Checkpoint:
    """Estimate snapshot taken mid-run (used for error-versus-budget curves)."""

    t: int
    chi: float
    u_hat: np.ndarray


def power_iterate_fixed(
    sample,
    x: np.ndarray,
    rounds: int,
    ledger: ComplexityLedger | None = None,
) -> np.ndarray:
    """Iterate one fixed sparsification ``rounds`` times, normalizing each
    round (exact norms: only the direction carries information here).

    Accepts an (n,) vector or an (n, k) batch of starts, which are iterated
    independently under the same matrix.
    """
    x = np.array(x, dtype=np.float64)
    batched = x.ndim == 2
    for _ in range(rounds):
        y = sample.apply_block(x) if batched else sample.apply(x)
        if not np.all(np.isfinite(y)):
            raise NonFiniteValue("iterate overflowed; this should not happen with per-round normalization")
        nrm = np.linalg.norm(y, axis=0)
        if np.any(nrm == 0.0):
            raise NonFiniteValue("iterate collapsed to zero under the fixed sparsification")
        x = y / nrm
        if ledger is not None:
            ledger.charge_spmv(sample.nnz, sample.n, x.shape[1] if batched else 1)
    return x


def warm_start(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    theta: float,
    l2: float,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
    *,
    scale: float | None = None,
    norm_m: float | None = None,
    max_redraws: int = 8,
) -> np.ndarray:
    """Land within theta / (1 - l2) of the leading eigenvector by iterating
    one dedicated higher-quality sparsification from a Gaussian start.

    The fixed matrix must satisfy ||S - M||_2 <= theta^2/(2(1-l2)) ||M||_2,
    which typically needs a denser draw than the main scheme: d is chosen by
    the calibrated theta(d) law, the realized draw is checked against the
    quality target, and densified (up to d = n, where S = M exactly) if the
    check fails.  Runs ceil(3 log(n/theta) / (1 - l2 - theta)) rounds; the
    transport cost is charged to the ledger.
    """
    if theta >= 1.0 - l2:
        raise InvalidGap(f"warm start needs theta < 1 - l2, got theta = {theta}, l2 = {l2}")
    n = m.n
    quality = bounds.warm_start_quality(theta, l2)
    if norm_m is None:
        norm_m = operator_norm(m)
    if scale is None:
        scale = analytic_scale(m, norm_m=norm_m)
    # Aim below the required quality so most draws pass the check first try.
    d_ws = d_for_theta(n, scale, 0.8 * quality)
    sample = None
    for _ in range(max_redraws):
        if d_ws > n - 0.5:
            # p = 1 keeps every entry: S = M exactly, quality trivially met.
            sample = Sparsifier(m, scheme.with_d(n)).draw(rng)
            break
        candidate = Sparsifier(m, scheme.with_d(d_ws)).draw(rng)
        dev = operator_norm(candidate.to_dense() - m.array) / norm_m
        if dev <= quality:
            sample = candidate
            break
        d_ws = min(n, 0.5 * (d_ws + n) + 1.0)
    if sample is None:
        sample = Sparsifier(m, scheme.with_d(n)).draw(rng)
    t_star = bounds.warm_start_rounds(n, theta, l2)
    x0 = rng.standard_normal(n) / math.sqrt(n)
    return power_iterate_fixed(sample, x0, t_star, ledger)


def _check_unit(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > _UNIT_TOL:
        raise ValidationError(f"{name} must be unit norm")
    return x.copy()


def gossip_pca(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    x0: np.ndarray,
    t: int,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
    *,
    keep_trajectory: bool = True,
    checkpoints=None,
    oracle_u: np.ndarray | None = None,
    trace: list | None = None,
) -> tuple[EigvecEstimate, Trajectory]:
    """Leading-eigenvector estimation with a fresh sparsification per round.

    Each round applies a new draw, renormalizes through the distributed norm
    (the consensus value is a single shared scalar, so directions are never
    perturbed), and adds the sign-aligned iterate to the running average.
    Optional ``checkpoints`` (iterable of round numbers) snapshot the running
    estimate; snapshots are returned via the ``checkpoint_list`` attribute of
    the estimate.  A ``trace`` list, when given, receives one
    (round, chi, max_node_value, norm_estimate) tuple per round.
    """
    if t < 1:
        raise ValidationError("need at least one round")
    x = _check_unit(x0, "x0")
    n = m.n
    sp = Sparsifier(m, scheme)
    cps = sorted(set(checkpoints)) if checkpoints else []
    running = np.zeros(n)
    logmag = 0.0
    iters = [x.copy()] if keep_trajectory else None
    logs = [0.0] if keep_trajectory else None
    snapshots: list[Checkpoint] = []
    state = NetworkState(values=x, round=0)
    for ell in range(1, t + 1):
        s = sp.draw(rng)
        state = spmv_round(state, s, ledger)
        nrm = distributed_norm(state, cfg, rng, ledger)
        if trace is not None:
            trace.append((ell, ledger.chi, float(np.max(np.abs(state.values))), nrm))
        x = state.values / nrm
        state = NetworkState(values=x, round=state.round)
        logmag += math.log(nrm)
        sign = 1.0 if ell == 1 or float(np.dot(x, running)) >= 0.0 else -1.0
        running += sign * x
        if keep_trajectory:
            iters.append(x.copy())
            logs.append(logmag)
        if cps and ell == cps[0]:
            cps.pop(0)
            snapshots.append(
                Checkpoint(t=ell, chi=ledger.chi, u_hat=running / np.linalg.norm(running))
            )
    # One more norm computation prices the final normalization constant; the
    # returned representative is normalized exactly so downstream geometry is
    # not polluted by the consensus epsilon.
    distributed_norm(running, cfg, rng, ledger)
    u_hat = running / np.linalg.norm(running)
    err = proj_distance_vec(u_hat, oracle_u) if oracle_u is not None else None
    est = EigvecEstimate(
        u_hat=u_hat, t=t, chi=ledger.chi, err_vs_oracle=err, checkpoint_list=snapshots
    )
    if keep_trajectory:
        traj = Trajectory(np.asarray(iters), np.asarray(logs))
    else:
        traj = Trajectory(x.reshape(1, -1), np.asarray([logmag]))
    return est, traj


def _inverse_sqrt(g: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(g)
    if np.any(w <= 0.0):
        raise RankDeficientGram("Gram matrix is not positive definite")
    return (q / np.sqrt(w)) @ q.T


def gossip_pca_multi(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    X0: np.ndarray,
    t: int,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
    *,
    checkpoints=None,
) -> MultiEigvecEstimate:
    """Block extension tracking r orthonormal vectors.

    Each round applies the draw to all r vectors, gossips the r(r+1)/2
    distinct Gram entries G_ab = (1/n) sum_i x_i(a) x_i(b) (one message
    carries the packed record), and orthonormalizes locally through the
    inverse square root of the consensus Gram.  Per-column running averages
    are kept exactly as in the single-vector estimator; at finalization,
    column a is projected against estimates 1..a-1 before normalization
    (deflation ordering).
    """
    X = np.array(X0, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("X0 must be an (n, r) block")
    n, r = X.shape
    if not (1 <= r <= 5):
        raise ValidationError("block size r must be between 1 and 5")
    if np.max(np.abs(X.T @ X - np.eye(r))) > 1e-8:
        raise ValidationError("columns of X0 must be orthonormal")
    sp = Sparsifier(m, scheme)
    a_idx, b_idx = np.triu_indices(r)
    cps = sorted(set(checkpoints)) if checkpoints else []
    snapshots: list[Checkpoint] = []
    running = np.zeros((n, r))
    state = NetworkState(values=X, round=0)
    for ell in range(1, t + 1):
        s = sp.draw(rng)
        state = spmv_round(state, s, ledger)
        Y = state.values
        packed = Y[:, a_idx] * Y[:, b_idx]
        consensus = gossip_average_block(packed, cfg, rng, ledger)[0]
        G = np.zeros((r, r))
        G[a_idx, b_idx] = consensus
        G[b_idx, a_idx] = consensus
        if np.linalg.det(G) < _GRAM_DET_MIN:
            raise RankDeficientGram(
                f"det(G) = {np.linalg.det(G):g} below {_GRAM_DET_MIN:g} at round {ell}"
            )
        X = Y @ _inverse_sqrt(n * G)
        state = NetworkState(values=X, round=state.round)
        signs = np.where((X * running).sum(axis=0) >= 0.0, 1.0, -1.0)
        running += X * signs
        if cps and ell == cps[0]:
            cps.pop(0)
            snapshots.append(Checkpoint(t=ell, chi=ledger.chi, u_hat=_deflate(running)))
    est = MultiEigvecEstimate(
        U_hat=_deflate(running), t=t, chi=ledger.chi, checkpoint_list=snapshots
    )
    return est


def _deflate(running: np.ndarray) -> np.ndarray:
    out = np.empty_like(running)
    for a in range(running.shape[1]):
        v = running[:, a].copy()
        for b in range(a):
            v -= np.dot(out[:, b], v) * out[:, b]
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise RankDeficientGram("running averages became linearly dependent")
        out[:, a] = v / nrm
    return out


def estimate_eigenvalue(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    t: int,
    cfg: GossipAvgConfig,
    rng: np.random.Generator,
    ledger: ComplexityLedger,
) -> EigvalEstimate:
    """Top-eigenvalue estimate lambda_hat = |<x(0), x(t)>|^(1/t) from a fresh
    Gaussian start (entries N(0,1) -- this entry point must not be warm
    started), computed in log scale so the un-normalized iterate never
    materializes."""
    x0 = rng.standard_normal(m.n)
    _, traj = gossip_pca(
        m, scheme, x0 / np.linalg.norm(x0), t, cfg, rng, ledger, keep_trajectory=True
    )
    traj.log_magnitudes = traj.log_magnitudes + math.log(np.linalg.norm(x0))
    return eigenvalue_from_trajectory(x0, traj)


def eigenvalue_from_trajectory(x0: np.ndarray, traj: Trajectory) -> EigvalEstimate:
    """Reuse an existing trajectory (Gaussian-started) for the eigenvalue.

    ``traj.log_magnitudes`` must include the magnitude of x0 itself, so that
    exp(log_magnitudes[t]) * normalized_iterates[t] is the raw iterate.
    """
    t = traj.t
    inner = float(np.dot(x0, traj.final()))
    if abs(inner) < 1e-300:
        raise ZeroInnerProduct("inner product with the start vanished; resample x0")
    log_inner = math.log(abs(inner)) + float(traj.log_magnitudes[-1])
    return EigvalEstimate(
        lambda_hat=math.exp(log_inner / t), t=t, x0_kind="gaussian", log_inner=log_inner
    )
