"""Experiment harness: synthetic ensembles, the warm-start meeting table,
computation-accuracy tradeoff curves, and the positioning demo.

Every cell (one seed at one configuration point) runs on its own random
stream derived from the cell key, so results are byte-identical no matter
how many workers execute them; rows are sorted before writing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoMeetingPoint, TargetGapUnreachable, ValidationError
from .estimators import gossip_pca, gossip_pca_multi, power_iterate_fixed
from .linalg import SymmetricMatrix, proj_distance_vec, spectral_oracle
from .network import ComplexityLedger, GossipAvgConfig, NetworkState, spmv_round
from .sparsify import Sparsifier, SparsifyScheme

MEET_TOL = 1e-3

EXPERIMENTS = ("warmstart_table", "tradeoff", "positioning", "diagnostics")
MATRIX_SOURCES = ("synthetic_spiked", "mds", "file")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "tradeoff"
    n: int = 200
    d_list: tuple = (50.0, 500.0)
    chi_list: tuple = (1000.0, 2000.0, 4000.0, 8000.0, 16000.0)
    seeds: tuple = (0, 1, 2, 3)
    delta: float = 0.1
    epsilon: float = 1e-6
    output_path: str = ""
    matrix_source: str = "synthetic_spiked"
    matrix_file: str = ""
    matrix_seed: int = 1000
    l2_target: float = 0.5
    noise_edge: float = 0.1
    spike_kind: str = "gaussian"
    t_cap: int = 60
    meet_tol: float = MEET_TOL
    # Burn-in budget for the averaging method: every variant spends this many
    # reals per node on fresh-draw power rounds (round(rough_chi / d) rounds)
    # before iterate averaging starts, so the average is not polluted by the
    # far-from-eigenvector transient.  The budget axis includes this cost.
    rough_chi: float = 0.0

    def __post_init__(self):
        if not self.seeds:
            raise ValidationError("need at least one seed")
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        if self.matrix_source not in MATRIX_SOURCES:
            raise ValidationError(f"unknown matrix source {self.matrix_source!r}")
        if any(d > self.n for d in self.d_list):
            raise ValidationError("d cannot exceed n")


_LIST_FIELDS = {"d_list", "chi_list", "seeds"}
_INT_FIELDS = {"n", "matrix_seed", "t_cap"}
_FLOAT_FIELDS = {"delta", "epsilon", "l2_target", "noise_edge", "meet_tol", "rough_chi"}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; lists are comma separated; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _LIST_FIELDS:
            items = [tok.strip() for tok in value.split(",") if tok.strip()]
            caster = int if key == "seeds" else float
            out[key] = tuple(caster(tok) for tok in items)
        elif key in _INT_FIELDS:
            out[key] = int(value)
        elif key in _FLOAT_FIELDS:
            out[key] = float(value)
        else:
            out[key] = value
    return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as fh:
        values = parse_config_text(fh.read())
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ValidationError(f"bad config key: {exc}") from exc


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one experiment cell, stable under any execution
    order or worker count."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def worker_count() -> int:
    env = os.environ.get("GOSSIP_PCA_THREADS", "")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def run_cells(cells, fn):
    """Map fn over cells with the configured worker pool; order-independent."""
    workers = worker_count()
    if workers == 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


# ---------------------------------------------------------------------------
# Matrix sources


def make_synthetic(
    n: int,
    l2_target: float,
    rng: np.random.Generator,
    *,
    lambda1: float = 1.0,
    noise_edge: float = 0.1,
    spike_kind: str = "gaussian",
    tol: float = 0.02,
    max_tries: int = 20,
) -> SymmetricMatrix:
    """Spiked ensemble lambda1 (u u^T + l2 v v^T) + noise, with the noise
    scaled so the measured eigenvalue ratio lands within ``tol`` of target.

    ``noise_edge`` sets the bulk edge of the symmetric Gaussian noise
    relative to lambda1 (0 gives the exact rank-2 matrix).  ``spike_kind``
    'sign' uses +-1/sqrt(n) spike entries, giving maximally incoherent
    matrices (entrywise variance of a sparsified draw then scales like 1/d).
    """
    if not (0.0 < l2_target < 1.0):
        raise ValidationError("l2 target must be in (0, 1)")
    for _ in range(max_tries):
        if spike_kind == "sign":
            u = rng.choice([-1.0, 1.0], size=n) / math.sqrt(n)
            v = rng.choice([-1.0, 1.0], size=n) / math.sqrt(n)
            v -= np.dot(u, v) * u
            v /= np.linalg.norm(v)
        elif spike_kind == "gaussian":
            u = rng.standard_normal(n)
            u /= np.linalg.norm(u)
            v = rng.standard_normal(n)
            v -= np.dot(u, v) * u
            v /= np.linalg.norm(v)
        else:
            raise ValidationError(f"unknown spike kind {spike_kind!r}")
        a = lambda1 * (np.outer(u, u) + l2_target * np.outer(v, v))
        if noise_edge > 0.0:
            sigma = noise_edge * lambda1 / (2.0 * math.sqrt(n))
            w = rng.standard_normal((n, n)) * sigma
            a = a + (w + w.T) / math.sqrt(2.0)
        m = SymmetricMatrix.from_array(
            a,
            meta={
                "kind": "synthetic_spiked",
                "n": n,
                "l2_target": l2_target,
                "lambda1": lambda1,
                "noise_edge": noise_edge,
                "spike_kind": spike_kind,
            },
        )
        spec = spectral_oracle(m)
        if abs(spec.l2 - l2_target) <= tol:
            m.meta["l2_measured"] = spec.l2
            return m
    raise TargetGapUnreachable(
        f"could not reach l2 = {l2_target} +- {tol} in {max_tries} tries "
        f"(noise edge {noise_edge} may be too large)"
    )


@dataclass(frozen=True)
class MdsInstance:
    """Positioning instance: points in the unit square, their squared
    distances, and the double-centered matrix whose top eigenvectors carry
    the coordinates (up to a rigid motion)."""

    positions: np.ndarray
    D: np.ndarray
    centered: SymmetricMatrix

    def __post_init__(self):
        if np.any(self.D < 0) or np.any(np.diagonal(self.D) != 0):
            raise ValidationError("squared-distance matrix must be non-negative with zero diagonal")
        if np.max(np.abs(self.centered.array.sum(axis=1))) > 1e-9 * max(
            1.0, np.max(np.abs(self.centered.array))
        ):
            raise ValidationError("centered matrix must have zero row sums")


def make_mds(n: int, rng: np.random.Generator) -> MdsInstance:
    positions = rng.random((n, 2))
    g = positions @ positions.T
    sq = np.diagonal(g)
    D = sq[:, None] + sq[None, :] - 2.0 * g
    np.fill_diagonal(D, 0.0)
    centered = _double_center(D)
    return MdsInstance(positions=positions, D=D, centered=centered)


def _double_center(D: np.ndarray) -> SymmetricMatrix:
    """-(1/2) (I - 11^T/n) D (I - 11^T/n), symmetrized exactly."""
    n = D.shape[0]
    row = D.mean(axis=1)
    grand = D.mean()
    c = -0.5 * (D - row[:, None] - row[None, :] + grand)
    return SymmetricMatrix.from_array((c + c.T) / 2.0, meta={"kind": "mds_centered", "n": n})


def build_matrix(cfg: ExperimentConfig) -> SymmetricMatrix:
    rng = cell_rng(cfg.matrix_seed, 0)
    if cfg.matrix_source == "synthetic_spiked":
        return make_synthetic(
            cfg.n,
            cfg.l2_target,
            rng,
            noise_edge=cfg.noise_edge,
            spike_kind=cfg.spike_kind,
        )
    if cfg.matrix_source == "mds":
        return make_mds(cfg.n, rng).centered
    from .linalg import load_matrix

    if not cfg.matrix_file:
        raise ValidationError("matrix_source = file needs matrix_file")
    return load_matrix(cfg.matrix_file)


def subspace_delta(U: np.ndarray, U_hat: np.ndarray) -> float:
    """(1/sqrt(2)) min over orthogonal Q of ||U - U_hat Q||_F.

    The minimizing rotation comes from the orthogonal Procrustes problem:
    estimated coordinates are only defined up to a rigid motion, so the raw
    Frobenius gap is not an error measure until that freedom is removed.
    """
    if U.shape != U_hat.shape:
        raise ValidationError("subspace bases must have matching shape")
    a, _, b = np.linalg.svd(U_hat.T @ U)
    q = a @ b
    return float(np.linalg.norm(U - U_hat @ q, "fro") / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Warm-start meeting table


@dataclass(frozen=True)
class WarmstartRow:
    d: float
    seed: int
    tau: float
    err: float
    censored: int


def run_warmstart_table(cfg: ExperimentConfig) -> list[WarmstartRow]:
    """Couple a Gaussian-start and an eigenvector-start trajectory through
    one fixed sparsification per d; report the first round where they meet
    within ``meet_tol`` (modulo sign) and the Gaussian track's distance from
    the eigenvector at that round, per seed."""
    m = build_matrix(cfg)
    spec = spectral_oracle(m)
    u = spec.u
    n = m.n

    def one(cell):
        d, seed, idx = cell
        rng = cell_rng(seed, 1, idx)
        sample = Sparsifier(m, SparsifyScheme(n=n, d=d)).draw(rng)
        x_rand = rng.standard_normal(n)
        x_rand /= np.linalg.norm(x_rand)
        x_u = u.copy()
        tau, censored = cfg.t_cap, 1
        for t in range(1, cfg.t_cap + 1):
            x_rand = power_iterate_fixed(sample, x_rand, 1)
            x_u = power_iterate_fixed(sample, x_u, 1)
            gap = min(
                np.linalg.norm(x_rand - x_u), np.linalg.norm(x_rand + x_u)
            )
            if gap <= cfg.meet_tol:
                tau, censored = t, 0
                break
        err = min(np.linalg.norm(x_rand - u), np.linalg.norm(x_rand + u))
        return WarmstartRow(d=d, seed=seed, tau=float(tau), err=float(err), censored=censored)

    cells = [(d, seed, i) for i, (d, seed) in enumerate(
        (d, s) for d in cfg.d_list for s in cfg.seeds
    )]
    rows = run_cells(cells, one)
    return sorted(rows, key=lambda r: (r.d, r.seed))


def summarize_warmstart(rows: list[WarmstartRow]) -> dict[float, tuple[float, float]]:
    """d -> (mean tau, mean err) over uncensored seeds."""
    out: dict[float, tuple[float, float]] = {}
    for d in sorted({r.d for r in rows}):
        grp = [r for r in rows if r.d == d and not r.censored]
        if not grp:
            raise NoMeetingPoint(f"all seeds censored at d = {d}")
        out[d] = (
            float(np.mean([r.tau for r in grp])),
            float(np.mean([r.err for r in grp])),
        )
    return out


# ---------------------------------------------------------------------------
# Computation-accuracy tradeoff


@dataclass(frozen=True)
class TradeoffRow:
    chi: float
    method: str
    d: float
    err: float
    seed: int


@dataclass
class TradeoffSummary:
    rows: list
    crossover_chi: float | None
    gossip_argmin_d: dict
    gossip_slope: float


def _chi_rounds(chi_list, d) -> list[int]:
    return [max(1, int(round(c / d))) for c in chi_list]


def run_tradeoff(cfg: ExperimentConfig) -> TradeoffSummary:
    """Error against per-node budget chi ~ t d for two methods: power
    iteration on a single fixed sparsification (estimate = current iterate)
    and the fresh-draw iterate-averaging estimator.  Both start from a
    Gaussian vector; each (method, d, seed) is one pass with checkpoints at
    the chi grid."""
    if len(cfg.d_list) != 2:
        raise ValidationError("tradeoff expects exactly two d values")
    m = build_matrix(cfg)
    spec = spectral_oracle(m)
    u = spec.u
    n = m.n
    gossip_cfg = GossipAvgConfig(epsilon=cfg.epsilon)

    def one(cell):
        method, d, seed, idx = cell
        rng = cell_rng(seed, 2, idx)
        scheme = SparsifyScheme(n=n, d=d)
        out = []
        if method == "pm":
            rounds = _chi_rounds(cfg.chi_list, d)
            sample = Sparsifier(m, scheme).draw(rng)
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            done = 0
            for chi, t in zip(cfg.chi_list, rounds):
                x = power_iterate_fixed(sample, x, t - done)
                done = t
                out.append(TradeoffRow(chi=chi, method="pm", d=d,
                                       err=proj_distance_vec(x, u), seed=seed))
        else:
            x0 = rng.standard_normal(n)
            x0 /= np.linalg.norm(x0)
            ledger = ComplexityLedger()
            burn = int(round(cfg.rough_chi / d))
            if burn:
                sp = Sparsifier(m, scheme)
                state = NetworkState(values=x0)
                for _ in range(burn):
                    state = spmv_round(state, sp.draw(rng), ledger)
                    state.values /= np.linalg.norm(state.values)
                x0 = state.values
            # Averaging rounds available at each grid budget, after burn-in.
            usable = [
                (chi, int(round(chi / d)) - burn)
                for chi in cfg.chi_list
                if int(round(chi / d)) - burn >= 1
            ]
            if not usable:
                return out
            uniq = sorted({t for _, t in usable})
            est, _ = gossip_pca(
                m, scheme, x0, uniq[-1], gossip_cfg, rng, ledger,
                keep_trajectory=False, checkpoints=uniq,
            )
            by_round = {cp.t: cp for cp in est.checkpoint_list}
            for chi, t in usable:
                out.append(TradeoffRow(chi=chi, method="gossip", d=d,
                                       err=proj_distance_vec(by_round[t].u_hat, u), seed=seed))
        return out

    cells = []
    idx = 0
    for method in ("pm", "gossip"):
        for d in cfg.d_list:
            for seed in cfg.seeds:
                cells.append((method, d, seed, idx))
                idx += 1
    rows = [row for chunk in run_cells(cells, one) for row in chunk]
    rows.sort(key=lambda r: (r.method, r.d, r.chi, r.seed))
    return _summarize_tradeoff(cfg, rows)


def _summarize_tradeoff(cfg: ExperimentConfig, rows: list[TradeoffRow]) -> TradeoffSummary:
    d_lo, d_hi = sorted(cfg.d_list)

    def mean_err(method, d, chi):
        vals = [r.err for r in rows if r.method == method and r.d == d and r.chi == chi]
        return float(np.mean(vals)) if vals else None

    crossover = None
    for chi in cfg.chi_list:
        lo, hi = mean_err("pm", d_lo, chi), mean_err("pm", d_hi, chi)
        if lo is not None and hi is not None and hi < lo:
            crossover = float(chi)
            break
    argmin = {}
    curve_chi, curve_err = [], []
    for chi in cfg.chi_list:
        errs = {d: e for d in cfg.d_list if (e := mean_err("gossip", d, chi)) is not None}
        if not errs:
            continue
        best = min(errs, key=errs.get)
        argmin[float(chi)] = float(best)
        curve_chi.append(chi)
        curve_err.append(errs[best])
    slope = float(
        np.polyfit(np.log(np.asarray(curve_chi)), np.log(np.asarray(curve_err)), 1)[0]
    )
    return TradeoffSummary(
        rows=rows, crossover_chi=crossover, gossip_argmin_d=argmin, gossip_slope=slope
    )


# ---------------------------------------------------------------------------
# Positioning demo


@dataclass(frozen=True)
class PositioningRow:
    chi: float
    delta: float
    d: float
    seed: int


def run_positioning(cfg: ExperimentConfig) -> list[PositioningRow]:
    """Recover the two coordinate eigenvectors of the double-centered
    squared-distance matrix with the block estimator and report the rigid-
    motion-aligned subspace error against the budget."""
    inst = make_mds(cfg.n, cell_rng(cfg.matrix_seed, 0))
    m = inst.centered
    spec = spectral_oracle(m)
    U = spec.eigenvectors[:, :2]
    n = m.n
    d = cfg.d_list[0]
    gossip_cfg = GossipAvgConfig(epsilon=cfg.epsilon)
    rounds = _chi_rounds(cfg.chi_list, d)

    def one(cell):
        seed, idx = cell
        rng = cell_rng(seed, 3, idx)
        X0 = np.linalg.qr(rng.standard_normal((n, 2)))[0]
        ledger = ComplexityLedger()
        uniq = sorted(set(rounds))
        est = gossip_pca_multi(
            m, SparsifyScheme(n=n, d=d), X0, uniq[-1], gossip_cfg, rng, ledger,
            checkpoints=uniq,
        )
        by_round = {cp.t: cp for cp in est.checkpoint_list}
        return [
            PositioningRow(chi=chi, delta=subspace_delta(U, by_round[t].u_hat), d=d, seed=seed)
            for chi, t in zip(cfg.chi_list, rounds)
        ]

    cells = [(seed, i) for i, seed in enumerate(cfg.seeds)]
    rows = [row for chunk in run_cells(cells, one) for row in chunk]
    return sorted(rows, key=lambda r: (r.chi, r.seed))
