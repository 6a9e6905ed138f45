"""Random sparsification of a symmetric matrix, and empirical certification
of its quality.

A sparsification keeps each entry of ``M`` with probability p = d/n and
rescales survivors by n/d, so E[S] = M exactly and S has about d nonzeros
per row.  Quality is measured by two parameters: ``theta``, the relative
spectral-norm deviation ||S - M||_2 / ||M||_2 (which scales like
sqrt(n/d - 1) times an ensemble constant), and ``alpha``, the entrywise
variance scale n max_ij Var(S_ij) / ||M||_2^2 (of order 1/d).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse

from .errors import ValidationError
from .linalg import SymmetricMatrix, operator_norm

MODES = ("symmetric_pair", "iid_entry")

# nnz/n sanity band is only meaningful once the sample is reasonably dense.
_BAND_MIN_D = 16
_BAND_MIN_N = 64


@dataclass(frozen=True)
class SparsifyScheme:
    """How to draw one sparsification of an n x n matrix.

    ``d`` is the target average number of nonzeros per row; fractional values
    are allowed since only the keep probability d/n enters.  In mode
    ``symmetric_pair`` each unordered pair {i, j} (and each diagonal entry)
    is kept independently, which preserves symmetry exactly.  ``iid_entry``
    samples all n^2 entries independently and symmetrizes as (S + S^T)/2;
    both are unbiased.  ``jitter`` > 0 adds an independent uniform
    perturbation to every diagonal entry (bias of order jitter; off by
    default).
    """

    n: int
    d: float
    mode: str = "symmetric_pair"
    jitter: float = 0.0
    rescale: float = field(init=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("scheme dimension must be at least 2")
        if not (1.0 <= self.d <= self.n):
            raise ValidationError(f"need 1 <= d <= n, got d = {self.d}, n = {self.n}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.jitter < 0:
            raise ValidationError("jitter must be non-negative")
        object.__setattr__(self, "rescale", self.n / self.d)

    @property
    def p(self) -> float:
        return self.d / self.n

    def with_d(self, d: float) -> "SparsifyScheme":
        return replace(self, d=float(min(max(d, 1.0), self.n)))


class SparseSample:
    """One symmetric sparse draw, stored as its upper triangle.

    Off-diagonal entries are stored once with i < j and implied at (j, i);
    ``nnz`` counts nonzeros of the full matrix.
    """

    __slots__ = ("n", "off_rows", "off_cols", "off_vals", "diag_idx", "diag_vals",
                 "nnz", "scheme", "_csr")

    def __init__(self, n, off_rows, off_cols, off_vals, diag_idx, diag_vals, scheme=None):
        self.n = int(n)
        self.off_rows = off_rows
        self.off_cols = off_cols
        self.off_vals = off_vals
        self.diag_idx = diag_idx
        self.diag_vals = diag_vals
        self.scheme = scheme
        self.nnz = 2 * len(off_vals) + len(diag_vals)
        self._csr = None
        if scheme is not None and scheme.d >= _BAND_MIN_D and n >= _BAND_MIN_N:
            ratio = self.nnz / n
            if not (scheme.d / 4.0 <= ratio <= 4.0 * scheme.d):
                raise ValidationError(
                    f"sampler bug: nnz/n = {ratio:.2f} outside [d/4, 4d] for d = {scheme.d}"
                )

    def triplets(self) -> Iterator[tuple[int, int, float]]:
        """All stored entries of the full symmetric matrix."""
        for i, j, v in zip(self.off_rows, self.off_cols, self.off_vals):
            yield int(i), int(j), float(v)
            yield int(j), int(i), float(v)
        for i, v in zip(self.diag_idx, self.diag_vals):
            yield int(i), int(i), float(v)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """S @ x for a vector x."""
        n = self.n
        y = np.zeros(n)
        if len(self.off_rows):
            y += np.bincount(self.off_rows, weights=self.off_vals * x[self.off_cols], minlength=n)
            y += np.bincount(self.off_cols, weights=self.off_vals * x[self.off_rows], minlength=n)
        if len(self.diag_idx):
            y[self.diag_idx] += self.diag_vals * x[self.diag_idx]
        return y

    def apply_block(self, X: np.ndarray) -> np.ndarray:
        """S @ X for an (n, r) block."""
        return self.to_csr() @ X

    def to_csr(self) -> scipy.sparse.csr_matrix:
        if self._csr is None:
            rows = np.concatenate([self.off_rows, self.off_cols, self.diag_idx])
            cols = np.concatenate([self.off_cols, self.off_rows, self.diag_idx])
            vals = np.concatenate([self.off_vals, self.off_vals, self.diag_vals])
            self._csr = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.off_rows, self.off_cols] = self.off_vals
        a[self.off_cols, self.off_rows] = self.off_vals
        a[self.diag_idx, self.diag_idx] = self.diag_vals
        return a

    def save(self, path) -> None:
        """Triplet text: header ``n nnz``, then 0-indexed ``i j value`` lines,
        upper triangle only."""
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.nnz}\n")
            for i, v in zip(self.diag_idx, self.diag_vals):
                fh.write(f"{i} {i} {v:.17g}\n")
            for i, j, v in zip(self.off_rows, self.off_cols, self.off_vals):
                fh.write(f"{i} {j} {v:.17g}\n")

    @classmethod
    def load(cls, path) -> "SparseSample":
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValidationError(f"bad sample header in {path!r}")
            n, nnz = int(header[0]), int(header[1])
            oi, oj, ov, di, dv = [], [], [], [], []
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
                if i > j:
                    raise ValidationError("sample file must store the upper triangle only")
                if i == j:
                    di.append(i)
                    dv.append(v)
                else:
                    oi.append(i)
                    oj.append(j)
                    ov.append(v)
        sample = cls(
            n,
            np.asarray(oi, dtype=np.int64),
            np.asarray(oj, dtype=np.int64),
            np.asarray(ov, dtype=np.float64),
            np.asarray(di, dtype=np.int64),
            np.asarray(dv, dtype=np.float64),
        )
        if sample.nnz != nnz:
            raise ValidationError(f"sample file {path!r}: header nnz {nnz} != stored {sample.nnz}")
        return sample


class Sparsifier:
    """Draws i.i.d. sparsifications of a fixed matrix under a fixed scheme.

    Precomputes the upper-triangle structure once; ``draw`` then only
    generates the keep masks.  Entries of M that are exactly zero are never
    stored (keeping them would contribute nothing), so at d = n the sample
    equals M with nnz = count of nonzero entries.
    """

    def __init__(self, m: SymmetricMatrix, scheme: SparsifyScheme):
        if scheme.n != m.n:
            raise ValidationError(f"scheme is for n = {scheme.n}, matrix has n = {m.n}")
        self.m = m
        self.scheme = scheme
        a = m.array
        iu, ju = np.triu_indices(m.n, k=1)
        vals = a[iu, ju]
        keep = vals != 0.0
        self._oi = iu[keep]
        self._oj = ju[keep]
        self._ov = vals[keep] * scheme.rescale
        self._dv = np.diagonal(a).copy() * scheme.rescale
        self._all_idx = np.arange(m.n)

    def draw(self, rng: np.random.Generator) -> SparseSample:
        sch = self.scheme
        p = sch.p
        if sch.mode == "symmetric_pair":
            off_w = (rng.random(len(self._ov)) < p).astype(np.float64)
        else:  # iid_entry: two Bernoulli draws per unordered pair, then (S + S^T)/2
            b_upper = rng.random(len(self._ov)) < p
            b_lower = rng.random(len(self._ov)) < p
            off_w = (b_upper.astype(np.float64) + b_lower.astype(np.float64)) / 2.0
        diag_mask = rng.random(sch.n) < p

        off_keep = off_w > 0.0
        off_vals = self._ov[off_keep] * off_w[off_keep]
        diag_vals = np.where(diag_mask, self._dv, 0.0)
        if sch.jitter > 0.0:
            diag_vals = diag_vals + rng.uniform(-sch.jitter, sch.jitter, sch.n)
        diag_keep = diag_vals != 0.0
        return SparseSample(
            sch.n,
            self._oi[off_keep],
            self._oj[off_keep],
            off_vals,
            self._all_idx[diag_keep],
            diag_vals[diag_keep],
            scheme=sch,
        )


def draw(m: SymmetricMatrix, scheme: SparsifyScheme, rng: np.random.Generator) -> SparseSample:
    """One random sparsification of ``m``; E[S] = M for jitter = 0."""
    return Sparsifier(m, scheme).draw(rng)


class AlphaEstimate(NamedTuple):
    empirical: float
    analytic: float


@dataclass(frozen=True)
class SparsifierQuality:
    """Measured quality of a scheme on a given matrix."""

    theta_hat: float
    alpha_hat: float
    bias_norm: float

    def __post_init__(self):
        if min(self.theta_hat, self.alpha_hat, self.bias_norm) < 0:
            raise ValidationError("quality figures must be non-negative")


def estimate_theta(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    trials: int,
    rng: np.random.Generator,
    *,
    norm_m: float | None = None,
) -> float:
    """Worst observed ||S - M||_2 / ||M||_2 over ``trials`` draws."""
    if trials < 1:
        raise ValidationError("need at least one trial")
    if norm_m is None:
        norm_m = operator_norm(m)
    sp = Sparsifier(m, scheme)
    worst = 0.0
    for _ in range(trials):
        dev = operator_norm(sp.draw(rng).to_dense() - m.array)
        worst = max(worst, dev / norm_m)
    return worst


def estimate_alpha(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    trials: int,
    rng: np.random.Generator,
    *,
    norm_m: float | None = None,
) -> AlphaEstimate:
    """Entrywise variance scale: empirical worst-entry sample variance in
    alpha units, plus the closed form (n/d - 1) n max M_ij^2 / ||M||_2^2.

    The closed form is exact for ``symmetric_pair`` (and for the diagonal in
    either mode); ``iid_entry`` halves the off-diagonal variance, so there it
    is an upper envelope.
    """
    if trials < 30:
        raise ValidationError("need at least 30 trials for a variance estimate")
    if norm_m is None:
        norm_m = operator_norm(m)
    n = m.n
    sp = Sparsifier(m, scheme)
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    for _ in range(trials):
        dense = sp.draw(rng).to_dense()
        s1 += dense
        s2 += dense * dense
    var = (s2 - s1 * s1 / trials) / (trials - 1)
    empirical = float(n * var.max() / norm_m**2)
    analytic = float((n / scheme.d - 1.0) * n * (m.array**2).max() / norm_m**2)
    return AlphaEstimate(empirical=empirical, analytic=analytic)


def measure_quality(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    trials: int,
    rng: np.random.Generator,
) -> SparsifierQuality:
    norm_m = operator_norm(m)
    n = m.n
    sp = Sparsifier(m, scheme)
    worst = 0.0
    acc = np.zeros((n, n))
    s2 = np.zeros((n, n))
    for _ in range(trials):
        dense = sp.draw(rng).to_dense()
        acc += dense
        s2 += dense * dense
        worst = max(worst, operator_norm(dense - m.array) / norm_m)
    mean = acc / trials
    if trials > 1:
        var = (s2 - acc * acc / trials) / (trials - 1)
        alpha_hat = float(n * var.max() / norm_m**2)
    else:
        alpha_hat = 0.0
    bias = operator_norm(mean - m.array) / norm_m
    return SparsifierQuality(theta_hat=worst, alpha_hat=alpha_hat, bias_norm=float(bias))


# ---------------------------------------------------------------------------
# Calibration of theta(d).  The deviation S - M has independent centered
# entries of variance M_ij^2 (n/d - 1), so its norm behaves like
# K sqrt(n/d - 1) with K an ensemble constant (about twice the root of the
# worst row power of M over ||M||_2).  For d << n this is the familiar
# C / sqrt(d) law with C = K sqrt(n).


def analytic_scale(m: SymmetricMatrix, *, norm_m: float | None = None) -> float:
    """Row-power predictor of the theta(d) = K sqrt(n/d - 1) constant."""
    if norm_m is None:
        norm_m = operator_norm(m)
    row_power = (m.array**2).sum(axis=1).max()
    return float(2.0 * np.sqrt(row_power) / norm_m)


def calibrate_scale(
    m: SymmetricMatrix,
    rng: np.random.Generator,
    *,
    mode: str = "symmetric_pair",
    d_grid=None,
    trials: int = 4,
) -> float:
    """Measure K in theta(d) ~= K sqrt(n/d - 1) on a small d grid."""
    n = m.n
    if d_grid is None:
        d_grid = [max(2.0, n / 16), n / 4, n / 2]
    norm_m = operator_norm(m)
    ratios = []
    for d in d_grid:
        scheme = SparsifyScheme(n=n, d=float(d), mode=mode)
        th = estimate_theta(m, scheme, trials, rng, norm_m=norm_m)
        ratios.append(th / np.sqrt(n / d - 1.0))
    return float(np.median(ratios))


def d_for_theta(n: int, scale: float, theta: float) -> float:
    """Invert theta(d) = scale sqrt(n/d - 1); clipped to [1, n]."""
    if theta <= 0:
        return float(n)
    d = n / (1.0 + (theta / scale) ** 2)
    return float(min(max(d, 1.0), n))
