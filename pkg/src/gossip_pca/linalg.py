"""Dense symmetric matrices, the reference spectral decomposition, and
projective-space geometry.

Everything downstream estimates properties of a symmetric matrix ``M``
whose largest-magnitude eigenvalue ``lambda_1`` is positive and strictly
dominant.  Normalized power iterates live on the projective space of unit
vectors modulo sign, with metric

    d(x, y) = sqrt(1 - <x, y>^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrum, DimensionMismatch, ValidationError

# Decision threshold for "strictly dominant" (relative); overridable per call.
GAP_TOL = 1e-12
# Construction-time symmetry tolerance (relative to the largest entry).
SYMMETRY_TOL = 1e-8
# Stopping rule for the power-iteration operator norm.
OPNORM_RQ_TOL = 1e-9
_OPNORM_SEED = 20210213


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Dense, exactly symmetric n x n real matrix.

    ``meta`` is free-form provenance (construction parameters of synthetic
    ensembles); it never affects computation.
    """

    array: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = self.array
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 2:
            raise ValidationError("matrix dimension must be at least 2")

    @classmethod
    def from_array(cls, a, *, sym_tol: float = SYMMETRY_TOL, meta: dict | None = None) -> "SymmetricMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("matrix entries must be finite")
        scale = np.max(np.abs(a)) or 1.0
        skew = np.max(np.abs(a - a.T))
        if skew > sym_tol * scale:
            raise ValidationError(f"matrix is not symmetric: max |A - A^T| = {skew:g}")
        # Store an exactly symmetric copy so M_ij == M_ji bit-for-bit.
        sym = (a + a.T) / 2.0
        return cls(_readonly(sym), meta=dict(meta or {}))

    @property
    def n(self) -> int:
        return self.array.shape[0]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Full eigendecomposition, sorted by eigenvalue magnitude (descending).

    ``eigenvalues[0]`` is the dominant eigenvalue (positive by construction),
    ``l2`` the gap ratio |lambda_2| / lambda_1, and ``gamma`` the spectral
    mass ratio sum_i |lambda_i| / lambda_1.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    l2: float
    gamma: float

    def __post_init__(self):
        n = self.eigenvalues.shape[0]
        if not (self.eigenvalues[0] > abs(self.eigenvalues[1])):
            raise DegenerateSpectrum("dominant eigenvalue must be strictly largest in magnitude")
        if not (1.0 <= self.gamma <= n + 1e-9):
            raise ValidationError(f"spectral mass ratio {self.gamma:g} outside [1, n]")

    @property
    def lam(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def u(self) -> np.ndarray:
        """Leading eigenvector, canonical sign (first nonzero coordinate > 0)."""
        return self.eigenvectors[:, 0]


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its first nonzero coordinate is positive."""
    nz = np.nonzero(v)[0]
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A unit vector modulo sign, stored as its canonical representative."""

    rep: np.ndarray

    def __post_init__(self):
        r = self.rep
        if abs(np.linalg.norm(r) - 1.0) > 1e-12:
            raise ValidationError("representative must be unit norm (within 1e-12)")
        nz = np.nonzero(r)[0]
        if nz.size and r[nz[0]] < 0:
            raise ValidationError("representative must have positive first nonzero coordinate")

    @classmethod
    def from_vector(cls, v) -> "ProjectivePoint":
        v = np.asarray(v, dtype=np.float64)
        nrm = np.linalg.norm(v)
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValidationError("cannot project the zero (or non-finite) vector")
        return cls(_readonly(canonical_sign(v / nrm)))

    @property
    def dim(self) -> int:
        return self.rep.shape[0]

    def distance(self, other: "ProjectivePoint") -> float:
        return proj_distance(self, other)


def proj_distance_vec(a: np.ndarray, b: np.ndarray) -> float:
    """d(a, b) = sqrt(1 - <a, b>^2) for unit vectors; sign-invariant.

    Evaluated as the norm of the component of ``a`` orthogonal to ``b``,
    which is the same quantity but stays accurate when the points nearly
    coincide (the textbook form loses half the significant digits there).
    """
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")
    c = float(np.dot(a, b))
    if abs(c) < 0.7:
        return math.sqrt(max(0.0, 1.0 - min(c * c, 1.0)))
    return min(1.0, float(np.linalg.norm(a - c * b)))


def proj_distance(x: ProjectivePoint, y: ProjectivePoint) -> float:
    """Projective metric between two points of the unit-vectors-mod-sign space."""
    return proj_distance_vec(x.rep, y.rep)


def project_orthogonal(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Component of ``x`` orthogonal to the unit vector ``u``: x - <u, x> u."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.shape != u.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {u.shape}")
    return x - np.dot(u, x) * u


def _as_array(a) -> np.ndarray:
    if isinstance(a, SymmetricMatrix):
        return a.array
    return np.asarray(a, dtype=np.float64)


def operator_norm(a, *, rq_tol: float = OPNORM_RQ_TOL, max_iter: int | None = None) -> float:
    """Spectral norm ||A||_2 of a symmetric matrix by power iteration.

    Iterates v <- A(Av)/||A(Av)|| from a deterministic seeded start (so the
    sign-alternation of an indefinite spectrum cannot stall convergence) and
    stops once the Rayleigh-quotient estimate ||Av|| changes by less than
    ``rq_tol`` relative, with an iteration cap of 10 n.
    """
    A = _as_array(a)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    cap = max_iter if max_iter is not None else 10 * n
    rng = np.random.default_rng(_OPNORM_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est_prev = -1.0
    for _ in range(cap):
        w = A @ v
        est = float(np.linalg.norm(w))
        if est == 0.0:
            if not A.any():
                return 0.0
            # v landed in the kernel; restart from a fresh direction.
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        if abs(est - est_prev) <= rq_tol * max(est, 1e-300):
            return est
        est_prev = est
        v = A @ w
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return est
        v /= nv
    return est_prev if est_prev > 0 else 0.0


def spectral_oracle(m: SymmetricMatrix, *, gap_tol: float = GAP_TOL) -> Spectrum:
    """Reference eigendecomposition used as ground truth everywhere.

    Raises ``DegenerateSpectrum`` when the top eigenvalue is not positive or
    not strictly dominant (|lambda_1| - |lambda_2| within ``gap_tol``
    relative), since every estimator here assumes a strict gap.
    """
    if m.n > 5000:
        raise ValidationError("dense decomposition is only supported up to n = 5000")
    w, vecs = np.linalg.eigh(m.array)
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    vecs = vecs[:, order]
    lam1 = float(w[0])
    lam2 = float(abs(w[1]))
    if lam1 <= 0.0:
        raise DegenerateSpectrum(f"dominant eigenvalue must be positive, got {lam1:g}")
    if lam1 - lam2 <= gap_tol * lam1:
        raise DegenerateSpectrum(
            f"no strict spectral gap: lambda_1 = {lam1:g}, |lambda_2| = {lam2:g}"
        )
    vecs = np.ascontiguousarray(vecs)
    for j in range(vecs.shape[1]):
        vecs[:, j] = canonical_sign(vecs[:, j])
    return Spectrum(
        eigenvalues=_readonly(w),
        eigenvectors=_readonly(vecs),
        l2=lam2 / lam1,
        gamma=float(np.abs(w).sum() / lam1),
    )


# ---------------------------------------------------------------------------
# Matrix file format: first line n, then the n(n+1)/2 upper-triangle entries
# (row-major), one matrix row per line, 17 significant digits.


def save_matrix(m: SymmetricMatrix, path) -> None:
    a = m.array
    n = m.n
    with open(path, "w") as fh:
        fh.write(f"{n}\n")
        for i in range(n):
            fh.write(" ".join(f"{x:.17g}" for x in a[i, i:]) + "\n")


def load_matrix(path) -> SymmetricMatrix:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValidationError(f"empty matrix file: {path}")
    try:
        n = int(tokens[0])
    except ValueError as exc:
        raise ValidationError(f"bad matrix header in {path!r}: {tokens[0]!r}") from exc
    expected = n * (n + 1) // 2
    if len(tokens) - 1 != expected:
        raise ValidationError(
            f"matrix file {path!r}: expected {expected} entries for n = {n}, got {len(tokens) - 1}"
        )
    vals = np.array([float(t) for t in tokens[1:]], dtype=np.float64)
    a = np.zeros((n, n))
    iu = np.triu_indices(n)
    a[iu] = vals
    a.T[iu] = vals
    return SymmetricMatrix(_readonly(a))
