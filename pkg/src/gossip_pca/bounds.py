"""Closed-form constants and error bounds for the random-sparsification
power iteration.

Conventions: ``theta`` bounds the relative spectral-norm deviation
``||S - M||_2 <= theta ||M||_2`` of one sparsification, ``l2`` is the
eigenvalue ratio |lambda_2| / lambda_1, ``alpha`` the entrywise-variance
scale max Var(S_ij) <= (alpha / n) ||M||_2^2, and ``gamma`` the spectral
mass sum_i |lambda_i| / lambda_1.  Logs are natural unless named otherwise.
"""

from __future__ import annotations

import math


def contraction_factor_bound(l2: float) -> float:
    """Per-step contraction rate of the projective chain inside the good set:
    rho = 1 - (4/5)(1 - l2)."""
    return 1.0 - 0.8 * (1.0 - l2)


def good_set_radius(theta: float, l2: float) -> float:
    """Radius 2 theta / (1 - l2) of the absorbing ball around the eigenvector."""
    return 2.0 * theta / (1.0 - l2)


def admissible_radius_cap(l2: float) -> float:
    """Largest ball radius for which absorption/contraction is guaranteed:
    sqrt(1 - l2) / 20."""
    return math.sqrt(1.0 - l2) / 20.0


def sparsity_hypothesis_max_theta(l2: float) -> float:
    """Largest theta covered by the contraction analysis: (1 - l2)^{3/2} / 40."""
    return (1.0 - l2) ** 1.5 / 40.0


def averaged_eigvec_error_bound(theta: float, l2: float, t: int, delta: float) -> float:
    """High-probability error of the iterate-averaged eigenvector estimate:

        18 theta / ((1 - l2) sqrt(t delta)) + 12 (theta log(1/theta) / (1 - l2))^2,

    holding with probability at least 1 - max(delta, 16 / n^2).
    """
    if theta <= 0.0:
        return 0.0
    gap = 1.0 - l2
    return 18.0 * theta / (gap * math.sqrt(t * delta)) + 12.0 * (
        theta * math.log(1.0 / theta) / gap
    ) ** 2


def bias_degradation_term(theta_prime: float, l2: float) -> float:
    """Extra error when the sparsification mean is off by theta' in norm:
    2 theta' / (1 - l2)."""
    return 2.0 * theta_prime / (1.0 - l2)


def time_average_variance_bound(theta: float, l2: float, t: int) -> float:
    """Bound on E || (1/t) sum_l f(X_l) - mu(f) ||^2: 70 theta^2 / ((1-l2)^2 t)."""
    return 70.0 * theta**2 / ((1.0 - l2) ** 2 * t)


def single_state_variance_bound(theta: float, l2: float) -> float:
    """Pointwise bound || f(X) - mu(f) ||^2 <= 20 theta^2 / (1 - l2)^2 inside the good set."""
    return 20.0 * theta**2 / (1.0 - l2) ** 2


def stationary_mean_bias_bound(theta: float, l2: float) -> float:
    """Distance of the stationary barycenter from the eigenvector:
    8 (theta log(1/theta) / (1 - l2))^2."""
    if theta <= 0.0:
        return 0.0
    return 8.0 * (theta * math.log(1.0 / theta) / (1.0 - l2)) ** 2


def warm_start_quality(theta: float, l2: float) -> float:
    """Relative norm accuracy the dedicated warm-start sparsification must meet:
    theta^2 / (2 (1 - l2))."""
    return theta**2 / (2.0 * (1.0 - l2))


def warm_start_rounds(n: int, theta: float, l2: float) -> int:
    """Number of fixed-matrix iterations after which a Gaussian start lands
    within theta / (1 - l2) of the eigenvector: ceil(3 log(n/theta) / (1 - l2 - theta))."""
    return math.ceil(3.0 * math.log(n / theta) / (1.0 - l2 - theta))


def warm_start_target_radius(theta: float, l2: float) -> float:
    """theta / (1 - l2), the warm-start accuracy target."""
    return theta / (1.0 - l2)


def eigenvalue_error_bound(n: int, t: int, delta: float, alpha: float, gamma: float) -> float:
    """Three-term relative-error bound for the log-scale eigenvalue estimate:

        max( 8 sqrt(2) / (t n sqrt(delta)),
             32 sqrt(alpha gamma^{3/2} log n / (t^2 delta)),
             48 sqrt(alpha gamma^3 (log n)^2 / (t n delta)) ).
    """
    ln = math.log(n)
    return max(
        8.0 * math.sqrt(2.0) / (t * n * math.sqrt(delta)),
        32.0 * math.sqrt(alpha * gamma**1.5 * ln / (t**2 * delta)),
        48.0 * math.sqrt(alpha * gamma**3 * ln**2 / (t * n * delta)),
    )


def eigenvalue_round_window(n: int, l2: float, alpha: float, gamma: float) -> tuple[float, float]:
    """Admissible iteration range (t_min, t_max) for the eigenvalue estimator:
    max(log2 n, 2 log_{1/l2} n) <= t <= n / (4 alpha gamma)."""
    t_min = max(math.log2(n), 2.0 * math.log(n) / math.log(1.0 / l2))
    t_max = n / (4.0 * alpha * gamma)
    return t_min, t_max
