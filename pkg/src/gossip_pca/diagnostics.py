"""Empirical diagnostics of the projective Markov chain induced by random
sparsifications: contraction, absorption, mixing, and stationary-mean bias.

Applying independent random matrices to a projective point defines a Markov
chain with a unique stationary law.  Inside the good set

    G = { x : d(x, u) <= 2 theta / (1 - l2) }

around the leading eigenvector the chain is absorbing and contracts pairs
in expectation by rho = 1 - (4/5)(1 - l2) per step.  These routines measure
all of that on a concrete matrix and scheme, by Monte Carlo.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import bounds
from .errors import ValidationError
from .linalg import Spectrum, SymmetricMatrix, proj_distance_vec, spectral_oracle
from .sparsify import Sparsifier, SparsifyScheme, estimate_theta


@dataclass(frozen=True)
class ContractionReport:
    """Measured pairwise contraction of one chain step inside the good set.

    A pair counts as a violation when its conditional mean ratio exceeds the
    bound by more than three standard errors (one-sided).
    """

    rho_empirical: float
    rho_bound: float
    samples: int
    violations: int
    theta: float = 0.0
    l2: float = 0.0
    radius: float = 0.0
    hypothesis_ok: bool = True

    def __post_init__(self):
        if not (0.0 <= self.rho_empirical <= 1.0):
            raise ValidationError(f"mean contraction ratio {self.rho_empirical:g} outside [0, 1]")
        if self.samples < 1000:
            raise ValidationError("contraction measurement needs at least 10^3 pairs")


@dataclass(frozen=True)
class StationarityReport:
    """Mixing curve, fitted decay rate, and stationary-mean bias."""

    mixing_curve: np.ndarray  # |mean_replicas f(X_t) - mu_hat(f)| for t = 0..t_max
    mu_mean_dist: float
    bias_bound: float
    fitted_rate: float
    rho_bound: float
    theta: float
    l2: float
    escapes: int
    total_steps: int
    mu_states: np.ndarray = field(repr=False, default=None)
    mu_f: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if np.any(self.mixing_curve < 0):
            raise ValidationError("mixing curve must be non-negative")


class TimeAverageVariance(NamedTuple):
    estimate: float
    bound: float


def sample_in_good_set(
    u: np.ndarray, radius: float, rng: np.random.Generator, size: int = 1
) -> np.ndarray:
    """Points at projective distance uniform in [0, radius] from u, in a
    uniform random tangent direction.  Returns an (size, n) array."""
    n = u.shape[0]
    out = np.empty((size, n))
    for k in range(size):
        w = rng.standard_normal(n)
        w -= np.dot(u, w) * u
        w /= np.linalg.norm(w)
        r = radius * rng.random()
        out[k] = math.sqrt(max(0.0, 1.0 - r * r)) * u + r * w
    return out


def _resolve(m, scheme, rng, spectrum, theta_hat, theta_trials):
    if spectrum is None:
        spectrum = spectral_oracle(m)
    if theta_hat is None:
        theta_hat = estimate_theta(m, scheme, theta_trials, rng, norm_m=spectrum.lam)
    return spectrum, theta_hat


def _working_radius(theta: float, l2: float) -> tuple[float, bool]:
    """Sampling radius: the good-set radius, capped at the largest radius the
    contraction analysis admits when theta itself is out of hypothesis."""
    hyp_ok = theta <= bounds.sparsity_hypothesis_max_theta(l2)
    radius = bounds.good_set_radius(theta, l2)
    cap = bounds.admissible_radius_cap(l2)
    if radius > cap:
        radius = cap
    return radius, hyp_ok


def _escape_radius(theta: float, l2: float) -> float:
    """Membership test for the good set itself (capped at the metric diameter)."""
    return min(bounds.good_set_radius(theta, l2), 1.0)


def measure_contraction(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    samples: int,
    rng: np.random.Generator,
    *,
    draws_per_pair: int = 100,
    batch_pairs: int = 100,
    spectrum: Spectrum | None = None,
    theta_hat: float | None = None,
    theta_trials: int = 10,
) -> ContractionReport:
    """Estimate E d(Sx, Sy) / d(x, y) over pairs in the good set.

    Pairs are processed in batches; each batch shares a fresh set of
    ``draws_per_pair`` sparsifications, applied jointly to every pair of the
    batch.  When the scheme's measured theta exceeds the hypothesis range the
    measurement proceeds with a warning (the constants are loose), sampling
    within the largest admissible radius instead.
    """
    spectrum, theta_hat = _resolve(m, scheme, rng, spectrum, theta_hat, theta_trials)
    u, l2 = spectrum.u, spectrum.l2
    radius, hyp_ok = _working_radius(theta_hat, l2)
    if not hyp_ok:
        warnings.warn(
            f"measured theta = {theta_hat:.3g} exceeds the contraction hypothesis "
            f"{bounds.sparsity_hypothesis_max_theta(l2):.3g}; proceeding with capped radius",
            stacklevel=2,
        )
    rho_bound = bounds.contraction_factor_bound(l2)
    sp = Sparsifier(m, scheme)
    total_mean = 0.0
    violations = 0
    done = 0
    while done < samples:
        b = min(batch_pairs, samples - done)
        xs = sample_in_good_set(u, radius, rng, b)
        ys = sample_in_good_set(u, radius, rng, b)
        d0 = np.array([proj_distance_vec(xs[k], ys[k]) for k in range(b)])
        keep = d0 > 1e-12
        xs, ys, d0 = xs[keep], ys[keep], d0[keep]
        b = len(d0)
        if b == 0:
            continue
        block = np.vstack([xs, ys]).T  # (n, 2b)
        ratios = np.empty((draws_per_pair, b))
        for j in range(draws_per_pair):
            img = sp.draw(rng).apply_block(block)
            img /= np.linalg.norm(img, axis=0)
            dots = np.einsum("ij,ij->j", img[:, :b], img[:, b:])
            d1 = np.sqrt(np.maximum(0.0, 1.0 - np.minimum(dots * dots, 1.0)))
            ratios[j] = d1 / d0
        pair_means = ratios.mean(axis=0)
        pair_sems = ratios.std(axis=0, ddof=1) / math.sqrt(draws_per_pair)
        violations += int(np.sum(pair_means - 3.0 * pair_sems > rho_bound))
        total_mean += float(pair_means.sum())
        done += b
    return ContractionReport(
        rho_empirical=total_mean / done,
        rho_bound=rho_bound,
        samples=done,
        violations=violations,
        theta=theta_hat,
        l2=l2,
        radius=radius,
        hypothesis_ok=hyp_ok,
    )


def chain_step(sp: Sparsifier, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    y = sp.draw(rng).apply(x)
    return y / np.linalg.norm(y)


def absorbing_escapes(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    chains: int,
    steps: int,
    rng: np.random.Generator,
    *,
    spectrum: Spectrum | None = None,
    theta_hat: float | None = None,
    theta_trials: int = 10,
) -> tuple[int, int]:
    """Run ``chains`` independent chains for ``steps`` steps from starts in
    the good set; return (escape count, total steps taken)."""
    spectrum, theta_hat = _resolve(m, scheme, rng, spectrum, theta_hat, theta_trials)
    u = spectrum.u
    radius, _ = _working_radius(theta_hat, spectrum.l2)
    g_radius = _escape_radius(theta_hat, spectrum.l2)
    sp = Sparsifier(m, scheme)
    escapes = 0
    total = 0
    for _ in range(chains):
        x = sample_in_good_set(u, radius, rng, 1)[0]
        for _ in range(steps):
            x = chain_step(sp, x, rng)
            total += 1
            if proj_distance_vec(x, u) > g_radius:
                escapes += 1
    return escapes, total


def measure_mixing(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    t_max: int | None,
    replicas: int,
    rng: np.random.Generator,
    *,
    spectrum: Spectrum | None = None,
    theta_hat: float | None = None,
    theta_trials: int = 10,
    tail_fraction: float = 0.25,
) -> StationarityReport:
    """Evolve ``replicas`` copies of the normalized chain from one common
    start in the good set and compare the probe average E f(X_t),
    f(x) = <v, x>^2 for a fixed random v, against its long-run value.

    The stationary law is approximated by the empirical distribution over
    the trailing ``tail_fraction`` of rounds, pooled across replicas.  Also
    reports the projective distance between the eigenvector and the
    (sign-aligned) stationary mean, with its theoretical bound.
    """
    if replicas < 100:
        raise ValidationError("mixing measurement needs at least 100 replicas")
    spectrum, theta_hat = _resolve(m, scheme, rng, spectrum, theta_hat, theta_trials)
    u, l2 = spectrum.u, spectrum.l2
    g_radius = _escape_radius(theta_hat, l2)
    rho = bounds.contraction_factor_bound(l2)
    if t_max is None:
        t_max = math.ceil(10.0 * math.log(1e3) / (1.0 - rho))
    n = m.n
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    # Start on the good-set boundary, displaced along the slowest-mixing
    # tangent direction (the second eigenvector): generic tangents relax in
    # one or two rounds, which would leave nothing to fit a rate to.
    r0 = min(g_radius, 0.9)
    w = spectrum.eigenvectors[:, 1]
    x0 = math.sqrt(1.0 - r0**2) * u + r0 * w

    sp = Sparsifier(m, scheme)
    tail_start = max(1, int(round((1.0 - tail_fraction) * t_max)))
    probe_vals = np.empty((replicas, t_max + 1))
    probe_vals[:, 0] = np.dot(v, x0) ** 2
    tail_sum = np.zeros(n)
    tail_f_sum = 0.0
    tail_count = 0
    final_states = np.empty((replicas, n))
    escapes = 0
    total = 0
    for r in range(replicas):
        x = x0.copy()
        for t in range(1, t_max + 1):
            x = chain_step(sp, x, rng)
            total += 1
            if proj_distance_vec(x, u) > g_radius:
                escapes += 1
            probe_vals[r, t] = np.dot(v, x) ** 2
            if t >= tail_start:
                tail_sum += x * (1.0 if np.dot(x, u) >= 0 else -1.0)
                tail_f_sum += probe_vals[r, t]
                tail_count += 1
        final_states[r] = x
    mu_f_probe = tail_f_sum / tail_count
    curve = np.abs(probe_vals.mean(axis=0) - mu_f_probe)
    mu_f_vec = tail_sum / tail_count
    mean_dir = mu_f_vec / np.linalg.norm(mu_f_vec)
    mu_mean_dist = proj_distance_vec(u, mean_dir)

    fitted = _fit_decay_rate(curve, probe_vals, replicas)
    return StationarityReport(
        mixing_curve=curve,
        mu_mean_dist=mu_mean_dist,
        bias_bound=bounds.stationary_mean_bias_bound(theta_hat, l2),
        fitted_rate=fitted,
        rho_bound=rho,
        theta=theta_hat,
        l2=l2,
        escapes=escapes,
        total_steps=total,
        mu_states=final_states,
        mu_f=mu_f_vec,
    )


def _fit_decay_rate(curve: np.ndarray, probe_vals: np.ndarray, replicas: int) -> float:
    """Least-squares exponent of the probe gap over the rounds where it still
    stands clear of the Monte Carlo noise floor."""
    floor = 3.0 * probe_vals[:, -1].std(ddof=1) / math.sqrt(replicas)
    ts = []
    for t in range(len(curve)):
        if curve[t] > max(floor, 1e-300):
            ts.append(t)
        else:
            break
    if len(ts) < 3:
        return float("nan")
    ts = np.asarray(ts)
    slope = np.polyfit(ts, np.log(curve[ts]), 1)[0]
    return float(math.exp(slope))


def variance_of_time_average(
    m: SymmetricMatrix,
    scheme: SparsifyScheme,
    t: int,
    replicas: int,
    rng: np.random.Generator,
    *,
    mixing: StationarityReport | None = None,
    spectrum: Spectrum | None = None,
    theta_hat: float | None = None,
    theta_trials: int = 10,
) -> TimeAverageVariance:
    """Monte Carlo estimate of E || (1/t) sum_{l=1..t} f(X_l) - mu(f) ||^2
    with f the eigenvector-aligned unit representative, against its bound
    70 theta^2 / ((1 - l2)^2 t).

    Stationary-start replicas are taken from a mixing run (supplied or run
    here), whose pooled tail also provides the reference mu(f).
    """
    spectrum, theta_hat = _resolve(m, scheme, rng, spectrum, theta_hat, theta_trials)
    if mixing is None:
        mixing = measure_mixing(
            m, scheme, None, max(replicas, 100), rng, spectrum=spectrum, theta_hat=theta_hat
        )
    u = spectrum.u
    mu_f = mixing.mu_f
    starts = mixing.mu_states
    sp = Sparsifier(m, scheme)
    sq = 0.0
    for r in range(replicas):
        x = starts[r % len(starts)]
        acc = np.zeros(m.n)
        for _ in range(t):
            x = chain_step(sp, x, rng)
            acc += x * (1.0 if np.dot(x, u) >= 0 else -1.0)
        diff = acc / t - mu_f
        sq += float(np.dot(diff, diff))
    return TimeAverageVariance(
        estimate=sq / replicas,
        bound=bounds.time_average_variance_bound(theta_hat, spectrum.l2, t),
    )


def mixing_curve_csv(report: StationarityReport) -> str:
    """Mixing curve as CSV text with columns t, probe_gap."""
    lines = ["t,probe_gap"]
    lines += [f"{t},{float(gap)!r}" for t, gap in enumerate(report.mixing_curve)]
    return "\n".join(lines) + "\n"


def report_text(contraction: ContractionReport, stationarity: StationarityReport | None = None) -> str:
    """Structured-text summary block for the diagnostics reports."""
    lines = [
        "contraction:",
        f"  rho_empirical = {contraction.rho_empirical!r}",
        f"  rho_bound = {contraction.rho_bound!r}",
        f"  samples = {contraction.samples}",
        f"  violations = {contraction.violations}",
        f"  theta = {contraction.theta!r}",
        f"  l2 = {contraction.l2!r}",
        f"  radius = {contraction.radius!r}",
        f"  hypothesis_ok = {contraction.hypothesis_ok}",
    ]
    if stationarity is not None:
        lines += [
            "stationarity:",
            f"  mu_mean_dist = {stationarity.mu_mean_dist!r}",
            f"  bias_bound = {stationarity.bias_bound!r}",
            f"  fitted_rate = {stationarity.fitted_rate!r}",
            f"  rho_bound = {stationarity.rho_bound!r}",
            f"  escapes = {stationarity.escapes}",
            f"  total_steps = {stationarity.total_steps}",
        ]
    return "\n".join(lines) + "\n"
