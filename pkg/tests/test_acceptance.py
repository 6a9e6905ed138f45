"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The paper-scale tradeoff
profile (criterion 7) is marked nightly; enable it with GOSSIP_PCA_NIGHTLY=1.
"""

import math
import subprocess
import sys
import warnings

import numpy as np
import pytest

import gossip_pca as gp
import gossip_pca.bounds as bounds
from gossip_pca.estimators import eigenvalue_from_trajectory
from gossip_pca.experiments import load_config, run_tradeoff, run_warmstart_table, summarize_warmstart

CFG = gp.GossipAvgConfig(epsilon=1e-6)


def _report(num, name, ok, detail=""):
    print(f"\n[ACCEPTANCE {num}] {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.mark.acceptance
def test_criterion_1_averaged_eigvec_bound(spiked_200):
    """Averaged-estimator error bound at n=200, l2=0.5, theta~0.1, t=400."""
    m, spec = spiked_200
    rng = np.random.default_rng(2024)
    scale = gp.calibrate_scale(m, rng, trials=4)
    d = gp.d_for_theta(200, scale, 0.1)
    scheme = gp.SparsifyScheme(n=200, d=d)
    theta = gp.estimate_theta(m, scheme, 20, rng, norm_m=spec.lam)
    assert 0.07 <= theta <= 0.13, f"calibration drifted: theta_hat={theta:.3f}"
    delta, t = 0.1, 400
    bound = bounds.averaged_eigvec_error_bound(theta, spec.l2, t, delta)

    trials, ok_count = 200, 0
    errs = []
    for seed in range(trials):
        trial_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        ledger = gp.ComplexityLedger()
        x0 = gp.warm_start(m, scheme, theta, spec.l2, trial_rng, ledger,
                           scale=scale, norm_m=spec.lam)
        est, _ = gp.gossip_pca(m, scheme, x0, t, CFG, trial_rng, ledger,
                               keep_trajectory=False, oracle_u=spec.u)
        errs.append(est.err_vs_oracle)
        ok_count += est.err_vs_oracle <= bound
    ok = ok_count >= 0.9 * trials
    assert _report(
        1, "averaged eigenvector error bound", ok,
        f"{ok_count}/{trials} within bound {bound:.3f}; median err {np.median(errs):.4f}",
    )


@pytest.mark.acceptance
def test_criterion_2_contraction(sign_256):
    """Pairwise contraction <= 1 - 0.8 (1 - l2), zero violations."""
    m, spec = sign_256
    rng = np.random.default_rng(9)
    scale = gp.calibrate_scale(m, rng, trials=4)
    scheme = gp.SparsifyScheme(n=256, d=gp.d_for_theta(256, scale, 0.01))
    theta = gp.estimate_theta(m, scheme, 10, rng, norm_m=spec.lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = gp.measure_contraction(m, scheme, 1000, rng, draws_per_pair=100,
                                     spectrum=spec, theta_hat=theta)
    ok = rep.violations == 0 and rep.rho_empirical <= rep.rho_bound
    assert _report(
        2, "chain contraction", ok,
        f"rho_emp={rep.rho_empirical:.4f} <= {rep.rho_bound:.4f}, "
        f"violations={rep.violations}/1000 pairs x 100 draws (theta={theta:.4f})",
    )


@pytest.mark.acceptance
def test_criterion_3_absorbing_set():
    """No escapes from the good set over >= 1e5 chain steps."""
    rng = np.random.default_rng(21)
    m = gp.make_synthetic(256, 0.25, rng, spike_kind="sign", noise_edge=0.01)
    spec = gp.spectral_oracle(m)
    scale = gp.calibrate_scale(m, rng, trials=4)
    scheme = gp.SparsifyScheme(n=256, d=gp.d_for_theta(256, scale, 0.009))
    theta = gp.estimate_theta(m, scheme, 20, rng, norm_m=spec.lam)
    hyp = bounds.sparsity_hypothesis_max_theta(spec.l2)
    assert theta <= hyp, f"scheme out of hypothesis: {theta:.4f} > {hyp:.4f}"
    escapes, total = gp.absorbing_escapes(m, scheme, 100, 1000, rng,
                                          spectrum=spec, theta_hat=theta)
    ok = escapes == 0 and total >= 100_000
    assert _report(3, "absorbing good set", ok,
                   f"{escapes} escapes in {total} steps (theta={theta:.4f} <= {hyp:.4f})")


@pytest.mark.acceptance
def test_criterion_4_time_average_variance_and_bias(sign_256):
    """Time-average variance bound at t in {10,100,1000}; stationary-mean
    bias bound at theta in {0.02, 0.05}; 500 replicas each."""
    m, spec = sign_256
    rng = np.random.default_rng(31)
    scale = gp.calibrate_scale(m, rng, trials=4)
    details = []
    ok = True

    mixing_05 = None
    for theta_target in (0.05, 0.02):
        scheme = gp.SparsifyScheme(n=256, d=gp.d_for_theta(256, scale, theta_target))
        theta = gp.estimate_theta(m, scheme, 10, rng, norm_m=spec.lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mixing = gp.measure_mixing(m, scheme, 60, 500, rng,
                                       spectrum=spec, theta_hat=theta)
        ok &= mixing.mu_mean_dist <= mixing.bias_bound
        details.append(f"bias(theta={theta:.3f})={mixing.mu_mean_dist:.2e}<={mixing.bias_bound:.2e}")
        if theta_target == 0.05:
            mixing_05 = (scheme, theta, mixing)

    scheme, theta, mixing = mixing_05
    for t in (10, 100, 1000):
        va = gp.variance_of_time_average(m, scheme, t, 500, rng, mixing=mixing,
                                         spectrum=spec, theta_hat=theta)
        ok &= va.estimate <= va.bound
        details.append(f"var(t={t})={va.estimate:.2e}<={va.bound:.2e}")
    assert _report(4, "time-average variance and stationary bias", ok, "; ".join(details))


@pytest.mark.acceptance
def test_criterion_5_warm_start_failure_rate():
    """Warm start reaches theta/(1-l2), failure rate <= 3/n^2 at n=100 over
    1e4 trials (probability is over the Gaussian start for a premise-checked
    fixed sparsification)."""
    rng = np.random.default_rng(77)
    m = gp.make_synthetic(100, 0.5, rng, spike_kind="sign", noise_edge=0.05)
    spec = gp.spectral_oracle(m)
    theta = 0.35
    quality = bounds.warm_start_quality(theta, spec.l2)
    scale = gp.calibrate_scale(m, rng, trials=4)
    d_ws = gp.d_for_theta(100, scale, 0.8 * quality)
    t_star = bounds.warm_start_rounds(100, theta, spec.l2)
    target = bounds.warm_start_target_radius(theta, spec.l2)

    fails = 0
    trials_per_batch, batches = 2500, 4
    for b in range(batches):
        brng = np.random.default_rng(np.random.SeedSequence(1000 + b))
        sample = None
        for _ in range(10):
            cand = gp.draw(m, gp.SparsifyScheme(n=100, d=d_ws), brng)
            if gp.operator_norm(cand.to_dense() - m.array) / spec.lam <= quality:
                sample = cand
                break
        assert sample is not None, "could not draw a premise-satisfying sparsification"
        X = brng.standard_normal((100, trials_per_batch)) / math.sqrt(100)
        X = gp.power_iterate_fixed(sample, X, t_star)
        dots = spec.u @ X
        dists = np.sqrt(np.maximum(0.0, 1.0 - np.minimum(dots * dots, 1.0)))
        fails += int(np.sum(dists > target))
    allowed = 3.0 / 100**2 * (trials_per_batch * batches)
    ok = fails <= allowed
    assert _report(5, "warm-start failure rate", ok,
                   f"{fails} failures in {trials_per_batch * batches} trials (allowed {allowed:.0f})")


@pytest.mark.acceptance
def test_criterion_6_meeting_table_trends():
    """Meeting-time table: tau strictly decreasing in d; err(40)/err(160) in
    [1.6, 2.5]; err(320) within [0.5x, 2x] of 0.0329; tau(320) within +-2 of 3.7."""
    cfg = load_config("fixtures/warmstart_table.cfg")
    summary = summarize_warmstart(run_warmstart_table(cfg))
    taus = [summary[d][0] for d in (40.0, 80.0, 160.0, 320.0)]
    errs = {d: summary[d][1] for d in (40.0, 80.0, 160.0, 320.0)}
    checks = {
        "tau strictly decreasing": all(a > b for a, b in zip(taus, taus[1:])),
        "err40/err160": 1.6 <= errs[40.0] / errs[160.0] <= 2.5,
        "err320 band": 0.5 * 0.0329 <= errs[320.0] <= 2.0 * 0.0329,
        "tau320 band": abs(taus[-1] - 3.7) <= 2.0,
    }
    ok = all(checks.values())
    assert _report(
        6, "meeting-table trends", ok,
        f"tau={[round(t, 2) for t in taus]}, err={ {int(k): round(v, 4) for k, v in errs.items()} }, "
        f"checks={checks}",
    )


@pytest.mark.acceptance
@pytest.mark.nightly
def test_criterion_7_tradeoff_profile():
    """Paper-scale budget tradeoff: fixed-sparsification crossover in
    [5000, 50000]; averaging method prefers d=50 at every budget; its log-log
    slope lies in [-0.65, -0.35]."""
    cfg = load_config("fixtures/paper_fig1.cfg")
    summary = run_tradeoff(cfg)
    cross_ok = summary.crossover_chi is not None and 5000 <= summary.crossover_chi <= 50000
    argmin_ok = all(v == 50.0 for v in summary.gossip_argmin_d.values())
    slope_ok = -0.65 <= summary.gossip_slope <= -0.35
    ok = cross_ok and argmin_ok and slope_ok
    assert _report(
        7, "budget tradeoff profile", ok,
        f"crossover={summary.crossover_chi}, argmin_d50={argmin_ok}, "
        f"slope={summary.gossip_slope:.3f}",
    )


@pytest.mark.acceptance
def test_criterion_8_eigenvalue_bound():
    """Eigenvalue relative error within the three-term bound in >= 90% of 200
    trials at n=512, with t inside the admissible window."""
    rng = np.random.default_rng(5)
    m = gp.make_synthetic(512, 0.5, rng, spike_kind="sign", noise_edge=0.02)
    spec = gp.spectral_oracle(m)
    d = 64.0
    scheme = gp.SparsifyScheme(n=512, d=d)
    alpha = gp.estimate_alpha(m, scheme, 40, rng, norm_m=spec.lam).analytic
    assert alpha < 0.5
    assert alpha <= 10.0 / d  # the scheme's variance scale is O(1/d)
    t = 128
    t_min, t_max = bounds.eigenvalue_round_window(512, spec.l2, alpha, spec.gamma)
    assert t_min <= t <= t_max, f"t={t} outside window [{t_min:.0f}, {t_max:.0f}]"
    delta = 0.1
    bound = bounds.eigenvalue_error_bound(512, t, delta, alpha, spec.gamma)

    trials, ok_count = 200, 0
    rel_errs = []
    for seed in range(trials):
        trial_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8,)))
        est = gp.estimate_eigenvalue(m, scheme, t, CFG, trial_rng, gp.ComplexityLedger())
        rel = abs(est.lambda_hat - spec.lam) / spec.lam
        rel_errs.append(rel)
        ok_count += rel <= bound
    ok = ok_count >= 0.9 * trials
    assert _report(
        8, "eigenvalue error bound", ok,
        f"{ok_count}/{trials} within bound {bound:.3f}; median rel err {np.median(rel_errs):.4f} "
        f"(alpha={alpha:.4f}, gamma={spec.gamma:.2f}, window=[{t_min:.0f},{t_max:.0f}])",
    )


@pytest.mark.acceptance
def test_criterion_9_oracle_equivalence():
    """d = n runs reproduce the dense power method: the averaged estimate
    matches its eigenvector to 1e-8, and every multiply round matches the
    dense product to 1e-12."""
    ok_vec = True
    for n, seed in ((8, 0), (12, 1), (16, 2)):
        rng = np.random.default_rng(seed)
        m = gp.make_synthetic(n, 0.5, rng, noise_edge=0.3)
        # dense power method, the independent reference
        x = np.random.default_rng(100 + seed).standard_normal(n)
        x /= np.linalg.norm(x)
        for _ in range(600):
            x = m.array @ x
            x /= np.linalg.norm(x)
        u_pm = x
        est, _ = gp.gossip_pca(m, gp.SparsifyScheme(n=n, d=float(n)), u_pm, 200, CFG,
                               rng, gp.ComplexityLedger())
        ok_vec &= gp.proj_distance_vec(est.u_hat, u_pm) <= 1e-8

    rng = np.random.default_rng(123)
    ok_spmv = True
    for _ in range(100):
        n = int(rng.integers(4, 17))
        a = rng.standard_normal((n, n))
        m = gp.SymmetricMatrix.from_array((a + a.T) / 2)
        s = gp.draw(m, gp.SparsifyScheme(n=n, d=float(n)), rng)
        x = rng.standard_normal(n)
        got = gp.spmv_round(gp.NetworkState(values=x), s, gp.ComplexityLedger()).values
        ok_spmv &= bool(np.allclose(got, m.array @ x, atol=1e-12))
        ok_spmv &= bool(np.array_equal(s.to_dense(), m.array))
    ok = ok_vec and ok_spmv
    assert _report(9, "oracle equivalence at d = n", ok,
                   f"eigvec match {ok_vec}, multiply match {ok_spmv}")


def _cli_bytes(args, env_extra=None):
    import os

    env = dict(os.environ)
    env.update(env_extra or {})
    proc = subprocess.run(
        [sys.executable, "-c", "from gossip_pca.cli import main; main()"] + args,
        capture_output=True, env=env, cwd=".",
    )
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


@pytest.mark.acceptance
def test_criterion_10_cli_byte_reproducible(tmp_path):
    """Every subcommand is byte-identical across reruns and worker counts."""
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "experiment = tradeoff\nn = 64\nd_list = 8, 32\nchi_list = 200, 400\n"
        "seeds = 0, 1, 2\nl2_target = 0.5\nmatrix_seed = 7\n"
    )
    commands = [
        ["eigvec", "--n", "32", "--d", "8", "--t", "20", "--seed", "7"],
        ["eigval", "--n", "32", "--d", "16", "--t", "20", "--seed", "7"],
        ["warmstart-table", "--n", "64", "--d", "16", "--seed", "1"],
        ["tradeoff", "--config", str(cfg)],
        ["positioning", "--n", "48", "--d", "12", "--seed", "2"],
        ["diagnose", "--n", "64", "--d", "16", "--seed", "3"],
    ]
    ok = True
    details = []
    for args in commands:
        one = _cli_bytes(args, {"GOSSIP_PCA_THREADS": "1"})
        two = _cli_bytes(args, {"GOSSIP_PCA_THREADS": "1"})
        four = _cli_bytes(args, {"GOSSIP_PCA_THREADS": "4"})
        same = one == two == four
        ok &= same
        details.append(f"{args[0]}:{'=' if same else '!'}")
    assert _report(10, "CLI byte reproducibility", ok, " ".join(details))
