"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Expected values come from closed forms or from an independent computation
route (scalar companion matrices, exact LU policy evaluation, closed-form
discretisation eigenvalues); none is taken from the code under test.
"""
import time

import numpy as np
import pytest

from accelfp.mdp import (
    BellmanOperator,
    bellman_apply,
    bellman_davi_solve,
    bellman_vi_solve,
    dapi_solve,
    exact_policy_value,
    policy_iteration_exact,
    policy_problem,
    positive_part,
    top_seminorm,
)
from accelfp.numeric import dense_eigenvalues, match_multisets, poly_roots, spectral_radius
from accelfp.params import AccelConfig, alpha_star, d_accel_alphas, flying_saucer_params, u_coeffs
from accelfp.problems import (
    HjbSpec,
    RandomMdpSpec,
    gen_random_mdp,
    hjb_discretize,
    hjb_eigen_oracle,
    hjb_imag_bound,
    hjb_policy_matrix,
    hjb_preset,
)
from accelfp.regions import BOUNDARY, INSIDE, in_sigma_d, inner_disk_radius, normalized_preimage_roots, tolerance_g0
from accelfp.solvers import AffineProblem, build_companion, davi_solve


def scalar_companion_radius(z, d, alpha):
    """Largest root modulus of lam**d - z U(lam), via a 1x1 companion block and LAPACK."""
    q = build_companion(np.array([[z]], dtype=complex), d, alpha)
    return float(np.max(np.abs(np.linalg.eigvals(q))))


def block_diag_real(values):
    """Real matrix with the given spectrum: 2x2 rotation blocks for each conjugate pair."""
    blocks = []
    for z in values:
        if abs(z.imag) > 0:
            blocks.append(np.array([[z.real, -z.imag], [z.imag, z.real]]))
        else:
            blocks.append(np.array([[z.real]]))
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


def rate_run(P, d, alpha, beta=1.0, max_iter=2000):
    prob = AffineProblem(P, np.zeros(P.shape[0]))
    cfg = AccelConfig(degree=d, alpha=tuple(alpha), beta=beta, delta=1e-300, max_iter=max_iter)
    return davi_solve(prob, np.ones(P.shape[0]), cfg)


# ---------------------------------------------------------------- 1


def test_criterion_01_companion_spectrum(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for d in (2, 3, 4):
        for _ in range(50):
            P = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
            alpha = rng.uniform(-1.0, 1.0, d - 1)
            eig = dense_eigenvalues(build_companion(P, d, alpha))
            U = u_coeffs(alpha)
            ref = np.concatenate([poly_roots(np.concatenate([[1.0], -delta * U])) for delta in np.linalg.eigvals(P)])
            worst = max(worst, match_multisets(eig, ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    criterion(1, "companion spectrum identity", ok, f"max mismatch {worst:.2e} (tol 1e-8), {elapsed:.2f}s")
    assert worst <= 1e-8
    assert elapsed < 5


# ---------------------------------------------------------------- 2


def test_criterion_02_optimal_degree_two_rate(criterion):
    t0 = time.perf_counter()
    eps = 0.01
    spectrum = np.concatenate([np.linspace(0.0, 1.0 - eps, 19), [1.0 - eps]])
    P = np.diag(spectrum)
    alpha = [alpha_star(eps)]
    rho = spectral_radius(build_companion(P, 2, alpha))
    trace = rate_run(P, 2, alpha, max_iter=2000)
    elapsed = time.perf_counter() - t0
    ok = abs(rho - 0.9) <= 1e-10 and abs(trace.measured_rate - 0.9) <= 5e-3 and trace.iterations >= 2000 and elapsed < 5
    criterion(2, "optimal degree-2 rate", ok,
              f"rho(Q)={rho:.12f}, measured={trace.measured_rate:.5f} over {trace.iterations} iterations, {elapsed:.2f}s")
    assert abs(rho - 0.9) <= 1e-10
    assert trace.iterations >= 2000
    assert abs(trace.measured_rate - 0.9) <= 5e-3
    assert elapsed < 5


# ---------------------------------------------------------------- 3


def _sample_points(rng, d, eps, count, band):
    bound = 1.0 - eps ** (1.0 / d)
    alpha = d_accel_alphas(d, eps)
    pts, radii = [], []
    while len(pts) < count:
        # uniform radius puts more mass near 0, where the higher-degree regions live
        z = rng.uniform(0.0, 1.1) * np.exp(2j * np.pi * rng.uniform())
        rho = scalar_companion_radius(z, d, alpha)
        # skip the boundary band, measured on the independent radius
        if abs(rho - bound) <= band * bound:
            continue
        pts.append(z)
        radii.append(rho)
    return np.array(pts), np.array(radii)


def test_criterion_03_region_iff(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    eps = 0.01
    mismatches, worst_inside, min_outside_excess, n_in, n_out = 0, -np.inf, np.inf, 0, 0
    for d in (2, 3, 4):
        bound = 1.0 - eps ** (1.0 / d)
        alpha = d_accel_alphas(d, eps)
        pts, radii = _sample_points(rng, d, eps, 200, 1e-6)
        statuses = [in_sigma_d(z, d, eps, band=1e-6).status for z in pts]
        inside_pred = np.array([s == INSIDE for s in statuses])
        mismatches += int(np.sum(inside_pred != (radii <= bound)))
        mismatches += sum(s == BOUNDARY for s in statuses)
        inside = pts[inside_pred]
        outside = pts[~inside_pred]
        n_in += inside.size
        n_out += outside.size
        # diagonal matrix from all inside points: rate within the bound
        rho = spectral_radius(build_companion(np.diag(inside[:40]), d, alpha))
        worst_inside = max(worst_inside, rho - bound)
        # any single outside point pushes the rate above the bound
        base = inside[:8]
        for z in outside[:25]:
            rho = spectral_radius(build_companion(np.diag(np.append(base, z)), d, alpha))
            min_outside_excess = min(min_outside_excess, rho - bound)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and worst_inside <= 1e-9 and min_outside_excess > 0 and elapsed < 30
    criterion(3, "region membership iff rate", ok,
              f"{n_in} inside / {n_out} outside points, {mismatches} mismatches, "
              f"inside rho-bound max {worst_inside:.2e}, outside rho-bound min {min_outside_excess:.2e}, {elapsed:.1f}s")
    assert mismatches == 0
    assert worst_inside <= 1e-9
    assert min_outside_excess > 0
    assert elapsed < 30


# ---------------------------------------------------------------- 4


def test_criterion_04_flying_saucer(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    eps = 0.04
    params = flying_saucer_params(eps)
    radius = (1.0 - eps) / 2.0
    disk = np.sqrt(rng.uniform(0, 1, 12)) * radius * np.exp(1j * rng.uniform(0, np.pi, 12))
    rim = radius * np.exp(1j * np.linspace(0.1, np.pi - 0.1, 5))
    segment = np.concatenate([rng.uniform(-1 + eps, 1 - eps, 12), [-1 + eps, 1 - eps]])
    P = block_diag_real(np.concatenate([disk, rim, segment + 0j]))
    trace = rate_run(P, 2, [params.alpha], beta=params.beta, max_iter=2000)
    bound = 1.0 - np.sqrt(2.0 * eps / 3.0)
    elapsed = time.perf_counter() - t0
    ok = trace.measured_rate <= bound + 5e-3 and elapsed < 10
    criterion(4, "flying saucer damping", ok,
              f"measured={trace.measured_rate:.5f} <= {bound:.5f}+5e-3 (n={P.shape[0]}), {elapsed:.2f}s")
    assert trace.measured_rate <= bound + 5e-3
    assert elapsed < 10


# ---------------------------------------------------------------- 5


def test_criterion_05_tolerance_sharpness(criterion):
    t0 = time.perf_counter()
    worst, argmax_real = 0.0, True
    for d in (2, 3):
        for h in (0.01, 0.1, 1.0):
            zs = 1.0 + h * np.exp(2j * np.pi * np.arange(256) / 256)
            dev = np.array([np.max(np.abs(normalized_preimage_roots(z, d) - 1.0)) for z in zs])
            worst = max(worst, abs(dev.max() - tolerance_g0(d, h)))
            argmax_real &= int(np.argmax(dev)) == 0
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and argmax_real and elapsed < 5
    criterion(5, "tolerance sharpness", ok,
              f"max |sup deviation - g0| {worst:.2e} (tol 1e-6), maximum at 1+h: {argmax_real}, {elapsed:.2f}s")
    assert worst <= 1e-6
    assert argmax_real
    assert elapsed < 5


# ---------------------------------------------------------------- 6


def test_criterion_06_robust_acceleration(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    d, eps, a = 3, 1e-3, 0.5
    r0 = inner_disk_radius(d, eps)
    near_zero = np.sqrt(rng.uniform(0, 1, 10)) * r0 * np.exp(1j * rng.uniform(0, np.pi, 10))
    near_one = (1 - eps) + np.sqrt(rng.uniform(0, 1, 10)) * a * eps * np.exp(1j * rng.uniform(0, np.pi, 10))
    edges = np.array([r0, -r0, 1j * r0, (1 - eps) + a * eps, (1 - eps) - a * eps, (1 - eps) + 1j * a * eps])
    P = block_diag_real(np.concatenate([near_zero, near_one, edges]))
    trace = rate_run(P, d, d_accel_alphas(d, eps), max_iter=4000)
    bound = 1.0 - (1.0 - a ** (1.0 / d)) * eps ** (1.0 / d)
    elapsed = time.perf_counter() - t0
    ok = trace.measured_rate <= bound + 5e-3 and elapsed < 10
    criterion(6, "robust acceleration", ok,
              f"measured={trace.measured_rate:.5f} <= {bound:.5f}+5e-3 (n={P.shape[0]}), {elapsed:.2f}s")
    assert trace.measured_rate <= bound + 5e-3
    assert elapsed < 10


# ---------------------------------------------------------------- 7


def test_criterion_07_hjb_oracle_and_presets(criterion):
    t0 = time.perf_counter()
    spec = HjbSpec(dim=1, N=8, sigma=[1.0], lam=1.0, m=1, drift=[0.3])
    disc = hjb_discretize(spec)
    eta = hjb_eigen_oracle(spec, disc.c)
    err = match_multisets(dense_eigenvalues(hjb_policy_matrix(disc).toarray()), eta)
    slack = float(np.min(hjb_imag_bound(spec, eta, disc.c) - np.abs(eta.imag)))
    one = hjb_discretize(hjb_preset("1d", seed=0))
    two = hjb_discretize(hjb_preset("2d", seed=0))
    anchors = (
        abs(one.c - 0.5) <= 0.01,
        abs(one.epsilon / 2e-6 - 1) <= 0.05,
        abs(two.c - 0.12) <= 0.01,
        abs(two.epsilon / 2.7e-4 - 1) <= 0.05,
    )
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-10 and slack >= 0 and all(anchors) and elapsed < 10
    criterion(7, "HJB eigenvalue oracle and presets", ok,
              f"oracle mismatch {err:.2e}, bound slack {slack:.2e}, 1-D c={one.c:.4f} eps={one.epsilon:.4e}, "
              f"2-D c={two.c:.4f} eps={two.epsilon:.4e}, {elapsed:.2f}s")
    assert err <= 1e-10
    assert slack >= 0
    assert all(anchors)
    assert elapsed < 10


# ---------------------------------------------------------------- 8


def test_criterion_08_dapi_certification(criterion):
    t0 = time.perf_counter()
    delta, delta_prime, eps = 1e-10, 0.0, 0.01
    outer, violations, repeats = [], 0, 0
    for seed in range(20):
        mdp = gen_random_mdp(RandomMdpSpec(n=50, m=4, p=0.5, epsilon=eps, seed=seed))
        baseline = policy_iteration_exact(mdp)
        assert baseline.converged
        xstar = exact_policy_value(mdp, baseline.policy)
        res = dapi_solve(mdp, AccelConfig.optimal(2, eps, delta=delta), delta_prime)
        repeats += res.converged
        bound = (delta + delta_prime) / (1.0 - mdp.gamma_max)
        violations += int(np.max(np.abs(res.value - xstar)) > bound)
        outer.append(res.n_outer)
    elapsed = time.perf_counter() - t0
    ok = repeats == 20 and violations == 0 and max(outer) <= 20 and elapsed < 30
    typical = "within the expected 5" if max(outer) <= 5 else "above the expected 5"
    criterion(8, "accelerated policy iteration certification", ok,
              f"{repeats}/20 stopped on a repeated policy, {violations} bound violations, "
              f"outer steps max {max(outer)} ({typical}), {elapsed:.1f}s")
    assert repeats == 20
    assert violations == 0
    assert max(outer) <= 20
    assert elapsed < 30


# ---------------------------------------------------------------- 9


VI_CAP = 5000


@pytest.mark.slow
def test_criterion_09_benchmark_ordering(criterion):
    t0 = time.perf_counter()
    eps, tol = 1e-4, 1e-10
    mdp = gen_random_mdp(RandomMdpSpec(n=1500, m=10, p=0.2, epsilon=eps, seed=0))
    x0 = np.zeros(mdp.n)
    runs = {
        "4A-VI": bellman_davi_solve(mdp, x0, AccelConfig.optimal(4, eps, delta=tol, max_iter=100_000)),
        "2A-VI": bellman_davi_solve(mdp, x0, AccelConfig.optimal(2, eps, delta=tol, max_iter=100_000)),
        # capped: unconverged at the cap means its count exceeds the cap
        "VI": bellman_vi_solve(mdp, x0, AccelConfig.plain(delta=tol, max_iter=VI_CAP)),
    }
    pis = {f"{d}A-PI": dapi_solve(mdp, AccelConfig.optimal(d, eps, delta=tol)) for d in (2, 4)}
    elapsed = time.perf_counter() - t0
    n4, n2 = runs["4A-VI"].iterations, runs["2A-VI"].iterations
    vi = runs["VI"]
    vi_lower = vi.iterations if vi.converged else VI_CAP + 1
    # extrapolated VI count, for the record only
    vi_est = vi.iterations + np.log(tol / vi.final_residual) / np.log(vi.measured_rate) if not vi.converged else vi.iterations
    ordering = runs["4A-VI"].converged and runs["2A-VI"].converged and n4 < n2 < vi_lower
    certs = {k: r.certified_error for k, r in pis.items()}
    ok = ordering and all(r.converged for r in pis.values()) and all(c <= 1e-6 for c in certs.values()) and elapsed < 300
    criterion(9, "benchmark ordering", ok,
              f"iterations 4A-VI={n4} < 2A-VI={n2} < VI>{VI_CAP} (VI extrapolated ~{vi_est:.0f}); "
              + ", ".join(f"{k} certified {c:.2e} in {pis[k].n_outer} outer steps" for k, c in certs.items())
              + f"; {elapsed:.0f}s")
    assert ordering
    assert all(c <= 1e-6 for c in certs.values())
    assert elapsed < 300


# ---------------------------------------------------------------- 10


def test_criterion_10_operator_laws(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    tol = 1e-12
    failures = {"contraction": 0, "shift": 0, "sub-fixed-point policy": 0, "sub-fixed-point optimal": 0,
                "monotone": 0, "dominance": 0}
    for draw in range(200):
        mdp = gen_random_mdp(RandomMdpSpec(n=8, m=3, p=0.5, epsilon=float(rng.uniform(0.01, 0.3)), seed=draw))
        gam = mdp.gamma_max
        sigma = rng.integers(0, 3, mdp.n)
        T = BellmanOperator(mdp).apply
        Ts = policy_problem(mdp, sigma).apply
        x, y = 3 * rng.standard_normal(mdp.n), 3 * rng.standard_normal(mdp.n)
        shift = float(rng.uniform(0, 5))
        lo = np.minimum(x, y)
        for op in (T, Ts):
            lhs = positive_part(top_seminorm(op(x) - op(y)))
            failures["contraction"] += lhs > gam * positive_part(top_seminorm(x - y)) + tol
            failures["shift"] += bool(np.any(op(x + shift) > op(x) + gam * shift + tol))
            failures["monotone"] += bool(np.any(op(lo) > op(x) + tol))
        failures["dominance"] += bool(np.any(Ts(x) > T(x) + tol))
        a = positive_part(top_seminorm(x - Ts(x)))
        xs = exact_policy_value(mdp, sigma)
        failures["sub-fixed-point policy"] += bool(np.any(x > xs + a / (1 - gam) + 1e-10))
        a = positive_part(top_seminorm(x - bellman_apply(mdp, x)[0]))
        xstar = policy_iteration_exact(mdp).value
        failures["sub-fixed-point optimal"] += bool(np.any(x > xstar + a / (1 - gam) + 1e-10))
    elapsed = time.perf_counter() - t0
    total = sum(failures.values())
    ok = total == 0 and elapsed < 5
    criterion(10, "MDP operator laws", ok, f"200 draws, {total} violations{f' {failures}' if total else ''}, {elapsed:.2f}s")
    assert total == 0
    assert elapsed < 5
