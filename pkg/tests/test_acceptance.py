"""Acceptance gates for the whole package.

Each test covers one numbered criterion at its stated tolerance and prints a
single pass/fail line (run ``pytest -s tests/test_acceptance.py`` to see the
lines as they execute).
"""

import json
import math
import time

import numpy as np
import pytest

from rhpsvm.cli import main as cli_main
from rhpsvm.data import (
    NoiseSpec,
    dataset_to_csv,
    inject_label_noise,
    standardize,
    synth_two_gaussians,
)
from rhpsvm.evaluation import BoundInputs, FitConfig, generalization_bound, outlier_shift
from rhpsvm.kernels import KernelSpec, gram_matrix
from rhpsvm.losses import (
    LossParams,
    LossKind,
    delta_coefficient,
    fisher_consistency_check,
    g_part,
    h_part,
    huberized_pinball,
    huberized_pinball_deriv,
    lipschitz_bound,
    rescaled_hp,
    rescaled_hp_deriv,
)
from rhpsvm.model import decision_values, fit, load, save
from rhpsvm.solver import InnerMethod, SolverConfig, cccp_train, train_baseline

PARAM_GRID = [
    LossParams(eta=eta, lambda_=lam, s=s, tau=tau)
    for tau in (0.0, 0.1, 0.5, 0.9, 1.0)
    for s in (0.5, 1.0, 2.0)
    for lam in (0.5, 1.0, 2.0)
    for eta in (0.5, 1.0, 2.0)
]

U_GRID = np.linspace(-20.0, 20.0, 801)


def _report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {num:02d}] {status} {name}{suffix}")
    return ok


def _away_from_knots(us, s, margin=1e-3):
    mask = np.ones_like(us, dtype=bool)
    for knot in (-s, 0.0, s):
        mask &= np.abs(us - knot) > margin
    return us[mask]


def test_criterion_01_loss_identities():
    start = time.perf_counter()
    worst = 0.0
    for p in PARAM_GRID:
        comp = np.abs(rescaled_hp(U_GRID, p)
                      - p.eta * (1.0 - np.exp(-huberized_pinball(U_GRID, p.s, p.tau) / p.lambda_)))
        split = np.abs(g_part(U_GRID, p) + h_part(U_GRID, p) - rescaled_hp(U_GRID, p))
        dident = np.abs(delta_coefficient(U_GRID, p)
                        - ((p.eta / p.lambda_) * huberized_pinball_deriv(U_GRID, p.s, p.tau)
                           - rescaled_hp_deriv(U_GRID, p)))
        worst = max(worst, comp.max(), split.max(), dident.max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    assert _report(1, "loss identities", ok, f"worst={worst:.2e}, {elapsed:.2f}s")


def test_criterion_02_gradient_suite():
    start = time.perf_counter()
    step = 1e-5
    max_rel = 0.0
    max_knot_gap = 0.0
    for p in (LossParams(), LossParams(eta=2.0, lambda_=0.5, s=0.5, tau=0.9),
              LossParams(eta=0.5, lambda_=2.0, s=2.0, tau=0.1), LossParams(tau=1.0)):
        us = _away_from_knots(np.linspace(-10, 10, 401), p.s)
        pairs = [
            (lambda u: huberized_pinball(u, p.s, p.tau),
             lambda u: huberized_pinball_deriv(u, p.s, p.tau)),
            (lambda u: rescaled_hp(u, p), lambda u: rescaled_hp_deriv(u, p)),
            (lambda u: g_part(u, p),
             lambda u: (p.eta / p.lambda_) * huberized_pinball_deriv(u, p.s, p.tau)),
            (lambda u: h_part(u, p), lambda u: -delta_coefficient(u, p)),
        ]
        for f, fprime in pairs:
            fd = (f(us + step) - f(us - step)) / (2.0 * step)
            an = fprime(us)
            rel = np.abs(fd - an) / np.maximum(np.abs(an), 1e-2)
            max_rel = max(max_rel, float(rel.max()))
            # a small knot step keeps the one-sided discretisation bias under the gate
            h = 3e-8
            for knot in (-p.s, 0.0, p.s):
                left = (f(knot) - f(knot - h)) / h
                right = (f(knot + h) - f(knot)) / h
                max_knot_gap = max(max_knot_gap, abs(left - right))
    elapsed = time.perf_counter() - start
    ok = max_rel <= 1e-6 and max_knot_gap <= 1e-6 and elapsed < 1.0
    assert _report(2, "gradient suite", ok,
                   f"rel={max_rel:.2e}, knots={max_knot_gap:.2e}, {elapsed:.2f}s")


def test_criterion_03_convexity_concavity():
    worst_g = math.inf
    worst_h = -math.inf
    step = U_GRID[1] - U_GRID[0]
    for p in PARAM_GRID:
        inner = _away_from_knots(U_GRID[1:-1], p.s)
        d2g = g_part(inner + step, p) - 2.0 * g_part(inner, p) + g_part(inner - step, p)
        d2h = h_part(inner + step, p) - 2.0 * h_part(inner, p) + h_part(inner - step, p)
        worst_g = min(worst_g, float(d2g.min()))
        worst_h = max(worst_h, float(d2h.max()))
    ok = worst_g >= -1e-8 and worst_h <= 1e-8
    assert _report(3, "convexity of g / concavity of h", ok,
                   f"min d2g={worst_g:.2e}, max d2h={worst_h:.2e}")


def test_criterion_04_fisher_consistency():
    z_grid = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
    failures = 0
    for p in PARAM_GRID:
        report = fisher_consistency_check(p, z_grid)
        if not (report.passed and report.max_violation < 0.0
                and abs(report.deriv_at_zero) > 1e-12):
            failures += 1
    ok = failures == 0
    assert _report(4, "Fisher consistency over 135 parameter combinations", ok,
                   f"{len(PARAM_GRID) - failures}/{len(PARAM_GRID)} pass")


def test_criterion_05_boundedness_and_lipschitz():
    p = LossParams()
    wide = np.concatenate([np.linspace(-1e6, 1e6, 4001), np.linspace(-50.0, 50.0, 4001)])
    vals = rescaled_hp(wide, p)
    never_exceeds = bool(np.all(vals <= p.eta))
    # strict inequality wherever one ulp below eta is representable; beyond
    # L_hp/lambda ~ 37 the float64 value saturates to exactly eta
    representable = huberized_pinball(wide, p.s, p.tau) / p.lambda_ < 30.0
    strict = bool(np.all(vals[representable] < p.eta))
    saturates = rescaled_hp(1e6, p) >= p.eta - 1e-6 and rescaled_hp(-1e6, p) >= p.eta - 1e-6
    quot_ok = True
    for params in PARAM_GRID:
        us = np.linspace(-10.0, 10.0, 2001)
        h = 1e-4
        quot = np.abs(rescaled_hp(us + h, params) - rescaled_hp(us - h, params)) / (2.0 * h)
        if quot.max() > lipschitz_bound(params) + 1e-9:
            quot_ok = False
    ok = never_exceeds and strict and saturates and quot_ok
    assert _report(5, "boundedness and Lipschitz", ok,
                   f"sup<=eta={never_exceeds}, strict={strict}, quotients={quot_ok}")


# --- seeded training instances shared by criteria 6 and 7 -------------------

_COMBOS = [(40, 2), (40, 20), (200, 2), (200, 20)]


@pytest.fixture(scope="module")
def cccp_runs():
    runs = []
    start = time.perf_counter()
    for seed in range(10):
        n, d = _COMBOS[seed % 4]
        ds = synth_two_gaussians(n, d, separation=2.0, sigma=0.6, seed=seed)
        entry = {"seed": seed, "n": n, "d": d, "ds": ds, "models": {}, "traces": {}}
        methods = [InnerMethod.PRIMAL_REFERENCE]
        if n <= 50:
            methods.append(InnerMethod.DUAL_CD)
        for method in methods:
            cfg = SolverConfig(C=1.0, inner_method=method, outer_tol=1e-6)
            model, trace = cccp_train(ds, KernelSpec.linear(), LossParams(), cfg)
            entry["models"][method] = model
            entry["traces"][method] = trace
        runs.append(entry)
    elapsed = time.perf_counter() - start
    return runs, elapsed


def test_criterion_06_cccp_descent(cccp_runs):
    runs, elapsed = cccp_runs
    all_monotone = True
    max_iters = 0
    for entry in runs:
        for trace in entry["traces"].values():
            objs = [state.objective for state in trace]
            if not all(b <= a + 1e-10 for a, b in zip(objs, objs[1:])):
                all_monotone = False
            max_iters = max(max_iters, len(trace) - 1)
    ok = all_monotone and max_iters <= 50 and elapsed < 30.0
    assert _report(6, "difference-of-convex descent on 10 seeded datasets", ok,
                   f"monotone={all_monotone}, max_iters={max_iters}, {elapsed:.1f}s")


def test_criterion_07_solver_equivalence(cccp_runs):
    runs, _ = cccp_runs
    worst_rms = 0.0
    signs_ok = True
    checked = 0
    for entry in runs:
        if entry["n"] > 50:
            continue
        checked += 1
        dp = decision_values(entry["models"][InnerMethod.PRIMAL_REFERENCE],
                             entry["ds"].features)
        dd = decision_values(entry["models"][InnerMethod.DUAL_CD], entry["ds"].features)
        worst_rms = max(worst_rms, float(np.sqrt(np.mean((dp - dd) ** 2))))
        if not np.array_equal(dp >= 0.0, dd >= 0.0):
            signs_ok = False
    ok = checked >= 5 and worst_rms <= 1e-3 and signs_ok
    assert _report(7, "dual coordinate descent matches the primal reference", ok,
                   f"instances={checked}, worst rms={worst_rms:.2e}, signs={signs_ok}")


def test_criterion_08_reductions():
    ds = synth_two_gaussians(40, 2, separation=2.0, sigma=0.6, seed=7)
    spec = KernelSpec.rbf(0.5)
    cfg = SolverConfig(C=1.0, outer_tol=1e-6)
    m_rhp, _ = cccp_train(ds, spec, LossParams(eta=1e4, lambda_=1e4), cfg)
    m_hp = train_baseline(LossKind.HUBERIZED_PINBALL, ds, spec, LossParams(), cfg)
    gap_a = float(np.max(np.abs(decision_values(m_rhp, ds.features)
                                - decision_values(m_hp, ds.features))))
    m_hp_small = train_baseline(LossKind.HUBERIZED_PINBALL, ds, spec,
                                LossParams(s=1e-4, tau=0.5), cfg)
    m_pin = train_baseline(LossKind.PINBALL, ds, spec, LossParams(tau=0.5), cfg)
    gap_b = float(np.max(np.abs(decision_values(m_hp_small, ds.features)
                                - decision_values(m_pin, ds.features))))
    ok = gap_a <= 1e-3 and gap_b <= 1e-3
    assert _report(8, "parameter-limit reductions", ok,
                   f"rescaled->huberized {gap_a:.2e}, huberized->pinball {gap_b:.2e}")


def test_criterion_09_outlier_robustness():
    ds = synth_two_gaussians(200, 2, separation=2.0, sigma=0.5, seed=42)
    pos_mean = ds.features[ds.labels == 1.0].mean(axis=0)
    direction = pos_mean / np.linalg.norm(pos_mean)
    outlier_x = 100.0 * direction
    cfg = SolverConfig(C=1.0)
    params = LossParams()
    rep = outlier_shift(
        ds, outlier_x, -1.0,
        FitConfig(LossKind.RESCALED_HP, params, KernelSpec.linear(), cfg),
        FitConfig(LossKind.HINGE, params, KernelSpec.linear(), cfg))
    ok = rep.angle_a <= rep.angle_b
    assert _report(9, "bounded loss shrugs off a far mislabeled outlier", ok,
                   f"angle rescaled={rep.angle_a:.2e} <= hinge={rep.angle_b:.2e}")


def test_criterion_10_bound_evaluator():
    worked = BoundInputs(sum_loss=0.4, n=4, gamma=1.0, b_norm=1.0, iota=1.0,
                         gram_trace=4.0, zeta=0.05)
    total = generalization_bound(worked)
    value_ok = abs(total - 4.816203) <= 1e-6
    probes_ok = (
        generalization_bound(BoundInputs(0.8, 4, 1.0, 1.0, 1.0, 4.0, 0.05)) > total
        and generalization_bound(BoundInputs(0.4, 4, 1.0, 2.0, 1.0, 4.0, 0.05)) > total
        and generalization_bound(BoundInputs(0.4, 4, 1.0, 1.0, 2.0, 4.0, 0.05)) > total
        and generalization_bound(BoundInputs(0.4, 4, 1.0, 1.0, 1.0, 9.0, 0.05)) > total
        and generalization_bound(BoundInputs(0.4, 4, 1.0, 1.0, 1.0, 4.0, 0.5)) < total
        and generalization_bound(BoundInputs(0.8, 8, 1.0, 1.0, 1.0, 4.0, 0.05)) < total
    )
    ok = value_ok and probes_ok
    assert _report(10, "generalization-bound evaluator", ok,
                   f"value={total:.9f}, probes={probes_ok}")


def test_criterion_11_determinism_and_round_trips(tmp_path, capsys):
    ds = synth_two_gaussians(40, 2, separation=3.0, sigma=0.4, seed=11)
    data_path = tmp_path / "toy.csv"
    data_path.write_text(dataset_to_csv(ds))
    argv = ["train", "--data", str(data_path), "--loss", "rhp", "--kernel", "rbf",
            "--gamma", "0.5", "--seed", "7"]
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli_main(argv + ["--out", str(out_a)]) == 0
    assert cli_main(argv + ["--out", str(out_b)]) == 0
    capsys.readouterr()
    cli_identical = out_a.read_text().replace("a.json", "X") \
        == out_b.read_text().replace("b.json", "X")

    model = fit(ds, KernelSpec.rbf(0.5), LossParams(), SolverConfig(C=1.0))
    restored = load(save(model))
    drift = float(np.max(np.abs(decision_values(model, ds.features)
                                - decision_values(restored, ds.features))))

    spec = NoiseSpec(rate=0.2, seed=3)
    twice = inject_label_noise(inject_label_noise(ds, spec), spec)
    involution = bool(np.array_equal(twice.labels, ds.labels))

    ok = cli_identical and drift <= 1e-15 and involution
    assert _report(11, "determinism and round-trips", ok,
                   f"cli={cli_identical}, save/load drift={drift:.1e}, involution={involution}")


def test_criterion_12_performance():
    start = time.perf_counter()
    ds = synth_two_gaussians(500, 20, separation=2.0, sigma=1.0, seed=12)
    std_ds, _ = standardize(ds)
    model = fit(std_ds, KernelSpec.rbf(0.05), LossParams(), SolverConfig(C=1.0))
    values = decision_values(model, std_ds.features)
    elapsed = time.perf_counter() - start
    acc = float(np.mean((values >= 0.0) == (ds.labels > 0.0)))
    ok = elapsed < 10.0 and acc > 0.8
    assert _report(12, "full training pipeline at n=500", ok,
                   f"{elapsed:.2f}s, train accuracy {acc:.3f}")
