"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import io
import time
from fractions import Fraction

import numpy as np
import pytest

from coalition_attrib.attribution import ShapleyExplainer, shap_exact, shap_sampled
from coalition_attrib.cli import main
from coalition_attrib.forest import RandomForest
from coalition_attrib.game import (
    CoalitionGame,
    load_game,
    shapley_by_permutations,
    shapley_by_subsets,
)
from coalition_attrib.linear import OLSRegression, fit_ols
from coalition_attrib.report import RunConfig, emit_report, run_experiment
from coalition_attrib.simulation import ExperimentSpec, generate

from conftest import ABC_WORTH, brute_force_shapley

SEEDS = range(20)


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def test_ac1_example_coalition_game(abc_path, verdict):
    oracle = brute_force_shapley("ABC", lambda s: ABC_WORTH[tuple(sorted(s))])
    assert oracle == [Fraction(500, 3), Fraction(800, 3), Fraction(1100, 3)]

    load_game(abc_path)
    timings = []
    for _ in range(5):
        alloc, elapsed = _timed(lambda: shapley_by_subsets(load_game(abc_path)))
        timings.append(elapsed)
    rel = max(abs(v - float(o)) / float(o) for v, o in zip(alloc.values, oracle))

    out = io.StringIO()
    code = main(["game", "solve", str(abc_path)], out=out)
    printed = out.getvalue().splitlines()

    ok = (rel <= 1e-9 and abs(sum(alloc.values) - 800) <= 800e-9 and min(timings) < 1e-3
          and code == 0 and printed[:3] == ["A  166.667", "B  266.667", "C  366.667"])
    verdict("AC1 coalition game", ok,
            f"values {alloc.values.tolist()}, max rel err {rel:.1e}, "
            f"sum {sum(alloc.values)}, best time {min(timings) * 1e3:.3f} ms")


def test_ac2_shapley_axioms(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = []
    for k in range(200):
        n = int(rng.integers(1, 9))
        players = tuple(f"p{i}" for i in range(n))
        v = CoalitionGame(players, rng.normal(scale=100, size=2**n))
        w = CoalitionGame(players, rng.normal(scale=100, size=2**n))
        by_perm = shapley_by_permutations(v)
        by_subset = shapley_by_subsets(v)
        scale = 1 + np.abs(v.worth).max()

        if not (by_perm.is_efficient() and by_subset.is_efficient()):
            failures.append((k, "efficiency"))
        if np.max(np.abs(by_perm.values - by_subset.values)) > 1e-9 * scale:
            failures.append((k, "formula agreement"))
        lhs = shapley_by_subsets(v + w).values
        rhs = by_subset.values + shapley_by_subsets(w).values
        if np.max(np.abs(lhs - rhs)) > 1e-9 * (1 + np.abs((v + w).worth).max()):
            failures.append((k, "additivity"))

        d = int(rng.integers(0, n))
        dummy = CoalitionGame(players, [v.worth[m & ~(1 << d)] for m in range(2**n)])
        if abs(shapley_by_subsets(dummy).values[d]) > 1e-9 * scale:
            failures.append((k, "dummy"))

        if n >= 2:
            i, j = rng.choice(n, size=2, replace=False)

            def swap(m):
                bi, bj = m >> i & 1, m >> j & 1
                return (m & ~((1 << i) | (1 << j))) | bi << j | bj << i

            sym = CoalitionGame(players, [v.worth[m] + v.worth[swap(m)] for m in range(2**n)])
            for solver in (shapley_by_permutations, shapley_by_subsets):
                vals = solver(sym).values
                if abs(vals[i] - vals[j]) > 1e-12 * (1 + np.abs(sym.worth).max()):
                    failures.append((k, "symmetry"))
    elapsed = time.perf_counter() - start
    verdict("AC2 Shapley axioms", not failures and elapsed < 10,
            f"200 games, failures {failures[:5]}, {elapsed:.2f} s")


def test_ac3_linear_ols_coefficients(verdict):
    start = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        data = generate(ExperimentSpec("linear3", seed=seed))
        worst = max(worst, np.abs(fit_ols(data.X, data.y).coefficients - [0.1, 0.2, 0.3]).max())
    elapsed = time.perf_counter() - start
    verdict("AC3 linear OLS coefficients", worst <= 0.02 and elapsed < 5,
            f"max |coef - truth| over 20 seeds {worst:.4f} (band 0.02), {elapsed:.2f} s")


@pytest.mark.slow
def test_ac4_linear_attribution(verdict):
    start = time.perf_counter()
    closed_form_err = 0.0
    good_seeds = []
    ratios = []
    for seed in SEEDS:
        data = generate(ExperimentSpec("linear3", seed=seed))
        ols = OLSRegression().fit(data.X, data.y)
        exact = ShapleyExplainer(ols, background_cap=None).fit(data.X).explain(data.X)
        closed = np.abs(ols.coef_) * np.abs(data.X - data.X.mean(axis=0)).mean(axis=0)
        closed_form_err = max(closed_form_err, np.abs(exact.mean_abs() - closed).max())

        report = run_experiment(RunConfig.for_seed("linear3", seed=seed))
        size, value, momentum = report.mean_abs_shap
        mv, vs = momentum / value, value / size
        ratios.append((round(mv, 3), round(vs, 3)))
        if size < value < momentum and 1.3 <= mv <= 1.7 and 1.5 <= vs <= 2.8:
            good_seeds.append(seed)
    elapsed = time.perf_counter() - start
    ok = closed_form_err <= 1e-8 and len(good_seeds) >= 18 and elapsed < 120
    verdict("AC4 linear attribution", ok,
            f"closed-form err {closed_form_err:.1e}; forest ordering and ratio bands hold on "
            f"{len(good_seeds)}/20 seeds; (Momentum/Value, Value/Size) {ratios}; "
            f"{elapsed:.1f} s")


def test_ac5_nonlinear_experiment(verdict):
    report, elapsed = _timed(lambda: run_experiment(RunConfig.for_seed("nonlinear3", seed=0)))
    coefs = np.array(report.ols_coefficients)
    shap = np.array(report.mean_abs_shap)
    ok = np.all(shap > 0.25) and np.all((coefs >= 0) & (coefs <= 0.45)) and elapsed < 120
    verdict("AC5 nonlinear experiment", ok,
            f"mean |SHAP| {np.round(shap, 4).tolist()}, OLS {np.round(coefs, 4).tolist()}, "
            f"{elapsed:.1f} s")


@pytest.mark.slow
def test_ac6_twofactor_ratio(verdict):
    start = time.perf_counter()
    ratios = []
    for seed in SEEDS:
        report = run_experiment(RunConfig.for_seed("twofactor", seed=seed))
        f1, f2 = report.mean_abs_shap
        ratios.append(f2 / f1)
    elapsed = time.perf_counter() - start
    hits = sum(1.8 <= r <= 3.0 for r in ratios)
    verdict("AC6 two-factor ratio", hits >= 18 and elapsed < 120,
            f"Factor2/Factor1 in [1.8, 3.0] on {hits}/20 seeds, "
            f"range {min(ratios):.3f}..{max(ratios):.3f}, {elapsed:.1f} s")


def test_ac7_local_accuracy(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for name in ("linear3", "nonlinear3", "twofactor"):
        data = generate(ExperimentSpec(name, seed=0))
        rows = data.X[rng.choice(data.n_samples, size=100, replace=False)]
        for model in (OLSRegression().fit(data.X, data.y), RandomForest().fit(data.X, data.y)):
            result = ShapleyExplainer(model).fit(data.X).explain(rows)
            f = model.predict(rows)
            gap = np.abs(result.base_value + result.attributions.sum(axis=1) - f)
            worst = max(worst, float(np.max(gap / (1 + np.abs(f)))))
    verdict("AC7 local accuracy", worst <= 1e-8,
            f"max |base + sum(phi) - f| / (1 + |f|) = {worst:.1e} over 3 experiments x 2 models")


def test_ac8_sampled_vs_exact(verdict):
    data = generate(ExperimentSpec("linear3", seed=0))
    forest = RandomForest().fit(data.X, data.y)
    explainer = ShapleyExplainer(forest).fit(data.X)
    background = explainer.background_
    rows = data.X[np.random.default_rng(8).choice(data.n_samples, size=100, replace=False)]
    within = 0
    for k, x in enumerate(rows):
        exact = shap_exact(forest, x, background)
        est, se = shap_sampled(forest, x, background, 10_000, rng=k, return_se=True)
        within += bool(np.all(np.abs(est - exact) <= 3 * se))
    verdict("AC8 sampled vs exact", within >= 95,
            f"{within}/100 instances within 3 standard errors on every feature")


def test_ac9_determinism(monkeypatch, verdict):
    identical = {}
    for name in ("linear3", "nonlinear3", "twofactor"):
        config = RunConfig.for_seed(name, seed=3)
        monkeypatch.setenv("COALITION_ATTRIB_THREADS", "1")
        first = emit_report(run_experiment(config)).encode()
        monkeypatch.setenv("COALITION_ATTRIB_THREADS", "4")
        second = emit_report(run_experiment(config)).encode()
        identical[name] = first == second
    verdict("AC9 determinism", all(identical.values()),
            f"byte-identical JSON across thread caps 1 and 4: {identical}")
