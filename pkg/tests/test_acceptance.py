"""Acceptance suite: one test per release criterion, in order.

The end-to-end criteria (7 and 8) run the full default Monte Carlo
configuration (52-location synthetic campaign, 16 channels, N_s = 16,
K_tr = 1250, K_val = 150, train fraction 0.8, kappa = 15, R = 20) and
take several minutes each; everything else is fast.  Each test prints a
one-line PASS summary with the measured values.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import time

import numpy as np
import pytest

from rssdetect import benchmarks as bm
from rssdetect import detector as det
from rssdetect import evaluation as ev
from rssdetect import neural
from rssdetect import signal_model as sm
from rssdetect.cli import main as cli_main
from rssdetect.dataset import Label, PairSet, build_pair_set
from rssdetect.seeding import derive_seed

ACCEPT_SEED = 0  # master seed of the acceptance runs


def balanced_pairs(k, m, seed, gap=0.0) -> PairSet:
    rng = np.random.default_rng(seed)
    first = rng.normal(size=(2 * k, m))
    second = first + rng.normal(0, 0.1, size=(2 * k, m))
    second[k:] += gap
    codes = np.array([Label.SAME.value] * k + [Label.DIFF.value] * k, dtype=np.int8)
    return PairSet(
        first=first,
        second=second,
        label_codes=codes,
        location_a=np.r_[np.arange(k), np.arange(k)],
        location_b=np.r_[np.arange(k), np.arange(k) + 10_000],
        estimate_a=np.zeros(2 * k, dtype=np.int64),
        estimate_b=np.ones(2 * k, dtype=np.int64),
        k_per_class=k,
    )


def test_criterion_1_commutativity():
    """1000 random models and pairs: statistic symmetric to 1e-9 relative,
    decisions swap-invariant for DNNC, DBC(l1), DBC(l2), and KMC."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(ACCEPT_SEED, 101))
    worst = 0.0
    for i in range(1000):
        m = int(rng.integers(1, 8))
        width = int(rng.choice([4, 8, 16, 32]))
        params = neural.init_params([3 * m, width, width, width, 1], seed=int(rng.integers(2**31)))
        for w in params.weights:
            w *= rng.uniform(0.5, 3.0)
        model = det.DetectorModel(
            params=params,
            feature_mean=rng.normal(size=m),
            feature_std=np.abs(rng.normal(size=m)) + 0.3,
        )
        f, fp = rng.normal(size=m), rng.normal(size=m)
        g1 = det.statistic(model, f, fp)
        g2 = det.statistic(model, fp, f)
        assert abs(g1 - g2) <= 1e-9 * (1.0 + abs(g1))
        worst = max(worst, abs(g1 - g2) / (1.0 + abs(g1)))
        assert det.decide(model, f, fp).hypothesis == det.decide(model, fp, f).hypothesis

        dbc = bm.DbcModel(norm_order=int(rng.integers(1, 3)), threshold=float(rng.normal(1.0)))
        assert bm.decide_dbc(dbc, f, fp).hypothesis == bm.decide_dbc(dbc, fp, f).hypothesis
        kmc = bm.KmcModel(
            centroids=rng.normal(size=(int(rng.integers(1, 6)), m)),
            threshold=float(np.abs(rng.normal(1.0))),
        )
        assert bm.decide_kmc(kmc, f, fp).hypothesis == bm.decide_kmc(kmc, fp, f).hypothesis
    dt = time.perf_counter() - t0
    assert dt < 10.0
    print(f"\nPASS criterion 1: commutativity over 1000 models, worst rel asymmetry "
          f"{worst:.2e}, {dt:.1f}s")


def test_criterion_2_gradient_correctness():
    """Analytic gradient of the symmetrized pair loss vs central finite
    differences: relative error < 1e-4 on >= 100 coordinates spread over
    all four layers (weights and biases)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(ACCEPT_SEED, 102))
    m = 3
    params = neural.init_params([3 * m, 10, 9, 8, 1], seed=7)
    model = det.DetectorModel(
        params=params, feature_mean=np.zeros(m), feature_std=np.ones(m)
    )
    pairs = balanced_pairs(k=10, m=m, seed=derive_seed(ACCEPT_SEED, 103), gap=1.0)
    _, grads = det.pair_loss_grad(model, pairs)

    h = 1e-5
    checked = 0
    for layer in range(4):
        for _ in range(26):
            if rng.random() < 0.85:
                arr = params.weights[layer]
                garr = grads.weights[layer]
                idx = (int(rng.integers(arr.shape[0])), int(rng.integers(arr.shape[1])))
            else:
                arr = params.biases[layer]
                garr = grads.biases[layer]
                idx = (int(rng.integers(arr.shape[0])),)
            orig = arr[idx]
            arr[idx] = orig + h
            up = det.pair_loss(model, pairs)
            arr[idx] = orig - h
            down = det.pair_loss(model, pairs)
            arr[idx] = orig
            fd = (up - down) / (2 * h)
            rel = abs(fd - garr[idx]) / max(1.0, abs(fd))
            assert rel < 1e-4, (layer, idx, fd, garr[idx])
            checked += 1
    dt = time.perf_counter() - t0
    assert checked >= 100
    assert dt < 30.0
    print(f"PASS criterion 2: {checked} coordinates across 4 layers within 1e-4, {dt:.1f}s")


def test_criterion_3_loss_anchor():
    """Zero parameters give pair loss log 2 within 1e-12 on any balanced set."""
    worst = 0.0
    for k, m, seed in [(1, 2, 1), (13, 5, 2), (200, 16, 3)]:
        params = neural.init_params([3 * m, 8, 8, 8, 1], seed=seed)
        for w in params.weights:
            w[:] = 0.0
        model = det.DetectorModel(
            params=params, feature_mean=np.zeros(m), feature_std=np.ones(m)
        )
        pairs = balanced_pairs(k=k, m=m, seed=seed)
        err = abs(det.pair_loss(model, pairs) - math.log(2.0))
        worst = max(worst, err)
        assert err <= 1e-12
    print(f"PASS criterion 3: pair loss at theta=0 equals log 2 (worst error {worst:.1e})")


def test_criterion_4_threshold_tuning_optimality():
    """tune_threshold matches a 10^4-point grid-search oracle on 50 sets."""
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(30, 300))
        d = np.abs(rng.normal(3.0, 1.5, size=n)) + rng.exponential(1.0, size=n)
        y = rng.random(n) < rng.uniform(0.2, 0.8)
        fit = bm.tune_threshold(d, y)
        achieved = float(np.mean((d > fit.threshold) == y))
        assert achieved == fit.accuracy
        grid = np.linspace(d.min() - 1.0, d.max() + 1.0, 10_000)
        grid_best = max(float(np.mean((d > t) == y)) for t in grid)
        assert fit.accuracy >= grid_best  # midpoints cannot lose to a grid
        assert fit.accuracy == grid_best, trial
    print("PASS criterion 4: threshold tuning equals the 10^4-point grid oracle on 50 sets")


def test_criterion_5_kmeans_monotone_fixpoint():
    """WCSS never increases across Lloyd iterations; terminal assignment is
    a fixpoint, over 50 random corpora."""
    rng = np.random.default_rng(777)
    for trial in range(50):
        n = int(rng.integers(40, 200))
        dim = int(rng.integers(2, 8))
        k = int(rng.integers(2, 7))
        x = rng.normal(size=(n, dim)) + rng.integers(0, k, size=(n, 1)) * rng.uniform(2, 6)
        res = bm.lloyd_kmeans(x, k, seed=int(rng.integers(2**31)))
        assert np.all(np.diff(res.wcss_history) <= 0.0), trial
        assert res.converged
        assert np.array_equal(bm._assign(x, res.centroids), res.labels)
    print("PASS criterion 5: WCSS non-increasing and terminal fixpoint on 50 corpora")


def test_criterion_6_estimator_consistency():
    """Longer windows estimate the true RSS strictly better: mean |err| over
    100 seeds at N_s=1024 below N_s=16."""
    sc = sm.generate_scenario(sm.ScenarioConfig(), seed=derive_seed(ACCEPT_SEED, 106))
    truth = sm.true_rss(sc, 0).values_db
    err = {}
    for n_s in (16, 1024):
        errs = [
            float(np.abs(sm.estimate_rss_vector(sc, 0, n_s, seed=derive_seed(ACCEPT_SEED, 106, n_s, r)) - truth).mean())
            for r in range(100)
        ]
        err[n_s] = float(np.mean(errs))
    assert err[1024] < err[16]
    print(f"PASS criterion 6: mean |err| {err[16]:.4f} dB at N_s=16 vs "
          f"{err[1024]:.4f} dB at N_s=1024")


@pytest.fixture(scope="module")
def location_report():
    cfg = ev.ExperimentConfig(location_grid=(10, 45), master_seed=ACCEPT_SEED)
    t0 = time.perf_counter()
    report = ev.sweep_locations(cfg)
    return report, time.perf_counter() - t0


def test_criterion_7_end_to_end_trend(location_report):
    """Default synthetic campaign, R=20: the neural detector is accurate at
    45 locations, beats every benchmark there, and does not lose accuracy
    relative to 10 locations."""
    report, dt = location_report
    rows = {(r.algorithm, r.sweep_value): r for r in report.rows}
    dnnc45 = rows[("dnnc", "45")]
    dnnc10 = rows[("dnnc", "10")]

    assert dnnc45.mean_accuracy >= 0.90, dnnc45.mean_accuracy
    for alg in ("dbc1", "dbc2", "kmc"):
        assert dnnc45.mean_accuracy >= rows[(alg, "45")].mean_accuracy, alg
    assert dnnc45.mean_accuracy >= dnnc10.mean_accuracy - dnnc10.std_error
    assert dt < 900.0, f"runtime {dt:.0f}s exceeds 15 minutes"
    bench = ", ".join(
        f"{alg}={rows[(alg, '45')].mean_accuracy:.3f}" for alg in ("dbc1", "dbc2", "kmc")
    )
    print(f"\nPASS criterion 7: dnnc@45={dnnc45.mean_accuracy:.3f} >= 0.90, "
          f"benchmarks ({bench}), dnnc@10={dnnc10.mean_accuracy:.3f} "
          f"(se {dnnc10.std_error:.3f}), runtime {dt:.0f}s < 900s")


def test_criterion_8_feature_locality(location_report):
    """Two features from one receiver carry at least as much usable joint
    information as two features from different receivers (soft gate:
    within one standard error)."""
    cfg = ev.ExperimentConfig(
        feature_subsets=((0, 1), (0, 4)),
        algorithms=("dnnc",),
        master_seed=ACCEPT_SEED,
    )
    report = ev.sweep_features(cfg)
    rows = {r.sweep_value: r for r in report.rows}
    same_rx = rows["0+1"]
    cross_rx = rows["0+4"]
    assert same_rx.mean_accuracy >= cross_rx.mean_accuracy - cross_rx.std_error
    print(f"\nPASS criterion 8: same-receiver {same_rx.mean_accuracy:.3f} "
          f"(se {same_rx.std_error:.3f}) vs cross-receiver {cross_rx.mean_accuracy:.3f} "
          f"(se {cross_rx.std_error:.3f})")


def test_criterion_9_cli_determinism(tmp_path):
    """Identical CLI invocations produce byte-identical outputs."""
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text(
        "locations = 14\nestimates = 6\nk_train = 80\nk_val = 20\nk_test = 60\n"
        "kappa = 3\niterations = 2\nhidden_sizes = 8,8\nmax_epochs = 3\npatience = 3\n"
        "shadowing_std_db = 3.0\nnoise_dbm = -82\ngain_drift_std_db = 1.0\n"
    )

    def run_all(tag):
        meas = tmp_path / f"meas_{tag}.csv"
        rep = tmp_path / f"rep_{tag}.csv"
        model = tmp_path / f"dnnc_{tag}.model"
        hist = tmp_path / f"hist_{tag}.csv"
        assert cli_main(["generate", "--out", str(meas), "--seed", "31",
                         "--config", str(cfgfile)]) == 0
        assert cli_main(["train", "--data", str(meas), "--algorithm", "dnnc",
                         "--model-out", str(model), "--history-out", str(hist),
                         "--seed", "32", "--config", str(cfgfile)]) == 0
        assert cli_main(["sweep-locations", "--out", str(rep), "--seed", "33",
                         "--config", str(cfgfile), "--grid", "8,10",
                         "--algorithms", "dbc1,dbc2,kmc"]) == 0
        return [p.read_bytes() for p in (meas, model, hist, rep,
                                         tmp_path / f"rep_{tag}.csv.raw.csv")]

    assert run_all("a") == run_all("b")
    print("\nPASS criterion 9: generate/train/sweep outputs byte-identical on rerun")


def test_criterion_10_harness_calibration():
    """The always-H1 dummy sits at 0.500 +/- 0.02 on 2000 balanced test
    pairs; the provenance-cheating oracle scores exactly 1.0."""
    cfg = ev.ExperimentConfig(
        algorithms=("always_h1", "cheat"),
        location_grid=(20,),
        k_test=1000,
        iterations=1,
        master_seed=ACCEPT_SEED,
    )
    ms = ev.load_corpus(cfg)
    point = ev.SweepPoint(kind="locations", locations=20)
    accs = ev.run_iteration(ms, cfg, point, derive_seed(ACCEPT_SEED, 0, 0))
    assert abs(accs["always_h1"] - 0.5) <= 0.02
    assert accs["cheat"] == 1.0
    print(f"\nPASS criterion 10: always-H1 {accs['always_h1']:.3f}, oracle {accs['cheat']:.1f}")
