"""Acceptance checks over oracles and the synthetic benchmark corpus.

The corpus is 50 rendered pages (seed 2021) skewed five times each within
+-15 degrees (split 70/30 by source) and ten times each within +-44.9
degrees.  A full run takes a while on one core; the slow marker lets
``pytest -m "not slow"`` skip it.
"""

import time

import numpy as np
import pytest

from conftest import build_corpus
from fdeskew import evaluation, imageio
from fdeskew.estimator import estimate_skew, initial_angle, load_preset
from fdeskew.projection import Branch, aggregate
from fdeskew.spectrum import dft2_magnitude
from oracles import naive_dft_magnitude

criterion = pytest.mark.criterion


# --- oracle-level criteria -----------------------------------------------------


@criterion("1", "2-D DFT magnitude matches a direct DFT on 100 random binary matrices")
def test_dft_matches_direct_evaluation(record_property):
    rng = np.random.default_rng(12345)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        h, w = rng.integers(1, 17, size=2)
        a = (rng.random((h, w)) < rng.uniform(0.1, 0.9)).astype(np.float64)
        got = dft2_magnitude(a).values
        want = naive_dft_magnitude(a)
        scale = max(want.max(), 1.0)
        worst = max(worst, float(np.abs(got - want).max() / scale))
        # conjugate symmetry: |F(u, v)| = |F(-u, -v)|
        flipped = np.roll(got[::-1, ::-1], (1, 1), axis=(0, 1))
        np.testing.assert_allclose(got, flipped, rtol=1e-9, atol=1e-9 * scale)
        # Parseval: sum |F|^2 = h w sum a^2
        assert np.sum(got**2) == pytest.approx(h * w * np.sum(a**2), rel=1e-9)
    elapsed = time.perf_counter() - start
    record_property("max_rel_error", f"{worst:.2e}")
    record_property("seconds", f"{elapsed:.2f}")
    assert worst <= 1e-9
    assert elapsed < 5.0


@criterion("2", "aggregation rule over an exhaustive grid, boundary included")
def test_aggregation_exhaustive(record_property):
    angles = np.round(np.arange(-60, 61) * 0.05, 2)  # -3.00 .. 3.00
    distances = evaluation.DISTANCE_GRID
    checked = 0
    for d in distances:
        for a in angles:
            for b in angles:
                theta, branch = aggregate(float(a), float(b), float(d))
                # the difference of two 0.05-grid angles, in hundredths of a degree
                gap = abs(int(round(a * 100)) - int(round(b * 100)))
                if gap > int(round(d * 100)):
                    assert theta == a and branch is Branch.INITIAL
                else:
                    assert theta == b and branch is Branch.CORRECTION
                checked += 1
    assert aggregate(5.0, 5.3, 0.45) == (5.3, Branch.CORRECTION)
    assert aggregate(5.0, 6.0, 0.45) == (5.0, Branch.INITIAL)
    assert aggregate(5.0, 5.45, 0.45) == (5.45, Branch.CORRECTION)
    assert aggregate(-2.0, -2.7, 0.7) == (-2.7, Branch.CORRECTION)
    record_property("cases", checked)


@criterion("5", "planted error list gives the exact metric values")
def test_planted_metrics(record_property):
    r = evaluation.compute_metrics([0.05, 0.2, 0.08, 1.0, 0.02])
    record_property("report", r.summary())
    assert (r.aed, r.top80, r.ce, r.we) == (0.27, 0.0875, 0.6, 1.0)


# --- corpus-level criteria -----------------------------------------------------


def _metrics(report):
    return f"AED={report.aed:.4f} TOP80={report.top80:.4f} CE={report.ce:.3f} WE={report.we:.2f} N={report.n}"


@pytest.fixture(scope="module")
def baseline_1024(corpus):
    """Per-image estimates at the 1024 preset, timed one image at a time."""
    cfg = load_preset(1024)
    estimates, seconds = [], []
    for entry in corpus.narrow.entries:
        start = time.perf_counter()
        est = estimate_skew(imageio.load_gray(corpus.narrow.resolve(entry)), cfg)
        seconds.append(time.perf_counter() - start)
        estimates.append(est)
    return estimates, seconds


@pytest.fixture(scope="module")
def table_1024(corpus):
    return evaluation.build_offset_table(corpus.narrow, evaluation.config_for(corpus.narrow, 1024))


@pytest.mark.slow
def test_straight_renders_read_as_straight(corpus):
    cfg = load_preset(1024)
    pages = sorted((corpus.base / "straight").glob("*.png"))
    flat = [abs(estimate_skew(imageio.load_gray(p), cfg).theta_f) <= 0.1 for p in pages]
    assert np.mean(flat) >= 0.95


@pytest.mark.slow
@criterion("3", "3072 preset on +-15 degrees: CE >= 0.90, AED <= 0.10, WE <= 1.5")
def test_narrow_range_3072(corpus, record_property):
    start = time.perf_counter()
    r = evaluation.evaluate_manifest(corpus.narrow, load_preset(3072))
    record_property("metrics", _metrics(r))
    record_property("seconds", f"{time.perf_counter() - start:.0f}")
    assert not r.failures
    assert r.ce >= 0.90
    assert r.aed <= 0.10
    assert r.we <= 1.5


@pytest.mark.slow
@criterion("4", "3072 preset on +-44.9 degrees: CE >= 0.85, WE <= 1.5")
def test_wide_range_3072(corpus, record_property):
    start = time.perf_counter()
    r = evaluation.evaluate_manifest(corpus.wide, load_preset(3072, 45))
    record_property("metrics", _metrics(r))
    record_property("seconds", f"{time.perf_counter() - start:.0f}")
    assert r.n == 500 and not r.failures
    assert r.ce >= 0.85
    assert r.we <= 1.5


@pytest.mark.slow
@criterion("6", "block division at 1024: CE(1.0) > CE(0.5) > CE(0.1); 1.0 equals the whole-page baseline")
def test_division_ablation(corpus, baseline_1024, record_property):
    cfg = evaluation.config_for(corpus.narrow, 1024)
    rows = evaluation.ablate_division(corpus.narrow, cfg, [1.0, 0.5, 0.1])
    ce = [row.report.ce for row in rows]
    record_property("ce", ", ".join(f"{row.value}:{row.report.ce:.3f}" for row in rows))
    whole = [r.estimate for r in rows[0].report.per_image]
    assert whole == [est.theta_a for est in baseline_1024[0]]
    assert ce[0] > ce[1] > ce[2]


@pytest.mark.slow
@criterion("7", "magnitude spectrum CE >= power spectrum CE at 1024 and 2048")
def test_magnitude_vs_power(corpus, record_property):
    for height in (1024, 2048):
        mag, power = evaluation.ablate_spectrum(corpus.narrow, evaluation.config_for(corpus.narrow, height))
        record_property(f"h{height}", f"magnitude {mag.report.ce:.3f} power {power.report.ce:.3f}")
        assert mag.report.ce >= power.report.ce


@pytest.mark.slow
@criterion("8a", "some tested start offset W raises correction-only CE above W = 0")
def test_window_offset_helps(table_1024, record_property):
    search = evaluation.search_window(table_1024)
    ce0 = table_1024.report(table_1024.theta_b(0)).ce
    best_w, best_ce = max(search.coarse + search.fine, key=lambda wc: (wc[1], -wc[0]))
    record_property("ce_w0", f"{ce0:.3f}")
    record_property("best", f"W={best_w} CE={best_ce:.3f}")
    assert best_ce > ce0


@pytest.mark.slow
@criterion("8b", "combined estimate AED <= min(initial-only AED, correction-only AED) at the searched D")
def test_combined_beats_each_branch(table_1024, record_property):
    window = evaluation.search_window(table_1024).window
    distance = evaluation.search_distance(table_1024, window=window).distance
    a, b = table_1024.theta_a, table_1024.theta_b(window)
    full = table_1024.report(evaluation.aggregate_many(a, b, distance)).aed
    only_a, only_b = table_1024.report(a).aed, table_1024.report(b).aed
    record_property("W,D", f"{window},{distance}")
    record_property("aed", f"full {full:.4f} initial {only_a:.4f} correction {only_b:.4f}")
    assert full <= min(only_a, only_b)


@pytest.mark.slow
@criterion("9", "two-stage search on dev (20 + 20 offsets) beats the initial-only baseline on test")
def test_search_protocol(corpus, record_property):
    search = evaluation.search_params(corpus.narrow, 1024, split="dev")
    coarse = [w for w, _ in search.window.coarse]
    fine = [w for w, _ in search.window.fine]
    center = max(search.window.coarse, key=lambda wc: (wc[1], -wc[0]))[0]
    assert len(coarse) == 20 and coarse[0] == 0 and coarse[-1] == round(1024 / 3)
    assert len(fine) == 20 and all(abs(w - center) <= round(1024 * 2 / 30) for w in fine)

    window, distance = search.params
    cfg = evaluation.config_for(corpus.narrow, 1024, window_offset=window, distance=distance)
    full = evaluation.evaluate_manifest(corpus.narrow, cfg, "test")
    base = evaluation.evaluate_manifest(
        corpus.narrow, cfg, "test", estimator=lambda p, e: initial_angle(imageio.load_gray(p), cfg)
    )
    record_property("W,D", f"{window},{distance}")
    record_property("test_aed", f"full {full.aed:.4f} initial-only {base.aed:.4f}")
    assert full.aed <= base.aed


@pytest.mark.slow
@criterion("10", "single-threaded estimation at 1024 averages <= 2 s per image")
def test_throughput(baseline_1024, record_property):
    seconds = baseline_1024[1]
    mean = float(np.mean(seconds))
    record_property("mean_seconds", f"{mean:.3f}")
    record_property("images", len(seconds))
    assert mean <= 2.0


@pytest.mark.slow
@criterion("11", "two seeded generation + evaluation runs are byte-identical")
def test_end_to_end_determinism(corpus, tmp_path, record_property):
    second = build_corpus(tmp_path)
    for name in ("d15", "d45"):
        for fname in ("manifest.json", "manifest.csv"):
            assert (corpus.base / name / fname).read_bytes() == (tmp_path / name / fname).read_bytes()
    for entry in corpus.narrow.entries:
        assert corpus.narrow.resolve(entry).read_bytes() == second.narrow.resolve(entry).read_bytes()
    cfg = load_preset(1024)
    first_report = evaluation.evaluate_manifest(corpus.narrow, cfg).to_json()
    second_report = evaluation.evaluate_manifest(second.narrow, cfg).to_json()
    record_property("report_bytes", len(first_report))
    assert first_report == second_report


@pytest.mark.slow
def test_small_offsets_do_not_lower_ce(table_1024):
    ces = [row.report.ce for row in evaluation.ablate_window(table_1024, None, [15, 35, 55, 75])]
    assert ces == sorted(ces)
