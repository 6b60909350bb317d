from dataclasses import replace

import pytest

from adfield import experiment as X, field


@pytest.fixture(scope="module")
def bench():
    scfg = replace(X.BENCHMARK_SYNTH, n_reference_flights=120, n_eval_flights=12)
    return X.prepare(X.BenchmarkConfig(synth=scfg, nlist=16))


def test_resolve_percentile():
    assert X.resolve_percentile(75, 10, 100) == 75.0
    assert X.resolve_percentile("auto", 10, 100) == pytest.approx(90.0)
    with pytest.raises(ValueError):
        X.resolve_percentile("auto", 0, 0)


def test_prepare(bench):
    assert len(bench.points) == len(bench.reference_pois) > 0
    assert bench.index.nlist == 16
    assert all(p.score >= 0.75 for p in bench.reference_pois)
    assert 99.0 < bench.percentile < 100.0
    assert bench.knn_percentile == pytest.approx(100.0 - bench.percentile)


def test_index_and_exact_agree_with_full_probe(bench):
    p = field.AdfParams(nprobe=16)
    a = X.run_adf(bench, p)
    b = X.run_adf(bench, p, exact=True)
    assert a.report == b.report and a.n_flagged == b.n_flagged


def test_flag_share_matches_baseline(bench):
    res = X.run_adf(bench, field.AdfParams())
    knn = X.run_knn(bench, 25)
    n = len(bench.eval_pois)
    # per-trace percentile cuts round up, so allow one extra flag per flight
    slack = len(bench.data.evaluation) * 2
    assert n <= res.n_flagged <= n + slack
    assert n <= knn.n_flagged <= n + slack


def test_ablate_rows(bench):
    rows = X.ablate(bench, sweep="bandwidth")
    assert [r.label for r in rows] == ["bandwidth=adaptive", "bandwidth=250.0", "bandwidth=500.0",
                                       "bandwidth=750.0"]
    assert {"config", "precision", "recall", "f1", "ms_per_query"} <= set(rows[0].as_row())
