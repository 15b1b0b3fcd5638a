import pytest

import tracesynth as ts


@pytest.fixture(scope="module")
def dataset():
    return ts.gen_dataset(tables=3, rows=1500, seed=2)


@pytest.fixture(scope="module")
def model(dataset):
    return ts.profile(dataset, queries=150, seed=7)


def test_demo_scan_cost():
    demo = ts.gen_dataset(tables=2, rows=1000, seed=0)
    g = ts.parse_sql("SELECT o_custkey, o_date, o_id FROM orders")
    p = ts.SimulatedBackend(demo).execute(g)
    assert p["scanned_bytes"] == 20000
    assert p["cpu_time_ms"] == pytest.approx(10.0)


def test_sql_round_trip(dataset):
    for seed in range(50):
        g = ts.sample_graph(dataset, max_joins=2, max_aggs=2, max_sorts=1, seed=seed)
        back = ts.parse_sql(g.to_sql())
        assert back.canonical_form() == g.canonical_form()
        assert back.hash(parameterized=True) == g.hash(parameterized=True)


def test_out_of_subset_sql_raises():
    with pytest.raises(ts.ParseError):
        ts.parse_sql("SELECT a, RANK() OVER (ORDER BY a) FROM t")


def test_model_round_trip(model):
    assert "scan" in model.kinds
    assert ts.parse_model(model.to_text()).to_text() == model.to_text()


def test_closed_loop(dataset, model):
    trace, key = ts.gen_trace(dataset, n=12, dup=0.25, seed=3)
    assert key.count("record ") == 12
    workload, report = ts.synthesize(trace, dataset, model, {"seed": "1"})
    assert workload.count("-- record_id=") == 12
    s = ts.summarize_report(report)
    assert s["records"] == 12 and s["failed"] == 0
    assert s["reuse"]["exact"] == 3
    assert s["cpu_p50"] <= 1.5
    again, report2 = ts.synthesize(trace, dataset, model, {"seed": "1"})
    assert again == workload and report2 == report


def test_bad_config_key(dataset, model):
    trace, _ = ts.gen_trace(dataset, n=1, seed=1)
    with pytest.raises(ts.ParseError):
        ts.synthesize(trace, dataset, model, {"no_such_key": "1"})


def test_qerror():
    assert ts.qerror(2.0, 1.0) == 2.0
    assert ts.qerror(1.5, 1.5) == 1.0
