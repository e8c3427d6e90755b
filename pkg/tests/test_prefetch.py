from __future__ import annotations

import pytest

from specload.errors import EmptyWindow, InsufficientTrace
from specload.prefetch import evaluate_prefetch, predict_pages, train
from specload.synth import SynthParams, generate_synthetic
from specload.trace import Trace
from specload.urls import normalize_url

from conftest import visit, trace_of


def test_train_window_and_tie_break():
    t = trace_of(
        visit("http://s.example/a", [], ts=10.0),
        visit("http://s.example/a", [], ts=20.0),
        visit("http://s.example/a", [], ts=30.0),
        visit("http://s.example/c", [], ts=40.0),
        visit("http://s.example/c", [], ts=50.0),
        visit("http://s.example/b", [], ts=60.0),
        visit("http://s.example/b", [], ts=70.0),
        visit("http://s.example/d", [], ts=99.0),
        visit("http://s.example/z", [], ts=100.0),  # at window_end: excluded
    )
    model = train(t, window_end=100.0, training_window_s=100.0, top_k=3)
    assert model.counts["http://s.example/a"] == 3
    assert "http://s.example/z" not in model.counts
    # b and c tie at 2: URL ascending breaks it
    assert predict_pages(model) == [
        "http://s.example/a",
        "http://s.example/b",
        "http://s.example/c",
    ]

    # top_k above the universe size returns everything
    model = train(t, 100.0, 100.0, top_k=50)
    assert len(predict_pages(model)) == 4

    with pytest.raises(EmptyWindow):
        train(t, window_end=5.0, training_window_s=5.0)


def test_insufficient_trace():
    with pytest.raises(InsufficientTrace):
        evaluate_prefetch(Trace(visits=[]))
    short = trace_of(
        visit("http://s.example/a", [], ts=0.0),
        visit("http://s.example/a", [], ts=100.0),
    )
    with pytest.raises(InsufficientTrace):
        evaluate_prefetch(short, training_window_s=100.0)


def test_hand_traced_report():
    p = "http://pf.example/p"
    q = "http://pf.example/q"
    t = trace_of(
        visit(p, [p + "/s.js"], ts=100.0, size=500),
        visit(p, [p + "/s.js"], ts=101.0, size=500),
        visit(p, [p + "/s.js"], ts=102.0, size=500),
        visit(p, [p + "/s.js"], ts=200.0, size=500),
        visit(q, [], ts=310.0, size=2000),
        visit(q, [], ts=360.0, size=2000),
    )
    rep = evaluate_prefetch(
        t, training_window_s=200.0, top_k=2, refresh_interval_s=50.0
    )
    # interval 1 (boundary 300, window [100,300)): predicted {p}; visits: q -> miss
    # interval 2 (boundary 350, window [150,350)): predicted {p, q}; visits: q -> hit
    assert rep.n_intervals == 2
    assert rep.n_eval_visits == 2
    assert rep.usefulness == 0.5
    assert rep.hit_ratio == pytest.approx(1 / 3)
    # p (1000 bytes) charged in both intervals, never requested;
    # q (2000 bytes) charged once, requested
    assert rep.prefetched_bytes == 4000
    assert rep.unnecessary_bytes_fraction == 0.5
    # both evaluated loads are the same page, one of them prefetched
    assert rep.upper_bound_delay_reduction_fraction == 0.5


def test_counters_match_independent_recount():
    trace = generate_synthetic(SynthParams(visits=400, seed=5, n_sites=3))
    window, refresh, k = 3 * 86400.0, 86400.0, 5
    rep = evaluate_prefetch(
        trace, training_window_s=window, top_k=k, refresh_interval_s=refresh
    )

    visits = trace.visits
    boundaries = []
    b = visits[0].timestamp + window
    while b <= visits[-1].timestamp:
        boundaries.append(b)
        b += refresh
    assert rep.n_intervals == len(boundaries)

    predictions = []
    for b in boundaries:
        try:
            predictions.append(set(predict_pages(train(trace, b, window, k))))
        except EmptyWindow:
            predictions.append(set())

    matched = evaluated = 0
    for v in visits:
        if v.timestamp < boundaries[0]:
            continue
        idx = int((v.timestamp - boundaries[0]) // refresh)
        evaluated += 1
        if normalize_url(v.main.url) in predictions[idx]:
            matched += 1
    assert rep.n_eval_visits == evaluated
    assert rep.usefulness == matched / evaluated


def test_mostly_new_visits_cap_usefulness():
    trace = generate_synthetic(SynthParams(visits=600, seed=0))
    rep = evaluate_prefetch(trace, training_window_s=5 * 86400.0)
    assert rep.usefulness <= 0.25
