"""Smoke test for the pylobrep extension.

Build and run:
    maturin develop -m crates/py/Cargo.toml --release
    python crates/py/python/smoke_test.py
"""

import os
import tempfile

import pylobrep as lr


def check_book():
    book = lr.Book(tick_size=0.01, min_order_size=1)
    for side, price, vol in [("ask", 1002, 120), ("ask", 1004, 340), ("bid", 998, 200), ("bid", 995, 160)]:
        book.apply("place", side, price, vol)
    assert (book.best_ask(), book.best_bid()) == (1002, 998)
    try:
        book.apply("place", "bid", 1003, 5)
    except ValueError:
        pass
    else:
        raise AssertionError("crossing order accepted")
    assert book.depth("bid") == 2

    filled = book.perturbed("both", levels=2)
    assert filled.volume_at("ask", 1003) == 1 and filled.volume_at("bid", 997) == 1
    assert (filled.best_ask(), filled.best_bid()) == (1002, 998)


def check_series():
    csv = lr.synth_events_csv(seed=4, events=8000)
    clean = lr.Series.from_events_csv(csv, levels=10)
    both = lr.Series.from_events_csv(csv, levels=10, paradigm="both")
    assert len(clean) == len(both) > 0
    assert clean.mids() == both.mids()
    assert clean.labels(horizon=20) == both.labels(horizon=20)

    mw = clean.represent("mw", 50, history=10, half_width=20)
    assert (len(mw), len(mw[0])) == (10, 41)

    again = lr.Series.from_json(clean.to_json())
    assert again.mids() == clean.mids()
    return clean, both


def check_models(clean, both):
    cfg = {"label": {"horizon": 20}, "train": {"max_epochs": 2}, "train_stride": 3, "test_stride": 3}
    ckpt = lr.Checkpoint.fit(clean, model="linear", scheme="mw", seed=0, config=cfg)
    m = ckpt.evaluate(both, labels_from=clean)
    assert 0 <= m["accuracy"] <= 100
    total = sum(m["confusion"]["counts"])
    trace = sum(m["confusion"]["counts"][i * 4] for i in range(3))
    assert abs(m["accuracy"] - 100 * trace / total) < 1e-9

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "ck.lobt")
        ckpt.save(path)
        assert lr.Checkpoint.load(path).evaluate(both, labels_from=clean) == m
        dims, values, sidecar = lr.read_tensor(path)
        assert dims == [ckpt.num_params] and sidecar["kind"] == "checkpoint"

        lr.write_tensor(os.path.join(d, "t.lobt"), [2, 3], [0, 1, 2, 3, 4, 5])
        assert lr.read_tensor(os.path.join(d, "t.lobt"))[:2] == ([2, 3], [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])

    assert lr.metrics(["up", "down", "stationary"], [0, 2, 1])["accuracy"] == 100.0


def check_grid(clean):
    test = lr.Series.from_events_csv(lr.synth_events_csv(seed=5, events=2000))
    cfg = {
        "models": ["linear"],
        "schemes": ["level_based", "mw"],
        "seeds": [0, 1],
        "label": {"horizon": 20},
        "train": {"max_epochs": 1},
        "train_stride": 3,
        "test_stride": 3,
    }
    out = lr.run_grid(clean, test, cfg)
    rows = out["results_csv"].strip().splitlines()
    assert rows[0].startswith("model,scheme,paradigm,seed,status")
    assert len(rows) - 1 == 1 * 2 * 4 * 2
    assert len(out["summary"]["summary"]) == 2 * 4
    print(out["table"])


if __name__ == "__main__":
    check_book()
    clean, both = check_series()
    check_models(clean, both)
    check_grid(clean)
    print("pylobrep smoke test passed")
