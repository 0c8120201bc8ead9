"""Smoke test for the chronotopic_py extension.

Build and install first:
    pip install maturin && maturin develop --release
then run:
    python python/smoke_test.py
"""

import pathlib
import tempfile

import chronotopic_py as ct

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG = ROOT / "crates" / "core" / "fixtures" / "mini_corpus" / "config.toml"

THEMES = [
    ["reactor", "fuel", "uranium", "plant", "turbine", "coolant"],
    ["wheat", "harvest", "farm", "grain", "tractor", "soil"],
    ["rocket", "orbit", "launch", "satellite", "capsule", "booster"],
]


def toy_corpus():
    docs, years = [], []
    for i in range(90):
        words = THEMES[i % 3]
        docs.append([words[(i + j) % len(words)] for j in range(15)])
        years.append(1960 + i % 40)
    return docs, years


def check_metrics():
    assert ct.topic_diversity([["a", "b"], ["a", "c"]], 2) == 0.75
    assert abs(ct.npmi_coherence([["x", "y"]], [["x", "y"], ["z"]]) - 1.0) < 1e-12
    terms, rows = ct.ctfidf([0, 1, -1], [["a", "a"], ["b"], ["a", "b"]])
    assert terms == ["a", "b"] and len(rows) == 3


def check_models():
    docs, years = toy_corpus()
    lda = ct.fit_lda(docs, 3, seed=1)
    assert len(lda["topic_words"]) == 3
    nmf = ct.fit_nmf(docs, 3, seed=1)
    assert all(x >= 0 for row in nmf["w"] for x in row)

    emb = ct.hash_embed(docs, dim=32, seed=1)
    model = ct.fit_cluster(
        docs, emb, years=years, seed=1,
        settings={"n_neighbors": 10, "n_components": 2, "min_cluster_size": 10},
    )
    print(model, model.keywords()[:3])
    assert model.n_topics >= 2
    assert sum(model.sizes) == len(docs)
    rows = model.topics_over_time([(1960, 1979), (1980, 1999)])
    assert len(rows) == 2 * model.n_topics
    tc, td = model.scores()
    assert -1.0 <= tc <= 1.0 and 0.0 < td <= 1.0
    labels, _ = ct.hdbscan(ct.reduce(emb, n_neighbors=10, n_components=2, seed=3), 10)
    assert len(labels) == len(docs)


def check_fmin():
    best, trials = ct.fmin(
        lambda p: (p["x"] - 2.0) ** 2,
        {"params": {"x": {"kind": "uniform", "lo": -5.0, "hi": 5.0}}},
        max_evals=40,
        seed=3,
    )
    assert len(trials) == 40
    assert abs(best["x"] - 2.0) < 0.5, best


def check_errors():
    try:
        ct.fit_lda([["a"]], 0)
    except ct.ChronotopicError as e:
        assert e.args[1] == 2
    else:
        raise AssertionError("expected an error")


def check_pipeline():
    with tempfile.TemporaryDirectory() as out:
        summary = ct.prepare(CONFIG, output_dir=out)
        assert summary["docs_out"] == 500
        ct.fit(CONFIG, model="cluster", k=10, output_dir=out)
        print(ct.evaluate(CONFIG, output_dir=out))
        rows = ct.dynamic(CONFIG, output_dir=out)
        assert rows
        best, loss, n = ct.tune(CONFIG, max_evals=3, output_dir=out)
        assert n == 3 and loss < 1.0
        assert pathlib.Path(ct.report(CONFIG, output_dir=out)).is_file()


if __name__ == "__main__":
    check_metrics()
    check_models()
    check_fmin()
    check_errors()
    check_pipeline()
    print("smoke test passed")
