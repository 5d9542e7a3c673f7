import numpy as np
import pytest

from slidesieve import semantic as sem
from slidesieve.manifest import ManifestEntry


def test_cosine_identical_and_orthogonal():
    v = np.array([1.0, 0.0, 0.0])
    w = np.array([0.0, 1.0, 0.0])
    assert sem.cosine_score(v, v) == pytest.approx(1.0)
    assert sem.cosine_score(v, w) == pytest.approx(0.0)


def test_stub_scorer_deterministic():
    a, b = sem.StubScorer(), sem.StubScorer()
    assert np.array_equal(a.embed_image(b"abc"), b.embed_image(b"abc"))
    assert np.array_equal(a.embed_text("hello"), b.embed_text("hello"))
    assert not np.array_equal(a.embed_image(b"abc"), a.embed_image(b"abd"))
    assert np.linalg.norm(a.embed_text("x")) == pytest.approx(1.0)


def test_score_pairs_order_and_count(tmp_path):
    entries = []
    for i in range(3):
        p = tmp_path / f"img{i}.bin"
        p.write_bytes(bytes([i]) * 32)
        caps = ["one", "two"] if i == 0 else ["only"]
        entries.append(ManifestEntry(f"id{i}", str(p), caps))
    scores, failures = sem.score_pairs(sem.StubScorer(), entries)
    assert failures == []
    assert [(s.image_id, s.caption_index) for s in scores] == [
        ("id0", 0), ("id0", 1), ("id1", 0), ("id2", 0)
    ]
    assert all(-1.0 <= s.score <= 1.0 for s in scores)


def test_score_pairs_records_failures(tmp_path):
    entries = [ManifestEntry("gone", str(tmp_path / "missing.png"), ["a", "b"])]
    scores, failures = sem.score_pairs(sem.StubScorer(), entries)
    assert scores == []
    assert [f["caption_index"] for f in failures] == [0, 1]


def make_scores(values):
    return [sem.PairScore(f"i{k}", 0, v) for k, v in enumerate(values)]


def test_median_filter_even():
    kept, dropped, median = sem.median_filter(make_scores([0.1, 0.2, 0.3, 0.4]))
    assert median == pytest.approx(0.25)
    assert sorted(s.score for s in kept) == [0.3, 0.4]
    assert len(kept) + len(dropped) == 4


def test_median_filter_odd():
    kept, dropped, median = sem.median_filter(make_scores([1.0, 2.0, 3.0]))
    assert median == 2.0
    assert [s.score for s in kept] == [3.0]


def test_median_filter_all_ties():
    kept, dropped, median = sem.median_filter(make_scores([5.0] * 4))
    assert median == 5.0 and kept == []
    assert len(dropped) == 4


def test_median_filter_too_few():
    with pytest.raises(sem.TooFewPairs):
        sem.median_filter(make_scores([1.0]))


def test_kept_count_law_for_distinct_scores():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        values = rng.permutation(n) / n  # distinct
        kept, _, _ = sem.median_filter(make_scores(values.tolist()))
        assert len(kept) == n // 2


def test_monotone_transform_invariance():
    rng = np.random.default_rng(3)
    values = rng.permutation(21).astype(float).tolist()
    kept1, _, _ = sem.median_filter(make_scores(values))
    kept2, _, _ = sem.median_filter(make_scores([np.tanh(v / 5) for v in values]))
    assert {s.image_id for s in kept1} == {s.image_id for s in kept2}


def test_filter_preserves_input_order():
    values = [0.9, 0.1, 0.8, 0.2, 0.7, 0.3]
    kept, dropped, _ = sem.median_filter(make_scores(values))
    assert [s.score for s in kept] == [0.9, 0.8, 0.7]
    assert [s.score for s in dropped] == [0.1, 0.2, 0.3]


def test_scores_round_trip(tmp_path):
    scores = make_scores([0.5, -0.25])
    p = tmp_path / "scores.jsonl"
    sem.emit_scores(scores, p)
    assert sem.load_scores(p) == [
        sem.PairScore(s.image_id, s.caption_index, s.score, s.scorer_id) for s in scores
    ]
