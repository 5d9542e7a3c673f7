import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from slidesieve.annotation import AnnotationStore, compute_prevalence, create_app
from slidesieve.annotation.store import EmptyLabels, EmptySubset, UnknownImage
from slidesieve.labels import ImpurityCategory, ImpurityLabelSet
from slidesieve.manifest import ManifestEntry


def make_entries(n, tmp_path=None):
    out = []
    for i in range(n):
        path = f"/nowhere/{i}.png" if tmp_path is None else str(tmp_path / f"{i}.png")
        out.append(ManifestEntry(f"q{i:03d}", path, ["cap"]))
    return out


@pytest.fixture()
def store(tmp_path):
    s = AnnotationStore(tmp_path / "ann.db")
    yield s
    s.close()


FLAGS_NONE = [False] * 8


class TestStore:
    def test_create_queue_counts(self, store):
        store.create_queue(make_entries(5), seed=1)
        assert store.progress() == (0, 5)

    def test_queue_order_deterministic(self, tmp_path):
        s1 = AnnotationStore(tmp_path / "a.db")
        s2 = AnnotationStore(tmp_path / "b.db")
        s1.create_queue(make_entries(20), seed=3)
        s2.create_queue(list(reversed(make_entries(20))), seed=3)
        order1 = [s1.next_task()[0] for _ in range(3)]
        order2 = [s2.next_task()[0] for _ in range(3)]
        assert order1 == order2

    def test_empty_subset(self, store):
        with pytest.raises(EmptySubset):
            store.create_queue([], seed=0)

    def test_next_task_hands_out_distinct_ids(self, store):
        store.create_queue(make_entries(3), seed=0)
        a = store.next_task()
        b = store.next_task()
        assert a[0] != b[0]

    def test_lease_expiry_returns_task(self, store):
        store.create_queue(make_entries(1), seed=0)
        first = store.next_task(lease_seconds=0.0)
        assert store.next_task()[0] == first[0]

    def test_record_and_revision_bump(self, store):
        store.create_queue(make_entries(2), seed=0)
        rec1 = store.record_annotation("q000", FLAGS_NONE, "alice")
        assert rec1.revision == 1
        assert store.progress() == (1, 2)
        flags = [True] + [False] * 7
        rec2 = store.record_annotation("q000", flags, "alice")
        assert rec2.revision == 2
        assert store.progress() == (1, 2)  # re-annotation does not change done
        assert store.current_records()[0].flags == tuple(flags)

    def test_unknown_image(self, store):
        store.create_queue(make_entries(1), seed=0)
        with pytest.raises(UnknownImage):
            store.record_annotation("nope", FLAGS_NONE, "x")

    def test_done_plus_pending_invariant(self, store):
        store.create_queue(make_entries(6), seed=2)
        for i in [0, 3, 5]:
            store.record_annotation(f"q{i:03d}", FLAGS_NONE, "a")
        done, total = store.progress()
        pending = 0
        while store.next_task(lease_seconds=1000) is not None:
            pending += 1
        assert done + pending == total

    def test_export_sorted_and_stable(self, store):
        store.create_queue(make_entries(3), seed=0)
        store.record_annotation("q002", FLAGS_NONE, "a")
        store.record_annotation("q000", [True] * 8, "a")
        store.record_annotation("q000", [False] * 4 + [True] * 4, "a")  # revision 2
        text = store.export_labels()
        rows = [json.loads(line) for line in text.strip().splitlines()]
        assert [r["image_id"] for r in rows] == ["q000", "q002"]
        assert rows[0]["flags"] == [False] * 4 + [True] * 4  # latest revision wins
        assert store.export_labels() == text  # pure function of state

    def test_export_round_trips_to_label_loader(self, store, tmp_path):
        from slidesieve.manifest import load_labels

        store.create_queue(make_entries(2), seed=0)
        store.record_annotation("q001", [True] + [False] * 7, "a")
        path = tmp_path / "labels.jsonl"
        path.write_text(store.export_labels())
        labels = load_labels(path)
        assert labels["q001"][ImpurityCategory.NARRATOR]


class TestPrevalence:
    def test_hand_count(self):
        labels = {
            "a": ImpurityLabelSet.single(ImpurityCategory.NARRATOR),
            "b": ImpurityLabelSet.none(),
            "c": ImpurityLabelSet.none(),
            "d": ImpurityLabelSet.none(),
        }
        out = compute_prevalence(labels)
        assert out["narrator"] == pytest.approx(0.25)
        assert out["any"] == pytest.approx(0.25)

    def test_all_negative(self):
        out = compute_prevalence({"a": ImpurityLabelSet.none()})
        assert all(v == 0.0 for v in out.values())

    def test_empty(self):
        with pytest.raises(EmptyLabels):
            compute_prevalence({})

    def test_any_bounds_max_category(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            labels = {
                f"i{k}": ImpurityLabelSet(tuple(rng.random(8) < 0.3)) for k in range(n)
            }
            out = compute_prevalence(labels)
            assert out["any"] >= max(v for k, v in out.items() if k != "any") - 1e-12


@pytest.fixture()
def client(tmp_path, base_tiles):
    tiles = sorted(base_tiles.iterdir())[:2]
    entries = [ManifestEntry(f"img{i}", str(p), ["cap"]) for i, p in enumerate(tiles)]
    store = AnnotationStore(tmp_path / "svc.db")
    store.create_queue(entries, seed=4)
    app = create_app(store)
    with TestClient(app) as c:
        yield c
    store.close()


class TestHttpApi:
    def test_full_annotation_session(self, client):
        seen = []
        for _ in range(2):
            task = client.get("/api/tasks/next")
            assert task.status_code == 200
            body = task.json()
            seen.append(body["image_id"])

            img = client.get(body["image_url"])
            assert img.status_code == 200
            assert img.headers["content-type"] == "image/png"

            resp = client.post(
                "/api/annotations",
                json={"image_id": body["image_id"], "flags": [True] + [False] * 7, "annotator": "t"},
            )
            assert resp.status_code == 201
            assert resp.json()["revision"] == 1

        assert len(set(seen)) == 2
        assert client.get("/api/tasks/next").status_code == 204
        assert client.get("/api/progress").json() == {"done": 2, "total": 2}

        export = client.get("/api/labels/export")
        assert export.status_code == 200
        assert len(export.text.strip().splitlines()) == 2

    def test_unknown_image_404(self, client):
        resp = client.post(
            "/api/annotations", json={"image_id": "ghost", "flags": FLAGS_NONE, "annotator": "t"}
        )
        assert resp.status_code == 404
        assert client.get("/api/images/ghost").status_code == 404

    def test_flag_arity_validated(self, client):
        resp = client.post(
            "/api/annotations", json={"image_id": "img0", "flags": [True], "annotator": "t"}
        )
        assert resp.status_code == 422
