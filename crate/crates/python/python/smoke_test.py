"""Exercise the compass_py bindings on the bundled worked-example fixture.

Run after `maturin develop` (or installing the built wheel):

    python crates/python/python/smoke_test.py
"""

import pathlib
import sys

import compass_py as cp

FIXTURES = pathlib.Path(__file__).resolve().parents[3] / "fixtures" / "worked_example"
NOW = "2025-01-31T12:00:00Z"
COURSE = ["C1", "C2"]


def read(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


def main():
    model = cp.DomainModel.from_json(read("domain.json"))
    pool = cp.ItemPool.from_json(read("items.json"))
    learner = cp.Learner.from_json(read("learner.json"))

    assert model.validate()["ok"]
    assert pool.validate(model)["ok"]
    assert model.to_json() == read("domain.json")
    assert model.prerequisite_closure("C2") == ["C1"]

    report = cp.overlay(model, learner, NOW, course=COURSE)
    assert report["statuses"]["LO1"] == "Achieved", report
    assert report["statuses"]["LO2"] == "NotAchieved", report
    assert report["deficits"] == ["LO2"]
    assert model.export_dot(COURSE, learner, NOW) == read("overlay.dot")

    plans = cp.recommend_path(model, learner, "C2", NOW, course=COURSE, k=3)
    assert [p["steps"] for p in plans][0] == ["C2"]
    assert len(plans) == 4
    ranked = cp.recommend_resources(model, "LO2", ["video"])["ranked"]
    assert ranked[0]["id"] == "r-c2-video"

    sim = cp.simulate(pool, model, "LO2", 4, "2025-02-01T00:00:00Z")
    assert sim["result"]["localized_level"] == 4
    assert sim["result"]["items_used"] == 3

    session = cp.Session(pool, model, learner, "LO1")
    item = session.next_item()
    assert "answer_key" not in item
    session.submit(item["id"], [0], 10, "2025-02-01T00:00:00Z")
    assert session.interval[0] <= session.interval[1]

    fresh = cp.Learner("fresh")
    assert cp.overlay(model, fresh, NOW, course=COURSE)["no_statement"]
    fresh.record("lo1-l3a", "LO1", 3, True, NOW, 12)
    try:
        fresh.record("lo1-l3a", "LO1", 3, True, NOW, 12)
    except cp.CompassError as e:
        assert e.args[0] == "DUPLICATE_EVIDENCE"
    else:
        raise AssertionError("duplicate evidence accepted")
    assert 0.0 < fresh.mastery("LO1", NOW) <= 1.0

    print("compass_py smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
