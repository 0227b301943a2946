"""Smoke test for the sdgmine_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run with pytest or directly with python.
"""

import json
import math
import pathlib
import tempfile

import sdgmine_py as sm

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def example(name):
    return (FIXTURES / name).read_text()


def test_taxonomy():
    tax = sm.Taxonomy.bundled()
    assert len(tax) == 17
    assert len(tax.digest) == 64
    assert "9.5" in tax.targets(9)
    assert tax.validate_target(9, "9.5") == "valid"
    assert tax.validate_target(13, "9.5") == "prefix_mismatch"
    assert "SDG 9" in tax.system_prompt()


def test_parse_examples():
    a = sm.parse_response(example("example_a_response.txt"), arxiv_id="1501.06862")
    assert a.motivated_sdgs == []
    assert a.aligned_sdgs == [9]
    assert a.aligned_targets == [["9.5"]]
    assert not any(a.mentions.values())

    b = sm.parse_response(example("example_b_response.txt"), arxiv_id="2411.15159")
    assert b.motivated_sdgs == [13, 15]
    assert b.motivated_targets == [["13.1", "13.3"], ["15.1", "15.5"]]
    assert sorted(b.aligned_sdgs) == [9, 13, 15]
    assert b.mentions["sustainability"] and b.mentions["ecological"]
    assert b.ifr_sdgs == [15]

    again = sm.parse_response(b.serialize(), arxiv_id="2411.15159")
    assert again == b
    assert sm.Record.from_json(b.to_json()) == b
    assert b.to_dict()["arxiv_id"] == "2411.15159"


def test_malformed_input():
    try:
        sm.parse_response("not a response")
    except ValueError:
        pass
    else:
        raise AssertionError("strict parse accepted garbage")
    r = sm.parse_response("not a response", lenient=True)
    assert r.warnings


def test_footprint():
    report = sm.footprint({"DeepSeek-V3": 600, "Qwen3-32B": 600, "gpt-oss-20b": 600, "Llama-3.1-70B": 600},
                          worst_case=["Qwen3-32B", "gpt-oss-20b"])
    assert math.isclose(report["total_energy_kwh"], 42.4266, rel_tol=1e-12)
    assert math.isclose(report["total_co2e_kg"], 21.8533926, rel_tol=1e-9)
    eq = sm.equivalents(390.0, 650.0)
    assert math.isclose(eq["tree_years"], 39.0)


def test_analytics_and_stability():
    a = sm.parse_response(example("example_a_response.txt"), arxiv_id="1501.06862")
    b = sm.parse_response(example("example_b_response.txt"), arxiv_id="2411.15159")
    summary = sm.analyze([a, b])
    assert summary["distribution"]["denominator"] == 2
    assert summary["distribution"]["per_sdg"]["9"]["aligned_count"] == 2
    assert summary["impact"]["ecological"] == 0.5

    rates = sm.stability_rates([b, b, b])
    assert rates["run_count"] == 3
    assert all(v == 1.0 for v in rates["motivated_targets"].values())

    dated = [sm.Record.from_json(json.dumps({**r.to_dict(), "quarter": q}))
             for r, q in ((a, "2015Q1"), (b, "2024Q4"))]
    series = sm.quarterly_series(dated)
    assert series[0] == ("2015Q1", 1, 1.0)
    assert sum(total for _, total, _ in series) == 2

    with tempfile.TemporaryDirectory() as d:
        path = pathlib.Path(d) / "records.jsonl"
        path.write_text("".join(r.to_json() + "\n" for r in dated))
        loaded = sm.load_dataset(str(path))
        assert [r.arxiv_id for r in loaded] == ["1501.06862", "2411.15159"]
        out = sm.write_reports(loaded, str(pathlib.Path(d) / "reports"))
        assert len([f for f in out["files"] if f.endswith(".csv")]) == 5


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
