"""Smoke test for the Python bindings: python python/smoke_test.py"""

from pathlib import Path

import dse_py

TRI = (Path(__file__).resolve().parent.parent / "corpus" / "tri.mc").read_text()


def main():
    info = dse_py.parse_program(TRI)
    assert info["branch_count"] == 6, info

    report = dse_py.run(TRI, heuristic="dfs", budget=50)
    assert len(report["covered"]) == 6, report["covered"]
    assert report == dse_py.run(TRI, heuristic="dfs", budget=50)

    egt = dse_py.run(TRI, heuristic="covnew", mode="egt", budget=30)
    assert egt["tests"], "egt generates tests"

    learned = dse_py.learn(TRI, n=4, k=2, trials=1, budget=10, max_iterations=2)
    assert len(learned["theta"]) == 40
    tuned = dse_py.run(TRI, heuristic="parametric", budget=10, theta=learned["theta"])
    assert tuned["covered"]

    features = dse_py.report_features([0.5] + [0.0] * 25, top_k=1)
    assert features["mode"] == "state" and features["positive"][0]["index"] == 1

    try:
        dse_py.run("void main( {", budget=1)
    except ValueError:
        pass
    else:
        raise AssertionError("parse errors raise ValueError")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
