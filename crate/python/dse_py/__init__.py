"""Python front end for the dse workbench; results are plain dicts and lists."""

import json

from . import _native

__all__ = ["parse_program", "run", "learn", "report_features"]


def parse_program(source):
    return json.loads(_native.parse_program(source))


def run(source, heuristic="dfs", mode="concolic", budget=100, seed=0, theta=None):
    return json.loads(_native.run(source, heuristic, mode, budget, seed, theta))


def learn(source, mode="concolic", n=30, k=4, trials=3, budget=300, seed=0, max_iterations=20):
    return json.loads(_native.learn(source, mode, n, k, trials, budget, seed, max_iterations))


def report_features(theta, top_k=5):
    return json.loads(_native.report_features(list(theta), top_k))
