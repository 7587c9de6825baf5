"""Small ad-hoc problems for unit tests."""
from plqalm.problems import load_problem

ZERO_G = {"kind": "plq", "dim": 2, "pieces": [{"A": [[0, 0], [0, 0]], "a": [0, 0], "alpha": 0}]}


def half_norm_problem(theta=None, g=None):
    """phi = 0.5 ||x||^2, Phi = x, g = 0 unless given."""
    doc = {
        "n": 2, "m": 2,
        "phi": {"Q": [[1.0, 0.0], [0.0, 1.0]]},
        "Phi": [{"a": [1.0, 0.0]}, {"a": [0.0, 1.0]}],
        "g": g or ZERO_G,
    }
    if theta is not None:
        doc["theta"] = theta
    return load_problem(doc, name="half_norm")
