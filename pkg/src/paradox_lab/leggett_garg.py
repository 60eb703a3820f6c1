"""Leggett-Garg statistic for the three- and four-box paradoxes.

The observable is lambda = +1 when the ball is in box 3 and -1 otherwise; the
ball starts in box 3, so lambda1 = +1.  Macrorealism turns the three
correlators into Q = 4 P(3_2, 3_3) - 1, and P(3_2, 3_3) is rebuilt from
probabilities that Bob and Alice can measure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import TableError
from .protocol import ProbabilityTable, Scenario, disturbance_check, run_all

LG_LOWER, LG_UPPER = -1.0, 3.0


@dataclass(frozen=True)
class LambdaAssignment:
    """lambda value of every box at every time index."""

    values: Mapping[int, Mapping[str, int]]

    def __post_init__(self) -> None:
        boxes = None
        for t, row in self.values.items():
            if boxes is None:
                boxes = set(row)
            elif set(row) != boxes:
                raise ValueError(f"time {t} maps boxes {sorted(row)}, expected {sorted(boxes)}")
            bad = {b: v for b, v in row.items() if v not in (-1, 1)}
            if bad:
                raise ValueError(f"lambda values must be +1 or -1, got {bad}")

    @classmethod
    def box3_positive(cls, n_boxes: int, times: Sequence[int] = (1, 2, 3)) -> LambdaAssignment:
        row = {str(b): (1 if b == 3 else -1) for b in range(1, n_boxes + 1)}
        return cls({t: dict(row) for t in times})

    def __call__(self, time: int, box: Any) -> int:
        return self.values[time][str(box)]


@dataclass(frozen=True)
class LGResult:
    Q: float
    terms: Mapping[str, float]
    violated: bool
    inputs: Mapping[str, float]
    condition: Mapping[str, Any] = field(default_factory=dict)

    @property
    def Q_value(self) -> float:
        return self.Q

    def to_json(self) -> dict[str, Any]:
        out = {"Q": self.Q, "terms": dict(self.terms), "violated": self.violated, "inputs": dict(self.inputs)}
        if self.condition:
            out["condition"] = dict(self.condition)
        return out


def _find(tables: Sequence[ProbabilityTable], kind: str, *key: str) -> float:
    for t in tables:
        if t.has(kind, *key):
            return getattr(t, kind)(*key)
    raise TableError(f"no table provides the {kind} P({','.join(key)})")


def _result(p32: float, p33: float, p3233: float, inputs: dict[str, float]) -> LGResult:
    terms = {
        "l1l2": 2 * p32 - 1,
        "l2l3": 4 * p3233 - 2 * p32 - 2 * p33 + 1,
        "l1l3": 2 * p33 - 1,
    }
    q = 4 * p3233 - 1
    return LGResult(q, terms, bool(q < LG_LOWER or q > LG_UPPER), inputs)


def lg_threebox(*tables: ProbabilityTable) -> LGResult:
    """Q = 4 (P(3_3) - P(1_2,3_3) - P(2_2,3_3)) - 1.

    Entries are looked up across the given tables in order, so the tables of
    Bob opening box 1 and box 2 can be passed together.
    """
    inputs = {
        "P(3_3)": _find(tables, "marginal", "3_3"),
        "P(1_2,3_3)": _find(tables, "joint", "1_2", "3_3"),
        "P(2_2,3_3)": _find(tables, "joint", "2_2", "3_3"),
        "P(1_2)": _find(tables, "marginal", "1_2"),
        "P(2_2)": _find(tables, "marginal", "2_2"),
    }
    p3233 = inputs["P(3_3)"] - inputs["P(1_2,3_3)"] - inputs["P(2_2,3_3)"]
    p32 = 1 - inputs["P(1_2)"] - inputs["P(2_2)"]
    return _result(p32, inputs["P(3_3)"], p3233, inputs)


def lg_fourbox(*tables: ProbabilityTable) -> LGResult:
    """Q = 4 (P(3_3) - P({1,4}_2,3_3) - P({2,4}_2,3_3) + P(4_2,3_3)) - 1."""
    inputs = {
        "P(3_3)": _find(tables, "marginal", "3_3"),
        "P({1,4}_2,3_3)": _find(tables, "joint", "{1,4}_2", "3_3"),
        "P({2,4}_2,3_3)": _find(tables, "joint", "{2,4}_2", "3_3"),
        "P(4_2,3_3)": _find(tables, "joint", "4_2", "3_3"),
        "P({1,4}_2)": _find(tables, "marginal", "{1,4}_2"),
        "P({2,4}_2)": _find(tables, "marginal", "{2,4}_2"),
        "P(4_2)": _find(tables, "marginal", "4_2"),
    }
    p3233 = inputs["P(3_3)"] - inputs["P({1,4}_2,3_3)"] - inputs["P({2,4}_2,3_3)"] + inputs["P(4_2,3_3)"]
    p32 = 1 - inputs["P({1,4}_2)"] - inputs["P({2,4}_2)"] + inputs["P(4_2)"]
    return _result(p32, inputs["P(3_3)"], p3233, inputs)


def lg_for_scenario(s: Scenario) -> LGResult:
    """LG statistic from the Bob-measurement tables of ``s``'s variant.

    The no-disturbance check that licenses combining different Bob settings
    is attached as ``condition``.
    """
    tables = [t for k, t in run_all(s).items() if k != "N"]
    result = lg_fourbox(*tables) if s.variant == "coherent" else lg_threebox(*tables)
    report = disturbance_check(s)
    condition = {
        "P(3_3)": dict(report.p3),
        "operationally_nondisturbing": report.nondisturbing,
        "setting_independent": report.setting_independent,
    }
    return LGResult(result.Q, result.terms, result.violated, result.inputs, condition)


# ---------------------------------------------------------------------------
# Macrorealist trajectories


def deterministic_trajectories(n_boxes: int) -> list[tuple[int, int]]:
    """Every (box at t2, box at t3) with the ball in box 3 at t1."""
    return list(itertools.product(range(1, n_boxes + 1), repeat=2))


def trajectory_table(weights: Mapping[tuple[int, int], float], n_boxes: int) -> ProbabilityTable:
    """Table of a classical mixture of trajectories measured without disturbance."""
    marg: dict[str, float] = {}
    joints: dict[tuple[str, str], float] = {}

    def prob(pred) -> float:
        return float(sum(w for traj, w in weights.items() if pred(traj)))

    events: dict[str, set[int]] = {f"{b}_2": {b} for b in range(1, n_boxes + 1)}
    if n_boxes == 4:
        events["{1,4}_2"] = {1, 4}
        events["{2,4}_2"] = {2, 4}
    for label, boxes in events.items():
        marg[label] = prob(lambda tr, bs=boxes: tr[0] in bs)
        for b3 in range(1, n_boxes + 1):
            joints[(label, f"{b3}_3")] = prob(lambda tr, bs=boxes, b=b3: tr[0] in bs and tr[1] == b)
    for b3 in range(1, n_boxes + 1):
        marg[f"{b3}_3"] = prob(lambda tr, b=b3: tr[1] == b)
    return ProbabilityTable(f"{n_boxes}-box", "trajectories", "classical", marg, joints)


def direct_q(weights: Mapping[tuple[int, int], float]) -> float:
    """<l1 l2> + <l2 l3> + <l1 l3> evaluated trajectory by trajectory."""
    lam = lambda b: 1 if b == 3 else -1  # noqa: E731
    return float(sum(w * (lam(b2) + lam(b2) * lam(b3) + lam(b3)) for (b2, b3), w in weights.items()))


def random_mixture(n_boxes: int, rng: np.random.Generator) -> dict[tuple[int, int], float]:
    trajs = deterministic_trajectories(n_boxes)
    w = rng.dirichlet(np.ones(len(trajs)))
    return dict(zip(trajs, w))


def lg_statistic(table: ProbabilityTable, n_boxes: int) -> LGResult:
    return lg_fourbox(table) if n_boxes == 4 else lg_threebox(table)
