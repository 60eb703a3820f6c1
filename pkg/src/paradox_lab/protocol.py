"""Scenario engine: preparation, Bob's measurement, Alice's shuffle, tables.

A scenario is evaluated by exact enumeration of measurement branches, either
in the box algebra or by full Fock-space evolution.  Event labels follow
``<box>_<time>``, e.g. ``"1_2"`` (ball in box 1 at t2), ``"{1,4}_2"`` (found in
box 1 or 4) and ``"none_2"`` (Bob opened boxes and found nothing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import _io
from .boxalgebra import BoxUnitary, BoxVector, apply, measure_boxes, standard_unitaries
from .dynamics import (
    THETA_1F,
    THETA_1I,
    THETA_2,
    JosephsonSpec,
    KerrSpec,
    build_josephson,
    build_kerr,
    noon_calibration,
    propagator,
)
from .errors import ArgumentError, TableError, VariantError
from .fock import (
    Ensemble,
    Member,
    ModeSpec,
    Operator,
    StateVector,
    coherent_state,
    default_n_max,
    measure_projective,
    number_state,
    symmetric_orthonormalize,
)

VARIANTS = ("original", "mesoscopic", "coherent")
ENGINES = ("boxalgebra", "dynamics")
BOB_SETS = {
    "original": (frozenset(), frozenset({1}), frozenset({2})),
    "mesoscopic": (frozenset(), frozenset({1}), frozenset({2})),
    "coherent": (frozenset(), frozenset({1, 4}), frozenset({2, 4})),
}
BOB_ACTIONS = {
    "none": frozenset(),
    "open1": frozenset({1}),
    "open2": frozenset({2}),
    "open14": frozenset({1, 4}),
    "open24": frozenset({2, 4}),
}
BOX_TOL = 1e-12
DYNAMICS_TOL = 8e-3


@dataclass(frozen=True)
class Scenario:
    variant: str
    bob: frozenset[int] = frozenset()
    engine: str = "boxalgebra"
    N: int = 2
    kappa: float = 1.0
    g: float = 30.0
    alpha0: float = 3.0
    k_exp: int = 3
    Omega: float = 1.0
    phi: float = 0.0
    phi1: float = 0.0
    # Fock engine, coherent variant: start from the bare coherent state
    # instead of the orthonormalized box-3 state.
    raw_coherent_start: bool = False

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise VariantError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.engine not in ENGINES:
            raise ArgumentError(f"unknown engine {self.engine!r}; expected one of {', '.join(ENGINES)}")
        bob = frozenset(int(b) for b in self.bob)
        object.__setattr__(self, "bob", bob)
        if bob not in BOB_SETS[self.variant]:
            allowed = ", ".join(_set_text(b) or "none" for b in BOB_SETS[self.variant])
            raise ArgumentError(f"Bob cannot open {_set_text(bob)} in the {self.variant} variant (allowed: {allowed})")
        if self.variant == "original" and self.engine == "dynamics":
            raise VariantError("the original variant has no Hamiltonian model; use the box-algebra engine")
        if self.variant == "mesoscopic" and self.N < 1:
            raise ArgumentError("N must be >= 1")
        if self.variant == "coherent":
            if self.k_exp not in (2, 3):
                raise VariantError(f"coherent box algebra is defined for k = 2 and k = 3, got {self.k_exp}")
            if self.alpha0 <= 0 or self.Omega <= 0:
                raise ArgumentError("alpha0 and Omega must be positive")

    @property
    def box_variant(self) -> str:
        return f"coherent_k{self.k_exp}" if self.variant == "coherent" else self.variant

    @property
    def setting(self) -> str:
        return ",".join(f"B{b}" for b in sorted(self.bob)) if self.bob else "N"

    def with_bob(self, bob: Iterable[int]) -> Scenario:
        return replace(self, bob=frozenset(bob))

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Scenario:
        known = {"variant", "N", "kappa", "g", "alpha0", "k_exp", "Omega", "bob_action", "engine", "phi", "phi1"}
        unknown = set(config) - known
        if unknown:
            raise ArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "variant" not in config:
            raise ArgumentError("config needs a 'variant'")
        kwargs = {k: config[k] for k in known - {"bob_action", "variant"} if k in config}
        variant = str(config["variant"])
        if variant.startswith("coherent_k"):
            kwargs["k_exp"] = int(variant.removeprefix("coherent_k"))
            variant = "coherent"
        return cls(variant=variant, bob=parse_bob(config.get("bob_action", "none")), **kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> Scenario:
        try:
            config = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(config, dict):
            raise ArgumentError(f"{path}: config must be a JSON object")
        return cls.from_config(config)


def parse_bob(action: Any) -> frozenset[int]:
    """Accept ``"none"``, ``"open14"`` style names or an explicit box list."""
    if isinstance(action, str):
        key = action.strip().lower()
        if key in BOB_ACTIONS:
            return BOB_ACTIONS[key]
        raise ArgumentError(f"unknown Bob action {action!r}; expected one of {', '.join(BOB_ACTIONS)}")
    if isinstance(action, Iterable):
        return frozenset(int(b) for b in action)
    raise ArgumentError(f"cannot interpret Bob action {action!r}")


def _set_text(boxes: Iterable[int]) -> str:
    return "{" + ",".join(str(b) for b in sorted(boxes)) + "}"


def event(boxes: Iterable[Any] | Any, time: int) -> str:
    """Label for "ball in one of ``boxes`` at time index ``time``"."""
    if isinstance(boxes, (str, int)):
        return f"{boxes}_{time}"
    items = sorted(str(b) for b in boxes)
    if len(items) == 1:
        return f"{items[0]}_{time}"
    return "{" + ",".join(items) + "}_" + str(time)


# ---------------------------------------------------------------------------
# Probability tables


@dataclass(frozen=True)
class ProbabilityTable:
    """Marginal, joint and conditional probabilities of one Bob setting.

    At t2 with Bob measuring, the outcome set is his opened boxes plus
    ``none``; it is complete, so the t2 leakage entry is zero and any
    population outside the boxes sits in ``none_2``.  Set events such as
    ``{1,4}_2`` are coarse-grainings and are not part of the per-time sums.
    """

    variant: str
    engine: str
    setting: str
    marginals: Mapping[str, float]
    joints: Mapping[tuple[str, str], float] = field(default_factory=dict)
    conditionals: Mapping[tuple[str, str], float] = field(default_factory=dict)
    leakage: Mapping[str, float] = field(default_factory=dict)

    def marginal(self, label: str) -> float:
        try:
            return self.marginals[label]
        except KeyError:
            raise TableError(f"table {self.setting!r} has no marginal P({label})") from None

    def joint(self, a: str, b: str) -> float:
        for key in ((a, b), (b, a)):
            if key in self.joints:
                return self.joints[key]
        raise TableError(f"table {self.setting!r} has no joint P({a},{b})")

    def conditional(self, label: str, given: str) -> float:
        try:
            return self.conditionals[(label, given)]
        except KeyError:
            raise TableError(f"table {self.setting!r} has no conditional P({label}|{given})") from None

    def has(self, kind: str, *key: str) -> bool:
        try:
            getattr(self, kind)(*key)
        except TableError:
            return False
        return True

    def rows(self) -> list[tuple[str, str, str, float]]:
        rows: list[tuple[str, str, str, float]] = []
        rows += [("marginal", e, "", p) for e, p in self.marginals.items()]
        rows += [("joint", f"{a}&{b}", "", p) for (a, b), p in self.joints.items()]
        rows += [("conditional", e, c, p) for (e, c), p in self.conditionals.items()]
        rows += [("leakage", t, "", p) for t, p in self.leakage.items()]
        return rows

    def csv_text(self) -> str:
        return _io.csv_text(("kind", "event", "conditioning", "value"), self.rows())

    def to_csv(self, path: str | Path) -> Path:
        return _io.write_csv(path, ("kind", "event", "conditioning", "value"), self.rows())

    def to_json(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "engine": self.engine,
            "setting": self.setting,
            "marginals": dict(self.marginals),
            "joints": {f"{a}&{b}": p for (a, b), p in self.joints.items()},
            "conditionals": {f"{e}|{c}": p for (e, c), p in self.conditionals.items()},
            "leakage": dict(self.leakage),
        }

    def time_sums(self) -> dict[str, float]:
        """Sum of the single-outcome marginals at each time index."""
        sums: dict[str, float] = {}
        for label, p in self.marginals.items():
            if label.startswith("{"):
                continue
            t = label.rsplit("_", 1)[1]
            sums[t] = sums.get(t, 0.0) + p
        return sums

    @classmethod
    def merge(cls, *tables: ProbabilityTable) -> ProbabilityTable:
        """Union of several tables; on a key clash the earlier table wins."""
        if not tables:
            raise TableError("nothing to merge")
        marg: dict[str, float] = {}
        joints: dict[tuple[str, str], float] = {}
        conds: dict[tuple[str, str], float] = {}
        for t in tables:
            for k, v in t.marginals.items():
                marg.setdefault(k, v)
            for k, v in t.joints.items():
                joints.setdefault(k, v)
            for k, v in t.conditionals.items():
                conds.setdefault(k, v)
        return cls(
            variant=tables[0].variant,
            engine=tables[0].engine,
            setting="+".join(t.setting for t in tables),
            marginals=marg,
            joints=joints,
            conditionals=conds,
        )


# ---------------------------------------------------------------------------
# Engine models


@dataclass(frozen=True)
class StageOp:
    """One unitary step; ``generator``/``duration`` are set for Fock stages."""

    name: str
    unitary: Any
    generator: Operator | None = None
    duration: float = 0.0


@dataclass(frozen=True)
class Model:
    scenario: Scenario
    boxes: tuple[str, ...]
    initial: Any
    preparation: tuple[StageOp, ...]
    alice: tuple[StageOp, ...]
    box_states: tuple[StateVector, ...] | None = None

    @property
    def is_fock(self) -> bool:
        return self.box_states is not None

    def probabilities(self, state: Any) -> np.ndarray:
        if self.box_states is None:
            return state.probabilities()
        return np.array([abs(b.overlap(state)) ** 2 for b in self.box_states])

    def ensemble_probabilities(self, ens: Ensemble) -> np.ndarray:
        return sum(m.weight * self.probabilities(m.state) for m in ens)

    def leakage(self, state: Any) -> float:
        return max(0.0, 1.0 - float(np.sum(self.probabilities(state))))

    def measure(self, state: Any, opened: Iterable[Any]) -> Ensemble:
        opened = [str(b) for b in sorted(opened, key=str)]
        if self.box_states is None:
            return measure_boxes(state, opened)
        projectors = [(b, [self.box_states[self.boxes.index(b)]]) for b in opened]
        return measure_projective(state, projectors, rest_label="none")

    def psi_sup(self) -> Any:
        state = self.initial
        for op in self.preparation:
            state = _apply(op.unitary, state)
        return state

    def psi_f(self) -> Any:
        """Postselected state: Alice's stages undone, last first, from |3>."""
        state = self.initial
        for op in reversed(self.alice):
            state = _apply(_inverse(op.unitary), state)
        return state

    def run_alice(self, state: Any) -> Any:
        for op in self.alice:
            state = _apply(op.unitary, state)
        return state


def _apply(U: Any, state: Any) -> Any:
    if isinstance(U, BoxUnitary):
        return apply(U, state)
    return U.apply(state)


def _inverse(U: Any) -> Any:
    if isinstance(U, BoxUnitary):
        return U.inverse()
    return U.dagger()


def _map(ens: Ensemble, U: Any) -> Ensemble:
    return ens.map(lambda s: _apply(U, s))


def build_model(s: Scenario) -> Model:
    if s.engine == "boxalgebra":
        us = standard_unitaries(s.box_variant, s.phi, s.phi1)
        return Model(
            scenario=s,
            boxes=us.basis.labels,
            initial=us.initial(),
            preparation=tuple(StageOp(n, us[n]) for n in us.preparation),
            alice=tuple(StageOp(n, us[n]) for n in us.alice_stages),
        )
    if s.variant == "mesoscopic":
        return _meso_fock_model(s)
    return _coherent_fock_model(s)


@lru_cache(maxsize=16)
def _meso_fock_model_cached(N: int, kappa: float, g: float) -> tuple:
    modes = ModeSpec.number_sector(3, N)
    cal = noon_calibration(N, kappa, g)
    # Mode 0, 1, 2 hold boxes 1, 2, 3.
    h32 = build_josephson(modes, JosephsonSpec(kappa, g, (2, 1)))
    h21 = build_josephson(modes, JosephsonSpec(kappa, g, (1, 0)))
    t1i, t2, t1f = (cal.time_for(th) for th in (THETA_1I, THETA_2, THETA_1F))
    prep = (
        StageOp("U_1i", propagator(h32, t1i), h32, t1i),
        StageOp("U_2i", propagator(h21, t2), h21, t2),
    )
    # Alice undoes the postselection stages by exact time reversal.
    alice = (
        StageOp("U_2f^-1", propagator(h21, -t2), h21, -t2),
        StageOp("U_1f^-1", propagator(h32, -t1f), h32, -t1f),
    )
    boxes = tuple(number_state(modes, occ) for occ in ((N, 0, 0), (0, N, 0), (0, 0, N)))
    return modes, prep, alice, boxes


def _meso_fock_model(s: Scenario) -> Model:
    modes, prep, alice, boxes = _meso_fock_model_cached(s.N, float(s.kappa), float(s.g))
    return Model(s, ("1", "2", "3"), boxes[2], prep, alice, boxes)


def coherent_box_states(alpha0: float, k_exp: int, n_max: int | None = None) -> tuple[StateVector, ...]:
    """Orthonormalized four-box states built from |-i a>, |i a>, |a>, |-a>.

    Symmetric orthonormalization keeps the Z4 rotation symmetry of the set,
    so the Kerr propagator at revival times maps these states into each
    other exactly as the box algebra does.
    """
    if n_max is None:
        n_max = default_n_max(alpha0)
    raw = [coherent_state(c * alpha0, n_max) for c in (-1j, 1j, 1, -1)]
    ortho = symmetric_orthonormalize(raw)
    if k_exp == 2:
        w = np.exp(-1j * math.pi / 4)
        ortho[2] = StateVector(ortho[2].modes, w * ortho[2].amplitudes)
        ortho[3] = StateVector(ortho[3].modes, w * ortho[3].amplitudes)
    return tuple(ortho)


def _coherent_fock_model(s: Scenario) -> Model:
    us = standard_unitaries(s.box_variant)
    n_max = default_n_max(s.alpha0)
    boxes = coherent_box_states(s.alpha0, s.k_exp, n_max)
    H = build_kerr(n_max, KerrSpec(s.Omega, s.k_exp))

    def stage(name: str) -> StageOp:
        t = us.kerr_times[name] / s.Omega
        return StageOp(name, propagator(H, t), H, t)

    initial = coherent_state(s.alpha0, n_max) if s.raw_coherent_start else boxes[2]
    return Model(
        scenario=s,
        boxes=us.basis.labels,
        initial=initial,
        preparation=tuple(stage(n) for n in us.preparation),
        alice=tuple(stage(n) for n in us.alice_stages),
        box_states=boxes,
    )


# ---------------------------------------------------------------------------
# Running a scenario


@dataclass(frozen=True)
class Stage:
    name: str
    time: str
    ensemble: Ensemble
    probabilities: np.ndarray
    leakage: float


def trace(s: Scenario, model: Model | None = None) -> tuple[Stage, ...]:
    """Every intermediate state of the protocol, with box distributions.

    Time tags are t0 (the initial |3>), t1 (after preparation), t2 (after
    Bob) and t3 (after Alice); intermediate stages carry an empty tag.
    """
    model = model or build_model(s)

    def stage(name: str, time: str, ens: Ensemble) -> Stage:
        probs = model.ensemble_probabilities(ens)
        return Stage(name, time, ens, probs, max(0.0, 1.0 - float(np.sum(probs))))

    ens = Ensemble.pure(model.initial)
    stages = [stage("initial", "t0", ens)]
    for i, op in enumerate(model.preparation):
        ens = _map(ens, op.unitary)
        stages.append(stage(op.name, "t1" if i == len(model.preparation) - 1 else "", ens))
    if s.bob:
        ens = model.measure(ens, s.bob)
        stages.append(stage("bob", "t2", ens))
    else:
        stages.append(stage("no measurement", "t2", ens))
    for i, op in enumerate(model.alice):
        ens = _map(ens, op.unitary)
        stages.append(stage(op.name, "t3" if i == len(model.alice) - 1 else "", ens))
    return tuple(stages)


def _stage_at(stages: Sequence[Stage], time: str) -> Stage:
    return next(st for st in stages if st.time == time)


def run(s: Scenario) -> ProbabilityTable:
    """Exhaustive branch enumeration of one scenario into a probability table."""
    model = build_model(s)
    stages = trace(s, model)
    t1, t2, t3 = (_stage_at(stages, t) for t in ("t1", "t2", "t3"))
    boxes = model.boxes

    marginals: dict[str, float] = {}
    joints: dict[tuple[str, str], float] = {}
    conds: dict[tuple[str, str], float] = {}
    leakage = {"t1": t1.leakage, "t2": t2.leakage, "t3": t3.leakage}

    for b, p in zip(boxes, t1.probabilities):
        marginals[event(b, 1)] = float(p)

    # Final per-branch box distributions, aligned with the t2 members.
    finals = [model.probabilities(m.state) for m in t3.ensemble]
    if not s.bob:
        for b, p in zip(boxes, t2.probabilities):
            marginals[event(b, 2)] = float(p)
    else:
        leakage["t2"] = 0.0
        outcomes = [str(b) for b in sorted(s.bob)] + ["none"]
        groups: dict[str, list[str]] = {event(o, 2): [o] for o in outcomes}
        if len(s.bob) > 1:
            groups[event(s.bob, 2)] = [str(b) for b in sorted(s.bob)]
        members = list(t2.ensemble)
        for label, outs in groups.items():
            idx = [i for i, m in enumerate(members) if m.label in outs]
            p_event = float(sum(members[i].weight for i in idx))
            marginals[label] = p_event
            for j, b in enumerate(boxes):
                joints[(label, event(b, 3))] = float(sum(members[i].weight * finals[i][j] for i in idx))

    for b, p in zip(boxes, t3.probabilities):
        marginals[event(b, 3)] = float(p)

    for (a, b3), p_joint in joints.items():
        if marginals[a] > 0:
            conds[(b3, a)] = p_joint / marginals[a]
        if marginals[b3] > 0:
            conds[(a, b3)] = p_joint / marginals[b3]

    return ProbabilityTable(
        variant=s.box_variant,
        engine=s.engine,
        setting=s.setting,
        marginals=marginals,
        joints=joints,
        conditionals=conds,
        leakage=leakage,
    )


def bob_settings(variant: str) -> tuple[frozenset[int], ...]:
    return BOB_SETS[variant]


def run_all(s: Scenario) -> dict[str, ProbabilityTable]:
    """Tables for every Bob setting of the scenario's variant, keyed by setting."""
    out = {}
    for bob in BOB_SETS[s.variant]:
        t = run(s.with_bob(bob))
        out[t.setting] = t
    return out


# ---------------------------------------------------------------------------
# Disturbance and staged comparisons


@dataclass(frozen=True)
class DisturbanceReport:
    variant: str
    engine: str
    tolerance: float
    p3: Mapping[str, float]
    finals: Mapping[str, tuple[float, ...]]
    nondisturbing: bool
    setting_independent: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "engine": self.engine,
            "tolerance": self.tolerance,
            "P(3_3)": dict(self.p3),
            "final_distributions": {k: list(v) for k, v in self.finals.items()},
            "operationally_nondisturbing": self.nondisturbing,
            "setting_independent": self.setting_independent,
        }


def disturbance_check(s: Scenario) -> DisturbanceReport:
    """Compare Alice's P(3_3) with and without each of Bob's measurements."""
    tol = BOX_TOL if s.engine == "boxalgebra" else DYNAMICS_TOL
    tables = run_all(s)
    n_boxes = 4 if s.variant == "coherent" else 3
    p3 = {k: t.marginal("3_3") for k, t in tables.items()}
    finals = {k: tuple(t.marginal(f"{b}_3") for b in range(1, n_boxes + 1)) for k, t in tables.items()}
    bob_values = [v for k, v in p3.items() if k != "N"]
    setting_independent = max(bob_values) - min(bob_values) <= tol
    nondisturbing = setting_independent and all(abs(v - p3["N"]) <= tol for v in bob_values)
    return DisturbanceReport(s.box_variant, s.engine, tol, p3, finals, nondisturbing, setting_independent)


@dataclass(frozen=True)
class StageRow:
    stage: str
    superposition: tuple[float, ...]
    mixture: tuple[float, ...]
    leakage_superposition: float
    leakage_mixture: float


@dataclass(frozen=True)
class StageComparison:
    variant: str
    engine: str
    boxes: tuple[str, ...]
    mixture_from: tuple[str, ...]
    rows: tuple[StageRow, ...]

    def row(self, stage: str) -> StageRow:
        for r in self.rows:
            if r.stage == stage:
                return r
        raise KeyError(stage)

    def csv_rows(self) -> list[tuple[str, str, str, float]]:
        out = []
        for r in self.rows:
            for kind, probs, leak in (
                ("superposition", r.superposition, r.leakage_superposition),
                ("mixture", r.mixture, r.leakage_mixture),
            ):
                out += [(r.stage, kind, b, p) for b, p in zip(self.boxes, probs)]
                out.append((r.stage, kind, "leakage", leak))
        return out

    def to_csv(self, path: str | Path) -> Path:
        return _io.write_csv(path, ("stage", "state", "box", "probability"), self.csv_rows())


def stage_compare(s: Scenario) -> StageComparison:
    """Alice's staged shuffle on the superposition and on its matching mixture.

    The mixture is the superposition after Bob has checked box 3 (three-box
    variants) or boxes 1 and 4 (coherent variant); Bob's setting in ``s`` is
    ignored.
    """
    model = build_model(s.with_bob(()))
    opened = ("1", "4") if s.variant == "coherent" else ("3",)
    sup = Ensemble.pure(model.psi_sup())
    mix = model.measure(model.psi_sup(), opened)

    def row(name: str) -> StageRow:
        ps, pm = model.ensemble_probabilities(sup), model.ensemble_probabilities(mix)
        return StageRow(
            name,
            tuple(float(x) for x in ps),
            tuple(float(x) for x in pm),
            max(0.0, 1.0 - float(np.sum(ps))),
            max(0.0, 1.0 - float(np.sum(pm))),
        )

    rows = [row("t2")]
    for op in model.alice:
        sup, mix = _map(sup, op.unitary), _map(mix, op.unitary)
        rows.append(row(op.name))
    return StageComparison(s.box_variant, s.engine, model.boxes, opened, tuple(rows))


# ---------------------------------------------------------------------------
# Extra diagnostics of the Fock engine


def meso_phases(N: int, kappa: float, g: float) -> tuple[float, float]:
    """Emergent phases (phi, phi1) of the calibrated meso shuffles.

    phi is the phase of <3|U_1i|3> and phi1 that of <2|U_2i|2>.
    """
    modes, prep, _, boxes = _meso_fock_model_cached(N, float(kappa), float(g))
    u1i, u2i = prep[0].unitary, prep[1].unitary
    phi = float(np.angle(boxes[2].overlap(u1i.apply(boxes[2]))))
    phi1 = float(np.angle(boxes[1].overlap(u2i.apply(boxes[1]))))
    return phi, phi1


@dataclass(frozen=True)
class PathLeakage:
    preparation: float
    postselection: float
    alice_max: float


def path_leakage(s: Scenario) -> PathLeakage:
    """Worst leakage along preparation, the postselection path and Alice's runs.

    The postselection path builds psi_f from |3> and then applies Alice's
    stages to it; the Alice figure is the largest leakage of any branch after
    any of her stages, over every Bob setting.
    """
    model = build_model(s.with_bob(()))
    state, prep_leak = model.initial, 0.0
    for op in model.preparation:
        state = _apply(op.unitary, state)
        prep_leak = max(prep_leak, model.leakage(state))

    state, post_leak = model.initial, 0.0
    for op in reversed(model.alice):
        state = _apply(_inverse(op.unitary), state)
        post_leak = max(post_leak, model.leakage(state))
    for op in model.alice:
        state = _apply(op.unitary, state)
        post_leak = max(post_leak, model.leakage(state))

    alice_leak = 0.0
    for bob in BOB_SETS[s.variant]:
        stages = trace(s.with_bob(bob), model)
        after = stages[-len(model.alice):]
        for st in after:
            for m in st.ensemble:
                alice_leak = max(alice_leak, model.leakage(m.state))
    return PathLeakage(prep_leak, post_leak, alice_leak)
