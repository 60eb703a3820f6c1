"""Command-line front end.

Every command writes plot-ready CSV or JSON into the output directory
(``--out``, else ``$PARADOX_LAB_OUT``, else ``./paradox_lab_out``) and prints
the written paths.  Exit status is 2 for bad arguments or configs and 3 when
a computation fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import _io, __version__
from .dynamics import noon_calibration, noon_trajectory, trajectory
from .errors import ArgumentError, ParadoxLabError
from .fock import Ensemble
from .leggett_garg import lg_for_scenario
from .phasespace import DEFAULT_RESOLUTION, PhaseGrid, qfunction
from .protocol import (
    Model,
    Scenario,
    _apply,
    build_model,
    run,
    stage_compare,
    trace,
)

EXIT_OK, EXIT_USAGE, EXIT_ENGINE = 0, 2, 3
DEFAULT_OUT = "paradox_lab_out"
FIG_SAMPLES = 200
MESO_PARAMS = {2: (1.0, 30.0), 5: (20.0, 333.33)}

# Scenario flag -> config key.
SCENARIO_FLAGS = {
    "variant": "variant",
    "bob": "bob_action",
    "engine": "engine",
    "N": "N",
    "kappa": "kappa",
    "g": "g",
    "alpha0": "alpha0",
    "k": "k_exp",
    "Omega": "Omega",
    "phi": "phi",
    "phi1": "phi1",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument handling


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=("original", "mesoscopic", "coherent"))
    p.add_argument("--bob", help="none, open1, open2, open14 or open24")
    p.add_argument("--engine", choices=("boxalgebra", "dynamics"))
    p.add_argument("--N", type=int, help="bosons per box (mesoscopic)")
    p.add_argument("--kappa", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--k", type=int, help="Kerr exponent (coherent: 2 or 3)")
    p.add_argument("--Omega", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--phi1", type=float)
    p.add_argument("--config", help="JSON scenario file; its keys override flags")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default: $PARADOX_LAB_OUT or ./paradox_lab_out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0, help="accepted for forward compatibility; nothing is random")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paradox-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="probability table of one scenario")
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("stage-compare", help="Alice's stages on the superposition and on the mixture")
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("qfunc", help="Q function of a coherent-variant state")
    _add_scenario_flags(p)
    _add_output_flags(p)
    p.add_argument(
        "--state",
        default="sup",
        choices=("sup", "mix", "psi_f", "box1", "box2", "box3", "box4"),
        help="mix is the superposition after Bob's --bob measurement (default open14)",
    )
    p.add_argument("--alice-stages", type=int, default=0, help="number of Alice's stages applied first")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)

    p = sub.add_parser("lg", help="Leggett-Garg statistic of a variant")
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("calibrate", help="NOON-time calibration of a Josephson pair")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--g", type=float, default=30.0)
    _add_output_flags(p)

    p = sub.add_parser("reproduce", help="data behind a figure or the LG numbers")
    p.add_argument("target", help=", ".join(TARGETS))
    _add_output_flags(p)
    return parser


def scenario_from_args(args: argparse.Namespace, default_variant: str | None = None) -> Scenario:
    config: dict[str, Any] = {}
    for flag, key in SCENARIO_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            config[key] = value
    if default_variant and "variant" not in config:
        config["variant"] = default_variant
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ArgumentError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ArgumentError(f"{path}: config must be a JSON object")
        config.update(loaded)
    if "variant" not in config:
        raise ArgumentError("a variant is required (--variant or a config file)")
    try:
        return Scenario.from_config(config)
    except (ParadoxLabError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def output_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get("PARADOX_LAB_OUT") or DEFAULT_OUT)


def _scenario_json(s: Scenario) -> dict[str, Any]:
    out = {
        "variant": s.variant,
        "bob": sorted(s.bob),
        "engine": s.engine,
    }
    if s.variant == "mesoscopic":
        out.update(N=s.N, kappa=s.kappa, g=s.g, phi=s.phi, phi1=s.phi1)
    elif s.variant == "coherent":
        out.update(alpha0=s.alpha0, k_exp=s.k_exp, Omega=s.Omega)
    return out


def _stem(s: Scenario) -> str:
    bob = "".join(str(b) for b in sorted(s.bob)) or "none"
    return f"{s.box_variant}_{s.engine}_bob-{bob}"


# ---------------------------------------------------------------------------
# Commands


def cmd_run(args: argparse.Namespace) -> list[Path]:
    s = scenario_from_args(args)
    table = run(s)
    out = output_dir(args)
    if args.format == "json":
        payload = {"scenario": _scenario_json(s), "table": table.to_json()}
        return [_io.write_json(out / f"table_{_stem(s)}.json", payload)]
    return [table.to_csv(out / f"table_{_stem(s)}.csv")]


def cmd_stage_compare(args: argparse.Namespace) -> list[Path]:
    s = scenario_from_args(args)
    comp = stage_compare(s)
    out = output_dir(args)
    stem = f"stages_{s.box_variant}_{s.engine}"
    if args.format == "json":
        payload = {
            "scenario": _scenario_json(s),
            "boxes": list(comp.boxes),
            "mixture_from": list(comp.mixture_from),
            "rows": [
                {
                    "stage": r.stage,
                    "superposition": list(r.superposition),
                    "mixture": list(r.mixture),
                    "leakage_superposition": r.leakage_superposition,
                    "leakage_mixture": r.leakage_mixture,
                }
                for r in comp.rows
            ],
        }
        return [_io.write_json(out / f"{stem}.json", payload)]
    return [comp.to_csv(out / f"{stem}.csv")]


def coherent_state_for(s: Scenario, which: str, alice_stages: int = 0, model: Model | None = None) -> Any:
    """A Fock-space state (or ensemble) of the coherent variant by name."""
    model = model or build_model(s)
    if which == "sup":
        state: Any = model.psi_sup()
    elif which == "mix":
        opened = [str(b) for b in sorted(s.bob)] or ["1", "4"]
        state = model.measure(model.psi_sup(), opened)
    elif which == "psi_f":
        state = model.psi_f()
    elif which.startswith("box"):
        state = model.box_states[model.boxes.index(which[3:])]
    else:
        raise ArgumentError(f"unknown state {which!r}")
    if not 0 <= alice_stages <= len(model.alice):
        raise ArgumentError(f"alice stages must be within 0..{len(model.alice)}")
    for op in model.alice[:alice_stages]:
        state = state.map(lambda v, U=op.unitary: _apply(U, v)) if isinstance(state, Ensemble) else _apply(op.unitary, state)
    return state


def cmd_qfunc(args: argparse.Namespace) -> list[Path]:
    s = scenario_from_args(args, default_variant="coherent")
    if s.variant != "coherent":
        raise ArgumentError("qfunc needs the coherent variant")
    if s.engine != "dynamics":
        s = replace(s, engine="dynamics")
    state = coherent_state_for(s, args.state, args.alice_stages)
    grid = PhaseGrid.covering(s.alpha0, args.resolution)
    q = qfunction(state, grid, s.alpha0, f"{args.state} after {args.alice_stages} Alice stage(s), k={s.k_exp}")
    out = output_dir(args)
    stem = f"q_{args.state}_k{s.k_exp}_alpha{s.alpha0:g}_stage{args.alice_stages}"
    if args.format == "json":
        payload = {**q.metadata(), "integral": q.integral(), "values": q.values.tolist()}
        return [_io.write_json(out / f"{stem}.json", payload)]
    return list(q.write(out / f"{stem}.csv"))


def cmd_lg(args: argparse.Namespace) -> list[Path]:
    s = scenario_from_args(args)
    if s.bob:
        raise ArgumentError("lg combines every Bob setting itself; leave --bob unset")
    result = lg_for_scenario(s)
    out = output_dir(args)
    stem = f"lg_{s.box_variant}_{s.engine}"
    if args.format == "json":
        return [_io.write_json(out / f"{stem}.json", {"scenario": _scenario_json(s), **result.to_json()})]
    rows = [("Q", result.Q)] + [(k, v) for k, v in result.terms.items()] + list(result.inputs.items())
    rows.append(("violated", int(result.violated)))
    return [_io.write_csv(out / f"{stem}.csv", ("quantity", "value"), rows)]


def _calibration_json(cal) -> dict[str, Any]:
    return {
        "N": cal.N,
        "kappa": cal.spec.kappa,
        "g": cal.spec.g,
        "omega_N": cal.omega_N,
        "T_noon": cal.T_noon,
        "fidelity": cal.fidelity,
        "fit_residual": cal.residual,
        "population_floor": cal.population_floor,
    }


def _calibration_files(N: int, kappa: float, g: float, out: Path) -> list[Path]:
    cal = noon_calibration(N, kappa, g)
    t, p_n, p_0 = noon_trajectory(cal, FIG_SAMPLES)
    stem = f"noon_N{N}_kappa{kappa:g}_g{g:g}"
    return [
        _io.write_csv(out / f"{stem}.csv", ("t", "P_N", "P_0"), zip(t, p_n, p_0)),
        _io.write_json(out / f"{stem}.json", _calibration_json(cal)),
    ]


def cmd_calibrate(args: argparse.Namespace) -> list[Path]:
    if args.N < 1:
        raise ArgumentError("N must be >= 1")
    return _calibration_files(args.N, args.kappa, args.g, output_dir(args))


# ---------------------------------------------------------------------------
# Reproduction recipes


def _meso(N: int) -> tuple[Scenario, Model]:
    kappa, g = MESO_PARAMS[N]
    s = Scenario("mesoscopic", engine="dynamics", N=N, kappa=kappa, g=g)
    return s, build_model(s)


def _fock_histogram(ens: Ensemble) -> np.ndarray:
    return sum(m.weight * m.state.probabilities() for m in ens)


def _meso_sequence(model: Model, start: Ensemble, ops, label: str, out: Path, stem: str) -> list[Path]:
    """Fock histograms after every stage plus sampled box trajectories."""
    modes = model.box_states[0].modes
    names = ["start"] + [op.name for op in ops]
    ens = start
    hist_rows = []
    traj_rows = []
    t_offset = 0.0
    snapshots = [ens]
    for op in ops:
        times = np.linspace(0.0, op.duration, FIG_SAMPLES)
        per_member = [trajectory(m.state, op.generator, times) for m in ens]
        for i, t in enumerate(times):
            probs = sum(m.weight * model.probabilities(traj[i]) for m, traj in zip(ens, per_member))
            traj_rows.append((op.name, t_offset + abs(t), *probs, max(0.0, 1.0 - float(np.sum(probs)))))
        t_offset += abs(op.duration)
        ens = ens.map(lambda v, U=op.unitary: _apply(U, v))
        snapshots.append(ens)
    for name, snap in zip(names, snapshots):
        hist = _fock_histogram(snap)
        hist_rows += [(label, name, "(" + ",".join(map(str, occ)) + ")", p) for occ, p in zip(modes.basis, hist)]
    return [
        _io.write_csv(out / f"{stem}_histograms.csv", ("sequence", "stage", "occupation", "probability"), hist_rows),
        _io.write_csv(out / f"{stem}_trajectory.csv", ("stage", "t", "P(|1>)", "P(|2>)", "P(|3>)", "leakage"), traj_rows),
    ]


def _fig1(out: Path) -> tuple[list[Path], dict]:
    files = []
    for N, (kappa, g) in MESO_PARAMS.items():
        files += _calibration_files(N, kappa, g, out)
    return files, {"parameter_sets": [{"N": N, "kappa": k, "g": g} for N, (k, g) in MESO_PARAMS.items()]}


def _fig2(out: Path) -> tuple[list[Path], dict]:
    s, model = _meso(2)
    files = _meso_sequence(model, Ensemble.pure(model.initial), model.preparation, "preparation", out, "fig2_prep_N2")
    return files, {"scenario": _scenario_json(s), "samples_per_stage": FIG_SAMPLES}


def _fig3(out: Path) -> tuple[list[Path], dict]:
    s, model = _meso(5)
    files = _meso_sequence(model, Ensemble.pure(model.psi_f()), model.alice, "postselection", out, "fig3_post_N5")
    return files, {"scenario": _scenario_json(s), "samples_per_stage": FIG_SAMPLES}


def _fig4(out: Path) -> tuple[list[Path], dict]:
    s, model = _meso(2)
    branches = model.measure(model.psi_sup(), ["1"])
    files = []
    weights = {}
    for m in branches:
        weights[m.label] = m.weight
        files += _meso_sequence(
            model, Ensemble.pure(m.state), model.alice, f"bob={m.label}", out, f"fig4_bob-{m.label}_N2"
        )
    return files, {"scenario": _scenario_json(s.with_bob({1})), "branch_weights": weights}


def _fig5(out: Path) -> tuple[list[Path], dict]:
    s, model = _meso(2)
    files = []
    for engine in ("dynamics", "boxalgebra"):
        comp = stage_compare(replace(s, engine=engine))
        files.append(comp.to_csv(out / f"fig5_stage_compare_{engine}.csv"))
    rows = []
    for bob in ((), (1,), (2,)):
        sb = s.with_bob(bob)
        for st in trace(sb, model):
            if st.time in ("t1", "t2", "t3"):
                rows += [(sb.setting, st.time, b, p) for b, p in zip(model.boxes, st.probabilities)]
                rows.append((sb.setting, st.time, "leakage", st.leakage))
    files.append(_io.write_csv(out / "fig5_no_measurement_vs_measurement.csv", ("setting", "time", "box", "probability"), rows))
    return files, {"scenario": _scenario_json(s), "mixture_from": ["3"]}


def _coherent(alpha0: float) -> tuple[Scenario, Model]:
    s = Scenario("coherent", engine="dynamics", alpha0=alpha0, k_exp=3)
    return s, build_model(s)


def _q_files(out: Path, name: str, state: Any, alpha0: float, note: str) -> list[Path]:
    q = qfunction(state, PhaseGrid.covering(alpha0), alpha0, note)
    return list(q.write(out / f"{name}.csv"))


def _q_sequence(out: Path, prefix: str, model: Model, start: Any, alpha0: float, note: str) -> list[Path]:
    files = _q_files(out, f"{prefix}_t2", start, alpha0, f"{note}, t2")
    state = start
    for i, op in enumerate(model.alice):
        state = state.map(lambda v, U=op.unitary: _apply(U, v)) if isinstance(state, Ensemble) else _apply(op.unitary, state)
        tag = "t3" if i == len(model.alice) - 1 else f"after_{op.name.replace('^-1', 'inv')}"
        files += _q_files(out, f"{prefix}_{tag}", state, alpha0, f"{note}, {tag}")
    return files


def _fig6(out: Path) -> tuple[list[Path], dict]:
    files = []
    for a0 in (2.0, 6.0):
        s, model = _coherent(a0)
        files += _q_files(out, f"fig6_sup_alpha{a0:g}", coherent_state_for(s, "sup", model=model), a0, "superposition")
        files += _q_files(out, f"fig6_mix14_alpha{a0:g}", coherent_state_for(s, "mix", model=model), a0, "mixture after Bob opens 1 and 4")
    return files, {"alpha0": [2.0, 6.0], "k_exp": 3, "grid_margin": 5.0, "resolution": DEFAULT_RESOLUTION}


def _fig7(out: Path) -> tuple[list[Path], dict]:
    s, model = _coherent(3.0)
    files = _q_sequence(out, "fig7_psi_f", model, model.psi_f(), 3.0, "postselected state under Alice's stages")
    return files, {"scenario": _scenario_json(s), "resolution": DEFAULT_RESOLUTION}


def _fig8(out: Path) -> tuple[list[Path], dict]:
    s, model = _coherent(3.0)
    files = []
    for box in ("1", "4"):
        start = coherent_state_for(s, f"box{box}", model=model)
        files += _q_sequence(out, f"fig8_bob-found-{box}", model, start, 3.0, f"Bob finds box {box}")
    return files, {"scenario": _scenario_json(s), "resolution": DEFAULT_RESOLUTION}


def _fig9(out: Path) -> tuple[list[Path], dict]:
    s, model = _coherent(3.0)
    files = []
    weights = {}
    for opened in (("1", "4"), ("2", "4")):
        branch = model.measure(model.psi_sup(), opened).member("none")
        tag = "".join(opened)
        weights[f"open{tag}"] = branch.weight
        files += _q_sequence(out, f"fig9_bob-open{tag}-none", model, branch.state, 3.0, f"Bob opens {','.join(opened)}, finds nothing")
    return files, {"scenario": _scenario_json(s), "none_branch_weights": weights, "resolution": DEFAULT_RESOLUTION}


def _fig10(out: Path) -> tuple[list[Path], dict]:
    s, model = _coherent(6.0)
    files = _q_files(out, "fig10_sup_t1", model.psi_sup(), 6.0, "superposition, t1")
    files += _q_sequence(out, "fig10_no-bob", model, model.psi_sup(), 6.0, "no measurement")
    files += _q_sequence(out, "fig10_bob14", model, coherent_state_for(s, "mix", model=model), 6.0, "Bob opens 1 and 4")
    finals = {
        setting: run(s.with_bob(bob)).marginal("3_3") for setting, bob in (("N", ()), ("B1,B4", (1, 4)))
    }
    return files, {"scenario": _scenario_json(s), "P(3_3)": finals, "resolution": DEFAULT_RESOLUTION}


def _table_lg(out: Path) -> tuple[list[Path], dict]:
    results = {
        "three_box": lg_for_scenario(Scenario("original")).to_json(),
        "four_box": lg_for_scenario(Scenario("coherent", k_exp=3)).to_json(),
    }
    return [_io.write_json(out / "table_lg.json", results)], {"variants": ["original", "coherent_k3"], "engine": "boxalgebra"}


TARGETS: dict[str, Callable[[Path], tuple[list[Path], dict]]] = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "fig10": _fig10,
    "table-lg": _table_lg,
}


def cmd_reproduce(args: argparse.Namespace) -> list[Path]:
    recipe = TARGETS.get(args.target)
    if recipe is None:
        raise UsageError(f"unknown target {args.target!r}; expected one of {', '.join(TARGETS)}")
    out = output_dir(args) / args.target
    files, params = recipe(out)
    manifest = {
        "target": args.target,
        "version": __version__,
        "float_format": _io.FLOAT_FORMAT,
        "parameters": params,
        "files": sorted(p.relative_to(out).as_posix() for p in files),
    }
    return files + [_io.write_json(out / "manifest.json", manifest)]


COMMANDS = {
    "run": cmd_run,
    "stage-compare": cmd_stage_compare,
    "qfunc": cmd_qfunc,
    "lg": cmd_lg,
    "calibrate": cmd_calibrate,
    "reproduce": cmd_reproduce,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        files = COMMANDS[args.command](args)
    except (UsageError, ArgumentError) as exc:
        print(f"paradox-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParadoxLabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"paradox-lab: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
