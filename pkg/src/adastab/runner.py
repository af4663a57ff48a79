"""Scenario dispatch: resolve inputs, run the right simulator, write artifacts."""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import graphnet, matana, odesim
from .errors import AdastabError, GenerationExhausted, ScenarioValidationError
from .scenario import Scenario, dumps, with_override

__all__ = [
    "EXIT_OK",
    "EXIT_DIVERGED",
    "EXIT_HYPOTHESIS",
    "EXIT_IO",
    "RunArtifacts",
    "Resolved",
    "resolve",
    "classify_scenario",
    "run",
    "sweep",
    "default_workers",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_HYPOTHESIS = 3
EXIT_IO = 4

WORKERS_ENV = "ADASTAB_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
        return 1


@dataclass
class RunArtifacts:
    exit_code: int
    report_path: Optional[Path]
    trajectory_path: Optional[Path] = None
    scenario_path: Optional[Path] = None
    scenario_echo: Optional[Scenario] = None
    report: dict = field(default_factory=dict)


@dataclass
class Resolved:
    """Numeric inputs materialized from a scenario."""

    scenario: Scenario
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    k0: Optional[np.ndarray] = None
    graph: Optional[graphnet.Graph] = None
    graph_seed_used: Optional[int] = None


def _load_matrix(ref) -> np.ndarray:
    if isinstance(ref, tuple):
        return matana.as_square(ref)
    return matana.read_matrix(ref)


def _uniform_box(seed: int, box: float, shape) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-box, box, size=shape)


def _uniform_half_open(seed: int, lo: float, hi: float, size: int) -> np.ndarray:
    # (lo, hi]: keeps weights strictly positive when lo == 0
    return lo + (hi - lo) * (1.0 - np.random.default_rng(seed).random(size))


def resolve(s: Scenario) -> Resolved:
    """Load matrices/graph and draw seeded initial conditions.

    Raises OSError/ValueError for unreadable inputs and
    ScenarioValidationError for dimension mismatches.
    """
    r = Resolved(scenario=s)
    if s.matrix_b is not None:
        r.B = _load_matrix(s.matrix_b)
    if s.matrix_a is not None:
        r.A = _load_matrix(s.matrix_a)
    if s.kind == "classify":
        return r

    if s.is_system:
        n = r.B.shape[0]
        if r.A.shape != r.B.shape:
            raise ScenarioValidationError(f"A is {r.A.shape[0]}x{r.A.shape[0]} but B is {n}x{n}")
        if s.initial_state is not None:
            r.x0 = np.array(s.initial_state)
        else:
            r.x0 = _uniform_box(s.initial_state_seed, s.initial_state_box, n)
        n_gains = 1 if s.kind == "scalar_gain" else n
        if s.initial_gains is not None:
            r.k0 = np.array(s.initial_gains)
        else:
            lo, hi = s.initial_gains_range
            r.k0 = _uniform_half_open(s.initial_gains_seed, lo, hi, n_gains)
        if r.x0.shape != (n,):
            raise ScenarioValidationError(f"initial_state has {r.x0.shape[0]} entries, system has n = {n}")
        if r.k0.shape != (n_gains,):
            raise ScenarioValidationError(f"initial_gains has {r.k0.shape[0]} entries, expected {n_gains}")
        for key, vec in (("gain.c", s.gain_c), ("gain.p", s.gain_p)):
            if len(vec) not in (1, n_gains):
                raise ScenarioValidationError(f"{key} must be a scalar or have {n_gains} entries")
        return r

    if s.graph_file is not None:
        r.graph = graphnet.Graph.read(s.graph_file)
    elif s.graph_n == 1:
        r.graph = graphnet.Graph(1, ())
        r.graph_seed_used = s.graph_seed
    else:
        r.graph, r.graph_seed_used = graphnet.erdos_renyi(s.graph_n, s.graph_rho, s.graph_seed)
    n = r.graph.n_nodes
    n_weights = n if s.kind == "network_node" else r.graph.m_edges
    if s.initial_state is not None:
        if len(s.initial_state) != 2 * n:
            raise ScenarioValidationError(f"initial_state needs 2n = {2 * n} entries (x1, y1, x2, y2, ...)")
        r.x0 = np.array(s.initial_state).reshape(n, 2)
    else:
        r.x0 = _uniform_box(s.initial_state_seed, s.initial_state_box, (n, 2))
    if s.initial_gains is not None:
        r.k0 = np.array(s.initial_gains)
        if r.k0.shape != (n_weights,):
            raise ScenarioValidationError(f"initial_gains needs {n_weights} entries")
    else:
        lo, hi = s.initial_gains_range
        r.k0 = _uniform_half_open(s.initial_gains_seed, lo, hi, n_weights)
    for key, vec in (("gain.c", s.gain_c), ("gain.p", s.gain_p)):
        if len(vec) not in (1, n_weights):
            raise ScenarioValidationError(f"{key} must be a scalar or have {n_weights} entries")
    return r


def classify_scenario(s: Scenario) -> dict:
    B = _load_matrix(s.matrix_b)
    return matana.classify(B).to_dict()


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, allow_nan=False) + "\n")


def _run_system(r: Resolved, out: Path) -> RunArtifacts:
    s = r.scenario
    gains = odesim.GainState.create(r.k0, s.gain_c, s.gain_p)
    traj = odesim.simulate(
        s.kind, r.A, r.B, r.x0, gains,
        dt=s.dt, horizon=s.horizon, output_stride=s.output_stride,
        state_eps=s.state_eps, hold_time=s.hold_time,
        divergence_cap=s.divergence_cap, frozen=s.frozen_gains,
    )
    rep = odesim.convergence_report(traj)
    report = {"kind": s.kind, "n": int(r.A.shape[0]), "stop_reason": traj.stop_reason}
    report.update(rep.to_dict())
    report["final_state"] = [float(v) for v in traj.final_state]
    report["frozen_gains"] = s.frozen_gains
    report["b_is_h_matrix"] = matana.is_h_matrix(r.B)
    report["b_has_positive_diagonal"] = bool(np.all(np.diag(r.B) > 0))
    code = EXIT_DIVERGED if traj.diverged else EXIT_OK
    if s.delta is not None:
        side = "column" if s.kind == "system2" else "row"
        kbar = odesim.estimate_threshold_gains(r.A, r.B, s.delta, side=side)
        report["delta"] = s.delta
        report["threshold_side"] = side
        if kbar is None:
            report["threshold_gains"] = None
            report["threshold_time"] = None
            code = code or EXIT_HYPOTHESIS
        else:
            report["threshold_gains"] = [float(v) for v in kbar]
            target = np.array([kbar.max()]) if s.kind == "scalar_gain" else kbar
            report["threshold_time"] = odesim.threshold_time(traj, target)
    traj_path = out / "trajectory.csv"
    traj.write_csv(traj_path)
    return RunArtifacts(code, out / "report.json", traj_path, report=report)


def _run_network(r: Resolved, out: Path) -> RunArtifacts:
    s = r.scenario
    mode = "node" if s.kind == "network_node" else "edge"
    params = graphnet.OscillatorParams(s.oscillator_w, s.oscillator_a, s.oscillator_b, s.oscillator_drive)
    coupling = graphnet.CouplingState.create(mode, r.k0, s.gain_c if len(s.gain_c) > 1 else s.gain_c[0],
                                             s.gain_p if len(s.gain_p) > 1 else s.gain_p[0])
    graph_path = out / "graph.txt"
    r.graph.write(graph_path)
    connected = r.graph.is_connected()
    traj, sync = graphnet.simulate_network(
        r.graph, params, r.x0, coupling,
        dt=s.dt, horizon=s.horizon, output_stride=s.output_stride,
        sync_eps=s.sync_eps, hold_time=s.hold_time,
        divergence_cap=s.divergence_cap, frozen=s.frozen_gains,
    )
    report = {"kind": s.kind, "n_nodes": r.graph.n_nodes, "m_edges": r.graph.m_edges,
              "graph_seed_used": r.graph_seed_used, "connected": connected,
              "stop_reason": traj.stop_reason, "final_time": traj.final_time}
    report.update(sync.to_dict())
    traj_path = out / "trajectory.csv"
    traj.write_csv(traj_path)
    if traj.diverged:
        code = EXIT_DIVERGED
    elif not connected:
        code = EXIT_HYPOTHESIS
    else:
        code = EXIT_OK
    return RunArtifacts(code, out / "report.json", traj_path, report=report)


def run(s: Scenario, out_dir) -> RunArtifacts:
    """Execute one scenario and write report.json, trajectory.csv and scenario.scn.

    Never raises for bad inputs; problems are mapped onto exit codes
    (2 diverged, 3 hypothesis failure, 4 I/O or invalid input).
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return RunArtifacts(EXIT_IO, None, report={"error": f"cannot create {out}: {exc}"})
    try:
        r = resolve(s)
        echo = s
        if r.graph_seed_used is not None and r.graph_seed_used != s.graph_seed:
            echo = replace(s, graph_seed=r.graph_seed_used)
        if s.kind == "classify":
            arts = RunArtifacts(EXIT_OK, out / "report.json", report=matana.classify(r.B).to_dict())
        elif s.is_system:
            arts = _run_system(r, out)
        else:
            arts = _run_network(r, out)
        scn_path = out / "scenario.scn"
        scn_path.write_text(dumps(echo))
        arts.scenario_path = scn_path
        arts.scenario_echo = echo
        arts.report["exit_code"] = arts.exit_code
        _write_json(arts.report_path, arts.report)
        return arts
    except GenerationExhausted as exc:
        code, msg = EXIT_HYPOTHESIS, str(exc)
    except (OSError, ValueError, AdastabError) as exc:
        code, msg = EXIT_IO, f"{type(exc).__name__}: {exc}"
    report = {"error": msg, "exit_code": code}
    path = out / "report.json"
    try:
        _write_json(path, report)
    except OSError:
        path = None
    return RunArtifacts(code, path, report=report)


_STATUS = {EXIT_OK: "ok", EXIT_DIVERGED: "diverged", EXIT_HYPOTHESIS: "hypothesis_failure", EXIT_IO: "error"}


def _sweep_one(args):
    base, parameter, value, run_dir = args
    try:
        s = with_override(base, parameter, value)
    except (ValueError, AdastabError) as exc:
        return RunArtifacts(EXIT_IO, None, report={"error": str(exc), "exit_code": EXIT_IO})
    return run(s, run_dir)


def _summary_row(value, arts: RunArtifacts, run_dir: Path) -> dict:
    rep = arts.report
    gains = rep.get("final_gains") or rep.get("final_weights")
    flag = rep.get("converged", rep.get("synchronized"))
    return {
        "value": json.dumps(value),
        "exit_code": arts.exit_code,
        "status": _STATUS.get(arts.exit_code, "error"),
        "settle_time": "" if rep.get("settle_time") is None else repr(rep["settle_time"]),
        "final_gain_max": "" if not gains else repr(max(gains)),
        "converged": "" if flag is None else str(bool(flag)).lower(),
        "run_dir": str(run_dir),
        "error": rep.get("error", ""),
    }


def sweep(base: Scenario, parameter: str, values: Sequence, out_dir, workers: Optional[int] = None) -> list:
    """One run per value of ``parameter``; writes ``summary.csv`` in ``out_dir``.

    Per-run failures are recorded in the summary and do not stop the sweep.
    """
    from .scenario import NUMERIC_KEYS

    if parameter not in NUMERIC_KEYS:
        raise ScenarioValidationError(f"{parameter!r} is not a numeric scenario parameter")
    values = list(values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not values:
        return []
    jobs = [(base, parameter, v, out / f"run_{i:03d}") for i, v in enumerate(values)]
    workers = default_workers() if workers is None else max(1, workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = [_summary_row(v, a, job[3]) for v, a, job in zip(values, results, jobs)]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return results
