"""Graphs, Laplacians and adaptive synchronization of Van der Pol networks.

Each node carries a driven Van der Pol oscillator

    dx_i/dt = w y_i - (a/3) x_i^3 - b x_i + coupling_x
    dy_i/dt = -w x_i + mu(t)/w + coupling_y

coupled diffusively either through node weights,
``k_i * sum_{j in N_i} (s_j - s_i)`` with ``dk_i/dt = c_i ||sum_j (s_j - s_i)||^p_i``,
or through edge weights, ``sum_{j in N_i} k_ij (s_j - s_i)`` with
``dk_ij/dt = c_ij ||s_j - s_i||^p_ij``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, GenerationExhausted, NonFiniteError
from .odesim import gain_rate

__all__ = [
    "Graph",
    "UnionFind",
    "incidence_matrix",
    "laplacian",
    "edge_laplacian",
    "erdos_renyi",
    "OscillatorParams",
    "CouplingState",
    "NetworkModel",
    "NetworkTrajectory",
    "SyncReport",
    "sync_error",
    "step_network",
    "simulate_network",
    "quad_check_sampled",
    "van_der_pol_drift",
]

MAX_ER_ATTEMPTS = 1000


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.components = n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        self.components -= 1
        return True


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; edges are stored sorted as (i, j) with i < j."""

    n_nodes: int
    edges: tuple

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        norm = []
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.n_nodes:
                raise ValueError(f"edge ({i}, {j}) out of range for {self.n_nodes} nodes")
            norm.append((i, j))
        norm.sort()
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def m_edges(self) -> int:
        return len(self.edges)

    def n_components(self) -> int:
        uf = UnionFind(self.n_nodes)
        for i, j in self.edges:
            uf.union(i, j)
        return uf.components

    def is_connected(self) -> bool:
        return self.n_components() == 1

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        return Graph(self.n_nodes, tuple((perm[i], perm[j]) for i, j in self.edges))

    def to_text(self) -> str:
        lines = [f"{self.n_nodes} {self.m_edges}"] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or len(lines[0]) != 2:
            raise ValueError("graph file must start with 'n m'")
        n, m = int(lines[0][0]), int(lines[0][1])
        body = lines[1:]
        if len(body) != m:
            raise ValueError(f"header announces {m} edges, found {len(body)}")
        edges = []
        for k, parts in enumerate(body, start=2):
            if len(parts) != 2:
                raise ValueError(f"line {k}: expected 'i j'")
            edges.append((int(parts[0]), int(parts[1])))
        return cls(n, tuple(edges))

    @classmethod
    def read(cls, path) -> "Graph":
        return cls.from_text(Path(path).read_text())

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())


def incidence_matrix(g: Graph) -> np.ndarray:
    """m x n incidence matrix, row (i, j) is -1 at column i and +1 at column j."""
    H = np.zeros((g.m_edges, g.n_nodes))
    for e, (i, j) in enumerate(g.edges):
        H[e, i] = -1.0
        H[e, j] = 1.0
    return H


def laplacian(g: Graph) -> np.ndarray:
    H = incidence_matrix(g)
    return H.T @ H


def edge_laplacian(g: Graph, node_weights) -> np.ndarray:
    """Node-weighted edge Laplacian ``H diag(w) H^T`` (m x m)."""
    w = np.asarray(node_weights, dtype=float).ravel()
    if w.shape[0] != g.n_nodes:
        raise DimensionMismatch(f"{w.shape[0]} weights for {g.n_nodes} nodes")
    if np.any(w <= 0):
        raise ValueError("node weights must be positive")
    H = incidence_matrix(g)
    return (H * w[None, :]) @ H.T


def erdos_renyi(n: int, rho: float, seed: int, max_attempts: int = MAX_ER_ATTEMPTS):
    """Connected G(n, rho) sample; returns ``(graph, seed_used)``.

    Tries ``seed, seed + 1, ...`` until the sample is connected.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(max_attempts):
        s = seed + attempt
        rng = np.random.default_rng(s)
        keep = rng.random(iu.shape[0]) < rho
        uf = UnionFind(n)
        for i, j in zip(iu[keep], ju[keep]):
            uf.union(int(i), int(j))
        if uf.components == 1:
            edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
            return Graph(n, edges), s
    raise GenerationExhausted(
        f"no connected G({n}, {rho}) within {max_attempts} seeds starting at {seed}"
    )


_DRIVES: dict = {
    "sin": np.sin,
    "cos": np.cos,
    "zero": lambda t: 0.0,
}


@dataclass(frozen=True)
class OscillatorParams:
    w: float = 1.0
    a: float = 1.0
    b: float = 1.0
    drive: str = "sin"

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.w, self.a, self.b)):
            raise ValueError("oscillator parameters must be finite")
        if self.w == 0:
            raise ValueError("w must be nonzero")
        if self.drive not in _DRIVES:
            raise ValueError(f"unknown drive {self.drive!r}, choose from {sorted(_DRIVES)}")

    def forcing(self, t: float) -> float:
        return float(_DRIVES[self.drive](t))


def van_der_pol_drift(params: OscillatorParams, states: np.ndarray, t: float) -> np.ndarray:
    """Uncoupled node dynamics for an (n, 2) array of (x, y) states."""
    x = states[..., 0]
    y = states[..., 1]
    out = np.empty_like(states, dtype=float)
    out[..., 0] = params.w * y - (params.a / 3.0) * x * x * x - params.b * x
    out[..., 1] = params.forcing(t) / params.w - params.w * x
    return out


@dataclass(frozen=True)
class CouplingState:
    """Adaptive coupling weights, one per node ("node") or per edge ("edge")."""

    mode: str
    weights: np.ndarray
    c: np.ndarray
    p: np.ndarray

    @classmethod
    def create(cls, mode: str, weights, c=1.0, p=1.5) -> "CouplingState":
        if mode not in ("node", "edge"):
            raise ValueError("mode must be 'node' or 'edge'")
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        n = w.shape[0]
        c = np.atleast_1d(np.asarray(c, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        c = np.full(n, c[0]) if c.shape == (1,) else c
        p = np.full(n, p[0]) if p.shape == (1,) else p
        if c.shape != (n,) or p.shape != (n,):
            raise DimensionMismatch("c and p must be scalars or match the weight count")
        if np.any(w <= 0):
            raise ValueError("coupling weights must be positive")
        if np.any(c <= 0) or np.any(p < 1):
            raise ValueError("need c > 0 and p >= 1")
        return cls(mode, w.copy(), c, p)

    @property
    def node_weights(self) -> Optional[np.ndarray]:
        return self.weights if self.mode == "node" else None

    @property
    def edge_weights(self) -> Optional[np.ndarray]:
        return self.weights if self.mode == "edge" else None


def sync_error(states: np.ndarray) -> float:
    """max_i ||s_i - mean(s)||_2 over node states of shape (n, 2)."""
    d = states - states.mean(axis=0)
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", d, d))))


class NetworkModel:
    """Coupled network right-hand side with the incidence matrix cached."""

    def __init__(self, g: Graph, params: OscillatorParams, mode: str):
        if mode not in ("node", "edge"):
            raise ValueError("mode must be 'node' or 'edge'")
        self.graph = g
        self.params = params
        self.mode = mode
        self.H = incidence_matrix(g)

    @property
    def n_weights(self) -> int:
        return self.graph.n_nodes if self.mode == "node" else self.graph.m_edges

    def rhs(self, t: float, s: np.ndarray, k: np.ndarray, c: np.ndarray, p: np.ndarray, frozen: bool = False):
        f = van_der_pol_drift(self.params, s, t)
        if self.mode == "node":
            # -H^T (H s) rather than -L s: differences cancel exactly on the sync manifold
            diffusive = -(self.H.T @ (self.H @ s))
            coupling = k[:, None] * diffusive
            drive = np.sqrt(np.einsum("ij,ij->i", diffusive, diffusive))
        else:
            diff = self.H @ s
            coupling = -(self.H.T @ (k[:, None] * diff))
            drive = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        dk = np.zeros_like(k) if frozen else gain_rate(drive, c, p)
        return f + coupling, dk

    def step(self, t: float, s: np.ndarray, k: np.ndarray, c, p, dt: float, frozen: bool = False):
        a1, b1 = self.rhs(t, s, k, c, p, frozen)
        a2, b2 = self.rhs(t + 0.5 * dt, s + 0.5 * dt * a1, k + 0.5 * dt * b1, c, p, frozen)
        a3, b3 = self.rhs(t + 0.5 * dt, s + 0.5 * dt * a2, k + 0.5 * dt * b2, c, p, frozen)
        a4, b4 = self.rhs(t + dt, s + dt * a3, k + dt * b3, c, p, frozen)
        s_new = s + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        k_new = k + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        return s_new, k_new


def _check_network(g: Graph, states, coupling: CouplingState):
    s = np.asarray(states, dtype=float)
    if s.shape != (g.n_nodes, 2):
        raise DimensionMismatch(f"states must have shape ({g.n_nodes}, 2), got {s.shape}")
    expected = g.n_nodes if coupling.mode == "node" else g.m_edges
    if coupling.weights.shape != (expected,):
        raise DimensionMismatch(f"{coupling.mode} mode needs {expected} weights, got {coupling.weights.shape[0]}")
    return s


def step_network(g: Graph, params: OscillatorParams, states, coupling: CouplingState, t: float, dt: float):
    """One RK4 step of the coupled network; returns ``(states, coupling)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = _check_network(g, states, coupling)
    model = NetworkModel(g, params, coupling.mode)
    s_new, k_new = model.step(t, s, coupling.weights, coupling.c, coupling.p, dt)
    if not (np.all(np.isfinite(s_new)) and np.all(np.isfinite(k_new))):
        raise NonFiniteError("network state or weight became non-finite")
    return s_new, replace(coupling, weights=k_new)


@dataclass
class NetworkTrajectory:
    times: np.ndarray
    states: np.ndarray  # (samples, n, 2)
    weights: np.ndarray  # (samples, n_weights)
    sync_errors: np.ndarray
    dt: float
    stride: int = 1
    stop_reason: str = "horizon"
    final_time: float = 0.0
    final_states: Optional[np.ndarray] = None
    final_weights: Optional[np.ndarray] = None

    @property
    def diverged(self) -> bool:
        return self.stop_reason == "diverged"

    def write_csv(self, path) -> None:
        n = self.states.shape[1]
        m = self.weights.shape[1]
        header = ["t", "e_sync"]
        for i in range(n):
            header += [f"x_{i + 1}", f"y_{i + 1}"]
        header += [f"k_{i + 1}" for i in range(m)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, e, s, k in zip(self.times, self.sync_errors, self.states, self.weights):
                w.writerow([f"{v:.17g}" for v in (t, e, *s.ravel(), *k)])


@dataclass(frozen=True)
class SyncReport:
    sync_error_history: np.ndarray
    final_weights: np.ndarray
    synchronized: bool
    settle_time: Optional[float]
    weight_tail_growth: float
    final_sync_error: float
    diverged: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_history: bool = True) -> dict:
        out = {
            "synchronized": self.synchronized,
            "settle_time": self.settle_time,
            "final_weights": [float(v) for v in self.final_weights],
            "weight_tail_growth": self.weight_tail_growth,
            "final_sync_error": self.final_sync_error,
            "diverged": self.diverged,
        }
        if include_history:
            out["sync_error_history"] = [float(v) for v in self.sync_error_history]
        out.update(self.extra)
        return out


@np.errstate(over="ignore", invalid="ignore")
def simulate_network(
    g: Graph,
    params: OscillatorParams,
    states0,
    coupling: CouplingState,
    *,
    dt: float = 1e-3,
    horizon: float = 50.0,
    output_stride: int = 1,
    sync_eps: float = 1e-4,
    hold_time: float = 2.0,
    divergence_cap: float = 1e12,
    frozen: bool = False,
):
    """Run the full horizon; returns ``(NetworkTrajectory, SyncReport)``.

    Synchronization is judged on every integration step: the run counts as
    synchronized once ``e(t) < sync_eps`` has held for ``hold_time`` and
    stays below until the end.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    if output_stride < 1:
        raise ValueError("output_stride must be >= 1")
    s = _check_network(g, states0, coupling).copy()
    model = NetworkModel(g, params, coupling.mode)
    k = coupling.weights.copy()
    c, p = coupling.c, coupling.p
    n_steps = int(round(horizon / dt))

    e = sync_error(s)
    times, states, ws, errs = [0.0], [s.copy()], [k.copy()], [e]
    below_since = 0.0 if e < sync_eps else None
    reason = "horizon"
    t = 0.0
    for step in range(1, n_steps + 1):
        s_new, k_new = model.step(t, s, k, c, p, dt, frozen)
        finite = np.all(np.isfinite(s_new)) and np.all(np.isfinite(k_new))
        if not finite or np.max(np.abs(s_new)) > divergence_cap:
            if finite:
                s, k = s_new, k_new
                t = step * dt
            reason = "diverged"
            below_since = None
            break
        s, k = s_new, k_new
        t = step * dt
        e = sync_error(s)
        if e < sync_eps:
            if below_since is None:
                below_since = t
        else:
            below_since = None
        if step % output_stride == 0:
            times.append(t)
            states.append(s.copy())
            ws.append(k.copy())
            errs.append(e)

    times_a = np.array(times)
    ws_a = np.array(ws)
    traj = NetworkTrajectory(
        times=times_a,
        states=np.array(states),
        weights=ws_a,
        sync_errors=np.array(errs),
        dt=dt,
        stride=output_stride,
        stop_reason=reason,
        final_time=t,
        final_states=s.copy(),
        final_weights=k.copy(),
    )
    synchronized = below_since is not None and (t - below_since) >= hold_time - 1e-12
    idx = max(int(np.searchsorted(times_a, 0.9 * t, side="right")) - 1, 0)
    report = SyncReport(
        sync_error_history=traj.sync_errors,
        final_weights=k.copy(),
        synchronized=bool(synchronized),
        settle_time=float(below_since) if synchronized else None,
        weight_tail_growth=float(np.max(k - ws_a[idx])),
        final_sync_error=float(sync_error(s)),
        diverged=reason == "diverged",
    )
    return traj, report


def quad_check_sampled(
    params: Optional[OscillatorParams],
    delta,
    epsilon: float,
    n_samples: int,
    box: float,
    seed: int,
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None,
):
    """Sampled check of ``(u-v)^T (f(u)-f(v)) - (u-v)^T D (u-v) <= -eps |u-v|^2``.

    ``f`` defaults to the Van der Pol drift at t = 0. Returns
    ``(holds, worst_margin)`` where the margin is RHS minus LHS (>= 0 when
    the inequality holds). Sampling gives evidence, not a proof.
    """
    if n_samples < 1 or box <= 0:
        raise ValueError("need n_samples >= 1 and box > 0")
    D = np.asarray(delta, dtype=float)
    if D.ndim == 1:
        D = np.diag(D)
    if f is None:
        if params is None:
            raise ValueError("either params or f is required")
        f = lambda s: van_der_pol_drift(params, s, 0.0)
    rng = np.random.default_rng(seed)
    dim = D.shape[0]
    u = rng.uniform(-box, box, size=(n_samples, dim))
    v = rng.uniform(-box, box, size=(n_samples, dim))
    d = u - v
    fd = f(u) - f(v)
    lhs = np.einsum("ij,ij->i", d, fd) - np.einsum("ij,jk,ik->i", d, D, d)
    rhs = -epsilon * np.einsum("ij,ij->i", d, d)
    margins = rhs - lhs
    worst = float(margins.min())
    return bool(np.all(margins >= -1e-12 * (1 + np.abs(rhs)))), worst
