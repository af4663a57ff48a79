"""Fixed-step RK4 simulation of uncertain linear systems under adaptive diagonal gains.

Two closed loops are supported, ``dx/dt = (A - K(t) B) x`` (System I) and
``dx/dt = (A - B K(t)) x`` (System II), with each gain driven by its own
channel, ``dk_i/dt = c_i |x_i|^p_i``. A scalar-gain baseline
``dx/dt = (A - k B) x`` with ``dk/dt = c ||x||_2^p`` is included for
comparison. Gains are part of the ODE state and are rebuilt at every RK4
stage.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InsufficientData, NonFiniteError
from .matana import as_square, find_column_scaling, find_row_scaling, is_h_matrix
from .matana import measure_inf_norm, measure_one_norm

__all__ = [
    "SystemKind",
    "GainState",
    "Trajectory",
    "ConvergenceReport",
    "gain_rate",
    "step_system",
    "simulate",
    "convergence_report",
    "settle_time",
    "estimate_threshold_gains",
    "threshold_time",
    "closed_loop_matrix",
    "closed_loop_matrix_fn",
    "verify_coppel",
    "exponential_rate_fit",
]


class SystemKind(str, Enum):
    SYSTEM_I = "system1"
    SYSTEM_II = "system2"
    SCALAR_GAIN = "scalar_gain"


def _broadcast(value, n: int, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.shape == (1,) and n != 1:
        v = np.full(n, v[0])
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {n}")
    return v


@dataclass(frozen=True)
class GainState:
    """Diagonal adaptive gains with their update rates and exponents."""

    k: np.ndarray
    c: np.ndarray
    p: np.ndarray
    k0: np.ndarray

    @classmethod
    def create(cls, k0, c=1.0, p=1.0, n: Optional[int] = None) -> "GainState":
        k0 = np.atleast_1d(np.asarray(k0, dtype=float))
        if n is None:
            n = k0.shape[0]
        k0 = _broadcast(k0, n, "initial gains")
        c = _broadcast(c, n, "c")
        p = _broadcast(p, n, "p")
        if np.any(k0 <= 0):
            raise ValueError("initial gains must be positive")
        if np.any(c <= 0):
            raise ValueError("update rates c_i must be positive")
        if np.any(p < 1):
            raise ValueError("update exponents p_i must be >= 1")
        return cls(k=k0.copy(), c=c, p=p, k0=k0.copy())

    def with_k(self, k: np.ndarray) -> "GainState":
        return replace(self, k=np.asarray(k, dtype=float))


def gain_rate(values: np.ndarray, c: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``c * |v|**p`` via exp(p ln|v|), with the v == 0 branch returning 0."""
    # log(0) = -inf and exp(-inf) = 0 give the zero branch without masking
    with np.errstate(divide="ignore"):
        return c * np.exp(p * np.log(np.abs(values)))


def _rhs(kind: SystemKind, A, B, x, k, c, p, frozen: bool):
    if kind is SystemKind.SYSTEM_I:
        dx = A @ x - k * (B @ x)
    elif kind is SystemKind.SYSTEM_II:
        dx = A @ x - B @ (k * x)
    else:
        dx = A @ x - k[0] * (B @ x)
    if frozen:
        dk = np.zeros_like(k)
    elif kind is SystemKind.SCALAR_GAIN:
        dk = gain_rate(np.array([np.linalg.norm(x)]), c, p)
    else:
        dk = gain_rate(x, c, p)
    return dx, dk


def _rk4(kind, A, B, x, k, c, p, dt, frozen):
    a1, b1 = _rhs(kind, A, B, x, k, c, p, frozen)
    a2, b2 = _rhs(kind, A, B, x + 0.5 * dt * a1, k + 0.5 * dt * b1, c, p, frozen)
    a3, b3 = _rhs(kind, A, B, x + 0.5 * dt * a2, k + 0.5 * dt * b2, c, p, frozen)
    a4, b4 = _rhs(kind, A, B, x + dt * a3, k + dt * b3, c, p, frozen)
    x_new = x + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
    k_new = k + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
    return x_new, k_new


def _check_dims(kind: SystemKind, A, B, x, g: GainState):
    A = as_square(A)
    B = as_square(B)
    n = A.shape[0]
    if B.shape != A.shape:
        raise DimensionMismatch(f"A is {A.shape}, B is {B.shape}")
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatch(f"state has shape {x.shape}, expected ({n},)")
    n_gain = 1 if kind is SystemKind.SCALAR_GAIN else n
    if g.k.shape != (n_gain,):
        raise DimensionMismatch(f"{kind.value} needs {n_gain} gains, got {g.k.shape[0]}")
    return A, B, x


def step_system(kind, A, B, x, g: GainState, dt: float, frozen: bool = False):
    """Advance state and gains by one RK4 step; raises NonFiniteError on blow-up."""
    kind = SystemKind(kind)
    if dt <= 0:
        raise ValueError("dt must be positive")
    A, B, x = _check_dims(kind, A, B, x, g)
    with np.errstate(over="ignore", invalid="ignore"):
        x_new, k_new = _rk4(kind, A, B, x, g.k, g.c, g.p, dt, frozen)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(k_new))):
        raise NonFiniteError("state or gain became non-finite")
    return x_new, g.with_k(k_new)


@dataclass
class Trajectory:
    """Recorded samples of one run on a uniform grid of spacing ``dt * stride``.

    ``final_*`` hold the last integrated step, which may fall between
    recorded samples when the run stops early.
    """

    times: np.ndarray
    states: np.ndarray
    gains: np.ndarray
    dt: float
    stride: int = 1
    stop_reason: str = "horizon"
    final_time: float = 0.0
    final_state: Optional[np.ndarray] = None
    final_gains: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return self.stop_reason == "diverged"

    def state_norms(self, ord=np.inf) -> np.ndarray:
        return np.linalg.norm(self.states, ord=ord, axis=1)

    def write_csv(self, path) -> None:
        n = self.states.shape[1]
        m = self.gains.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"k{i + 1}" for i in range(m)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, x, k in zip(self.times, self.states, self.gains):
                w.writerow([f"{v:.17g}" for v in (t, *x, *k)])


# overflow during a blow-up is reported through the finiteness check instead
@np.errstate(over="ignore", invalid="ignore")
def simulate(
    kind,
    A,
    B,
    x0,
    gains: GainState,
    *,
    dt: float = 1e-3,
    horizon: float = 30.0,
    output_stride: int = 1,
    state_eps: float = 1e-8,
    hold_time: float = 1.0,
    divergence_cap: float = 1e12,
    frozen: bool = False,
    stop_on_converge: bool = True,
) -> Trajectory:
    """Integrate from t=0 to ``horizon`` with fixed-step RK4.

    Stops early once ``||x||_inf < state_eps`` has held for ``hold_time``
    (when ``stop_on_converge``), or when the state exceeds
    ``divergence_cap`` / becomes non-finite. The cause is stored in
    ``stop_reason`` ("horizon", "converged" or "diverged").
    """
    kind = SystemKind(kind)
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    if output_stride < 1:
        raise ValueError("output_stride must be >= 1")
    A, B, x = _check_dims(kind, A, B, x0, gains)
    k = gains.k.copy()
    c, p = gains.c, gains.p
    n_steps = int(round(horizon / dt))

    times, states, ks = [0.0], [x.copy()], [k.copy()]
    below_since = 0.0 if np.max(np.abs(x)) < state_eps else None
    reason = "horizon"
    t = 0.0
    step = 0
    for step in range(1, n_steps + 1):
        x_new, k_new = _rk4(kind, A, B, x, k, c, p, dt, frozen)
        t = step * dt
        finite = np.all(np.isfinite(x_new)) and np.all(np.isfinite(k_new))
        if not finite or np.max(np.abs(x_new)) > divergence_cap:
            if finite:
                x, k = x_new, k_new
            else:
                t = (step - 1) * dt
            reason = "diverged"
            break
        x, k = x_new, k_new
        if step % output_stride == 0:
            times.append(t)
            states.append(x.copy())
            ks.append(k.copy())
        if np.max(np.abs(x)) < state_eps:
            if below_since is None:
                below_since = t
            elif stop_on_converge and t - below_since >= hold_time - 1e-12:
                reason = "converged"
                break
        else:
            below_since = None

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        gains=np.array(ks),
        dt=dt,
        stride=output_stride,
        stop_reason=reason,
        final_time=t,
        final_state=x.copy(),
        final_gains=k.copy(),
        metadata={"kind": kind.value, "frozen": frozen, "state_eps": state_eps, "hold_time": hold_time},
    )


def settle_time(times, norms, eps: float) -> Optional[float]:
    """First recorded time after which every sample stays below ``eps``."""
    norms = np.asarray(norms)
    above = np.nonzero(norms >= eps)[0]
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    if last + 1 >= len(times):
        return None
    return float(times[last + 1])


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    settle_time: Optional[float]
    final_gains: np.ndarray
    max_state_norm: float
    gain_deltas_tail: float
    diverged: bool = False
    final_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "settle_time": self.settle_time,
            "final_gains": [float(v) for v in self.final_gains],
            "max_state_norm": self.max_state_norm,
            "gain_deltas_tail": self.gain_deltas_tail,
            "diverged": self.diverged,
            "final_time": self.final_time,
        }


def _tail_growth(times: np.ndarray, gains: np.ndarray, final_gains: np.ndarray, t_end: float) -> float:
    idx = np.searchsorted(times, 0.9 * t_end, side="right") - 1
    idx = max(idx, 0)
    return float(np.max(final_gains - gains[idx]))


def convergence_report(traj: Trajectory, state_eps: Optional[float] = None) -> ConvergenceReport:
    eps = traj.metadata.get("state_eps", 1e-8) if state_eps is None else state_eps
    norms = traj.state_norms()
    final_norm = float(np.max(np.abs(traj.final_state)))
    settle = None if traj.diverged or final_norm >= eps else settle_time(traj.times, norms, eps)
    converged = traj.stop_reason == "converged" or (settle is not None and not traj.diverged)
    return ConvergenceReport(
        converged=bool(converged),
        settle_time=settle if converged else None,
        final_gains=traj.final_gains.copy(),
        max_state_norm=float(max(norms.max(), final_norm)),
        gain_deltas_tail=_tail_growth(traj.times, traj.gains, traj.final_gains, traj.final_time),
        diverged=traj.diverged,
        final_time=traj.final_time,
    )


def estimate_threshold_gains(A, B, delta: float, side: str = "row") -> Optional[np.ndarray]:
    """Gain levels above which the closed loop decays at rate >= delta.

    The row case scales by ``D = diag(d)`` from the row scaling of B and
    evaluates, per row i of ``D^{-1} A D`` and ``D^{-1} B D``,
    ``(sum_{j!=i} |a_ij| + a_ii + delta) / (b_ii - sum_{j!=i} |b_ij|)``.
    The column case does the same on ``D A D^{-1}``, ``D B D^{-1}`` column by
    column. Results are clamped below at 0. Returns None unless B is an
    H-matrix with positive diagonal.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    A = as_square(A)
    B = as_square(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"A is {A.shape}, B is {B.shape}")
    if not (np.all(np.diag(B) > 0) and is_h_matrix(B)):
        return None
    if side == "row":
        d = find_row_scaling(B)
        As = A * d[None, :] / d[:, None]
        Bs = B * d[None, :] / d[:, None]
    elif side == "column":
        d = find_column_scaling(B)
        As = (A * d[:, None] / d[None, :]).T
        Bs = (B * d[:, None] / d[None, :]).T
    else:
        raise ValueError("side must be 'row' or 'column'")
    a_diag = np.diag(As)
    b_diag = np.diag(Bs)
    a_off = np.abs(As).sum(axis=1) - np.abs(a_diag)
    b_off = np.abs(Bs).sum(axis=1) - np.abs(b_diag)
    kbar = (a_off + a_diag + delta) / (b_diag - b_off)
    return np.maximum(kbar, 0.0)


def threshold_time(traj: Trajectory, kbar: np.ndarray) -> Optional[float]:
    """First recorded time at which every gain has reached its threshold."""
    ok = np.all(traj.gains >= np.asarray(kbar)[None, :], axis=1)
    hit = np.nonzero(ok)[0]
    return float(traj.times[hit[0]]) if hit.size else None


def closed_loop_matrix(kind, A, B, k) -> np.ndarray:
    kind = SystemKind(kind)
    A = as_square(A)
    B = as_square(B)
    k = np.asarray(k, dtype=float)
    if kind is SystemKind.SYSTEM_I:
        return A - k[:, None] * B
    if kind is SystemKind.SYSTEM_II:
        return A - B * k[None, :]
    return A - k[0] * B


def closed_loop_matrix_fn(kind, A, B, traj: Trajectory) -> Callable[[float], np.ndarray]:
    """Time -> closed-loop matrix, using the gains recorded at that sample time."""
    times = traj.times

    def at(t: float) -> np.ndarray:
        i = int(np.clip(np.searchsorted(times, t - 1e-12), 0, len(times) - 1))
        return closed_loop_matrix(kind, A, B, traj.gains[i])

    return at


def verify_coppel(traj: Trajectory, matrix_of_t: Callable[[float], np.ndarray], norm: str = "inf", tol: float = 0.01) -> bool:
    """Check both matrix-measure solution bounds at every recorded sample.

    ``||x0|| exp(-int mu(-A)) <= ||x(t)|| <= ||x0|| exp(int mu(A))`` with the
    integrals accumulated by the trapezoid rule on the recorded grid and a
    relative slack ``tol`` on each side.
    """
    if norm == "inf":
        mu, ord_ = measure_inf_norm, np.inf
    elif norm == "one":
        mu, ord_ = measure_one_norm, 1
    else:
        raise ValueError("norm must be 'one' or 'inf'")
    if len(traj.times) == 0:
        raise InsufficientData("empty trajectory")
    n = traj.states.shape[1]
    mats = [np.asarray(matrix_of_t(t), dtype=float) for t in traj.times]
    if any(M.shape != (n, n) for M in mats):
        raise DimensionMismatch("matrix_of_t returned a matrix of the wrong size")
    up = np.array([mu(M) for M in mats])
    lo = np.array([mu(-M) for M in mats])
    dts = np.diff(traj.times)
    int_up = np.concatenate([[0.0], np.cumsum(0.5 * dts * (up[1:] + up[:-1]))])
    int_lo = np.concatenate([[0.0], np.cumsum(0.5 * dts * (lo[1:] + lo[:-1]))])
    norms = np.linalg.norm(traj.states, ord=ord_, axis=1)
    x0 = norms[0]
    with np.errstate(over="ignore", under="ignore"):
        upper = x0 * np.exp(int_up)
        lower = x0 * np.exp(-int_lo)
    return bool(np.all(norms <= upper * (1 + tol)) and np.all(norms >= lower * (1 - tol)))


def exponential_rate_fit(traj: Trajectory, t_start: float = 0.0) -> float:
    """Least-squares slope of ``log ||x(t)||_inf`` over ``t >= t_start``."""
    norms = traj.state_norms()
    mask = (traj.times >= t_start) & (norms > 0) & np.isfinite(norms)
    if mask.sum() < 10:
        raise InsufficientData(f"need >= 10 positive samples after t={t_start}, have {mask.sum()}")
    slope, _ = np.polyfit(traj.times[mask], np.log(norms[mask]), 1)
    return float(slope)
