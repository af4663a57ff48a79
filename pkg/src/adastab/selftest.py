"""Quick invariant suites run by ``adastab selftest``.

Each check returns ``(name, passed, detail)``. Sizes are kept small so the
whole suite finishes in a few seconds; the pytest suite runs the same
properties at full size.
"""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from . import graphnet, matana, odesim

__all__ = [
    "random_m_matrix",
    "random_h_matrix",
    "random_non_h_matrix",
    "random_row_dominant_hurwitz",
    "random_connected_graph",
    "CHECKS",
    "run_all",
]


def _sign_randomize(rng, M: np.ndarray) -> np.ndarray:
    signs = rng.choice([-1.0, 1.0], size=M.shape)
    return M * signs


def random_m_matrix(rng, n: int, margin: float = 0.05) -> np.ndarray:
    """``s I - N`` with N >= 0 random and s = (1 + margin) rho(N)."""
    N = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
    np.fill_diagonal(N, rng.random(n))
    rho = max(np.max(np.abs(np.linalg.eigvals(N))), 1e-3)
    return (1.0 + margin) * rho * np.eye(n) - N


def random_h_matrix(rng, n: int) -> np.ndarray:
    """Random M-matrix plus a small shift, with all signs scrambled."""
    M = random_m_matrix(rng, n, margin=rng.uniform(0.02, 0.5))
    M = M + rng.uniform(0.0, 0.1) * np.eye(n)
    return _sign_randomize(rng, M)


def random_non_h_matrix(rng, n: int) -> np.ndarray:
    """Sign-scrambled ``s I - N`` with ``s < rho(N)`` so the comparison matrix fails."""
    N = rng.random((n, n)) + 0.05
    np.fill_diagonal(N, 0.0)
    rho = np.max(np.abs(np.linalg.eigvals(N)))
    s = rho * rng.uniform(0.3, 0.95)
    return _sign_randomize(rng, s * np.eye(n) - N)


def random_row_dominant_hurwitz(rng, n: int) -> np.ndarray:
    """Strictly row-diagonally dominant with negative diagonal (hence Hurwitz)."""
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    off = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    np.fill_diagonal(A, -(off + rng.uniform(0.1, 2.0, size=n)))
    return A


def random_connected_graph(rng, n: int, rho: float = 0.4) -> graphnet.Graph:
    g, _ = graphnet.erdos_renyi(n, rho, int(rng.integers(0, 2**31)))
    return g


def check_comparison_properties(rng) -> Iterator[bool]:
    for _ in range(50):
        A = rng.normal(size=(n := int(rng.integers(1, 7)), n))
        M = matana.comparison_matrix(A)
        yield np.array_equal(matana.comparison_matrix(M), M)
        yield np.array_equal(matana.comparison_matrix(A.T), M.T)
        yield matana.is_h_matrix(A) == matana.is_h_matrix(A.T)
        yield np.isclose(matana.measure_one_norm(A), matana.measure_inf_norm(A.T))


def check_h_equivalence(rng) -> Iterator[bool]:
    for i in range(40):
        n = int(rng.integers(2, 7))
        A = random_h_matrix(rng, n) if i % 2 == 0 else random_non_h_matrix(rng, n)
        h = matana.is_h_matrix(A)
        row = matana.find_row_scaling(A)
        col = matana.find_column_scaling(A)
        yield h == (i % 2 == 0)
        yield h == (row is not None) == (col is not None)
        if row is not None:
            yield matana.is_generalized_row_dominant(A, row)
            yield matana.is_generalized_column_dominant(A, col)


def check_m_matrix_spectral(rng) -> Iterator[bool]:
    for _ in range(100):
        n = int(rng.integers(2, 9))
        Z = -rng.random((n, n))
        np.fill_diagonal(Z, rng.uniform(0.0, 1.5 * n, size=n))
        spectral = bool(np.min(np.linalg.eigvals(Z).real) > 0)
        yield matana.is_m_matrix(Z) == spectral


def check_measure_bounds_spectrum(rng) -> Iterator[bool]:
    for _ in range(100):
        A = rng.normal(size=(n := int(rng.integers(1, 8)), n))
        yield np.max(matana.eigenvalues(A).real) <= matana.measure_inf_norm(A) + 1e-9


def check_edge_laplacian(rng) -> Iterator[bool]:
    for _ in range(10):
        g = random_connected_graph(rng, int(rng.integers(3, 10)))
        K_hat = rng.uniform(0.5, 2.0, g.n_nodes)
        K = K_hat + rng.uniform(0.1, 1.0, g.n_nodes)
        kappa = g.m_edges - g.n_nodes + 1
        ev = np.linalg.eigvalsh(graphnet.edge_laplacian(g, K))
        ev_hat = np.linalg.eigvalsh(graphnet.edge_laplacian(g, K_hat))
        tol = 1e-9 * max(1.0, ev.max())
        yield int(np.sum(ev < tol)) == kappa == int(np.sum(ev_hat < tol))
        yield bool(np.all(ev[kappa:] > ev_hat[kappa:]))


def check_coppel(rng) -> Iterator[bool]:
    for _ in range(5):
        n = int(rng.integers(2, 5))
        A = random_row_dominant_hurwitz(rng, n)
        g = odesim.GainState.create(np.ones(n))
        traj = odesim.simulate("system1", A, np.zeros((n, n)), rng.uniform(-5, 5, n), g,
                               dt=1e-3, horizon=2.0, frozen=True, stop_on_converge=False)
        yield odesim.verify_coppel(traj, lambda t: A, norm="inf", tol=0.01)


def check_gain_monotone(rng) -> Iterator[bool]:
    A = np.array([[1.0, 4, 2], [5, -2, 1], [6, 3, -4]])
    B = np.array([[7.0, 4, -2], [-4, 6, 3], [2, -2, 5]])
    g = odesim.GainState.create([4.0, 3.0, 2.0], 1.0, [1.0, 1.5, 2.0])
    traj = odesim.simulate("system1", A, B, [5.0, -10.0, 20.0], g, dt=1e-3, horizon=2.0)
    yield bool(np.all(np.diff(traj.gains, axis=0) >= 0))


def check_sync_manifold(rng) -> Iterator[bool]:
    g = random_connected_graph(rng, 8)
    s0 = np.tile(rng.uniform(-2, 2, 2), (8, 1))
    coupling = graphnet.CouplingState.create("node", rng.uniform(0.1, 1.0, 8))
    traj, rep = graphnet.simulate_network(g, graphnet.OscillatorParams(), s0, coupling, dt=1e-2, horizon=5.0)
    yield bool(np.all(traj.states == traj.states[:, :1, :]))
    yield float(np.max(traj.sync_errors)) < 1e-14
    yield bool(np.array_equal(rep.final_weights, coupling.weights))


CHECKS: dict[str, Callable] = {
    "comparison matrix / transpose / measure duality": check_comparison_properties,
    "H-matrix equivalences and scaling certificates": check_h_equivalence,
    "linear-solve M-matrix test vs spectral test": check_m_matrix_spectral,
    "spectral abscissa <= infinity-norm measure": check_measure_bounds_spectrum,
    "edge Laplacian zero count and monotonicity": check_edge_laplacian,
    "matrix-measure solution bounds": check_coppel,
    "adaptive gain monotonicity": check_gain_monotone,
    "synchronization manifold invariance": check_sync_manifold,
}


def run_all(seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    ok_all = True
    for name, check in CHECKS.items():
        rng = np.random.default_rng(seed)
        results = list(check(rng))
        ok = all(bool(r) for r in results)
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name} ({sum(map(bool, results))}/{len(results)})")
    return ok_all
