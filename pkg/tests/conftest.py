import numpy as np
import pytest

from ammfees import MarketParams, PoolSpec, build_price_grid, build_uniform_grid

DEPTH = 1e8
Y0 = 1000.0
S0 = 100.0


@pytest.fixture(scope="session")
def pool():
    return PoolSpec(depth_sq=DEPTH, y0=Y0)


@pytest.fixture(scope="session")
def price_grid(pool):
    """41-point grid stepping the marginal rate by 0.1 per trade."""
    return build_price_grid(pool, dz=0.1, n=20)


@pytest.fixture(scope="session")
def uniform_grid(pool):
    """41-point equally spaced grid with half-unit trades."""
    return build_uniform_grid(pool, delta=0.5, n=20)


@pytest.fixture(scope="session")
def base_params():
    """Baseline market: symmetric rate 50, decay 2, oracle 100, horizon 1."""
    return MarketParams(lambda_sell=50.0, lambda_buy=50.0, k=2.0, s0=S0, horizon=1.0)


def rk4_linear(matrix: np.ndarray, t_end: float, t_eval, n_steps: int) -> np.ndarray:
    """Independent oracle for dw/dt = -A w backward from w(t_end) = 1.

    Marches tau = t_end - t forward with classic fixed-step RK4 (dw/dtau = A w)
    and returns w rows at the requested times, ascending in t.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    h = t_end / n_steps
    w = np.ones(matrix.shape[0])
    tau = 0.0
    rows = []
    for tgt in t_end - t_eval[::-1]:     # ascending tau targets
        while tgt - tau > 1e-15:
            step = min(h, tgt - tau)
            k1 = matrix @ w
            k2 = matrix @ (w + 0.5 * step * k1)
            k3 = matrix @ (w + 0.5 * step * k2)
            k4 = matrix @ (w + step * k3)
            w = w + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            tau = tau + step
        rows.append(w.copy())
    return np.array(rows[::-1])


def taylor_expm(matrix: np.ndarray, terms: int = 30) -> np.ndarray:
    """Truncated-series oracle for the matrix exponential."""
    acc = np.eye(matrix.shape[0])
    term = np.eye(matrix.shape[0])
    for j in range(1, terms + 1):
        term = term @ matrix / j
        acc = acc + term
    return acc
