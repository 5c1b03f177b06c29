"""One-axis twisting (OAT) and two-axis counter-twisting (TACT) inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .fock import PureState, coherent_state, collective_operator, evolve
from .qfi import LossModel, f2_single, qfi_pure

TWIST_GENERATORS = {"OAT": "Sz2", "TACT": "TactGen"}
CHI_RANGE = (0.0, np.pi / 2)
THETA_RANGE = (0.0, np.pi)


@dataclass(frozen=True)
class TwistingParams:
    kind: str
    chi: float
    theta: float
    objective: float = float("nan")
    grid_resolution: int = 0

    def __post_init__(self):
        if self.kind not in TWIST_GENERATORS:
            raise ValueError(f"twisting kind must be OAT or TACT, got {self.kind!r}")
        if not (np.isfinite(self.chi) and np.isfinite(self.theta)):
            raise ValueError("twisting angles must be finite")


def twisted_state(N: int, params: TwistingParams) -> PureState:
    """``exp(-i theta S_x) exp(-i chi G) |coherent>``."""
    if N < 2:
        raise ValueError("twisted states need N >= 2")
    twist = collective_operator(TWIST_GENERATORS[params.kind], N)
    state = evolve(coherent_state(N), twist, params.chi)
    return evolve(state, collective_operator("Sx", N), params.theta)


def _grid_qfi(N: int, kind: str, chis: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Noiseless S_z QFI on a (chi, theta) grid, vectorized over theta."""
    tw_vals, tw_vecs = collective_operator(TWIST_GENERATORS[kind], N).eigh
    x_vals, x_vecs = collective_operator("Sx", N).eigh
    coh = tw_vecs.conj().T @ coherent_state(N).amplitudes
    n = np.arange(N + 1, dtype=float)
    phases = np.exp(-1j * np.outer(x_vals, thetas))
    out = np.empty((chis.size, thetas.size))
    for i, chi in enumerate(chis):
        twisted = tw_vecs @ (np.exp(-1j * chi * tw_vals) * coh)
        rotated = x_vecs @ (phases * (x_vecs.conj().T @ twisted)[:, None])
        probs = np.abs(rotated) ** 2
        mean = n @ probs
        out[i] = 4 * (n**2 @ probs - mean**2)
    return out


def _objective(N: int, kind: str, model: LossModel | None) -> Callable[[float, float], float]:
    def value(chi: float, theta: float) -> float:
        state = twisted_state(N, TwistingParams(kind, chi, theta))
        if model is None:
            return qfi_pure(state)
        return f2_single(state, "a", model)

    return value


def optimize_twisting(
    N: int,
    kind: str,
    model: LossModel | None = None,
    grid: int = 64,
    tol: float = 1e-10,
) -> TwistingParams:
    """Maximize the S_z QFI (or F2 under ``model``) of a twisted state.

    A ``grid x grid`` scan over chi in [0, pi/2] and theta in [0, pi) seeds a
    BFGS polish from the best cell.  Fully deterministic.
    """
    if N < 2:
        raise ValueError("twisted states need N >= 2")
    kind = kind.upper()
    chis = np.linspace(*CHI_RANGE, grid)
    thetas = np.linspace(*THETA_RANGE, grid, endpoint=False)
    value = _objective(N, kind, model)
    if model is None:
        scores = _grid_qfi(N, kind, chis, thetas)
    else:
        scores = np.array([[value(c, t) for t in thetas] for c in chis])
    i, j = np.unravel_index(np.argmax(scores), scores.shape)
    best = (float(chis[i]), float(thetas[j]), float(scores[i, j]))

    res = minimize(lambda x: -value(x[0], x[1]), x0=[best[0], best[1]], method="BFGS",
                   options={"gtol": tol, "xrtol": tol})
    if np.all(np.isfinite(res.x)) and -res.fun > best[2]:
        best = (float(res.x[0]), float(res.x[1]), float(-res.fun))
    return TwistingParams(kind, best[0], best[1], best[2], grid)
