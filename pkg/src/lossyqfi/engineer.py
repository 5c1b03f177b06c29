"""Piecewise-constant Hamiltonian engineering from the coherent state.

Each segment evolves under ``sum_k c_jk G_k`` for a time ``dt``; the default
generator set is ``S_x, S_z, S_z^2, {S_x, S_z}``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .fock import PureState, coherent_state, collective_operator

log = logging.getLogger(__name__)

DEFAULT_GENERATORS = ("Sx", "Sz", "Sz2", "AntiCommSxSz")
# single-mode interaction only: no anticommutator, quadratic in n_a
RESTRICTED_GENERATORS = ("Sx", "Sz", "Na2")


@dataclass(frozen=True, eq=False)
class ControlSequence:
    dt: float
    coefficients: np.ndarray
    generators: tuple[str, ...] = DEFAULT_GENERATORS

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] != len(self.generators):
            raise ValueError(
                f"coefficients must have shape (m >= 1, {len(self.generators)}), got {coeffs.shape}"
            )
        if not self.dt > 0:
            raise ValueError("segment duration dt must be positive")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("control coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def segment_count(self) -> int:
        return self.coefficients.shape[0]

    @property
    def total_time(self) -> float:
        return self.segment_count * self.dt

    @property
    def max_abs_coefficient(self) -> float:
        return float(np.max(np.abs(self.coefficients)))

    @classmethod
    def zeros(cls, m: int, dt: float, generators=DEFAULT_GENERATORS) -> "ControlSequence":
        return cls(dt, np.zeros((m, len(generators))), generators)


@dataclass
class EngineeringResult:
    controls: ControlSequence
    fidelity: float
    cost_trace: list[tuple[int, float]] = field(default_factory=list)
    restarts_used: int = 0
    seed: int = 0
    converged: bool = True
    gradient_norm: float = 0.0
    restart_costs: list[float] = field(default_factory=list)

    @property
    def cost(self) -> float:
        return 1.0 - self.fidelity


def _generator_stack(generators, N: int) -> np.ndarray:
    return np.stack([collective_operator(g, N).matrix for g in generators])


def _segment_eigs(controls: ControlSequence, stack: np.ndarray):
    hams = np.tensordot(controls.coefficients, stack, axes=1)
    return np.linalg.eigh(hams)


def propagate(controls: ControlSequence, initial: PureState) -> PureState:
    """Apply the segment unitaries in time order (segment 1 acts first)."""
    stack = _generator_stack(controls.generators, initial.atom_count)
    values, vectors = _segment_eigs(controls, stack)
    psi = initial.amplitudes
    for lam, vec in zip(values, vectors):
        psi = vec @ (np.exp(-1j * controls.dt * lam) * (vec.conj().T @ psi))
    return PureState.from_vector(psi)


def _check_sectors(target: PureState, initial: PureState) -> None:
    if target.atom_count != initial.atom_count:
        raise ValueError("target and initial states live in different sectors")


def infidelity_cost(controls: ControlSequence, target: PureState, initial: PureState) -> float:
    """``1 - |<target| U |initial>|``."""
    _check_sectors(target, initial)
    final = propagate(controls, initial)
    return float(1.0 - min(abs(np.vdot(target.amplitudes, final.amplitudes)), 1.0))


def _cost_and_gradient(flat, dt, generators, stack, target, initial):
    """Exact cost and gradient by differentiating each segment exponential."""
    m = flat.size // len(generators)
    coeffs = flat.reshape(m, len(generators))
    hams = np.tensordot(coeffs, stack, axes=1)
    values, vectors = np.linalg.eigh(hams)
    phases = np.exp(-1j * dt * values)

    forward = [initial]
    for j in range(m):
        forward.append(vectors[j] @ (phases[j] * (vectors[j].conj().T @ forward[-1])))
    amp = np.vdot(target, forward[-1])
    mod = abs(amp)
    cost = 1.0 - mod

    grad = np.zeros_like(coeffs)
    if mod == 0:
        return cost, grad.ravel()
    back = target.copy()  # <target| U_m ... U_{j+1}, stored as a ket
    for j in range(m - 1, -1, -1):
        lam, vec, ph = values[j], vectors[j], phases[j]
        diff = lam[:, None] - lam[None, :]
        same = np.abs(diff) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = np.where(same, -1j * dt * ph[:, None], (ph[:, None] - ph[None, :]) / np.where(same, 1.0, diff))
        left = vec.conj().T @ back
        right = vec.conj().T @ forward[j]
        gen_eig = vec.conj().T @ stack @ vec
        d_amp = np.einsum("i,kij,ij,j->k", left.conj(), gen_eig, kernel, right)
        grad[j] = -np.real(np.conj(amp) * d_amp) / mod
        back = vec @ (ph.conj() * (vec.conj().T @ back))
    return cost, grad.ravel()


def gradient(
    controls: ControlSequence,
    target: PureState,
    initial: PureState,
    mode: str = "fd",
    rel_step: float = 1e-6,
) -> np.ndarray:
    """Gradient of the infidelity w.r.t. all ``m x len(generators)`` coefficients.

    ``mode="fd"`` uses central differences with a relative step; ``"exact"``
    differentiates the segment exponentials analytically.
    """
    _check_sectors(target, initial)
    flat = controls.coefficients.ravel()
    if mode == "exact":
        stack = _generator_stack(controls.generators, initial.atom_count)
        return _cost_and_gradient(
            flat, controls.dt, controls.generators, stack, target.amplitudes, initial.amplitudes
        )[1]
    if mode != "fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    shape = controls.coefficients.shape
    grad = np.empty(flat.size)
    for i in range(flat.size):
        h = rel_step * max(1.0, abs(flat[i]))
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h
        c_up = infidelity_cost(ControlSequence(controls.dt, up.reshape(shape), controls.generators), target, initial)
        c_dn = infidelity_cost(ControlSequence(controls.dt, down.reshape(shape), controls.generators), target, initial)
        grad[i] = (c_up - c_dn) / (2 * h)
    return grad


@dataclass(frozen=True)
class EngineeringConfig:
    m: int = 10
    dt: float = 0.1
    restarts: int = 8
    seed: int = 0
    max_iter: int = 2000
    tol: float = 1e-8
    init_scale: float = 1.0
    generators: tuple[str, ...] = DEFAULT_GENERATORS
    workers: int = 1


def _single_restart(args):
    index, seed_seq, cfg, target_amps = args
    N = target_amps.size - 1
    rng = np.random.default_rng(seed_seq)
    stack = _generator_stack(cfg.generators, N)
    initial = coherent_state(N).amplitudes
    x0 = rng.uniform(-cfg.init_scale, cfg.init_scale, size=cfg.m * len(cfg.generators))
    trace = []

    def fun(x):
        return _cost_and_gradient(x, cfg.dt, cfg.generators, stack, target_amps, initial)

    def record(intermediate_result):
        trace.append((len(trace) + 1, float(intermediate_result.fun)))

    trace.append((0, float(fun(x0)[0])))
    res = minimize(fun, x0, jac=True, method="BFGS", callback=record,
                   options={"maxiter": cfg.max_iter, "gtol": cfg.tol})
    cost, grad = fun(res.x)
    return index, res.x, float(cost), trace, float(np.linalg.norm(grad))


def optimize_controls(N: int, target: PureState, config: EngineeringConfig | None = None) -> EngineeringResult:
    """BFGS over random restarts; the lowest-cost restart wins (ties -> lowest index)."""
    cfg = config or EngineeringConfig()
    if target.atom_count != N:
        raise ValueError("target must live in the N-atom sector")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    jobs = [(i, s, cfg, np.asarray(target.amplitudes)) for i, s in enumerate(seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(_single_restart, jobs))
    else:
        runs = [_single_restart(job) for job in jobs]

    best = min(runs, key=lambda r: (r[2], r[0]))
    index, x, cost, trace, gnorm = best
    controls = ControlSequence(cfg.dt, x.reshape(cfg.m, len(cfg.generators)), cfg.generators)
    fid = 1.0 - infidelity_cost(controls, target, coherent_state(N))
    converged = gnorm <= cfg.tol or cost <= cfg.tol
    if not converged:
        log.warning("best restart %d stopped with gradient norm %.2e (tol %.1e)", index, gnorm, cfg.tol)
    return EngineeringResult(
        controls=controls,
        fidelity=fid,
        cost_trace=trace,
        restarts_used=cfg.restarts,
        seed=cfg.seed,
        converged=converged,
        gradient_norm=gnorm,
        restart_costs=[r[2] for r in runs],
    )
