"""Quantum Fisher information of pure, lossy and loss-averaged states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .fock import (
    ANNIHILATION_THRESHOLD,
    CollectiveOperator,
    PureState,
    _channel,
    _jump,
    collective_operator,
)

EIGEN_FLOOR = 1e-14
PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LossModel:
    """Per-atom loss probabilities for the two channels.

    ``tail_mass_cutoff`` bounds the probability mass of the loss-count
    distribution that is discarded (smallest terms first) before the surviving
    weights are renormalized.
    """

    p_a: float = 0.0
    p_b: float = 0.0
    tail_mass_cutoff: float = 1e-10

    def __post_init__(self):
        for name in ("p_a", "p_b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.tail_mass_cutoff < 1.0:
            raise ValueError("tail_mass_cutoff must lie in [0, 1)")

    def probability(self, channel: str) -> float:
        return self.p_a if _channel(channel) == "a" else self.p_b

    def accumulation_point(self, N: int, channel: str = "a") -> int:
        return int(np.floor(self.probability(channel) * N))


@dataclass
class SectoredMixedState:
    """Direct sum of density blocks keyed by remaining atom number.

    Blocks are stored unnormalized: the trace of block ``M`` is its sector
    weight.
    """

    blocks: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def total_weight(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks.values()))

    def add_pure(self, state: PureState, weight: float) -> None:
        amps = state.amplitudes
        block = weight * np.outer(amps, amps.conj())
        M = state.atom_count
        if M in self.blocks:
            self.blocks[M] = self.blocks[M] + block
        else:
            self.blocks[M] = block


@dataclass(frozen=True)
class ScalingFit:
    points: tuple[tuple[float, float], ...]
    exponent: float
    intercept: float
    residual: float


@dataclass(frozen=True)
class MomentDiagnostic:
    q: int
    exact_qfi: float
    moment_approx: float
    moments: tuple[float, ...]


# ---------------------------------------------------------------- pure / mixed

def _variance_qfi(probs: np.ndarray) -> float:
    """4 Var(n) of a distribution over Dicke indices (QFI w.r.t. S_z)."""
    n = np.arange(probs.size, dtype=float)
    total = probs.sum()
    mean = probs @ n / total
    var = probs @ (n - mean) ** 2 / total
    return float(4.0 * max(var, 0.0))


def qfi_pure(state: PureState, generator: CollectiveOperator | None = None) -> float:
    """Pure-state QFI ``4 Var(G)``; ``G`` defaults to ``S_z``."""
    if generator is None:
        return _variance_qfi(state.probabilities)
    if generator.atom_count != state.atom_count:
        raise ValueError("generator and state live in different sectors")
    if not generator.is_hermitian:
        raise ValueError(f"generator {generator.kind!r} is not Hermitian")
    g_psi = generator.matrix @ state.amplitudes
    mean = np.vdot(state.amplitudes, g_psi).real
    second = np.vdot(g_psi, g_psi).real
    return float(4.0 * max(second - mean**2, 0.0))


def _default_family(M: int) -> CollectiveOperator:
    return collective_operator("Sz", M)


def qfi_block(rho: np.ndarray, generator: np.ndarray) -> float:
    """Spectral QFI ``2 sum (l_i - l_j)^2 / (l_i + l_j) |<i|G|j>|^2`` of one block."""
    values, vectors = np.linalg.eigh(rho)
    if values.min(initial=0.0) < -PSD_TOLERANCE:
        raise ValueError(f"density block is not positive semidefinite (min eigenvalue {values.min():.3e})")
    g = vectors.conj().T @ generator @ vectors
    li, lj = values[:, None], values[None, :]
    denom = li + lj
    keep = denom > EIGEN_FLOOR
    terms = np.zeros_like(denom)
    terms[keep] = (li - lj)[keep] ** 2 / denom[keep]
    return float(2.0 * np.sum(terms * np.abs(g) ** 2))


def qfi_mixed(
    rho: SectoredMixedState,
    generator_family: Callable[[int], CollectiveOperator] = _default_family,
) -> float:
    """QFI of a sectored mixed state: the sum of the per-block spectral QFIs."""
    return sum(
        qfi_block(block, generator_family(M).matrix) for M, block in sorted(rho.blocks.items())
    )


# ---------------------------------------------------------------- loss weights

def _drop_smallest(weights: np.ndarray, cutoff: float) -> np.ndarray:
    """Mask keeping every weight except the smallest ones whose total stays
    within ``cutoff``.  Zero weights are always dropped."""
    keep = weights > 0
    if cutoff > 0:
        order = np.argsort(weights, kind="stable")
        dropped = np.cumsum(weights[order]) <= cutoff
        keep[order[dropped]] = False
    return keep


def binomial_window(N: int, p: float, cutoff: float) -> tuple[int, np.ndarray]:
    """Kept loss counts ``lo..hi`` and their (unnormalized) binomial weights.

    The smallest terms are dropped while their total mass stays within
    ``cutoff``; the pmf is unimodal, so this trims both tails.
    """
    pmf = binom.pmf(np.arange(N + 1), N, p)
    kept = np.flatnonzero(_drop_smallest(pmf, cutoff))
    lo, hi = int(kept[0]), int(kept[-1])
    return lo, pmf[lo : hi + 1]


def _log_probabilities(state: PureState) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 2.0 * np.log(np.abs(state.amplitudes))


def _loss_chain(log_probs: np.ndarray, mode: str, steps: int):
    """Yield normalized Dicke-index log-distributions after 0, 1, ..., steps jumps.

    Runs in log space so that lifted states whose branches differ by hundreds
    of decades keep both branches.  Yields ``None`` once a jump annihilates
    the state.
    """
    current = log_probs - logsumexp(log_probs)
    yield current
    for _ in range(steps):
        M = current.size - 1
        n = np.arange(M + 1, dtype=float)
        with np.errstate(divide="ignore"):
            log_factor = np.log(n if mode == "a" else M - n)
        weighted = current + log_factor
        log_weight = logsumexp(weighted)
        if not log_weight > np.log(ANNIHILATION_THRESHOLD):
            yield None
            return
        current = (weighted[1:] if mode == "a" else weighted[:-1]) - log_weight
        yield current


def f2_single(state: PureState, channel: str, model: LossModel) -> float:
    """Binomial average of the post-loss QFIs for a single loss channel."""
    mode = _channel(channel)
    other = model.p_b if mode == "a" else model.p_a
    if other != 0.0:
        raise ValueError("f2_single needs the other channel's loss probability to be zero")
    N = state.atom_count
    p = model.probability(mode)
    lo, weights = binomial_window(N, p, model.tail_mass_cutoff)
    hi = lo + weights.size - 1
    total = 0.0
    for k, log_probs in enumerate(_loss_chain(_log_probabilities(state), mode, hi)):
        if log_probs is None:
            break
        if k >= lo:
            total += weights[k - lo] * _variance_qfi(np.exp(log_probs))
    return float(total / weights.sum())


def loss_weights(N: int, model: LossModel) -> dict[tuple[int, int], float]:
    """Normalized joint weights ``P_{k_a,k_b}`` over feasible, kept loss counts.

    The product binomial is restricted to ``k_a + k_b <= N`` and renormalized
    first; truncation then acts on that distribution, so the dropped mass is
    bounded by the cutoff even when most of the raw mass is infeasible.
    """
    k = np.arange(N + 1)
    with np.errstate(divide="ignore"):
        log_a = binom.logpmf(k, N, model.p_a)
        log_b = binom.logpmf(k, N, model.p_b)
    joint = log_a[:, None] + log_b[None, :]
    joint[k[:, None] + k[None, :] > N] = -np.inf
    weights = np.exp(joint - logsumexp(joint))
    keep = _drop_smallest(weights.ravel(), model.tail_mass_cutoff).reshape(weights.shape)
    kept = weights[keep]
    kept = kept / kept.sum()
    return {(int(a), int(b)): float(w) for (a, b), w in zip(np.argwhere(keep), kept)}


def f2_dual(state: PureState, model: LossModel) -> float:
    """Average post-loss QFI with independent losses on both channels.

    Infeasible counts ``k_a + k_b > N`` are dropped before renormalizing.
    """
    N = state.atom_count
    weights = loss_weights(N, model)
    if not weights:
        return 0.0
    kb_max = max(kb for _, kb in weights)
    ka_max = max(ka for ka, _ in weights)
    lo_a = min(ka for ka, _ in weights)
    total = 0.0
    for ka, log_probs_a in enumerate(_loss_chain(_log_probabilities(state), "a", ka_max)):
        if log_probs_a is None:
            break
        if ka < lo_a:
            continue
        steps = min(kb_max, N - ka)
        for kb, log_probs in enumerate(_loss_chain(log_probs_a, "b", steps)):
            if log_probs is None:
                break
            w = weights.get((ka, kb))
            if w:
                total += w * _variance_qfi(np.exp(log_probs))
    return float(total)


def _amplitude_chain(amps: np.ndarray, mode: str, steps: int):
    current = amps
    yield current
    for _ in range(steps):
        out = _jump(current, mode)
        weight = np.vdot(out, out).real
        if weight < ANNIHILATION_THRESHOLD:
            yield None
            return
        current = out / np.sqrt(weight)
        yield current


def averaged_state(state: PureState, model: LossModel) -> SectoredMixedState:
    """The loss-averaged state, with routes of equal total loss pooled per sector."""
    N = state.atom_count
    weights = loss_weights(N, model)
    rho = SectoredMixedState()
    if not weights:
        return rho
    ka_max = max(ka for ka, _ in weights)
    kb_max = max(kb for _, kb in weights)
    lo_a = min(ka for ka, _ in weights)
    for ka, amps_a in enumerate(_amplitude_chain(state.amplitudes, "a", ka_max)):
        if amps_a is None:
            break
        if ka < lo_a:
            continue
        for kb, amps in enumerate(_amplitude_chain(amps_a, "b", min(kb_max, N - ka))):
            if amps is None:
                break
            w = weights.get((ka, kb))
            if w:
                rho.add_pure(PureState(amps.size - 1, amps), w)
    return rho


def f1(state: PureState, model: LossModel) -> float:
    """QFI of the loss-averaged state (loss count unknown per shot)."""
    return qfi_mixed(averaged_state(state, model))


# ---------------------------------------------------------------- bounds

def noisy_hl(N: float, p: float) -> float:
    """Binomial average of the Heisenberg limit ``(N - k)^2``."""
    s = 1.0 - p
    return s**2 * N**2 + s * N - s**2 * N


def noisy_sql(N: float, p: float) -> float:
    return (1.0 - p) * N


def lower_bound_n32(N: float, p: float) -> float:
    """Claimed achievable lower bound with asymptotic ``N^{3/2}`` scaling."""
    return (1.0 - p) ** 2 * N**2 / (1.0 + np.sqrt(p * (1.0 - p) * N))


# ---------------------------------------------------------------- diagnostics

def moment_diagnostic(state: PureState, q: int) -> MomentDiagnostic:
    """Compare the exact QFI after ``q`` a-losses with its moment approximation."""
    N = state.atom_count
    if not 0 <= q <= N:
        raise ValueError(f"q={q} outside [0, {N}]")
    mu = state.probabilities
    n = np.arange(N + 1, dtype=float)
    moments = tuple(float(mu @ n**j) for j in range(q + 3))
    Mq, Mq1, Mq2 = moments[q], moments[q + 1], moments[q + 2]
    approx = 4.0 * (Mq2 * Mq - Mq1**2) / Mq**2 if Mq > 0 else 0.0
    exact = 0.0
    for step, log_probs in enumerate(_loss_chain(_log_probabilities(state), "a", q)):
        if log_probs is None:
            break
        if step == q:
            exact = _variance_qfi(np.exp(log_probs))
    return MomentDiagnostic(q, exact, float(approx), moments)


def fit_scaling(points: Iterable[tuple[float, float]]) -> ScalingFit:
    """Least-squares power law through ``(N, value)`` on log-log axes."""
    pts = tuple((float(n), float(v)) for n, v in points)
    if len(pts) < 3:
        raise ValueError("need at least three points to fit a scaling exponent")
    x, y = np.array(pts).T
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("scaling fit needs strictly positive N and values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return ScalingFit(pts, float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def sliding_exponents(
    func: Callable[[float], float], Ns: Sequence[float], window: int = 3
) -> list[float]:
    """Fitted exponents over consecutive windows of ``Ns``."""
    return [
        fit_scaling([(n, func(n)) for n in Ns[i : i + window]]).exponent
        for i in range(len(Ns) - window + 1)
    ]
