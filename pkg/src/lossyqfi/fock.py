"""Two-mode bosonic states in the fixed-atom-number Dicke basis.

Basis index ``n`` counts atoms in mode ``a``; the remaining ``N - n`` sit in
mode ``b``.  Everything here is dense and exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
# squared norm below which a jump is treated as a kernel hit
ANNIHILATION_THRESHOLD = 1e-14

OPERATOR_KINDS = ("Sx", "Sy", "Sz", "Sz2", "AntiCommSxSz", "Na", "Na2", "TactGen")
SECTOR_CHANGING_KINDS = ("AnnihilateA", "AnnihilateB", "MpInverseA", "MpInverseB", "custom")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector ``C_n`` over the ``N + 1`` Dicke states."""

    atom_count: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.atom_count < 0:
            raise ValueError(f"atom_count must be non-negative, got {self.atom_count}")
        if amps.size != self.atom_count + 1:
            raise ValueError(
                f"expected {self.atom_count + 1} amplitudes for N={self.atom_count}, got {amps.size}"
            )
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_ATOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_vector(cls, vector) -> "PureState":
        """Normalize an arbitrary nonzero vector into a state."""
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(vec.size - 1, vec / norm)

    @property
    def dim(self) -> int:
        return self.atom_count + 1

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expectation(self, operator: "CollectiveOperator | np.ndarray") -> complex:
        matrix = operator.matrix if isinstance(operator, CollectiveOperator) else operator
        return complex(np.vdot(self.amplitudes, matrix @ self.amplitudes))

    def __repr__(self):
        return f"PureState(N={self.atom_count})"


class LossOutcome(NamedTuple):
    """Result of a jump: the normalized post-jump state and its squared norm.

    ``state`` is ``None`` when the jump annihilated the input.
    """

    state: PureState | None
    weight: float

    @property
    def annihilated(self) -> bool:
        return self.state is None


# ---------------------------------------------------------------- states

def coherent_state(N: int) -> PureState:
    """The ``(a^dag + b^dag)^N`` product state, polarized along +x."""
    if N < 0:
        raise ValueError("N must be non-negative")
    n = np.arange(N + 1)
    log_binom = gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1)
    amps = np.exp(0.5 * log_binom - 0.5 * N * np.log(2.0))
    return PureState.from_vector(amps)


def ghz_state(N: int) -> PureState:
    if N < 1:
        raise ValueError("GHZ state needs N >= 1")
    amps = np.zeros(N + 1, dtype=complex)
    amps[0] = amps[N] = 1 / np.sqrt(2)
    return PureState(N, amps)


def dicke_state(N: int, n: int) -> PureState:
    if not 0 <= n <= N:
        raise ValueError(f"Dicke index n={n} outside [0, {N}]")
    amps = np.zeros(N + 1, dtype=complex)
    amps[n] = 1.0
    return PureState(N, amps)


def random_state(N: int, rng: np.random.Generator) -> PureState:
    """Haar-random state in the ``N``-atom sector."""
    vec = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    return PureState.from_vector(vec)


# ---------------------------------------------------------------- operators

@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Dense matrix of a same-sector generator at atom number ``atom_count``."""

    kind: str
    atom_count: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        dim = self.atom_count + 1
        if matrix.shape != (dim, dim):
            raise ValueError(f"{self.kind} matrix has shape {matrix.shape}, expected {(dim, dim)}")
        object.__setattr__(self, "matrix", _frozen(matrix))

    @classmethod
    def custom(cls, matrix) -> "CollectiveOperator":
        matrix = np.asarray(matrix, dtype=complex)
        return cls("custom", matrix.shape[0] - 1, matrix)

    @property
    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=HERMITIAN_ATOL))

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.is_hermitian:
            raise ValueError(f"generator {self.kind!r} is not Hermitian")
        return np.linalg.eigh(self.matrix)

    def __repr__(self):
        return f"CollectiveOperator({self.kind!r}, N={self.atom_count})"


def _raising(N: int) -> np.ndarray:
    """``a^dag b``: |n> -> sqrt((n+1)(N-n)) |n+1>."""
    n = np.arange(N)
    return np.diag(np.sqrt((n + 1.0) * (N - n)), -1).astype(complex)


@lru_cache(maxsize=256)
def _operator(kind: str, N: int) -> CollectiveOperator:
    n = np.arange(N + 1, dtype=float)
    if kind in ("Sx", "Sy", "AntiCommSxSz", "TactGen"):
        sp = _raising(N)
        sx = (sp + sp.conj().T) / 2
        sy = (sp - sp.conj().T) / 2j
    sz = np.diag(n - N / 2).astype(complex)
    if kind == "Sx":
        matrix = sx
    elif kind == "Sy":
        matrix = sy
    elif kind == "Sz":
        matrix = sz
    elif kind == "Sz2":
        matrix = sz @ sz
    elif kind == "AntiCommSxSz":
        matrix = sx @ sz + sz @ sx
    elif kind == "Na":
        matrix = np.diag(n).astype(complex)
    elif kind == "Na2":
        matrix = np.diag(n**2).astype(complex)
    elif kind == "TactGen":
        matrix = sy @ sy - sz @ sz
    else:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    return CollectiveOperator(kind, N, matrix)


def collective_operator(kind: str, N: int) -> CollectiveOperator:
    """Build (and cache) a collective operator.

    ``S_x``, ``S_y`` use the 1/2-normalized Schwinger convention so that
    together with ``S_z = (n_a - n_b)/2`` they close su(2).
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    return _operator(kind, int(N))


@dataclass(frozen=True, eq=False)
class SectorChangingOperator:
    """Rectangular map between atom-number sectors (target dim x source dim)."""

    kind: str
    source_atom_count: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[1] != self.source_atom_count + 1:
            raise ValueError(
                f"matrix shape {matrix.shape} inconsistent with source N={self.source_atom_count}"
            )
        object.__setattr__(self, "matrix", _frozen(matrix))

    @property
    def target_atom_count(self) -> int:
        return self.matrix.shape[0] - 1

    def apply(self, state: PureState) -> np.ndarray:
        if state.atom_count != self.source_atom_count:
            raise ValueError("state sector does not match operator source sector")
        return self.matrix @ state.amplitudes


def annihilator(N: int, mode: str) -> SectorChangingOperator:
    """Matrix of ``a`` or ``b`` from the N-atom to the (N-1)-atom sector."""
    if N < 1:
        raise ValueError("annihilator needs a source sector with N >= 1")
    matrix = np.zeros((N, N + 1), dtype=complex)
    n = np.arange(N + 1)
    if mode == "a":
        matrix[n[1:] - 1, n[1:]] = np.sqrt(n[1:])
        return SectorChangingOperator("AnnihilateA", N, matrix)
    if mode == "b":
        matrix[n[:-1], n[:-1]] = np.sqrt(N - n[:-1])
        return SectorChangingOperator("AnnihilateB", N, matrix)
    raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")


# ---------------------------------------------------------------- losses

def _channel(channel: str) -> str:
    aliases = {"a": "a", "AnnihilateA": "a", "b": "b", "AnnihilateB": "b"}
    try:
        return aliases[channel]
    except KeyError:
        raise ValueError(f"unknown loss channel {channel!r}") from None


def _jump(amps: np.ndarray, mode: str) -> np.ndarray:
    """Unnormalized single jump on a raw amplitude vector."""
    N = amps.size - 1
    n = np.arange(N + 1)
    if mode == "a":
        return amps[1:] * np.sqrt(n[1:])
    return amps[:-1] * np.sqrt(N - n[:-1])


def apply_loss(state: PureState, channel: str) -> LossOutcome:
    """Apply one jump ``a`` or ``b`` and renormalize."""
    if state.atom_count < 1:
        raise ValueError("cannot remove an atom from the empty sector")
    out = _jump(state.amplitudes, _channel(channel))
    weight = float(np.vdot(out, out).real)
    if weight < ANNIHILATION_THRESHOLD:
        return LossOutcome(None, weight)
    return LossOutcome(PureState(state.atom_count - 1, out / np.sqrt(weight)), weight)


def apply_loss_sequence(state: PureState, k_a: int, k_b: int) -> LossOutcome:
    """Normalized ``a^k_a b^k_b |psi>`` with the product of per-jump weights.

    Jumps are applied one at a time (``a`` first); any jump falling below the
    annihilation threshold ends the sequence.
    """
    if k_a < 0 or k_b < 0 or k_a + k_b > state.atom_count:
        raise ValueError(f"invalid loss counts (k_a={k_a}, k_b={k_b}) for N={state.atom_count}")
    current, total = state, 1.0
    for mode, count in (("a", k_a), ("b", k_b)):
        for _ in range(count):
            current, weight = apply_loss(current, mode)
            total *= weight
            if current is None:
                return LossOutcome(None, total)
    return LossOutcome(current, total)


# ---------------------------------------------------------------- dynamics

def evolve(state: PureState, generator: CollectiveOperator, angle: float) -> PureState:
    """``exp(-i angle G) |psi>`` through the eigendecomposition of ``G``."""
    if generator.atom_count != state.atom_count:
        raise ValueError("generator and state live in different sectors")
    values, vectors = generator.eigh
    out = vectors @ (np.exp(-1j * angle * values) * (vectors.conj().T @ state.amplitudes))
    return PureState.from_vector(out)


def overlap(psi: PureState, phi: PureState) -> complex:
    if psi.atom_count != phi.atom_count:
        raise ValueError("states live in different sectors")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))


def fidelity(psi: PureState, phi: PureState) -> float:
    """Overlap modulus ``|<psi|phi>|`` (not squared)."""
    return abs(overlap(psi, phi))


def fubini_study_distance(psi: PureState, phi: PureState) -> float:
    return float(np.arccos(np.clip(fidelity(psi, phi), 0.0, 1.0)))
