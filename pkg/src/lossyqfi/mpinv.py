"""Moore-Penrose inverses of the loss operators and pre-compensated states.

Two independent routes are provided: the analytic shift matrices and a
generic SVD pseudo-inverse.  They are cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import comb

from .fock import PureState, SectorChangingOperator, _channel

SINGULAR_RTOL = 1e-12


def mp_inverse_annihilator(M: int, mode: str) -> SectorChangingOperator:
    """Pseudo-inverse of ``a`` (or ``b``) mapping the M-atom sector to M+1."""
    if M < 0:
        raise ValueError("source sector must have M >= 0")
    mode = _channel(mode)
    n = np.arange(M + 1)
    matrix = np.zeros((M + 2, M + 1), dtype=complex)
    if mode == "a":
        matrix[n + 1, n] = 1 / np.sqrt(n + 1.0)
        return SectorChangingOperator("MpInverseA", M, matrix)
    matrix[n, n] = 1 / np.sqrt(M + 1.0 - n)
    return SectorChangingOperator("MpInverseB", M, matrix)


_INVERSE_KIND = {
    "AnnihilateA": "MpInverseA",
    "AnnihilateB": "MpInverseB",
    "MpInverseA": "AnnihilateA",
    "MpInverseB": "AnnihilateB",
}


def pinv_matrix(matrix: np.ndarray, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    """``V D~ U^dag`` with singular values below ``rtol * max`` treated as zero."""
    matrix = np.asarray(matrix, dtype=complex)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(matrix.shape[::-1], dtype=complex)
    inv = np.zeros_like(s)
    nonzero = s > rtol * s[0]
    inv[nonzero] = 1 / s[nonzero]
    return (vh.conj().T * inv) @ u.conj().T


def mp_inverse_svd(op: SectorChangingOperator | np.ndarray) -> SectorChangingOperator:
    if isinstance(op, SectorChangingOperator):
        matrix, kind = op.matrix, _INVERSE_KIND.get(op.kind, "custom")
    else:
        matrix, kind = np.asarray(op, dtype=complex), "custom"
    inverse = pinv_matrix(matrix)
    return SectorChangingOperator(kind, inverse.shape[1] - 1, inverse)


def _lift_once(amps: np.ndarray, mode: str) -> np.ndarray:
    M = amps.size - 1
    n = np.arange(M + 1)
    out = np.zeros(M + 2, dtype=complex)
    if mode == "a":
        out[1:] = amps / np.sqrt(n + 1.0)
    else:
        out[:-1] = amps / np.sqrt(M + 1.0 - n)
    return out / np.linalg.norm(out)


def mp_lift(target: PureState, k: int, mode: str = "a") -> PureState:
    """Normalized ``(L^{-MP})^k |target>``: the state that lands on ``target``
    after ``k`` losses through channel ``mode``."""
    if k < 0:
        raise ValueError("lift count must be non-negative")
    mode = _channel(mode)
    amps = target.amplitudes
    for _ in range(k):
        amps = _lift_once(amps, mode)
    return PureState.from_vector(amps)


def mp_ghz_qfi_closed_form(N0: int, q: int) -> float:
    """S_z QFI of the GHZ(N0) state lifted ``q`` times through ``a``."""
    if N0 < 1 or q < 0:
        raise ValueError("need N0 >= 1 and q >= 0")
    b = comb(N0 + q, q, exact=True)
    # 4 N0^2 b / (1 + b)^2, rearranged to stay finite for huge b
    return float(4 * N0**2 / (1 + b) * (b / (1 + b)))
