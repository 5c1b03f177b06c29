"""Independent reference computations for the test suite.

Nothing here reuses the production loss chains, binomial windows or spectral
QFI; each route is rebuilt from explicit matrices and ``math.comb``.
"""

from math import comb

import numpy as np
from scipy.linalg import expm

from lossyqfi.fock import PureState, annihilator


def sz_matrix(N):
    return np.diag(np.arange(N + 1) - N / 2)


def pure_qfi_matrix(vec, G):
    vec = vec / np.linalg.norm(vec)
    mean = np.vdot(vec, G @ vec).real
    second = np.vdot(vec, G @ G @ vec).real
    return 4 * (second - mean**2)


def loss_matrix_chain(amps, k_a, k_b, threshold=1e-14):
    """Apply explicit annihilator matrices one jump at a time (``a`` first)."""
    vec = np.asarray(amps, dtype=complex)
    for mode, count in (("a", k_a), ("b", k_b)):
        for _ in range(count):
            N = vec.size - 1
            out = annihilator(N, mode).matrix @ vec
            w = np.vdot(out, out).real
            if w < threshold:
                return None
            vec = out / np.sqrt(w)
    return vec


def binomial_pmf(N, k, p):
    return comb(N, k) * p**k * (1 - p) ** (N - k)


def f2_bruteforce(state: PureState, p_a: float, p_b: float) -> float:
    """Untruncated double sum over every feasible (k_a, k_b)."""
    N = state.atom_count
    total = norm = 0.0
    for ka in range(N + 1):
        for kb in range(N + 1 - ka):
            w = binomial_pmf(N, ka, p_a) * binomial_pmf(N, kb, p_b)
            norm += w
            vec = loss_matrix_chain(state.amplitudes, ka, kb)
            if vec is not None and w > 0:
                total += w * pure_qfi_matrix(vec, sz_matrix(vec.size - 1))
    return total / norm


def sld_qfi(rho, G):
    """QFI from the symmetric logarithmic derivative, via a least-squares
    solve of ``rho L + L rho = 2 d rho``."""
    d = rho.shape[0]
    drho = -1j * (G @ rho - rho @ G)
    eye = np.eye(d)
    lhs = np.kron(eye, rho) + np.kron(rho.T, eye)
    vec_l = np.linalg.lstsq(lhs, 2 * drho.reshape(-1, order="F"), rcond=1e-12)[0]
    L = vec_l.reshape(d, d, order="F")
    return float(np.trace(rho @ L @ L).real)


def f1_oracle(state: PureState, p_a: float, p_b: float) -> float:
    """QFI of the untruncated averaged state, block by block via the SLD."""
    N = state.atom_count
    blocks, norm = {}, 0.0
    for ka in range(N + 1):
        for kb in range(N + 1 - ka):
            w = binomial_pmf(N, ka, p_a) * binomial_pmf(N, kb, p_b)
            norm += w
            vec = loss_matrix_chain(state.amplitudes, ka, kb)
            if vec is None or w == 0:
                continue
            M = vec.size - 1
            blocks.setdefault(M, np.zeros((M + 1, M + 1), dtype=complex))
            blocks[M] += w * np.outer(vec, vec.conj())
    return sum(sld_qfi(b / norm, sz_matrix(M)) for M, b in blocks.items())


def expm_evolve(amps, G, angle):
    return expm(-1j * angle * G) @ amps
