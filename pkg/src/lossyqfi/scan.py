"""Scan drivers behind the command-line interface."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from . import qfi
from .engineer import DEFAULT_GENERATORS, EngineeringConfig, optimize_controls, propagate
from .fock import PureState, coherent_state, ghz_state
from .mpinv import mp_lift
from .twisting import optimize_twisting, twisted_state

log = logging.getLogger(__name__)

SCAN_KINDS = ("scan-n", "scan-p", "bounds", "engineer", "state-report")
FAMILIES = ("coherent", "ghz", "oat", "tact", "mp-ghz", "mp-tact")
FIGURES_OF_MERIT = ("f1", "f2", "bounds")

POINT_COLUMNS = (
    "scan_kind", "N", "p_a", "p_b", "state_family", "twist_kind", "twist_chi", "twist_theta",
    "lift_k", "f2", "f1", "noisy_sql", "noisy_hl", "lower_bound", "tail_mass_cutoff",
    "twist_objective", "seed", "status", "wall_time",
)
ENGINEER_COLUMNS = (
    "scan_kind", "N", "p_a", "p_b", "state_family", "twist_chi", "twist_theta", "lift_k",
    "m", "dt", "restarts", "fidelity", "converged", "gradient_norm", "max_abs_coefficient",
    "f2_engineered", "f2_target", "f2_bare", "noisy_sql", "seed", "status", "wall_time",
)
STATE_COLUMNS = ("n", "re", "im", "probability")


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


@dataclass(frozen=True)
class ScanRequest:
    """Fully resolved request; every field is echoed into the output."""

    scan_kind: str
    family: str = "mp-ghz"
    n_min: int = 40
    n_max: int = 200
    n_step: int = 40
    n: int = 200
    p_min: float = 0.0
    p_max: float = 1.0
    p_step: float = 0.05
    pa: float = 0.1
    pb: float = 0.0
    fom: tuple[str, ...] = ("f2", "bounds")
    tail_mass_cutoff: float = 1e-10
    twist_grid: int = 64
    twist_objective: str = "qfi"
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    timing: bool = True
    m: int = 10
    dt: float = 0.1
    restarts: int = 8
    max_iter: int = 2000
    tol: float = 1e-8

    def __post_init__(self):
        fom = self.fom
        if isinstance(fom, str):
            fom = tuple(f.strip() for f in fom.replace(";", ",").split(",") if f.strip())
        object.__setattr__(self, "fom", tuple(fom))
        self.validate()

    def validate(self) -> None:
        if self.scan_kind not in SCAN_KINDS:
            raise ValueError(f"unknown scan kind {self.scan_kind!r}; expected one of {SCAN_KINDS}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.fom) - set(FIGURES_OF_MERIT)
        if unknown:
            raise ValueError(f"unknown figures of merit {sorted(unknown)}")
        for name in ("pa", "pb", "p_min", "p_max"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.scan_kind == "scan-n" and not self.n_values():
            raise ValueError("empty N range")
        if self.scan_kind in ("scan-p", "bounds") and not self.p_values():
            raise ValueError("empty p range")
        if self.n_step <= 0 or self.p_step <= 0:
            raise ValueError("range steps must be positive")
        if self.n < 1 or self.n_min < 1:
            raise ValueError("atom numbers must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.twist_objective not in ("qfi", "f2"):
            raise ValueError("twist_objective must be 'qfi' or 'f2'")

    def n_values(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1, self.n_step)) if self.n_step > 0 else []

    def p_values(self) -> list[float]:
        if self.p_step <= 0 or self.p_max < self.p_min:
            return []
        count = int(np.floor((self.p_max - self.p_min) / self.p_step + 1e-9)) + 1
        return [round(self.p_min + i * self.p_step, 12) for i in range(count)]

    def header(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("workers")  # scheduling only; output does not depend on it
        return data

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "ScanRequest":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown request keys {sorted(unknown)}")
        return cls(**values)


@dataclass
class PreparedState:
    state: PureState
    twist: Any = None
    lift_k: int = 0


def prepare_state(
    family: str,
    N: int,
    model: qfi.LossModel,
    twist_grid: int = 64,
    twist_objective: str = "qfi",
) -> PreparedState:
    """Build one of the benchmark input states at ``N`` atoms.

    ``mp-*`` families lift the base state prepared at ``N - floor(p_a N)``
    atoms back up to ``N`` with the a-channel pseudo-inverse.
    """
    if family == "coherent":
        return PreparedState(coherent_state(N))
    if family == "ghz":
        return PreparedState(ghz_state(N))
    if family in ("oat", "tact"):
        objective_model = model if twist_objective == "f2" else None
        params = optimize_twisting(N, family.upper(), objective_model, grid=twist_grid)
        return PreparedState(twisted_state(N, params), params)
    if family in ("mp-ghz", "mp-tact"):
        k = model.accumulation_point(N, "a")
        N0 = N - k
        if family == "mp-ghz":
            return PreparedState(mp_lift(ghz_state(N0), k), None, k)
        params = optimize_twisting(N0, "TACT", grid=twist_grid)
        return PreparedState(mp_lift(twisted_state(N0, params), k), params, k)
    raise ValueError(f"unknown state family {family!r}")


def _f2(state: PureState, model: qfi.LossModel) -> float:
    if model.p_b == 0.0:
        return qfi.f2_single(state, "a", model)
    return qfi.f2_dual(state, model)


def _point(args) -> dict[str, Any]:
    request, N, p_a = args
    start = time.perf_counter()
    row: dict[str, Any] = {
        "scan_kind": request.scan_kind, "N": N, "p_a": p_a, "p_b": request.pb,
        "state_family": request.family, "tail_mass_cutoff": request.tail_mass_cutoff,
        "twist_objective": request.twist_objective, "seed": request.seed,
    }
    p_eff = 1.0 - (1.0 - p_a) * (1.0 - request.pb)
    try:
        if request.scan_kind == "bounds" or "bounds" in request.fom:
            row.update(
                noisy_sql=qfi.noisy_sql(N, p_eff),
                noisy_hl=qfi.noisy_hl(N, p_eff),
                lower_bound=qfi.lower_bound_n32(N, p_eff),
            )
        if request.scan_kind != "bounds" and ("f1" in request.fom or "f2" in request.fom):
            model = qfi.LossModel(p_a, request.pb, request.tail_mass_cutoff)
            prepared = prepare_state(
                request.family, N, model, request.twist_grid, request.twist_objective
            )
            if prepared.twist is not None:
                row.update(
                    twist_kind=prepared.twist.kind,
                    twist_chi=prepared.twist.chi,
                    twist_theta=prepared.twist.theta,
                )
            row["lift_k"] = prepared.lift_k
            if "f2" in request.fom:
                row["f2"] = _f2(prepared.state, model)
            if "f1" in request.fom:
                row["f1"] = qfi.f1(prepared.state, model)
        row["status"] = "ok"
    except Exception as exc:  # per-point failures are recorded, never fatal
        log.warning("grid point N=%s p_a=%s failed: %s", N, p_a, exc)
        row["status"] = f"error: {exc}"
    row["wall_time"] = time.perf_counter() - start if request.timing else None
    return row


def _map(func, jobs, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
        # map keeps grid order regardless of completion order
        return list(pool.map(func, jobs))


def run_scan(request: ScanRequest) -> tuple[tuple[str, ...], list[dict[str, Any]], dict[str, Any]]:
    """Run a request; returns ``(columns, rows, extra_header)``."""
    if request.scan_kind == "scan-n":
        jobs = [(request, N, request.pa) for N in request.n_values()]
        return POINT_COLUMNS, _map(_point, jobs, request.workers), {}
    if request.scan_kind in ("scan-p", "bounds"):
        jobs = [(request, request.n, p) for p in request.p_values()]
        return POINT_COLUMNS, _map(_point, jobs, request.workers), {}
    if request.scan_kind == "engineer":
        row, _ = run_engineer(request)
        return ENGINEER_COLUMNS, [row], {}
    if request.scan_kind == "state-report":
        return state_report(request)
    raise ValueError(f"unknown scan kind {request.scan_kind!r}")


def engineering_config(request: ScanRequest) -> EngineeringConfig:
    return EngineeringConfig(
        m=request.m, dt=request.dt, restarts=request.restarts, seed=request.seed,
        max_iter=request.max_iter, tol=request.tol, generators=DEFAULT_GENERATORS,
        workers=request.workers,
    )


def run_engineer(request: ScanRequest):
    """Engineer controls that prepare the requested family from the coherent state."""
    start = time.perf_counter()
    N = request.n
    model = qfi.LossModel(request.pa, request.pb, request.tail_mass_cutoff)
    row: dict[str, Any] = {
        "scan_kind": "engineer", "N": N, "p_a": request.pa, "p_b": request.pb,
        "state_family": request.family, "m": request.m, "dt": request.dt,
        "restarts": request.restarts, "seed": request.seed,
    }
    result = target = None
    try:
        prepared = prepare_state(request.family, N, model, request.twist_grid, request.twist_objective)
        target = prepared.state
        if prepared.twist is not None:
            row.update(twist_chi=prepared.twist.chi, twist_theta=prepared.twist.theta)
        row["lift_k"] = prepared.lift_k
        result = optimize_controls(N, target, engineering_config(request))
        engineered = propagate(result.controls, coherent_state(N))
        bare = prepare_state("tact", N, model, request.twist_grid, request.twist_objective).state
        row.update(
            fidelity=result.fidelity,
            converged=result.converged,
            gradient_norm=result.gradient_norm,
            max_abs_coefficient=result.controls.max_abs_coefficient,
            f2_engineered=_f2(engineered, model),
            f2_target=_f2(target, model),
            f2_bare=_f2(bare, model),
            noisy_sql=qfi.noisy_sql(N, 1.0 - (1.0 - request.pa) * (1.0 - request.pb)),
            status="ok" if result.converged else "not converged",
        )
    except Exception as exc:
        log.warning("engineering failed: %s", exc)
        row["status"] = f"error: {exc}"
    row["wall_time"] = time.perf_counter() - start if request.timing else None
    return row, (result, target)


def state_report(request: ScanRequest):
    """Amplitude table of one prepared state with its figures of merit in the header."""
    N = request.n
    model = qfi.LossModel(request.pa, request.pb, request.tail_mass_cutoff)
    prepared = prepare_state(request.family, N, model, request.twist_grid, request.twist_objective)
    state = prepared.state
    extra: dict[str, Any] = {"qfi": qfi.qfi_pure(state), "lift_k": prepared.lift_k}
    if prepared.twist is not None:
        extra.update(twist_kind=prepared.twist.kind, twist_chi=prepared.twist.chi,
                     twist_theta=prepared.twist.theta)
    if "f2" in request.fom:
        extra["f2"] = _f2(state, model)
    if "f1" in request.fom:
        extra["f1"] = qfi.f1(state, model)
    if "bounds" in request.fom:
        p_eff = 1.0 - (1.0 - request.pa) * (1.0 - request.pb)
        extra.update(noisy_sql=qfi.noisy_sql(N, p_eff), noisy_hl=qfi.noisy_hl(N, p_eff),
                     lower_bound=qfi.lower_bound_n32(N, p_eff))
    for q in range(min(3, N) + 1):
        diag = qfi.moment_diagnostic(state, q)
        extra[f"moment_q{q}_exact"] = diag.exact_qfi
        extra[f"moment_q{q}_approx"] = diag.moment_approx
    rows = [
        {"n": n, "re": float(c.real), "im": float(c.imag), "probability": float(abs(c) ** 2)}
        for n, c in enumerate(state.amplitudes)
    ]
    return STATE_COLUMNS, rows, extra
