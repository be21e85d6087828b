"""Parameter sweeps behind the command line: region diagrams, delta_omega_min(L)
scaling, boundary tracing and engine comparisons.

Every function returns plain rows (lists of dicts) in a fixed order, so a
sweep gives the same table whether it runs serially or on a worker pool.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import CapacityError, DegeneracyError, InvalidInputError, IsingQCError
from .exact import EXACT_LIMIT, run_protocol_exact
from .model import SpinSystem
from .perturb.estimator import budget_for_plan
from .perturb.improved import DEFAULT_FLOOR, run_protocol_improved
from .protocol import evaluate_outcome, generate_protocol
from .twolevel import rabi_2pik

ENGINES = ("exact", "twolevel", "estimator", "improved")
DEFAULT_THRESHOLD = 1e-5
DEFAULT_OMEGA0 = 100.0


@dataclass(frozen=True)
class PointResult:
    engine: str
    L: int
    delta_omega: float
    omega: float
    P: float
    phi1: float = math.nan
    phi2: float = math.nan
    pruned_mass: float = 0.0
    error: str = ""


def _check_engine(engine: str, L: int):
    if engine not in ENGINES:
        raise InvalidInputError(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")
    if engine == "exact" and L > EXACT_LIMIT:
        raise CapacityError(f"exact engine is limited to L <= {EXACT_LIMIT} (got L={L})")


def run_point(engine: str, L: int, delta_omega: float, omega: Optional[float] = None,
              k_2pik: Optional[int] = None, omega0: float = DEFAULT_OMEGA0,
              truncation_floor: float = DEFAULT_FLOOR, return_state: bool = False):
    """Run the entanglement protocol once and evaluate it.

    Returns a :class:`PointResult`; with ``return_state`` the final
    amplitudes (or the error budget, for the estimator) come back as well.
    """
    _check_engine(engine, L)
    system = SpinSystem(L, delta_omega, omega0=omega0)
    plan = generate_protocol(system, omega, k_2pik)
    if engine == "estimator":
        budget = budget_for_plan(plan)
        res = PointResult(engine, L, delta_omega, plan.omega_rabi, budget.total_P)
        return (res, budget) if return_state else res
    if engine == "exact":
        final, _ = run_protocol_exact(system, plan.pulses)
    else:
        order = "improved" if engine == "improved" else "twolevel"
        final = run_protocol_improved(system, plan.pulses, truncation_floor=truncation_floor,
                                      spins=plan.spins, order=order)
    out = evaluate_outcome(final, plan)
    res = PointResult(engine, L, delta_omega, plan.omega_rabi, out.P, out.phi1, out.phi2,
                      final.pruned_mass)
    return (res, final) if return_state else res


def _safe_point(args) -> PointResult:
    engine, L, dw, om, kwargs = args
    try:
        return run_point(engine, L, dw, om, **kwargs)
    except IsingQCError as exc:
        return PointResult(engine, L, dw, om, math.nan, error=f"{type(exc).__name__}: {exc}")


def _map(func: Callable, items: Sequence, workers: int) -> list:
    """Ordered map, on a process pool when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# -- region diagrams -------------------------------------------------------------

@dataclass
class SweepSpec:
    L: int
    engine: str = "estimator"
    omega_grid: Tuple[float, float, int] = (0.5, 1.5, 11)
    delta_omega_grid: Tuple[float, float, int] = (100.0, 1000.0, 10)
    threshold: float = DEFAULT_THRESHOLD
    k_2pik: Optional[int] = None
    omega0: float = DEFAULT_OMEGA0
    truncation_floor: float = DEFAULT_FLOOR
    log_delta_omega: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        _check_engine(self.engine, self.L)
        for name in ("omega_grid", "delta_omega_grid"):
            lo, hi, n = getattr(self, name)
            if int(n) < 1 or lo <= 0 or hi < lo:
                raise InvalidInputError(f"{name} must be (start > 0, stop >= start, count >= 1)")
        if self.threshold <= 0:
            raise InvalidInputError("threshold must be positive")

    def omegas(self) -> np.ndarray:
        lo, hi, n = self.omega_grid
        return np.linspace(lo, hi, int(n))

    def delta_omegas(self) -> np.ndarray:
        lo, hi, n = self.delta_omega_grid
        if self.log_delta_omega:
            return np.geomspace(lo, hi, int(n))
        return np.linspace(lo, hi, int(n))


def region_diagram(spec: SweepSpec, workers: int = 1) -> List[dict]:
    """P on the (delta_omega, Omega) grid with a below-threshold flag per point.

    Rows run over delta_omega (outer) and Omega (inner).  A point whose engine
    fails reports P = nan and the error text instead of aborting the sweep.
    """
    kwargs = {"omega0": spec.omega0, "truncation_floor": spec.truncation_floor}
    items = [(spec.engine, spec.L, float(dw), float(om), kwargs)
             for dw in spec.delta_omegas() for om in spec.omegas()]
    rows = []
    for res in _map(_safe_point, items, workers):
        rows.append({"delta_omega": res.delta_omega, "omega": res.omega, "P": res.P,
                     "below_threshold": bool(res.P < spec.threshold), "error": res.error})
    return rows


# -- scaling --------------------------------------------------------------------

def estimator_P(L: int, delta_omega: float, omega: Optional[float] = None, k_2pik: Optional[int] = None,
                omega0: float = DEFAULT_OMEGA0) -> float:
    plan = generate_protocol(SpinSystem(L, delta_omega, omega0=omega0), omega, k_2pik)
    return budget_for_plan(plan).total_P


def min_delta_omega(L: int, k_2pik: int, threshold: float = DEFAULT_THRESHOLD,
                    bracket: Tuple[float, float] = (2.0, 1e6), rtol: float = 1e-3,
                    omega0: float = DEFAULT_OMEGA0, engine: str = "estimator",
                    truncation_floor: float = DEFAULT_FLOOR) -> float:
    """Smallest delta_omega with P <= threshold at Omega = Omega^(k)(2J).

    Bisection in log(delta_omega); the upper end of the bracket is expanded
    geometrically when needed.  Raises :class:`InvalidInputError` when no
    root exists (the threshold is unreachable even at huge delta_omega).
    """
    if k_2pik is None or k_2pik < 1:
        raise InvalidInputError("k_2pik must be a positive integer")
    _check_engine(engine, L)
    lo, hi = bracket

    def ok(dw):
        if engine == "estimator":
            return estimator_P(L, dw, k_2pik=k_2pik, omega0=omega0) <= threshold
        try:
            return run_point(engine, L, dw, k_2pik=k_2pik, omega0=omega0,
                             truncation_floor=truncation_floor).P <= threshold
        except DegeneracyError:
            # delta_omega so small that levels cross: outside the perturbative regime
            return False

    if ok(lo):
        return lo
    for _ in range(40):
        if ok(hi):
            break
        lo, hi = hi, hi * 10
    else:
        raise InvalidInputError(f"no delta_omega up to {hi:.3g} brings P below {threshold:g} at L={L}")
    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def scaling_curve(L_list: Sequence[int], k_2pik: int, threshold: float = DEFAULT_THRESHOLD,
                  workers: int = 1, **kwargs) -> List[dict]:
    """Rows of (L, delta_omega_min); a failed root search is reported per L."""
    items = [(int(L), k_2pik, threshold, kwargs) for L in L_list]
    return _map(_scaling_row, items, workers)


def _scaling_row(args) -> dict:
    L, k, threshold, kwargs = args
    try:
        return {"L": L, "delta_omega_min": min_delta_omega(L, k, threshold, **kwargs), "error": ""}
    except IsingQCError as exc:
        return {"L": L, "delta_omega_min": math.nan, "error": str(exc)}


def max_chain_length(k_2pik: int, delta_omega: float = 1000.0, threshold: float = DEFAULT_THRESHOLD,
                     omega0: float = DEFAULT_OMEGA0, L_cap: int = 100_000) -> int:
    """Largest L whose estimator P at (delta_omega, Omega^(k)) stays below threshold.

    Equivalent to the largest L with delta_omega_min(L) <= delta_omega, since
    P falls monotonically with delta_omega.  Returns 0 if even L=3 fails.
    """
    def ok(L):
        return estimator_P(L, delta_omega, k_2pik=k_2pik, omega0=omega0) <= threshold

    if not ok(3):
        return 0
    lo, hi = 3, 6
    while ok(hi):
        lo, hi = hi, hi * 2
        if hi > L_cap:
            raise InvalidInputError(f"P stays below threshold beyond L={L_cap}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- boundaries and comparisons ---------------------------------------------------------

def _engine_P(engine: str, L: int, omega0: float, truncation_floor: float) -> Callable[[float, float], float]:
    def f(delta_omega, omega):
        return run_point(engine, L, delta_omega, omega, omega0=omega0,
                         truncation_floor=truncation_floor).P
    return f


def boundary_omega(engine: str, L: int, delta_omega: float, k_2pik: int, side: str = "upper",
                   threshold: float = DEFAULT_THRESHOLD, omega0: float = DEFAULT_OMEGA0,
                   truncation_floor: float = DEFAULT_FLOOR, xtol: float = 1e-10) -> float:
    """Omega on the P = threshold boundary next to Omega^(k), at fixed delta_omega.

    ``side='upper'`` searches between Omega^(k) and the Rabi frequency at
    which the ground-branch block completes k - 1/2 cycles (where epsilon
    peaks); ``'lower'`` searches towards k + 1/2 cycles.
    """
    if side not in ("upper", "lower"):
        raise InvalidInputError("side must be 'upper' or 'lower'")
    center = rabi_2pik(2.0, k_2pik)
    cycles = k_2pik - 0.5 if side == "upper" else k_2pik + 0.5
    edge = 2.0 / math.sqrt(4 * cycles**2 - 1) if cycles > 0.5 else 3.0 * center
    f = _engine_P(engine, L, omega0, truncation_floor)
    g = lambda om: f(delta_omega, om) - threshold  # noqa: E731
    if g(center) >= 0:
        raise InvalidInputError(
            f"P >= threshold already at Omega^({k_2pik}) for delta_omega={delta_omega:g}; "
            "the point lies below the region")
    if g(edge) <= 0:
        raise InvalidInputError(f"P stays below threshold up to Omega={edge:.6g}")
    a, b = (center, edge) if center < edge else (edge, center)
    return brentq(g, a, b, xtol=xtol)


def trace_boundary(engine: str, L: int, k_2pik: int, delta_omegas: Sequence[float], side: str = "upper",
                   threshold: float = DEFAULT_THRESHOLD, workers: int = 1, **kwargs) -> List[Tuple[float, float]]:
    """(delta_omega, Omega) points of an engine's P = threshold boundary."""
    items = [(engine, L, float(dw), k_2pik, side, threshold, kwargs) for dw in delta_omegas]
    return [(dw, om) for dw, om in zip(delta_omegas, _map(_boundary_point, items, workers))]


def _boundary_point(args) -> float:
    engine, L, dw, k, side, threshold, kwargs = args
    return boundary_omega(engine, L, dw, k, side, threshold, **kwargs)


def compare_engines(L: int, path: Sequence[Tuple[float, float]], engines: Sequence[str] = ("exact", "estimator", "improved"),
                    omega0: float = DEFAULT_OMEGA0, truncation_floor: float = DEFAULT_FLOOR,
                    workers: int = 1) -> List[dict]:
    """P from each engine at every (delta_omega, Omega) of ``path``."""
    if "exact" in engines and L > EXACT_LIMIT:
        raise CapacityError(f"engine comparison includes the exact engine, limited to L <= {EXACT_LIMIT}")
    kwargs = {"omega0": omega0, "truncation_floor": truncation_floor}
    items = [(e, L, float(dw), float(om), kwargs) for dw, om in path for e in engines]
    results = _map(_safe_point, items, workers)
    rows = []
    for i, (dw, om) in enumerate(path):
        row = {"point": i, "delta_omega": float(dw), "omega": float(om)}
        for j, e in enumerate(engines):
            res = results[i * len(engines) + j]
            row[f"P_{e}"] = res.P
            if res.error:
                row[f"error_{e}"] = res.error
        rows.append(row)
    return rows


def point_dict(res: PointResult) -> Dict[str, object]:
    return asdict(res)
