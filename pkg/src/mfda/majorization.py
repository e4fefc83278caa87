"""Quadratic majorizers of cosine terms and the BSUM sweeps over positions and frequencies.

Each term ``y(v) = cos(2 pi (v * a - b))`` of the correlation objective is
replaced, around the current point, by a tangent quadratic
``k (v - zeta)^2 + delta`` whose vertex ``zeta`` sits at the nearest cosine
minimum. For position updates ``v`` is the delay ``tau_m`` with coefficient
``a = f_m``; for frequency updates the roles of delay and frequency swap.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from mfda.beamforming import perfect_csi_capacity
from mfda.channel import cosine_sum, phases, tau_vector
from mfda.errors import DecouplingError, DegenerateCurvatureError, InvariantError

# |sin| below this counts as a stationary point of the cosine
STATIONARY_GUARD = 1e-9
# absolute slack on the cosine-sum objective for MM monotonicity checks
MONOTONE_SLACK = 1e-9


class Majorizer(NamedTuple):
    k: float
    zeta: float
    delta: float

    def __call__(self, v):
        return self.k * (np.asarray(v) - self.zeta) ** 2 + self.delta


@dataclass
class SolverOptions:
    """Tolerances and search steps shared by the BSUM, BCD and robust solvers.

    ``step_x`` / ``step_f`` default to ``lambda/20`` and ``delta_f/200`` of the
    array being optimized when left as ``None``.
    """

    tol: float = 1e-4
    max_sweeps: int = 200
    max_outer: int = 50
    step_x: Optional[float] = None
    step_f: Optional[float] = None
    randomization_draws: int = 200
    rank_one_ratio: float = 1e-6
    robust_max_outer: int = 30
    fw_temperatures: tuple = (10.0, 100.0, 1000.0)
    fw_max_iter: int = 400
    fw_gap_tol: float = 1e-9

    def __post_init__(self):
        if self.tol <= 0 or self.max_sweeps < 1 or self.max_outer < 1:
            raise ValueError("tol, max_sweeps and max_outer must be positive")
        for name in ("step_x", "step_f"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")

    def resolved_step_x(self, array):
        return self.step_x if self.step_x is not None else array.wavelength / 20

    def resolved_step_f(self, array):
        return self.step_f if self.step_f is not None else array.delta_f / 200


@dataclass
class SweepTrace:
    """Per-sweep rows ``(iteration, objective, capacity)`` plus per-step objectives."""

    rows: list = field(default_factory=list)
    step_objectives: list = field(default_factory=list)
    converged: bool = False
    skipped: bool = False
    fallback_steps: int = 0

    @property
    def iterations(self):
        return max(len(self.rows) - 1, 0)

    @property
    def objectives(self):
        return [r[1] for r in self.rows]

    @property
    def capacities(self):
        return [r[2] for r in self.rows]


def cosine_majorizer(tau_m, tau_n, f_m, f_n):
    """Tangent quadratic upper bound of ``cos(2 pi (v f_m - tau_n f_n))`` at ``v = tau_m``.

    Returns ``Majorizer(k, zeta, delta)``. When the cosine is not stationary
    the vertex is the nearest cosine minimum (floor branch for a rising
    cosine, ceil branch for a falling one when ``f_m > 0``). Stationary
    points, ``|sin| < STATIONARY_GUARD``, use the osculating quadratic
    ``k = -2 pi^2 f_m^2 y``, which has negative curvature at a maximum.
    """
    offset = tau_n * f_n
    p = tau_m * f_m - offset
    s = np.sin(2 * np.pi * p)
    y = np.cos(2 * np.pi * p)
    if abs(s) < STATIONARY_GUARD:
        y_sign = -1.0 if y < 0 else 1.0
        return Majorizer(k=-2 * np.pi**2 * f_m**2 * y_sign, zeta=tau_m, delta=y_sign)
    # the nearest cosine minimum lies ahead in phase while sin > 0
    p_min = np.ceil(2 * p) / 2 if s > 0 else np.floor(2 * p) / 2
    zeta = (p_min + offset) / f_m
    k = -np.pi * f_m * s / (tau_m - zeta)
    delta = y - k * (tau_m - zeta) ** 2
    return Majorizer(k=float(k), zeta=float(zeta), delta=float(delta))


def bsum_tau_update(majorizers):
    """Minimizer ``sum(k zeta) / sum(k)`` of a sum of quadratic majorizers."""
    k = np.array([mj.k for mj in majorizers], dtype=float)
    zeta = np.array([mj.zeta for mj in majorizers], dtype=float)
    ksum = k.sum()
    if not ksum > 0:
        raise DegenerateCurvatureError(f"summed curvature {ksum!r} is not positive")
    return float((k * zeta).sum() / ksum)


def position_window(m, array):
    """Feasible interval for antenna ``m`` (0-based) with its neighbours held fixed."""
    x = array.x
    if m == 0:
        return 0.0, 0.0
    lo = x[m - 1] + array.d0
    hi = array.upper_limit(m)
    if m + 1 < array.M:
        hi = min(hi, x[m + 1] - array.d0)
    return lo, hi


def clamp_position(tau_opt, m, x_prev, array, scenario):
    """Map an unconstrained delay optimum to a feasible position of antenna ``m``.

    ``x_raw = (tau_opt - (r_b - r_e)/c) * c / (sin(theta_e) - sin(theta_b))``
    is clipped to ``[x_prev + d0, D1]`` with ``D1 = d_max - (M - 1 - m) d0``,
    and additionally kept ``d0`` below the next antenna so the array stays
    ordered. Antenna 0 is pinned at the origin.
    """
    if m == 0:
        return 0.0
    ds = np.sin(scenario.theta_e) - np.sin(scenario.theta_b)
    if ds == 0.0:
        raise DecouplingError("sin(theta_e) == sin(theta_b): positions do not affect the delays")
    c = scenario.c
    x_raw = (tau_opt - (scenario.r_b - scenario.r_e) / c) * c / ds
    lo = x_prev + array.d0
    hi = array.upper_limit(m)
    if m + 1 < array.M:
        hi = min(hi, array.x[m + 1] - array.d0)
    if x_raw <= lo:
        return float(lo)
    if x_raw > hi:
        return float(max(hi, lo))
    return float(x_raw)


def _check_step(new_obj, old_obj, guaranteed, what):
    if guaranteed and new_obj > old_obj + MONOTONE_SLACK * max(1.0, abs(old_obj)):
        raise InvariantError(f"{what}: majorized step increased the objective {old_obj!r} -> {new_obj!r}")


def _best_of(candidates, evaluate, current_value):
    """Pick the candidate with the lowest objective; ties keep the first (current) one."""
    best_v, best_obj = candidates[0], current_value
    for v in candidates[1:]:
        obj = evaluate(v)
        if obj < best_obj:
            best_v, best_obj = v, obj
    return best_v, best_obj


def _capacity(array, scenario, capacity_fn):
    return capacity_fn(array, scenario) if capacity_fn is not None else perfect_csi_capacity(array, scenario)


def bsum_sweep_positions(array, scenario, opts=None, capacity_fn=None):
    """Cyclic BSUM over antenna positions, returning ``(array, SweepTrace)``.

    One sweep updates antennas ``1..M-1`` in ascending order (antenna 0 is
    pinned at the origin). Sweeps stop once the secrecy capacity changes by
    at most ``opts.tol`` bits, or after ``opts.max_sweeps``.
    """
    opts = opts or SolverOptions()
    M = array.M
    p = phases(array, scenario)
    obj = cosine_sum(p)
    cap = _capacity(array, scenario, capacity_fn)
    trace = SweepTrace(rows=[(0, obj, cap)], step_objectives=[obj])
    ds = np.sin(scenario.theta_e) - np.sin(scenario.theta_b)
    if M <= 1 or ds == 0.0:
        trace.skipped = True
        trace.converged = True
        return array, trace

    c = scenario.c
    range_term = (scenario.r_b - scenario.r_e) / c
    x = array.x.copy()
    f = array.f
    for sweep in range(1, opts.max_sweeps + 1):
        for m in range(1, M):
            cur = array.with_positions(x)
            tau = x * (ds / c) + range_term
            others = [n for n in range(M) if n != m]
            majorizers = [cosine_majorizer(tau[m], tau[n], f[m], f[n]) for n in others]
            guaranteed = all(mj.k > 0 for mj in majorizers)

            def evaluate(xm):
                trial = x.copy()
                trial[m] = xm
                return cosine_sum(f * (trial * (ds / c) + range_term))

            lo, hi = position_window(m, cur)
            try:
                tau_opt = bsum_tau_update(majorizers)
                x_new = clamp_position(tau_opt, m, x[m - 1], cur, scenario)
                new_obj = evaluate(x_new)
            except DegenerateCurvatureError:
                guaranteed = False
                x_new, new_obj = x[m], obj
            if not guaranteed and new_obj > obj:
                trace.fallback_steps += 1
                x_new, new_obj = _best_of([x[m], lo, max(hi, lo), x_new], evaluate, obj)
            _check_step(new_obj, obj, guaranteed, f"position step m={m}")
            if new_obj > obj:
                # within rounding slack; keep the incumbent
                x_new, new_obj = x[m], obj
            x[m] = x_new
            obj = new_obj
            trace.step_objectives.append(obj)
        array = array.with_positions(x)
        new_cap = _capacity(array, scenario, capacity_fn)
        trace.rows.append((sweep, obj, new_cap))
        if abs(new_cap - cap) <= opts.tol:
            trace.converged = True
            break
        cap = new_cap
    return array, trace


def bsum_sweep_frequencies(array, scenario, opts=None, capacity_fn=None):
    """Cyclic BSUM over antenna frequencies, returning ``(array, SweepTrace)``.

    Same structure as :func:`bsum_sweep_positions` with the delays fixed and
    the majorizers built in the frequency variable. The unconstrained optimum
    is clipped to ``[f_c, f_c + delta_f]``. Antennas with zero delay have no
    influence and are skipped; if every delay is zero the array is returned
    unchanged with ``trace.skipped`` set.
    """
    opts = opts or SolverOptions()
    M = array.M
    tau = tau_vector(array, scenario)
    f = array.f.copy()
    obj = cosine_sum(f * tau)
    cap = _capacity(array, scenario, capacity_fn)
    trace = SweepTrace(rows=[(0, obj, cap)], step_objectives=[obj])
    # a delay this small rotates the phase by < 1e-12 cycles over the whole band
    active = np.abs(tau) * (array.f_c + array.delta_f) > 1e-12
    if M <= 1 or not active.any() or array.delta_f == 0:
        trace.skipped = True
        trace.converged = True
        return array, trace

    f_lo, f_hi = array.f_c, array.f_c + array.delta_f
    for sweep in range(1, opts.max_sweeps + 1):
        for m in range(M):
            if not active[m]:
                continue
            others = [n for n in range(M) if n != m]
            majorizers = [cosine_majorizer(f[m], f[n], tau[m], tau[n]) for n in others]
            guaranteed = all(mj.k > 0 for mj in majorizers)

            def evaluate(fm):
                trial = f.copy()
                trial[m] = fm
                return cosine_sum(trial * tau)

            try:
                f_opt = bsum_tau_update(majorizers)
                f_new = clamp_frequency(f_opt, array)
                new_obj = evaluate(f_new)
            except DegenerateCurvatureError:
                guaranteed = False
                f_new, new_obj = f[m], obj
            if not guaranteed and new_obj > obj:
                trace.fallback_steps += 1
                f_new, new_obj = _best_of([f[m], f_lo, f_hi, f_new], evaluate, obj)
            _check_step(new_obj, obj, guaranteed, f"frequency step m={m}")
            if new_obj > obj:
                f_new, new_obj = f[m], obj
            f[m] = f_new
            obj = new_obj
            trace.step_objectives.append(obj)
        array = array.with_frequencies(f)
        new_cap = _capacity(array, scenario, capacity_fn)
        trace.rows.append((sweep, obj, new_cap))
        if abs(new_cap - cap) <= opts.tol:
            trace.converged = True
            break
        cap = new_cap
    return array, trace


def clamp_frequency(f_opt, array):
    """Clip a frequency to the band ``[f_c, f_c + delta_f]``."""
    return float(min(max(f_opt, array.f_c), array.f_c + array.delta_f))


__all__ = [
    "Majorizer",
    "SolverOptions",
    "SweepTrace",
    "bsum_sweep_frequencies",
    "bsum_sweep_positions",
    "bsum_tau_update",
    "clamp_frequency",
    "clamp_position",
    "cosine_majorizer",
    "position_window",
]
