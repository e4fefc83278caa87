"""Two-stage alternating optimization, benchmark schemes and refresh-rate averaging."""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from mfda.beamforming import (
    Beamformer,
    optimal_abv,
    perfect_csi_capacity,
    secrecy_capacity_instant,
    upper_bound,
)
from mfda.channel import channel_matrices, frequency_ramp, half_wavelength_array
from mfda.errors import MFDAError, ValidationError
from mfda.majorization import SolverOptions, bsum_sweep_frequencies, bsum_sweep_positions
from mfda.robust import (
    bcd_line_search_frequencies,
    bcd_line_search_positions,
    robust_abv_solve,
    sample_channel_matrices,
    worst_case_proxy_capacity,
    worst_case_rate,
)


class Kind(str, Enum):
    PA = "PA"
    FDA = "FDA"
    MFDA = "MFDA"


class CSI(str, Enum):
    PERFECT = "perfect"
    IMPERFECT = "imperfect"


@dataclass(frozen=True)
class SchemeSpec:
    kind: Kind
    csi: CSI = CSI.PERFECT

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "csi", CSI(self.csi))

    @property
    def optimizes_frequencies(self):
        return self.kind in (Kind.FDA, Kind.MFDA)

    @property
    def optimizes_positions(self):
        return self.kind is Kind.MFDA


@dataclass(frozen=True)
class TimingGrid:
    """Transmission window ``T`` split into ``K`` beamformer and ``L`` channel refreshes."""

    T: float
    dt_brf: float
    dt_crf: float

    def __post_init__(self):
        if min(self.T, self.dt_brf, self.dt_crf) <= 0:
            raise ValidationError("T and refresh periods must be positive")
        for name, n in (("K", self.T / self.dt_brf), ("L", self.T / self.dt_crf)):
            if abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
                raise ValidationError(f"{name} = T / period = {n!r} must be a positive integer")

    @classmethod
    def from_rates(cls, T, brf_hz, crf_hz):
        return cls(T=T, dt_brf=1.0 / brf_hz, dt_crf=1.0 / crf_hz)

    @property
    def K(self):
        return int(round(self.T / self.dt_brf))

    @property
    def L(self):
        return int(round(self.T / self.dt_crf))

    def beamformer_times(self):
        return np.arange(self.K) * (self.T / self.K)

    def channel_times(self):
        return np.arange(self.L) * (self.T / self.L)

    def latest_refresh(self):
        """Index of the most recent beamformer refresh at or before each channel instant."""
        l = np.arange(self.L)
        return np.minimum((l * self.K) // self.L, self.K - 1)


@dataclass
class Solution:
    scheme: SchemeSpec
    array: object
    beamformer: Beamformer
    capacity: float
    traces: dict = field(default_factory=dict)
    iterations_stage1: int = 0
    iterations_stage2: int = 0
    outer_capacities: list = field(default_factory=list)
    grid: Optional[object] = None


def initial_array(scheme, template):
    """Starting geometry: half-wavelength spacing; FDA/MFDA use the linear frequency ramp."""
    M = template.M
    f = frequency_ramp(M, template.f_c, template.delta_f) if scheme.optimizes_frequencies else None
    return half_wavelength_array(M, f_c=template.f_c, delta_f=template.delta_f, d0=template.d0,
                                 d_max=template.d_max, f=f)


def _stage_error(stage, exc):
    err = type(exc)(f"[{stage}] {exc}") if isinstance(exc, MFDAError) else MFDAError(f"[{stage}] {exc}")
    return err


def two_stage_ao(scenario, scheme, opts=None, grid=None, array=None, template=None, rng_seed=0,
                 robust_init=None):
    """Optimize frequencies/positions (stage 1) then the beamformer (stage 2).

    Stage 1 alternates frequency and position blocks, frequencies first, until
    the capacity metric changes by at most ``opts.tol`` bits. Perfect CSI uses
    BSUM sweeps and the closed-form capacity; imperfect CSI uses worst-case
    BCD line searches over ``grid``. PA skips stage 1. ``array`` gives the
    starting point; otherwise it is built from ``template`` with
    :func:`initial_array`.
    """
    opts = opts or SolverOptions()
    scheme = scheme if isinstance(scheme, SchemeSpec) else SchemeSpec(*scheme)
    imperfect = scheme.csi is CSI.IMPERFECT
    if imperfect and grid is None:
        raise ValidationError("imperfect CSI requires an uncertainty grid")
    if not imperfect and grid is not None:
        raise ValidationError("an uncertainty grid is only meaningful with imperfect CSI")
    if array is None:
        if template is None:
            raise ValidationError("give either a starting array or a template")
        array = initial_array(scheme, template)

    if imperfect:
        metric = lambda a: worst_case_proxy_capacity(a, scenario, grid)  # noqa: E731
        sweep_f = lambda a: bcd_line_search_frequencies(a, scenario, grid, opts)  # noqa: E731
        sweep_x = lambda a: bcd_line_search_positions(a, scenario, grid, opts)  # noqa: E731
    else:
        metric = lambda a: perfect_csi_capacity(a, scenario)  # noqa: E731
        sweep_f = lambda a: bsum_sweep_frequencies(a, scenario, opts)  # noqa: E731
        sweep_x = lambda a: bsum_sweep_positions(a, scenario, opts)  # noqa: E731

    traces = {"frequency": [], "position": []}
    cap = metric(array)
    outer = [cap]
    stage1 = 0
    blocks = []
    if scheme.optimizes_positions:
        blocks.append(("position", sweep_x))
    if scheme.optimizes_frequencies:
        blocks.append(("frequency", sweep_f))
    # one block needs no alternation; its sweep already runs to convergence
    max_outer = opts.max_outer if len(blocks) > 1 else 1
    try:
        for _ in range(max_outer if blocks else 0):
            for name, sweep in blocks:
                array, tr = sweep(array)
                traces[name].append(tr)
                stage1 += tr.iterations
            new_cap = metric(array)
            outer.append(new_cap)
            if abs(new_cap - cap) <= opts.tol:
                cap = new_cap
                break
            cap = new_cap
    except MFDAError as exc:
        raise _stage_error("stage 1", exc) from exc

    try:
        if imperfect:
            A, Bs = sample_channel_matrices(0.0, array, scenario, grid)
            res = robust_abv_solve(A, Bs, scenario.p_max, opts, rng_seed=rng_seed, init=robust_init)
            bf = res.beamformer
            capacity = worst_case_rate(bf.w, A, Bs)
            traces["beamformer"] = res.trace
            stage2 = res.iterations
        else:
            pair = channel_matrices(0.0, array, scenario)
            bf = optimal_abv(pair, scenario.p_max)
            capacity = secrecy_capacity_instant(bf, pair)
            stage2 = 1
    except MFDAError as exc:
        raise _stage_error("stage 2", exc) from exc

    return Solution(
        scheme=scheme,
        array=array,
        beamformer=bf,
        capacity=capacity,
        traces=traces,
        iterations_stage1=stage1,
        iterations_stage2=stage2,
        outer_capacities=outer,
        grid=grid,
    )


def _rotation(array, t):
    """Per-antenna phase evolution ``exp(-j 2 pi f_m t)``."""
    return np.exp(-2j * np.pi * array.f * t)


def refreshed_beamformers(solution, scenario, times):
    """Beamformer at each refresh instant.

    Perfect CSI re-solves the closed form at every instant. The robust
    beamformer is propagated by the channel's own diagonal phase rotation,
    which maps the problem at ``t = 0`` onto the one at ``t`` exactly.
    """
    ws = []
    for t in times:
        if solution.scheme.csi is CSI.PERFECT:
            ws.append(optimal_abv(channel_matrices(t, solution.array, scenario), scenario.p_max).w)
        else:
            ws.append(_rotation(solution.array, t) * solution.beamformer.w)
    return np.array(ws)


def time_avg_secrecy_capacity(solution, scenario, timing, pairing="causal"):
    """Secrecy capacity (bits) averaged over the channel refresh instants.

    ``pairing="causal"`` pairs each channel instant with the most recent
    beamformer refresh. ``pairing="double_sum"`` averages over every
    (channel instant, beamformer) pair instead.
    """
    if pairing not in ("causal", "double_sum"):
        raise ValidationError(f"unknown pairing {pairing!r}")
    array = solution.array
    t_c = timing.channel_times()
    t_w = timing.beamformer_times()
    W = refreshed_beamformers(solution, scenario, t_w)
    pair0 = channel_matrices(0.0, array, scenario)
    # h(t) = D(t) h(0) with D diagonal, so w^H A(t) w = |h(t)^H w|^2 / sigma^2
    rot = np.exp(-2j * np.pi * np.outer(t_c, array.f))  # (L, M)
    hb = rot * pair0.h_ab[None, :]
    he = rot * pair0.h_ae[None, :]
    if pairing == "causal":
        Wl = W[timing.latest_refresh()]  # (L, M)
        gb = np.abs(np.einsum("lm,lm->l", hb.conj(), Wl)) ** 2 / scenario.sigma2_b
        ge = np.abs(np.einsum("lm,lm->l", he.conj(), Wl)) ** 2 / scenario.sigma2_e
    else:
        gb = np.abs(hb.conj() @ W.T) ** 2 / scenario.sigma2_b
        ge = np.abs(he.conj() @ W.T) ** 2 / scenario.sigma2_e
    return float(np.mean(np.log2((1 + gb) / (1 + ge))))


def ideal_timing(timing):
    """Same window with the beamformer refreshed at every channel instant."""
    return TimingGrid(T=timing.T, dt_brf=timing.dt_crf, dt_crf=timing.dt_crf)


@dataclass
class SchemeReport:
    scheme: str
    csi: str
    capacity: float
    ideal_capacity: float
    upper_bound: float
    iterations_stage1: int
    iterations_stage2: int
    wall_ms: float
    status: str = "ok"
    solution: Optional[Solution] = field(default=None, repr=False)


def run_scheme(scheme, scenario, template, opts=None, timing=None, grid=None, rng_seed=0,
               pairing="causal", start=None):
    """Solve one scheme and summarize it as a comparable record.

    Without ``timing`` the capacity is the instantaneous optimum at ``t = 0``
    (worst case over ``grid`` for imperfect CSI). With ``timing`` it is the
    refresh-limited time average and ``ideal_capacity`` the average with the
    beamformer refreshed at every channel instant.
    """
    scheme = scheme if isinstance(scheme, SchemeSpec) else SchemeSpec(*scheme)
    t0 = time.perf_counter()
    sol = two_stage_ao(scenario, scheme, opts, grid=grid, template=template, rng_seed=rng_seed)
    if timing is None:
        cap = ideal = sol.capacity
    else:
        cap = time_avg_secrecy_capacity(sol, scenario, timing, pairing)
        ideal = time_avg_secrecy_capacity(sol, scenario, ideal_timing(timing), pairing)
    wall = (time.perf_counter() - t0) * 1e3
    return SchemeReport(
        scheme=scheme.kind.value,
        csi=scheme.csi.value,
        capacity=max(cap, 0.0),
        ideal_capacity=max(ideal, 0.0),
        upper_bound=upper_bound(template.M, scenario),
        iterations_stage1=sol.iterations_stage1,
        iterations_stage2=sol.iterations_stage2,
        wall_ms=wall,
        solution=sol,
    )
