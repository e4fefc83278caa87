"""Imperfect Eve CSI: uncertainty grids, worst-case BCD line searches and the SDR beamformer.

The beamformer stage maximizes the worst-case secrecy rate over a finite set
of Eve samples. The rank-1 constraint on ``W = w w^H`` is relaxed, the Eve
log-terms are linearized with the Fenchel bound
``ln v = min_{u>0} (u v - ln u - 1)``, and the resulting concave problem is
solved by a Frank-Wolfe method over ``{W >= 0, tr W <= P}``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from mfda.beamforming import Beamformer, lambda_max_from_alpha2, optimal_abv
from mfda.channel import ChannelPair, EveSample, channel_matrices, path_loss_power
from mfda.errors import InfeasibleGeometryError, NumericalError, ValidationError
from mfda.majorization import SolverOptions, SweepTrace, position_window
from mfda.numerics import fix_phase, leading_eigpair

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class UncertaintyGrid:
    delta_r: float
    delta_theta: float
    Y: int
    Z: int
    samples: np.ndarray  # (Y*Z, 2) rows of (r_y, theta_z), y-major

    def __len__(self):
        return int(self.samples.shape[0])

    def sample(self, i):
        r, th = self.samples[i]
        return EveSample(float(r), float(th))

    def __iter__(self):
        return (self.sample(i) for i in range(len(self)))


def _axis(center, half_width, count):
    if count == 1:
        return np.array([center])
    return center - half_width + np.arange(count) * (2 * half_width / (count - 1))


def build_grid(scenario, delta_r, delta_theta, Y, Z):
    """Uniform ``Y x Z`` grid over ``[r_e +- delta_r] x [theta_e +- delta_theta]``."""
    if Y < 1 or Z < 1:
        raise ValidationError("Y and Z must be at least 1")
    if delta_r < 0 or delta_theta < 0:
        raise ValidationError("uncertainty half-widths must be non-negative")
    if delta_r >= scenario.r_e:
        raise ValidationError(f"delta_r={delta_r!r} >= r_e={scenario.r_e!r} gives non-positive ranges")
    if abs(scenario.theta_e) + delta_theta >= np.pi / 2:
        raise ValidationError("angle uncertainty reaches endfire (|theta| >= pi/2)")
    r = _axis(scenario.r_e, delta_r, Y)
    th = _axis(scenario.theta_e, delta_theta, Z)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    samples = np.column_stack([rr.ravel(), tt.ravel()])
    return UncertaintyGrid(delta_r=delta_r, delta_theta=delta_theta, Y=Y, Z=Z, samples=samples)


def _sample_phases(x, f, scenario, grid):
    """Phases ``f_m tau_{m,s}`` in cycles reduced to ``[0, 1)``, shape ``(S, M)``.

    Extended precision as in ``channel.phases``.
    """
    ld = np.longdouble
    r = grid.samples[:, 0].astype(ld)
    th = grid.samples[:, 1].astype(ld)
    c = ld(scenario.c)
    ds = (np.sin(th) - np.sin(ld(scenario.theta_b))) / c
    tau = ds[:, None] * x.astype(ld)[None, :] + ((ld(scenario.r_b) - r) / c)[:, None]
    return np.mod(f.astype(ld)[None, :] * tau, 1).astype(float)


def sample_inner_products(array, scenario, grid):
    """Squared correlation ``|sum_m exp(j 2 pi f_m tau_{m,s})|^2`` for every sample."""
    ph = _sample_phases(array.x, array.f, scenario, grid)
    return np.abs(np.exp(2j * np.pi * ph).sum(axis=1)) ** 2


def worst_case_inner_product_sq(array, scenario, grid):
    """Largest squared correlation over the grid and the sample attaining it.

    Ties resolve to the lowest flat index (y-major order).
    """
    vals = sample_inner_products(array, scenario, grid)
    i = int(np.argmax(vals))
    return float(vals[i]), grid.sample(i)


def worst_case_proxy_capacity(array, scenario, grid):
    """Closed-form capacity against the single most correlated sample (bits).

    Used as the stopping metric of the BCD searches: it is a monotone function
    of the worst-case correlation when the grid shares one range.
    """
    ip, sample = worst_case_inner_product_sq(array, scenario, grid)
    M = array.M
    g_b = path_loss_power(scenario.r_b, "bob", scenario)
    g_e = path_loss_power(sample.r, "eve", scenario)
    lam = lambda_max_from_alpha2(
        alpha2=g_b * ip / (scenario.sigma2_b * M),
        norm_ab2=g_b * M,
        norm_ae2=g_e * M,
        sigma2_b=scenario.sigma2_b,
        sigma2_e=scenario.sigma2_e,
        p_max=scenario.p_max,
    )
    return float(np.log2(lam))


def _worst_over_candidates(rest, ph_m):
    """``max_s |rest_s + exp(j 2 pi ph_m[c, s])|^2`` for each candidate row ``c``."""
    vals = np.abs(rest[None, :] + np.exp(2j * np.pi * ph_m)) ** 2
    return vals.max(axis=1)


def _line_search_pick(candidates, worst):
    """Index of the best candidate; candidate 0 (the incumbent) wins ties."""
    best = int(np.argmin(worst))
    if worst[best] >= worst[0]:
        return 0
    return best


def bcd_line_search_positions(array, scenario, grid, opts=None):
    """Cyclic per-antenna grid search of positions minimizing the worst-case correlation.

    Antenna ``m`` is searched on ``lo + k * step_x`` over its feasible window
    (neighbours fixed), plus the window end and its current position. Windows
    narrower than ``step_x`` leave the antenna where it is.
    """
    opts = opts or SolverOptions()
    step = opts.resolved_step_x(array)
    if step <= 0:
        raise ValidationError("position step must be positive")
    M = array.M
    x = array.x.copy()
    f = array.f
    obj, _ = worst_case_inner_product_sq(array, scenario, grid)
    cap = worst_case_proxy_capacity(array, scenario, grid)
    trace = SweepTrace(rows=[(0, obj, cap)], step_objectives=[obj])
    if M <= 1:
        trace.skipped = trace.converged = True
        return array, trace

    r = grid.samples[:, 0]
    th = grid.samples[:, 1]
    c = scenario.c
    ds = (np.sin(th) - np.sin(scenario.theta_b)) / c
    range_term = (scenario.r_b - r) / c
    for sweep in range(1, opts.max_sweeps + 1):
        for m in range(1, M):
            lo, hi = position_window(m, array.with_positions(x))
            if hi < lo - 1e-12 * array.d_max:
                raise InfeasibleGeometryError(f"empty position window for antenna {m}: [{lo!r}, {hi!r}]")
            if hi - lo < step:
                trace.step_objectives.append(obj)
                continue
            n = int(np.floor((hi - lo) / step)) + 1
            grid_x = lo + step * np.arange(n)
            cands = np.concatenate([[x[m]], grid_x, [hi]])
            ph_all = f[None, :] * (ds[:, None] * x[None, :] + range_term[:, None])
            e_all = np.exp(2j * np.pi * ph_all)
            rest = e_all.sum(axis=1) - e_all[:, m]
            ph_m = f[m] * (cands[:, None] * ds[None, :] + range_term[None, :])
            worst = _worst_over_candidates(rest, ph_m)
            pick = _line_search_pick(cands, worst)
            x[m] = cands[pick]
            obj = float(worst[pick])
            trace.step_objectives.append(obj)
        array = array.with_positions(x)
        new_cap = worst_case_proxy_capacity(array, scenario, grid)
        trace.rows.append((sweep, obj, new_cap))
        if abs(new_cap - cap) <= opts.tol:
            trace.converged = True
            break
        cap = new_cap
    return array, trace


def bcd_line_search_frequencies(array, scenario, grid, opts=None):
    """Cyclic per-antenna grid search of frequencies over ``[f_c, f_c + delta_f]``."""
    opts = opts or SolverOptions()
    step = opts.resolved_step_f(array)
    M = array.M
    f = array.f.copy()
    x = array.x
    obj, _ = worst_case_inner_product_sq(array, scenario, grid)
    cap = worst_case_proxy_capacity(array, scenario, grid)
    trace = SweepTrace(rows=[(0, obj, cap)], step_objectives=[obj])
    if M <= 1 or array.delta_f < step or step <= 0:
        trace.skipped = trace.converged = True
        return array, trace

    r = grid.samples[:, 0]
    th = grid.samples[:, 1]
    c = scenario.c
    tau = ((np.sin(th) - np.sin(scenario.theta_b)) / c)[:, None] * x[None, :] + ((scenario.r_b - r) / c)[:, None]
    f_lo, f_hi = array.f_c, array.f_c + array.delta_f
    n = int(np.floor(array.delta_f / step)) + 1
    grid_f = f_lo + step * np.arange(n)
    for sweep in range(1, opts.max_sweeps + 1):
        for m in range(M):
            cands = np.concatenate([[f[m]], grid_f, [f_hi]])
            e_all = np.exp(2j * np.pi * f[None, :] * tau)
            rest = e_all.sum(axis=1) - e_all[:, m]
            ph_m = cands[:, None] * tau[None, :, m]
            worst = _worst_over_candidates(rest, ph_m)
            pick = _line_search_pick(cands, worst)
            f[m] = cands[pick]
            obj = float(worst[pick])
            trace.step_objectives.append(obj)
        array = array.with_frequencies(f)
        new_cap = worst_case_proxy_capacity(array, scenario, grid)
        trace.rows.append((sweep, obj, new_cap))
        if abs(new_cap - cap) <= opts.tol:
            trace.converged = True
            break
        cap = new_cap
    return array, trace


def lemma2_u_opt(B, W):
    """Fenchel multiplier ``u = 1 / (tr(B W) + 1)`` making the log bound tight."""
    return 1.0 / (float(np.trace(np.asarray(B) @ np.asarray(W)).real) + 1.0)


def fenchel_phi(u, v):
    """``-u v + ln u + 1``; maximized over ``u > 0`` at ``u = 1/v`` with value ``-ln v``."""
    return -u * v + np.log(u) + 1.0


# ---------------------------------------------------------------------------
# SDR beamformer


def _traces(mats, W):
    """``tr(X_s W)`` for a stack of Hermitian matrices, real part."""
    return np.einsum("sij,ji->s", mats, W).real


def sdr_objective(A, Bs, W):
    """Worst-case secrecy rate of a covariance ``W`` in nats."""
    a = float(np.trace(A @ W).real)
    b = _traces(Bs, W)
    return float(np.log1p(a) - np.log1p(b).max())


def worst_case_rate(w, A, Bs):
    """Worst-case secrecy rate ``min_s log2((1 + w^H A w)/(1 + w^H B_s w))`` in bits."""
    w = np.asarray(w)
    a = np.vdot(w, A @ w).real
    b = np.einsum("i,sij,j->s", w.conj(), Bs, w).real
    return float((np.log1p(a) - np.log1p(b).max()) / LN2)


def _frank_wolfe(A, Bs, u, W, p_max, opts):
    """Maximize ``ln(1 + tr AW) - LSE_t(u_s (tr B_s W + 1) - ln u_s - 1)`` over the spectraplex.

    The max over samples is smoothed by a log-sum-exp at temperatures
    ``opts.fw_temperatures`` (annealed); each step takes the leading
    eigenvector of the gradient as the linear-oracle vertex and a bounded
    exact line search along the segment.
    """
    const = -np.log(u) - 1.0
    iters = 0
    for temp in opts.fw_temperatures:

        def smooth_obj(a, b):
            g = u * (b + 1.0) + const
            return np.log1p(a) - logsumexp(temp * g) / temp

        for _ in range(opts.fw_max_iter):
            iters += 1
            a = float(np.trace(A @ W).real)
            b = _traces(Bs, W)
            g = u * (b + 1.0) + const
            wts = np.exp(temp * g - logsumexp(temp * g))
            grad = A / (1.0 + a) - np.einsum("s,sij->ij", wts * u, Bs)
            lam, v = leading_eigpair(0.5 * (grad + grad.conj().T))
            S = p_max * np.outer(v, v.conj()) if lam > 0 else np.zeros_like(W)
            D = S - W
            gap = float(np.trace(grad @ D).real)
            if gap <= opts.fw_gap_tol:
                break
            da = float(np.trace(A @ D).real)
            db = _traces(Bs, D)
            res = minimize_scalar(
                lambda gam: -smooth_obj(a + gam * da, b + gam * db),
                bounds=(0.0, 1.0),
                method="bounded",
                options={"xatol": 1e-12},
            )
            gam = float(res.x)
            # the bounded search never tests the endpoint exactly
            if -smooth_obj(a + da, b + db) <= res.fun:
                gam = 1.0
            if gam <= 0.0:
                break
            W = W + gam * D
            W = 0.5 * (W + W.conj().T)
    return W, iters


@dataclass
class RobustResult:
    W: np.ndarray
    beamformer: Beamformer
    trace: list = field(default_factory=list)
    u: Optional[np.ndarray] = None
    rank_ratio: float = 0.0
    randomized: bool = False
    inner_iterations: int = 0

    @property
    def iterations(self):
        return max(len(self.trace) - 1, 0)

    @property
    def rate_bits(self):
        return self.trace[-1][1] if self.trace else float("nan")


def _initial_covariance(A, Bs, p_max, init, rng):
    M = A.shape[0]
    if init is None or (isinstance(init, str) and init == "closed_form"):
        eye = np.eye(M) / p_max
        cands = []
        # closed-form optimum against each sample, plus maximum-ratio toward Bob
        for B in Bs:
            pair = ChannelPair(h_ab=np.zeros(M), h_ae=np.zeros(M), A=A, B=B, sigma2_b=1.0, sigma2_e=1.0)
            cands.append(optimal_abv(pair, p_max).w)
        _, v = leading_eigpair(A)
        cands.append(np.sqrt(p_max) * v)
        scores = [worst_case_rate(w, A, Bs) for w in cands]
        w0 = cands[int(np.argmax(scores))]
    elif isinstance(init, str) and init == "random":
        z = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        w0 = np.sqrt(p_max) * z / np.linalg.norm(z)
    else:
        w0 = np.asarray(init, dtype=complex)
        if np.vdot(w0, w0).real > p_max * (1 + 1e-9):
            raise ValidationError("initial beamformer exceeds p_max")
    return np.outer(w0, w0.conj())


def gaussian_randomization(W, objective, N, rng_seed, p_max):
    """Best of ``N`` full-power draws from ``CN(0, W)`` under ``objective`` (higher is better).

    ``rng_seed`` may be an int or a ``numpy.random.Generator``. The result is
    phase-canonicalized, so a rank-1 ``W`` reproduces its scaled eigenvector.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    W = 0.5 * (np.asarray(W) + np.asarray(W).conj().T)
    vals, vecs = np.linalg.eigh(W)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]
    M = W.shape[0]
    z = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / np.sqrt(2.0)
    xi = z @ root.T
    best_w, best_val = None, -np.inf
    for cand in xi:
        norm = np.linalg.norm(cand)
        if norm == 0.0:
            continue
        w = np.sqrt(p_max) * cand / norm
        val = objective(w)
        if val > best_val:
            best_w, best_val = w, val
    if best_w is None:
        best_w = np.zeros(M, dtype=complex)
    return Beamformer(w=fix_phase(best_w), p_max=p_max)


def robust_abv_solve(A, B_samples, p_max, opts=None, rng_seed=0, init=None):
    """Worst-case secrecy beamformer via Fenchel alternation and semidefinite relaxation.

    Alternates closed-form multiplier updates ``u_s = 1/(tr(B_s W) + 1)`` with
    a Frank-Wolfe solve of the linearized concave problem, until the
    worst-case rate changes by at most ``opts.tol`` bits. Outer iterates that
    would lower the true worst-case rate are rejected, so the trace is
    non-decreasing. The beamformer is the scaled leading eigenvector when
    ``W`` is numerically rank-1 (eigenvalue ratio below
    ``opts.rank_one_ratio``), otherwise the better of that eigenvector and
    Gaussian randomization.

    ``init`` is ``None``/``"closed_form"`` (best per-sample closed form),
    ``"random"``, or an explicit initial beamformer.
    """
    opts = opts or SolverOptions()
    A = np.asarray(A, dtype=complex)
    Bs = np.asarray(B_samples, dtype=complex)
    if Bs.ndim == 2:
        Bs = Bs[None]
    if Bs.shape[0] < 1:
        raise ValidationError("at least one Eve sample is required")
    rng = np.random.default_rng(rng_seed)
    W = _initial_covariance(A, Bs, p_max, init, rng)
    obj = sdr_objective(A, Bs, W)
    trace = [(0, obj / LN2, float(np.trace(W).real), _rank_ratio(W))]
    u = 1.0 / (_traces(Bs, W) + 1.0)
    inner = 0
    for it in range(1, opts.robust_max_outer + 1):
        try:
            W_new, n = _frank_wolfe(A, Bs, u, W, p_max, opts)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"inner solver failed: {exc}", trace=trace) from exc
        inner += n
        new_obj = sdr_objective(A, Bs, W_new)
        if not np.isfinite(new_obj):
            raise NumericalError("inner solver produced a non-finite objective", trace=trace)
        if new_obj < obj:
            trace.append((it, obj / LN2, float(np.trace(W).real), _rank_ratio(W)))
            break
        gain = new_obj - obj
        W, obj = W_new, new_obj
        u = 1.0 / (_traces(Bs, W) + 1.0)
        trace.append((it, obj / LN2, float(np.trace(W).real), _rank_ratio(W)))
        if gain / LN2 <= opts.tol:
            break

    ratio = _rank_ratio(W)
    vals, vecs = np.linalg.eigh(0.5 * (W + W.conj().T))
    lead = vecs[:, -1] * np.sqrt(max(vals[-1], 0.0))
    lead = fix_phase(lead)
    randomized = False
    if ratio < opts.rank_one_ratio:
        w = lead
    else:
        full = np.sqrt(p_max) * lead / max(np.linalg.norm(lead), np.finfo(float).tiny)
        bf = gaussian_randomization(
            W, lambda w: worst_case_rate(w, A, Bs), opts.randomization_draws, rng, p_max
        )
        cands = [lead, full, bf.w]
        scores = [worst_case_rate(c, A, Bs) for c in cands]
        w = cands[int(np.argmax(scores))]
        randomized = int(np.argmax(scores)) == 2
    power = float(np.vdot(w, w).real)
    if power > p_max:
        w = w * np.sqrt(p_max / power)
    return RobustResult(
        W=W,
        beamformer=Beamformer(w=w, p_max=p_max),
        trace=trace,
        u=u,
        rank_ratio=ratio,
        randomized=randomized,
        inner_iterations=inner,
    )


def _rank_ratio(W):
    vals = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
    top = vals[-1]
    if top <= 0:
        return 0.0
    second = vals[-2] if vals.size > 1 else 0.0
    return float(max(second, 0.0) / top)


def sample_channel_matrices(t, array, scenario, grid):
    """Bob matrix ``A`` and the stacked Eve matrices ``B_s`` for every grid sample."""
    A = None
    Bs = []
    for sample in grid:
        pair = channel_matrices(t, array, scenario, sample)
        A = pair.A
        Bs.append(pair.B)
    return A, np.array(Bs)
