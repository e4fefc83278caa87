"""Array geometry, path loss, LoS channel vectors and the correlation objective.

Units: positions in meters, frequencies in Hz, times in seconds, angles in
radians, powers in milliwatts. Path loss is a power gain,
``10**(C_dB/10) * (r/R)**(-alpha)``, whose square root scales the channel
amplitudes.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from mfda.errors import ValidationError

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_mw(dbm):
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


class EveSample(NamedTuple):
    """A candidate eavesdropper location (range in meters, angle in radians)."""

    r: float
    theta: float


@dataclass(frozen=True)
class Scenario:
    r_b: float = 1000.0
    theta_b: float = np.deg2rad(30.0)
    r_e: float = 1000.0
    theta_e: float = np.deg2rad(35.0)
    sigma2_b: float = dbm_to_mw(-100.0)
    sigma2_e: float = dbm_to_mw(-100.0)
    p_max: float = dbm_to_mw(10.0)
    pathloss_c_db: float = -30.0
    pathloss_ref: float = 1.0
    alpha_b: float = 2.0
    alpha_e: float = 3.0
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("r_b", "r_e", "sigma2_b", "sigma2_e", "p_max", "pathloss_ref", "c"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"scenario.{name} must be positive")
        for name in ("theta_b", "theta_e"):
            if not abs(getattr(self, name)) < np.pi / 2:
                raise ValidationError(f"scenario.{name} must lie in (-pi/2, pi/2)")

    @property
    def eve(self):
        return EveSample(self.r_e, self.theta_e)

    @property
    def bob(self):
        return (self.r_b, self.theta_b)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ArrayConfig:
    """Positions ``x`` and frequencies ``f`` of an M-element linear array.

    ``delta_f`` is the frequency budget above the carrier ``f_c``; ``d0`` the
    minimum spacing and ``d_max`` the end of the movable segment.
    """

    x: np.ndarray
    f: np.ndarray
    f_c: float
    delta_f: float
    d0: float
    d_max: float
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x", np.array(self.x, dtype=float))
        object.__setattr__(self, "f", np.array(self.f, dtype=float))
        self.validate()

    @property
    def M(self):
        return int(self.x.size)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.f_c

    def upper_limit(self, m):
        """Largest position antenna ``m`` (0-based) may take, leaving room for the rest."""
        return self.d_max - (self.M - 1 - m) * self.d0

    def validate(self):
        x, f = self.x, self.f
        if x.ndim != 1 or f.shape != x.shape:
            raise ValidationError("x and f must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
            raise ValidationError("x and f must be finite")
        if self.d0 <= 0 or self.d_max <= 0 or self.f_c <= 0 or self.delta_f < 0:
            raise ValidationError("f_c, d0, d_max must be positive and delta_f non-negative")
        if x.size == 0:
            return
        slack = self.tol * max(self.d0, self.d_max)
        if x[0] != 0.0:
            raise ValidationError(f"first antenna must sit at the origin (x[0] == 0), got {x[0]!r}")
        gaps = np.diff(x)
        if np.any(gaps < self.d0 - slack):
            m = int(np.argmin(gaps)) + 1
            raise ValidationError(
                f"minimum spacing violated: x[{m}] - x[{m - 1}] = {gaps[m - 1]!r} < d0 = {self.d0!r}"
            )
        if x[-1] > self.d_max + slack:
            raise ValidationError(f"movable boundary violated: x[-1] = {x[-1]!r} > d_max = {self.d_max!r}")
        fslack = self.tol * self.f_c
        if np.any(f < self.f_c - fslack) or np.any(f > self.f_c + self.delta_f + fslack):
            raise ValidationError(
                f"frequency budget violated: f must lie in [{self.f_c!r}, {self.f_c + self.delta_f!r}]"
            )

    def with_positions(self, x):
        return replace(self, x=np.asarray(x, dtype=float))

    def with_frequencies(self, f):
        return replace(self, f=np.asarray(f, dtype=float))

    def replace(self, **changes):
        return replace(self, **changes)


def half_wavelength_array(M, f_c=10e9, delta_f=1e9, d0=None, d_max=None, f=None):
    """Phased-array geometry: ``x_m = m * lambda/2`` and every ``f_m = f_c`` unless given."""
    lam = SPEED_OF_LIGHT / f_c
    d0 = lam / 2 if d0 is None else d0
    d_max = 30 * lam if d_max is None else d_max
    x = np.arange(M) * (lam / 2)
    f = np.full(M, f_c) if f is None else np.asarray(f, dtype=float)
    return ArrayConfig(x=x, f=f, f_c=f_c, delta_f=delta_f, d0=d0, d_max=d_max)


def frequency_ramp(M, f_c, delta_f):
    """Linear FDA ramp ``f_m = f_c + m * delta_f / M`` (0-based ``m``)."""
    return f_c + np.arange(M) * (delta_f / max(M, 1))


def random_feasible_positions(array, rng):
    """Uniformly spread positions satisfying the spacing and boundary limits."""
    M = array.M
    if M <= 1:
        return np.zeros(M)
    slack = array.d_max - (M - 1) * array.d0
    if slack < 0:
        raise ValidationError("d_max too small for M antennas at spacing d0")
    u = np.sort(rng.uniform(0.0, slack, size=M - 1))
    x = np.concatenate([[0.0], np.arange(1, M) * array.d0 + u])
    return x


def _leg_exponent(leg, scenario):
    if leg == "bob":
        return scenario.alpha_b
    if leg == "eve":
        return scenario.alpha_e
    raise ValidationError(f"leg must be 'bob' or 'eve', got {leg!r}")


def path_loss_power(r, leg, scenario):
    """Power gain ``Lfs^2(r)`` of the given leg."""
    if not r > 0:
        raise ValidationError(f"distance must be positive, got {r!r}")
    alpha = _leg_exponent(leg, scenario)
    return 10.0 ** (scenario.pathloss_c_db / 10.0) * (r / scenario.pathloss_ref) ** (-alpha)


def steering_vector(t, r, theta, leg, array, scenario):
    """LoS channel ``sqrt(Lfs^2(r)) * exp(-j 2 pi f_m [t - (r - x_m sin(theta))/c])``."""
    amp = np.sqrt(path_loss_power(r, leg, scenario))
    delay = t - (r - array.x * np.sin(theta)) / scenario.c
    return amp * np.exp(-2j * np.pi * array.f * delay)


def tau_vector(array, scenario, eve_sample: Optional[EveSample] = None):
    """Per-antenna delay differences between the Eve and Bob channels.

    ``tau_m = x_m (sin(theta_e) - sin(theta_b))/c + (r_b - r_e)/c`` with the
    sample location replacing ``(r_e, theta_e)`` when given.
    """
    r_e, theta_e = scenario.eve if eve_sample is None else eve_sample
    c = scenario.c
    return array.x * ((np.sin(theta_e) - np.sin(scenario.theta_b)) / c) + (scenario.r_b - r_e) / c


def phases(array, scenario, eve_sample=None):
    """Phases ``f_m tau_m`` in cycles, reduced to ``[0, 1)``.

    ``f_m tau_m`` runs to ~1e5 cycles, where float64 keeps only ~1e-11 of a
    cycle; near-null correlations amplify that into ~1e-8 relative error.
    The product and reduction use extended precision where the platform
    provides it.
    """
    r_e, theta_e = scenario.eve if eve_sample is None else eve_sample
    ld = np.longdouble
    c = ld(scenario.c)
    ds = (np.sin(ld(theta_e)) - np.sin(ld(scenario.theta_b))) / c
    tau = array.x.astype(ld) * ds + (ld(scenario.r_b) - ld(r_e)) / c
    return np.mod(array.f.astype(ld) * tau, 1).astype(float)


def cosine_sum(p):
    """``sum_{m != n} cos(2 pi (p_m - p_n))`` for a phase vector in cycles."""
    p = np.asarray(p, dtype=float)
    d = p[:, None] - p[None, :]
    return float(np.cos(2 * np.pi * d).sum() - p.size)


def inner_product_sq(array, scenario, eve_sample=None):
    """Squared correlation of the unit-modulus Bob and Eve phase vectors.

    Evaluated in cosine-sum form ``M + sum_{m != n} cos(2 pi (f_m tau_m - f_n tau_n))``;
    it is time independent and lies in ``[0, M^2]``.
    """
    return array.M + cosine_sum(phases(array, scenario, eve_sample))


@dataclass(frozen=True, eq=False)
class ChannelPair:
    """Delay-compensated channels and the noise-scaled rank-1 SNR matrices."""

    h_ab: np.ndarray
    h_ae: np.ndarray
    A: np.ndarray
    B: np.ndarray
    sigma2_b: float
    sigma2_e: float

    @property
    def M(self):
        return int(self.h_ab.size)


def channel_matrices(t, array, scenario, eve_sample=None):
    """Build ``A = h_ab h_ab^H / sigma_b^2`` and ``B = h_ae h_ae^H / sigma_e^2`` at time ``t``.

    Both channels are read at Bob's compensated instant ``t + r_b/c``. With
    ``r_e == r_b`` this is each receiver's own delay compensation; in general
    it keeps ``|<h_ab, h_ae>|^2`` equal to ``Lfs_b^2 Lfs_e^2 * inner_product_sq``
    so the stage-1 objective is exactly what drives the capacity.
    """
    r_e, theta_e = scenario.eve if eve_sample is None else eve_sample
    t_ref = t + scenario.r_b / scenario.c
    h_ab = steering_vector(t_ref, scenario.r_b, scenario.theta_b, "bob", array, scenario)
    h_ae = steering_vector(t_ref, r_e, theta_e, "eve", array, scenario)
    A = np.outer(h_ab, h_ab.conj()) / scenario.sigma2_b
    B = np.outer(h_ae, h_ae.conj()) / scenario.sigma2_e
    return ChannelPair(h_ab=h_ab, h_ae=h_ae, A=A, B=B, sigma2_b=scenario.sigma2_b, sigma2_e=scenario.sigma2_e)
