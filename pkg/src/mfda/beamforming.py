"""Closed-form secrecy beamformer, its eigenvalue, and the capacity measures."""

from dataclasses import dataclass

import numpy as np

from mfda.channel import channel_matrices, path_loss_power
from mfda.errors import ValidationError
from mfda.numerics import fix_phase, herm_gen_eig_max


@dataclass(frozen=True, eq=False)
class Beamformer:
    w: np.ndarray
    p_max: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=complex))
        power = float(np.vdot(self.w, self.w).real)
        if power > self.p_max * (1 + 1e-9):
            raise ValidationError(f"beamformer power {power!r} exceeds p_max {self.p_max!r}")

    @property
    def power(self):
        return float(np.vdot(self.w, self.w).real)


def optimal_abv(pair, p_max):
    """Maximizer of ``(1 + w^H A w) / (1 + w^H B w)`` subject to ``||w||^2 <= p_max``.

    The optimum uses full power along the top generalized eigenvector of
    ``(A + I/p_max, B + I/p_max)``.
    """
    M = pair.M
    eye = np.eye(M) / p_max
    _, u = herm_gen_eig_max(pair.A + eye, pair.B + eye)
    return Beamformer(w=np.sqrt(p_max) * u, p_max=p_max)


def capacity_ratio(w, A, B):
    w = np.asarray(w)
    num = 1.0 + np.vdot(w, A @ w).real
    den = 1.0 + np.vdot(w, B @ w).real
    return num / den


def secrecy_capacity_instant(beamformer, pair):
    """``log2((1 + w^H A w) / (1 + w^H B w))`` in bits; negative for a poor ``w``."""
    w = beamformer.w if isinstance(beamformer, Beamformer) else beamformer
    return float(np.log2(capacity_ratio(w, pair.A, pair.B)))


def lambda_max_closed_form(pair, p_max, corrected=True):
    """Closed-form largest eigenvalue of ``(B + I/P)^-1 (A + I/P)``.

    Work with the noise-normalized channels ``a = h_ab/sigma_b`` and
    ``e = h_ae/sigma_e``. Splitting ``a`` into its components along ``e``
    (``alpha``) and orthogonal to it (``beta``) reduces the problem to
    ``lam = P/(1 + P E) * (1/P + E + mu)`` where ``E = ||e||^2`` and ``mu`` is
    the larger root of the 2x2 matrix

        [[(1 + P E) beta^2, (1 + P E) alpha beta],
         [alpha beta,        alpha^2 - E        ]].

    ``corrected=False`` evaluates the frequently quoted form in which the
    ``(1 + P E)`` weighting of the first row is missing. It is kept only for
    comparison; it disagrees with the eigensolver whenever ``E > 0``.
    """
    norm_ae2 = float(np.vdot(pair.h_ae, pair.h_ae).real)
    if norm_ae2 <= 0.0:
        raise ValidationError("Eve channel has zero norm; alpha^2 is undefined")
    P = p_max
    E = norm_ae2 / pair.sigma2_e
    A_tot = float(np.vdot(pair.h_ab, pair.h_ab).real) / pair.sigma2_b
    alpha2 = abs(np.vdot(pair.h_ab, pair.h_ae)) ** 2 / (pair.sigma2_b * norm_ae2)
    alpha2 = min(alpha2, A_tot)
    if not corrected:
        root = np.sqrt(max((A_tot + E) ** 2 - 4 * E * alpha2, 0.0))
        return float(P * (2 / P + E + A_tot) / (2 * (1 + P * E)) + P * root / (2 * (1 + P * E)))
    beta2 = A_tot - alpha2
    g = 1 + P * E
    tr = g * beta2 + alpha2 - E
    det = -g * E * beta2
    mu = 0.5 * (tr + np.sqrt(max(tr * tr - 4 * det, 0.0)))
    return float(P / g * (1 / P + E + mu))


def lambda_max_from_alpha2(alpha2, norm_ab2, norm_ae2, sigma2_b, sigma2_e, p_max):
    """Corrected closed form as an explicit function of ``alpha^2`` (for sweeps)."""
    P = p_max
    E = norm_ae2 / sigma2_e
    A_tot = norm_ab2 / sigma2_b
    beta2 = A_tot - alpha2
    g = 1 + P * E
    tr = g * beta2 + alpha2 - E
    det = -g * E * beta2
    mu = 0.5 * (tr + np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
    return P / g * (1 / P + E + mu)


def upper_bound(M, scenario):
    """Eavesdropper-free capacity ``log2(1 + Lfs_b^2 P M / sigma_b^2)``."""
    gain = path_loss_power(scenario.r_b, "bob", scenario)
    return float(np.log2(1 + gain * scenario.p_max * M / scenario.sigma2_b))


def perfect_csi_capacity(array, scenario, t=0.0, eve_sample=None):
    """Secrecy capacity (bits) of the closed-form beamformer for a fixed array."""
    pair = channel_matrices(t, array, scenario, eve_sample)
    bf = optimal_abv(pair, scenario.p_max)
    return secrecy_capacity_instant(bf, pair)


def mrt_beamformer(pair, p_max):
    """Maximum-ratio beamformer toward Bob at full power."""
    h = pair.h_ab
    norm = np.linalg.norm(h)
    if norm == 0.0:
        return Beamformer(w=np.zeros_like(h), p_max=p_max)
    return Beamformer(w=fix_phase(np.sqrt(p_max) * h / norm), p_max=p_max)
