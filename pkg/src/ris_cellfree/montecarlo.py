"""Monte Carlo check of the closed-form SINR.

Draws small-scale fading, forms the aggregated channels for a phase vector,
runs the pilot-phase LMMSE estimator and measures the use-and-then-forget
SINR from sample moments. Draws come in fixed-size blocks, each seeded from
``(seed, block index)``, so a draw's value never depends on how blocks are
grouped or which worker produces them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import SystemConfig
from .rates import estimation_coefficients, phase_vector
from .system import NetworkRealization

log = logging.getLogger(__name__)

BLOCK = 4096


@dataclass(frozen=True)
class FadingDraw:
    """A batch of channel draws; the leading axis indexes the draw.

    ``g``: ``(T, M, K)``, ``h``: ``(T, M, N)``, ``z``: ``(T, K, N)``.
    """

    g: np.ndarray
    h: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return self.g.shape[0]


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Factor ``L`` with ``L L^H = a``.

    Eigenvalues below the round-off level of the largest one (including
    negative ones) are set to zero, so a rank-deficient ``a`` gives draws
    confined to its range.
    """
    w, v = np.linalg.eigh(a)
    floor = np.finfo(float).eps * len(w) * np.abs(w).max(initial=0.0)
    w = np.where(w > floor, w, 0.0)
    return v * np.sqrt(w)


def _cn_rows(rng: np.random.Generator, count: int, width: int) -> np.ndarray:
    """``count`` rows of ``width`` CN(0, 1) values; row ``t`` depends only on ``t``."""
    x = rng.standard_normal((count, width, 2))
    return (x[..., 0] + 1j * x[..., 1]) / math.sqrt(2.0)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _draw_block(net: NetworkRealization, rng, count: int, factors) -> tuple[FadingDraw, np.ndarray]:
    m, k, n = net.num_aps, net.num_users, net.num_elements
    ap_f, user_f = factors
    pilots = int(net.pilot_index.max()) + 1
    sizes = np.array([m * k, m * n, k * n, m * pilots])
    # one row per draw keeps each draw independent of the block length
    x = np.split(_cn_rows(rng, count, int(sizes.sum())), np.cumsum(sizes)[:-1], axis=1)
    g = x[0].reshape(count, m, k) * np.sqrt(net.beta)
    # row-vector convention: x @ L^T has covariance L L^H
    h = np.einsum("tmj,mij->tmi", x[1].reshape(count, m, n), ap_f)
    z = np.einsum("tkj,kij->tki", x[2].reshape(count, k, n), user_f)
    pilot_noise = x[3].reshape(count, m, pilots)
    return FadingDraw(g=g, h=h, z=z), pilot_noise


def _factors(net: NetworkRealization):
    return (
        np.stack([psd_sqrt(r) for r in net.corr_ap]),
        np.stack([psd_sqrt(r) for r in net.corr_user]),
    )


def sample_blocks(net: NetworkRealization, seed: int, count: int) -> Iterator[tuple[FadingDraw, np.ndarray]]:
    """Yield ``(draws, pilot_noise)`` blocks totalling ``count`` draws."""
    if count < 1:
        raise ValueError("count must be >= 1")
    factors = _factors(net)
    for block, start in enumerate(range(0, count, BLOCK)):
        size = min(BLOCK, count - start)
        yield _draw_block(net, _block_rng(seed, block), size, factors)


def sample_channels(net: NetworkRealization, seed: int, count: int) -> Iterator[FadingDraw]:
    """Stream of fading-draw batches (``h_m ~ CN(0, R_m)``, ``z_k ~ CN(0, R~_k)``)."""
    for draws, _ in sample_blocks(net, seed, count):
        yield draws


def aggregated_channel(draw: FadingDraw, theta) -> np.ndarray:
    """``u_mk = g_mk + h_m^H Phi z_k`` for every draw, shape ``(T, M, K)``."""
    v = phase_vector(theta)
    return draw.g + np.einsum("tmn,n,tkn->tmk", draw.h.conj(), v, draw.z)


def lmmse_estimate(u, net: NetworkRealization, cfg: SystemConfig, pilot_noise, c) -> np.ndarray:
    """LMMSE channel estimates from one pilot observation per AP and pilot.

    AP ``m`` observes ``sqrt(p tau_p) * sum_{j in P_k} u_mj + n`` on the pilot
    of user ``k``; the estimate scales that observation by ``c_mk``. Accepts
    a leading draw axis on ``u`` and ``pilot_noise``.
    """
    u = np.asarray(u)
    copilot = net.copilot.astype(float)
    received = np.sqrt(cfg.pilot_snr * cfg.pilot_len) * (u @ copilot)
    received = received + np.asarray(pilot_noise)[..., net.pilot_index]
    return c * received


@dataclass(frozen=True)
class UatfEstimate:
    """Sample-moment terms of the use-and-then-forget SINR per user."""

    sinr: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    draws: int
    valid: np.ndarray


def uatf_statistics(theta, net: NetworkRealization, cfg: SystemConfig, num_draws: int, seed: int) -> UatfEstimate:
    """Empirical UatF SINR of every user from ``num_draws`` channel draws."""
    coeffs = estimation_coefficients(theta, net, cfg)
    k = net.num_users
    mean_gain = np.zeros((k,), dtype=complex)
    power = np.zeros((k, k))
    est_power = np.zeros(k)
    for draws, pilot_noise in sample_blocks(net, seed, num_draws):
        u = aggregated_channel(draws, theta)
        u_hat = lmmse_estimate(u, net, cfg, pilot_noise, coeffs.c)
        # s[t, k, j] = sum_m conj(u_hat[t, m, k]) u[t, m, j]
        s = np.einsum("tmk,tmj->tkj", u_hat.conj(), u)
        mean_gain += np.einsum("tkk->k", s)
        power += (np.abs(s) ** 2).sum(axis=0)
        est_power += (np.abs(u_hat) ** 2).sum(axis=(0, 1))
    rho = cfg.rho
    mean_gain /= num_draws
    power /= num_draws
    est_power /= num_draws
    signal = rho * np.abs(mean_gain) ** 2
    interference = rho * power.sum(axis=1) - signal
    noise = est_power
    denom = interference + noise
    valid = (denom > 0) | (signal == 0)
    sinr = np.zeros(k)
    ok = denom > 0
    sinr[ok] = signal[ok] / denom[ok]
    sinr[~valid] = np.nan
    if not valid.all():
        log.warning("non-positive UatF denominator for users %s; increase num_draws", np.flatnonzero(~valid))
    return UatfEstimate(sinr=sinr, signal=signal, interference=interference, noise=noise, draws=num_draws, valid=valid)


def empirical_uatf_sinr(k: int, theta, net: NetworkRealization, cfg: SystemConfig, num_draws: int, seed: int) -> float:
    """Empirical SINR of user ``k``; NaN (with a warning) when the estimate is unusable."""
    return float(uatf_statistics(theta, net, cfg, num_draws, seed).sinr[k])
