"""Network topology, large-scale fading, RIS correlation and pilot assignment."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import SystemConfig

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10


class TopologyError(ValueError):
    pass


def path_loss(distance, shadow_db=0.0, intercept_db: float = -35.3, exponent: float = 3.76):
    """Log-distance large-scale gain in linear scale.

    ``beta_dB = intercept_db - 10 * exponent * log10(d) + shadow_db`` with the
    distance clamped below at 1 m. Works elementwise on arrays.
    """
    d = np.maximum(np.asarray(distance, dtype=float), 1.0)
    beta_db = intercept_db - 10.0 * exponent * np.log10(d) + np.asarray(shadow_db, dtype=float)
    return 10.0 ** (beta_db / 10.0)


def grid_shape(n: int) -> tuple[int, int]:
    """Near-square ``(rows, cols)`` factorization of ``n``; prime ``n`` gives one row."""
    rows = int(np.floor(np.sqrt(n)))
    while rows > 1 and n % rows:
        rows -= 1
    return rows, n // rows


def element_positions(n: int, spacing: float) -> np.ndarray:
    """Planar grid coordinates of the RIS elements, in wavelengths."""
    rows, cols = grid_shape(n)
    r, c = np.divmod(np.arange(n), cols)
    return np.column_stack([r, c]).astype(float) * spacing


def build_correlation(n: int, spacing: float = 0.25) -> np.ndarray:
    """Sinc spatial correlation of an ``n``-element planar RIS.

    Entry ``(a, b)`` is ``sinc(2 d_ab / lambda)`` where ``d_ab`` is the element
    distance; the result is real symmetric with unit diagonal. Round-off
    negative eigenvalues are clipped to zero.
    """
    if n < 1:
        raise ValueError("number of elements must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    pos = element_positions(n, spacing)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    corr = np.sinc(2.0 * dist)
    w, v = np.linalg.eigh(corr)
    if w.min() < 0:
        corr = (v * np.clip(w, 0.0, None)) @ v.T
        corr = 0.5 * (corr + corr.T)
    return corr


def assign_pilots(num_users: int, pilot_len: int, seed: int) -> np.ndarray:
    """Balanced random pilot assignment.

    Users are shuffled and dealt round-robin over ``pilot_len`` pilots, so
    group sizes differ by at most one. Returns the 0-based pilot index of
    every user.
    """
    if num_users < 1 or pilot_len < 1:
        raise ValueError("num_users and pilot_len must be >= 1")
    order = np.random.default_rng(seed).permutation(num_users)
    pilots = np.empty(num_users, dtype=int)
    pilots[order] = np.arange(num_users) % pilot_len
    return pilots


def _check_hermitian_psd(stack: np.ndarray, name: str) -> None:
    for i, a in enumerate(stack):
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if np.abs(a - a.conj().T).max(initial=0.0) >= HERMITIAN_TOL * scale:
            raise TopologyError(f"{name}[{i}] is not Hermitian")
        if a.size and np.linalg.eigvalsh(a).min() < -PSD_TOL * scale:
            raise TopologyError(f"{name}[{i}] is not positive semidefinite")


def _frozen(a, dtype=None) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    """One drawn topology with all statistics the objective needs.

    ``corr_ap`` has shape ``(M, N, N)`` and ``corr_user`` ``(K, N, N)``. When
    both are scalar multiples of one element-correlation matrix, ``ris_corr``
    holds that matrix and ``ap_ris_gain`` / ``ris_user_gain`` the scalars; the
    rate model then uses a factored fast path. Arrays are read-only.
    """

    beta: np.ndarray
    corr_ap: np.ndarray
    corr_user: np.ndarray
    pilot_index: np.ndarray
    blockage_mask: np.ndarray | None = None
    ap_positions: np.ndarray | None = None
    user_positions: np.ndarray | None = None
    ris_corr: np.ndarray | None = None
    ap_ris_gain: np.ndarray | None = None
    ris_user_gain: np.ndarray | None = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "beta", _frozen(self.beta, float))
        set_(self, "corr_ap", _frozen(self.corr_ap))
        set_(self, "corr_user", _frozen(self.corr_user))
        set_(self, "pilot_index", _frozen(self.pilot_index, int))
        m, k = self.beta.shape
        mask = np.zeros((m, k), bool) if self.blockage_mask is None else self.blockage_mask
        set_(self, "blockage_mask", _frozen(mask, bool))
        for name in ("ap_positions", "user_positions", "ris_corr", "ap_ris_gain", "ris_user_gain"):
            value = getattr(self, name)
            if value is not None:
                set_(self, name, _frozen(value))

        n = self.corr_ap.shape[-1]
        if self.corr_ap.shape != (m, n, n) or self.corr_user.shape != (k, n, n):
            raise TopologyError("correlation stacks do not match beta's (M, K) shape")
        if self.pilot_index.shape != (k,) or self.pilot_index.min() < 0:
            raise TopologyError("pilot_index must hold one nonnegative index per user")
        if np.any(self.beta < 0):
            raise TopologyError("beta must be nonnegative")
        if np.any(self.beta[self.blockage_mask] != 0):
            raise TopologyError("blocked links must have beta == 0")
        _check_hermitian_psd(self.corr_ap, "corr_ap")
        _check_hermitian_psd(self.corr_user, "corr_user")

    @property
    def num_aps(self) -> int:
        return self.beta.shape[0]

    @property
    def num_users(self) -> int:
        return self.beta.shape[1]

    @property
    def num_elements(self) -> int:
        return self.corr_ap.shape[-1]

    @property
    def separable(self) -> bool:
        return self.ris_corr is not None

    @cached_property
    def copilot(self) -> np.ndarray:
        """``copilot[k, j]`` is True iff user ``j`` is in ``P_k`` (includes ``k``)."""
        return self.pilot_index[:, None] == self.pilot_index[None, :]

    @property
    def pilot_groups(self) -> list[np.ndarray]:
        """``P_k`` for every user as an index array."""
        return [np.flatnonzero(row) for row in self.copilot]


def generate_topology(cfg: SystemConfig, seed: int | None = None) -> NetworkRealization:
    """Draw one network realization; deterministic for a fixed seed.

    APs and users are uniform in the square. A user is blocked with
    probability ``cfg.blockage_prob`` and then loses the direct link to every
    AP. Cascaded RIS channels use ``R_m = beta_h[m] C`` and
    ``R~_k = beta_z[k] C`` with ``C`` the sinc element correlation.
    """
    seed = cfg.rng_seed if seed is None else seed
    pos_ss, shadow_ss, block_ss, pilot_ss, ris_ss = np.random.SeedSequence(seed).spawn(5)
    m, k, n = cfg.num_aps, cfg.num_users, cfg.num_ris_elements

    pos_rng = np.random.default_rng(pos_ss)
    aps = pos_rng.uniform(0.0, cfg.area_side, size=(m, 2))
    users = pos_rng.uniform(0.0, cfg.area_side, size=(k, 2))

    dist = np.linalg.norm(aps[:, None, :] - users[None, :, :], axis=-1)
    shadow = np.random.default_rng(shadow_ss).normal(0.0, cfg.shadowing_std_db, size=(m, k))
    beta = path_loss(dist, shadow, cfg.pathloss_intercept_db, cfg.pathloss_exponent)

    blocked_user = np.random.default_rng(block_ss).random(k) < cfg.blockage_prob
    mask = np.broadcast_to(blocked_user, (m, k)).copy()
    beta[mask] = 0.0

    ris = np.asarray(cfg.ris_position, dtype=float)
    ris_rng = np.random.default_rng(ris_ss)
    gain_h = path_loss(
        np.linalg.norm(aps - ris, axis=1),
        ris_rng.normal(0.0, cfg.ris_shadowing_std_db, size=m),
        cfg.ris_pathloss_intercept_db,
        cfg.ris_pathloss_exponent,
    )
    gain_z = path_loss(
        np.linalg.norm(users - ris, axis=1),
        ris_rng.normal(0.0, cfg.ris_shadowing_std_db, size=k),
        cfg.ris_pathloss_intercept_db,
        cfg.ris_pathloss_exponent,
    )
    corr = build_correlation(n, cfg.element_spacing)

    pilots = assign_pilots(k, cfg.pilot_len, int(pilot_ss.generate_state(1)[0]))
    return NetworkRealization(
        beta=beta,
        corr_ap=gain_h[:, None, None] * corr,
        corr_user=gain_z[:, None, None] * corr,
        pilot_index=pilots,
        blockage_mask=mask,
        ap_positions=aps,
        user_positions=users,
        ris_corr=corr,
        ap_ris_gain=gain_h,
        ris_user_gain=gain_z,
    )
