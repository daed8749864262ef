"""Closed-form channel statistics, SINR and sum ergodic throughput.

The phase configuration enters every statistic through
``W_m = D^H R_m D = R_m * conj(v) v^T`` with ``v = exp(j theta)``. Interference
is evaluated per user for all users at once; when the realization is
separable (``R_m = t_m C``, ``R~_k = s_k C``) all traces collapse to two
scalars ``tr(W C)`` and ``tr((W C)^2)`` of the common matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .system import NetworkRealization

_TRACE_IMAG_TOL = 1e-9
_MI_IMAG_TOL = 1e-8
# (m, k) pairs per chunk of the dense tr(Theta^2) evaluation
_DENSE_CHUNK = 64


def wrap_phase(theta):
    """Map phases onto ``[-pi, pi)`` by modular arithmetic; in-range values pass unchanged."""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    # the shift by pi can round an in-range value, or land a value just below pi on pi
    wrapped = np.where((theta >= -np.pi) & (theta < np.pi), theta, wrapped)
    return np.where(wrapped >= np.pi, wrapped - 2.0 * np.pi, wrapped)


def check_phase(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("theta must be a 1-D phase vector")
    if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > np.pi):
        raise ValueError("theta must lie in [-pi, pi]; wrap it first")
    return theta


def phase_vector(theta) -> np.ndarray:
    """Diagonal of ``Phi``."""
    return np.exp(1j * np.asarray(theta, dtype=float))


def _real(value, tol: float, what: str):
    """Drop the imaginary part of an analytically real quantity."""
    value = np.asarray(value)
    if np.iscomplexobj(value):
        re, im = value.real, value.imag
        if np.any(np.abs(im) > tol * np.abs(re) + 1e-300):
            raise FloatingPointError(f"{what} has a non-negligible imaginary part")
        value = re
    return value


def ris_trace(theta, R, Rt) -> float:
    """``tr(Phi^H R Phi Rt)`` as the quadratic form ``v^H (R * Rt^T) v``."""
    R = np.asarray(R)
    Rt = np.asarray(Rt)
    n = len(theta)
    if R.shape != (n, n) or Rt.shape != (n, n):
        raise ValueError("R and Rt must be N x N with N = len(theta)")
    v = phase_vector(theta)
    value = v.conj() @ ((R * Rt.T) @ v)
    return max(float(_real(value, _TRACE_IMAG_TOL, "ris_trace")), 0.0)


def _phase_weighted(theta, mats: np.ndarray) -> np.ndarray:
    v = phase_vector(theta)
    return mats * np.outer(v.conj(), v)


def aggregate_kernel(theta, net: NetworkRealization, c_col) -> np.ndarray:
    """``Y_k = sum_m c_mk D^H R_m D`` for one user's column of ``c``."""
    c_col = np.asarray(c_col, dtype=float)
    if c_col.shape != (net.num_aps,) or np.any(c_col < 0):
        raise ValueError("c_col must hold M nonnegative entries")
    return np.tensordot(c_col, _phase_weighted(theta, net.corr_ap), axes=1)


@dataclass(frozen=True)
class EstimationCoefficients:
    """Per-link channel variance ``delta``, LMMSE gain ``c`` and estimate variance ``gamma``."""

    delta: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    ris_traces: np.ndarray


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    rate: np.ndarray
    objective: float
    mi: np.ndarray
    no: np.ndarray
    # per-user MI terms (i)-(iv), shape (K, 4)
    mi_terms: np.ndarray
    coeffs: EstimationCoefficients


def _coefficients_from_traces(traces, net: NetworkRealization, cfg: SystemConfig):
    delta = net.beta + traces
    ptp = cfg.pilot_snr * cfg.pilot_len
    # sum over the co-pilot users of k: (delta @ copilot)[m, k]
    denom = ptp * (delta @ net.copilot.astype(float)) + 1.0
    c = np.sqrt(ptp) * delta / denom
    gamma = np.sqrt(ptp) * delta * c
    return EstimationCoefficients(delta=delta, c=c, gamma=gamma, ris_traces=traces)


def _all_ris_traces(theta, net: NetworkRealization) -> np.ndarray:
    W = _phase_weighted(theta, net.corr_ap)
    traces = np.einsum("mij,kji->mk", W, net.corr_user)
    return np.maximum(_real(traces, _TRACE_IMAG_TOL, "ris traces"), 0.0)


def estimation_coefficients(theta, net: NetworkRealization, cfg: SystemConfig) -> EstimationCoefficients:
    return _coefficients_from_traces(_all_ris_traces(theta, net), net, cfg)


def interference_terms(theta, net: NetworkRealization, cfg: SystemConfig, coeffs: EstimationCoefficients) -> np.ndarray:
    """The four interference terms of every user, shape ``(K, 4)``.

    Term (ii) is evaluated as ``tr(Y_k S Y_k S_k)`` with ``S`` the sum of all
    user correlations and ``S_k`` the sum over ``P_k``; by linearity this
    equals the double sum over ``k'`` and ``k''`` of ``tr(Y_k R~_k' Y_k R~_k'')``.
    """
    rho, ptp = cfg.rho, cfg.pilot_snr * cfg.pilot_len
    delta, c, gamma = coeffs.delta, coeffs.c, coeffs.gamma
    copilot = net.copilot.astype(float)
    Rt = net.corr_user
    W = _phase_weighted(theta, net.corr_ap)

    t1 = rho * gamma.T @ delta.sum(axis=1)

    Y = np.einsum("mk,mij->kij", c, W)
    S_all = Rt.sum(axis=0)
    S_grp = np.einsum("kj,jab->kab", copilot, Rt)
    t2 = np.einsum("kij,kji->k", Y @ S_all, Y @ S_grp)

    m, k = delta.shape
    sq_traces = np.empty((m, k), dtype=complex)
    Wf = W.reshape(m, 1, *W.shape[1:])
    for start in range(0, m, max(1, _DENSE_CHUNK // k)):
        stop = min(m, start + max(1, _DENSE_CHUNK // k))
        P = Wf[start:stop] @ Rt[None]
        sq_traces[start:stop] = np.einsum("mkij,mkji->mk", P, P)
    t3 = np.einsum("mk,mk->k", c**2, sq_traces @ copilot)

    G = c.T @ delta
    t4 = ((copilot - np.eye(k)) * G**2).sum(axis=1)

    terms = np.column_stack([t1, ptp * rho * t2, ptp * rho * t3, ptp * rho * t4])
    return _finish_terms(terms)


def _finish_terms(terms) -> np.ndarray:
    terms = np.asarray(terms)
    if np.iscomplexobj(terms):
        total = terms.sum(axis=1)
        scale = np.abs(terms).sum(axis=1)
        if np.any(np.abs(total.imag) > _MI_IMAG_TOL * np.abs(total.real) + 1e-12 * scale + 1e-300):
            raise FloatingPointError("mutual interference has a non-negligible imaginary part")
        terms = terms.real
    return terms


def mutual_interference(k: int, theta, net, cfg, coeffs) -> float:
    return max(float(interference_terms(theta, net, cfg, coeffs)[k].sum()), 0.0)


def _sinr_from(rho, gamma, mi) -> tuple[np.ndarray, np.ndarray]:
    no = gamma.sum(axis=0)
    signal = rho * no**2
    denom = mi + no
    sinr = np.divide(signal, denom, out=np.zeros_like(signal), where=no > 0)
    return sinr, no


def sinr(k: int, theta, net, cfg, coeffs) -> float:
    terms = interference_terms(theta, net, cfg, coeffs)
    mi = np.maximum(terms.sum(axis=1), 0.0)
    return float(_sinr_from(cfg.rho, coeffs.gamma, mi)[0][k])


def _report(cfg: SystemConfig, coeffs, terms) -> RateReport:
    mi = np.maximum(terms.sum(axis=1), 0.0)
    s, no = _sinr_from(cfg.rho, coeffs.gamma, mi)
    rate = cfg.prelog * np.log2(1.0 + s)
    objective = float(np.dot(cfg.weights, rate))
    return RateReport(sinr=s, rate=rate, objective=objective, mi=mi, no=no, mi_terms=terms, coeffs=coeffs)


def evaluate_objective(theta, net: NetworkRealization, cfg: SystemConfig) -> RateReport:
    """Full rate report for one phase vector (general dense path)."""
    theta = check_phase(theta)
    if theta.shape != (net.num_elements,):
        raise ValueError("theta must have one phase per RIS element")
    coeffs = estimation_coefficients(theta, net, cfg)
    return _report(cfg, coeffs, interference_terms(theta, net, cfg, coeffs))


class RateModel:
    """Objective bound to one realization; callable as ``model(theta) -> Mbps``.

    Uses the factored path for separable realizations unless ``dense=True``.
    """

    def __init__(self, net: NetworkRealization, cfg: SystemConfig, dense: bool = False):
        if cfg.num_users != net.num_users:
            raise ValueError("config and realization disagree on the number of users")
        self.net = net
        self.cfg = cfg
        self.factored = net.separable and not dense
        self.dim = net.num_elements
        if self.factored:
            copilot = net.copilot.astype(float)
            t, s = net.ap_ris_gain, net.ris_user_gain
            self._t, self._s = t, s
            # sum_{k'} s_k' * sum_{k'' in P_k} s_k''
            self._ii_weight = s.sum() * (copilot @ s)
            # sum_{k' in P_k} s_k'^2
            self._iii_weight = copilot @ s**2

    def report(self, theta) -> RateReport:
        theta = check_phase(theta)
        if theta.shape != (self.dim,):
            raise ValueError("theta must have one phase per RIS element")
        if not self.factored:
            coeffs = estimation_coefficients(theta, self.net, self.cfg)
            return _report(self.cfg, coeffs, interference_terms(theta, self.net, self.cfg, coeffs))

        net, cfg = self.net, self.cfg
        rho, ptp = cfg.rho, cfg.pilot_snr * cfg.pilot_len
        W = _phase_weighted(theta, net.ris_corr)
        P = W @ net.ris_corr
        tr1 = max(float(_real(np.trace(P), _TRACE_IMAG_TOL, "tr(WC)")), 0.0)
        tr2 = float(_real(np.einsum("ij,ji->", P, P), _TRACE_IMAG_TOL, "tr((WC)^2)"))
        coeffs = _coefficients_from_traces(np.outer(self._t, self._s) * tr1, net, cfg)
        delta, c, gamma = coeffs.delta, coeffs.c, coeffs.gamma
        k = delta.shape[1]
        copilot = net.copilot.astype(float)

        t1 = rho * gamma.T @ delta.sum(axis=1)
        a = c.T @ self._t
        t2 = a**2 * self._ii_weight * tr2
        t3 = (c**2).T @ self._t**2 * self._iii_weight * tr2
        G = c.T @ delta
        t4 = ((copilot - np.eye(k)) * G**2).sum(axis=1)
        terms = np.column_stack([t1, ptp * rho * t2, ptp * rho * t3, ptp * rho * t4])
        return _report(cfg, coeffs, terms)

    def __call__(self, theta) -> float:
        return self.report(theta).objective
