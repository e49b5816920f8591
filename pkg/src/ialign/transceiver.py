"""Transmit covariance / beamformer design on the interference channel.

Two iterative schemes are provided:

* :func:`run_sum_rate` -- Gauss-Seidel sweeps that, for each user, refresh
  the weight matrices and maximize a concave lower bound of the weighted
  utility in that user's covariance (interference terms linearized).
* :func:`run_unselfish` -- each transmitter spends its full power along the
  least-harmful directions of the interference price matrix ``B_k``.

plus a classical alternating leakage-minimization baseline.

Notation: ``S_k = H_kk Q_k H_kk^H`` is the desired-signal covariance at
receiver ``k``, ``Sigma_k`` the full received covariance, ``C_jk`` the
received covariance at ``j`` without user ``k``. Rates are in nats.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence

import numpy as np

from .channel import (CovarianceSet, InterferenceChannel, PrecoderSet, covariances,
                      received_covariance, user_rate)
from .numerics import canonical_phase, hermitian_part, orth, project_psd_trace

log = logging.getLogger(__name__)

WeightSet = List[np.ndarray]


@dataclass
class AlgoConfig:
    """Tuning knobs shared by the iterative algorithms.

    ``relax`` blends the subproblem solution with the previous iterate,
    ``Q_k <- relax * Q_k* + (1 - relax) * Q_k``. ``weight_refresh="all"``
    re-evaluates every user's weight matrix after each covariance update so
    that ``B_k`` is the exact gradient of the other users' rates; ``"own"``
    only refreshes user ``k``'s weight as in the plain sweep.

    ``extrapolate`` adds a safeguarded step ``P(Q + beta (Q - Q_prev))``
    after each sweep, kept only if it raises the weighted sum rate, so the
    potential stays monotone. It shortens the slow linear tail seen when
    the optimum is rank deficient. ``beta`` doubles on success (up to 8)
    and resets to 1 on failure.
    """

    alpha: Optional[Sequence[float]] = None
    relax: float = 1.0
    tol: float = 1e-6
    max_outer: int = 500
    sub_tol: float = 1e-8
    sub_max_iter: int = 20000
    weight_refresh: Literal["all", "own"] = "all"
    extrapolate: bool = False

    def __post_init__(self):
        if not 0 < self.relax <= 1:
            raise ValueError("relax must lie in (0, 1]")
        if not (self.tol > 0 and self.sub_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.weight_refresh not in ("all", "own"):
            raise ValueError("weight_refresh must be 'all' or 'own'")

    def weights_for(self, K: int) -> np.ndarray:
        if self.alpha is None:
            return np.ones(K)
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (K,) or np.any(a <= 0):
            raise ValueError(f"alpha must be {K} positive user weights")
        return a


@dataclass
class TraceRecord:
    iter: int
    psi1: float
    wsr_nats: float
    dq_fro: float
    residuals: List[float] = field(default_factory=list)
    leakage: float = float("nan")


@dataclass
class IterationTrace:
    records: List[TraceRecord] = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def psi1(self) -> np.ndarray:
        return np.array([r.psi1 for r in self.records])

    @property
    def wsr(self) -> np.ndarray:
        return np.array([r.wsr_nats for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iter", "psi1", "wsr_nats", "dq_fro", "per_user_residuals"])
            for r in self.records:
                out.writerow([r.iter, repr(r.psi1), repr(r.wsr_nats), repr(r.dq_fro),
                              ";".join(repr(x) for x in r.residuals)])


class SubproblemError(RuntimeError):
    """The per-user covariance subproblem could not be solved."""


# -- weights and objectives ---------------------------------------------


def interference_cov(ch: InterferenceChannel, q: CovarianceSet, j: int, k: int) -> np.ndarray:
    """``C_jk``: covariance at receiver ``j`` with user ``k``'s signal removed."""
    return received_covariance(ch, q, j, exclude=(k,))


def g_matrix(ch: InterferenceChannel, q: CovarianceSet, k: int) -> np.ndarray:
    """``g_k(Q) = I - S_k Sigma_k^{-1} = C_kk Sigma_k^{-1}``."""
    total = received_covariance(ch, q, k)
    h = ch.H[k][k]
    s = h @ q[k] @ h.conj().T
    return np.eye(ch.N[k]) - np.linalg.solve(total.T, s.T).T


def weight_update(ch: InterferenceChannel, q: CovarianceSet, k: int) -> np.ndarray:
    """Optimal weight ``W_k = I + S_k C_kk^{-1}`` (equal to ``g_k(Q)^{-1}``)."""
    c = interference_cov(ch, q, k, k)
    h = ch.H[k][k]
    s = h @ q[k] @ h.conj().T
    return np.eye(ch.N[k]) + np.linalg.solve(c.T, s.T).T


def optimal_weights(ch: InterferenceChannel, q: CovarianceSet) -> WeightSet:
    return [weight_update(ch, q, k) for k in range(ch.K)]


def _check_weight(wk: np.ndarray) -> None:
    lam = np.linalg.eigvals(wk)
    scale = max(1.0, np.abs(lam).max())
    if np.any(lam.real <= 1e-12) or np.any(np.abs(lam.imag) > 1e-8 * scale):
        raise ValueError("weight matrix must have a positive real spectrum")


def psi1(ch: InterferenceChannel, q: CovarianceSet, w: WeightSet, alpha) -> float:
    """``sum_k alpha_k tr(W_k g_k(Q)) - sum_k alpha_k log det W_k``."""
    val = 0.0
    for k in range(ch.K):
        _check_weight(w[k])
        _, ld = np.linalg.slogdet(w[k])
        val += alpha[k] * (np.real(np.trace(w[k] @ g_matrix(ch, q, k))) - ld)
    return float(val)


def psi2(ch: InterferenceChannel, q: CovarianceSet, alpha) -> float:
    """``sum_k alpha_k log det g_k(Q)``, the negated weighted sum rate."""
    val = 0.0
    for k in range(ch.K):
        _, ld = np.linalg.slogdet(g_matrix(ch, q, k))
        val += alpha[k] * ld
    return float(val)


def weighted_sum_rate(ch: InterferenceChannel, q: CovarianceSet, alpha) -> float:
    return float(np.dot(alpha, user_rate(ch, q)))


def compute_B(ch: InterferenceChannel, q: CovarianceSet, w: WeightSet, alpha, k: int) -> np.ndarray:
    """Interference price matrix of user ``k`` at the current point.

    ``B_k = sum_{j != k} H_jk^H Sigma_j^{-1} alpha_j W_j S_j Sigma_j^{-1} H_jk``.
    """
    b = np.zeros((ch.M[k], ch.M[k]), dtype=complex)
    for j in range(ch.K):
        if j == k:
            continue
        hjk = ch.H[j][k]
        if not np.any(hjk):
            continue
        total = received_covariance(ch, q, j)
        hjj = ch.H[j][j]
        s = hjj @ q[j] @ hjj.conj().T
        tinv = np.linalg.inv(total)
        mid = hermitian_part(tinv @ (alpha[j] * w[j] @ s) @ tinv)
        b += hjk.conj().T @ mid @ hjk
    return hermitian_part(b)


def coordinate_objective(ch: InterferenceChannel, w: WeightSet, q: CovarianceSet, alpha, k: int, qk) -> float:
    """Utility ``sum_j alpha_j tr[W_j S_j Sigma_j^{-1}]`` as a function of ``Q_k`` alone."""
    qq = list(q)
    qq[k] = qk
    val = 0.0
    for j in range(ch.K):
        total = received_covariance(ch, qq, j)
        h = ch.H[j][j]
        s = h @ qq[j] @ h.conj().T
        val += alpha[j] * np.real(np.trace(w[j] @ s @ np.linalg.inv(total)))
    return float(val)


def lower_bound_obj(ch: InterferenceChannel, w: WeightSet, q: CovarianceSet, b_k, alpha, k: int, qk) -> float:
    """Concave surrogate ``alpha_k tr[W_k S_k Sigma_k^{-1}] - tr[B_k Q_k]``.

    Only ``q[j]`` for ``j != k`` is read from `q`; ``qk`` is the variable.
    """
    c = interference_cov(ch, q, k, k)
    h = ch.H[k][k]
    s = h @ qk @ h.conj().T
    own = np.real(np.trace(w[k] @ s @ np.linalg.inv(c + s)))
    return float(alpha[k] * own - np.real(np.trace(b_k @ qk)))


def lower_bound_grad(ch: InterferenceChannel, w: WeightSet, q: CovarianceSet, b_k, alpha, k: int, qk) -> np.ndarray:
    c = interference_cov(ch, q, k, k)
    h = ch.H[k][k]
    tinv = np.linalg.inv(c + h @ qk @ h.conj().T)
    a = hermitian_part(w[k] @ c)
    return hermitian_part(alpha[k] * h.conj().T @ tinv @ a @ tinv @ h - b_k)


def wsr_gradient(ch: InterferenceChannel, q: CovarianceSet, alpha, k: int) -> np.ndarray:
    """Gradient of ``sum_j alpha_j R_j`` with respect to ``Q_k`` (nats)."""
    g = np.zeros((ch.M[k], ch.M[k]), dtype=complex)
    for j in range(ch.K):
        h = ch.H[j][k]
        if not np.any(h):
            continue
        total_inv = np.linalg.inv(received_covariance(ch, q, j))
        if j == k:
            g += alpha[j] * h.conj().T @ total_inv @ h
        else:
            c_inv = np.linalg.inv(interference_cov(ch, q, j, j))
            g -= alpha[j] * h.conj().T @ (c_inv - total_inv) @ h
    return hermitian_part(g)


def projected_residual(qk, grad, cap: float) -> float:
    """``||P(Q + grad) - Q||_F`` with ``P`` the projection onto the power set."""
    return float(np.linalg.norm(project_psd_trace(qk + grad, cap) - qk))


def wsr_stationarity(ch: InterferenceChannel, q: CovarianceSet, alpha) -> np.ndarray:
    """Per-user projected-gradient residual of the weighted sum rate."""
    return np.array([projected_residual(q[k], wsr_gradient(ch, q, alpha, k), ch.p[k]) for k in range(ch.K)])


# -- per-user subproblem --------------------------------------------------


def solve_subproblem(ch: InterferenceChannel, w: WeightSet, q: CovarianceSet, alpha, k: int,
                     sub_tol: float = 1e-8, b_k=None, max_iter: int = 20000, return_info: bool = False):
    """Maximize the concave surrogate over ``{Q_k >= 0, tr Q_k <= p_k}``.

    Projected gradient ascent with Barzilai-Borwein trial steps and a
    backtracking safeguard, warm-started at ``q[k]``. Stops when the
    unit-step projected-gradient residual drops below `sub_tol`.

    The sufficient-increase test is ``<grad(x+), d> >= c <grad(x), d>``; by
    concavity this implies the Armijo condition while avoiding the
    cancellation in ``f(x+) - f(x)`` close to the optimum.
    """
    _check_weight(w[k])
    if b_k is None:
        b_k = compute_B(ch, q, w, alpha, k)
    h = ch.H[k][k]
    if np.linalg.matrix_rank(h) < min(h.shape) or h.shape[0] < h.shape[1]:
        log.debug("user %d: direct channel not full-rank tall, maximizer may not be unique", k)
    c = interference_cov(ch, q, k, k)
    a = alpha[k] * hermitian_part(w[k] @ c)
    hh = h.conj().T
    cap = ch.p[k]

    def grad(x):
        tinv = np.linalg.inv(c + h @ x @ hh)
        return hermitian_part(hh @ tinv @ a @ tinv @ h - b_k)

    x = project_psd_trace(q[k], cap)
    g = grad(x)
    step = max(cap, 1e-12) / max(np.linalg.norm(g), 1e-300) * 1e-2
    res = projected_residual(x, g, cap)
    it = 0
    retried = False
    while res > sub_tol and it < max_iter:
        it += 1
        t = step
        while True:
            xn = project_psd_trace(x + t * g, cap)
            d = xn - x
            gn = grad(xn)
            slope = np.real(np.vdot(g, d))
            if np.real(np.vdot(gn, d)) >= 1e-4 * slope or t < 1e-30:
                break
            t *= 0.5
        if t < 1e-30 or slope <= 0:
            # near a boundary vertex the gain of short steps drowns in rounding; the unit step is
            # the one the residual measures, so give it one try before stopping
            if retried:
                break
            retried = True
            step = 1.0
            continue
        sy = -np.real(np.vdot(d, gn - g))
        ss = np.real(np.vdot(d, d))
        step = ss / sy if sy > 1e-300 else 2 * t
        step = float(np.clip(step, 1e-12 * t, 1e12 * t))
        x, g = xn, gn
        res = projected_residual(x, g, cap)
    if not np.all(np.isfinite(x)):
        raise SubproblemError(f"user {k}: non-finite iterate")
    if return_info:
        return x, {"residual": res, "iterations": it}
    return x


# -- sum-rate algorithm ----------------------------------------------------


def run_sum_rate(ch: InterferenceChannel, cfg: Optional[AlgoConfig] = None, q0=None):
    """Iterative concave-lower-bound algorithm for weighted sum-rate maximization.

    Returns ``(Q, trace)``. Record 0 of the trace is the initial point;
    ``psi1`` is evaluated at the optimal weights for the recorded ``Q``.
    """
    cfg = cfg or AlgoConfig()
    alpha = cfg.weights_for(ch.K)
    K = ch.K
    if q0 is None:
        q = [ch.p[k] / ch.M[k] * np.eye(ch.M[k], dtype=complex) for k in range(K)]
    else:
        q = [np.array(x, dtype=complex) for x in q0]
    w = [np.eye(ch.N[k], dtype=complex) for k in range(K)]
    const = float(np.dot(alpha, ch.N))
    trace = IterationTrace()
    trace.records.append(TraceRecord(0, psi2(ch, q, alpha) + const, weighted_sum_rate(ch, q, alpha), float("nan")))
    beta = 1.0
    for it in range(1, cfg.max_outer + 1):
        q_prev = [x.copy() for x in q]
        residuals = []
        for k in range(K):
            if cfg.weight_refresh == "all":
                w = optimal_weights(ch, q)
            else:
                w[k] = weight_update(ch, q, k)
            try:
                qs, info = solve_subproblem(ch, w, q, alpha, k, cfg.sub_tol, max_iter=cfg.sub_max_iter,
                                            return_info=True)
            except (np.linalg.LinAlgError, SubproblemError) as exc:
                log.warning("subproblem failed at sweep %d user %d: %s", it, k, exc)
                trace.converged = False
                return q, trace
            residuals.append(info["residual"])
            q[k] = hermitian_part(cfg.relax * qs + (1 - cfg.relax) * q[k])
            if cfg.weight_refresh == "all":
                w = optimal_weights(ch, q)
            else:
                w[k] = weight_update(ch, q, k)
        wsr = weighted_sum_rate(ch, q, alpha)
        if cfg.extrapolate:
            y = [project_psd_trace(q[k] + beta * (q[k] - q_prev[k]), ch.p[k]) for k in range(K)]
            wy = weighted_sum_rate(ch, y, alpha)
            if wy > wsr:
                q, wsr = y, wy
                beta = min(2 * beta, 8.0)
            else:
                beta = 1.0
        dq = float(np.sqrt(sum(np.linalg.norm(q[k] - q_prev[k]) ** 2 for k in range(K))))
        trace.records.append(TraceRecord(it, psi2(ch, q, alpha) + const, wsr, dq, residuals))
        if dq <= cfg.tol:
            trace.converged = True
            break
    return q, trace


# -- unselfish updates -----------------------------------------------------


def least_harmful_directions(b: np.ndarray, d: int, h_direct: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal ``d`` eigenvectors of `b` for its smallest eigenvalues.

    Directions inside a degenerate eigenspace at the cut (including the
    all-zero ``b``) are picked as the strongest right-singular directions of
    ``h_direct`` restricted to that eigenspace; each column is phase
    normalized.
    """
    lam, vec = np.linalg.eigh(hermitian_part(b))
    scale = max(np.abs(lam).max(), 1e-300)
    tol = rtol * scale
    cut = lam[d - 1]
    below = np.nonzero(lam < cut - tol)[0]
    tied = np.nonzero(np.abs(lam - cut) <= tol)[0]
    need = d - below.size
    cols = [vec[:, below]]
    if need > 0:
        e = vec[:, tied]
        _, _, vh = np.linalg.svd(h_direct @ e)
        cols.append(e @ vh.conj().T[:, :need])
    out = np.concatenate(cols, axis=1)
    out = orth_columns(out)
    return np.column_stack([canonical_phase(out[:, i]) for i in range(d)])


def orth_columns(x: np.ndarray) -> np.ndarray:
    qm, r = np.linalg.qr(x)
    return qm * np.sign(np.real(np.diag(r)) + (np.real(np.diag(r)) == 0))


def rank_one_unselfish(ch: InterferenceChannel, q: CovarianceSet, w: WeightSet, alpha, k: int, b_k=None) -> np.ndarray:
    """``Q_k = p_k q q^H`` with ``q`` the least-eigenvalue eigenvector of ``B_k``."""
    if b_k is None:
        b_k = compute_B(ch, q, w, alpha, k)
    v = least_harmful_directions(b_k, 1, ch.H[k][k])[:, 0]
    return ch.p[k] * np.outer(v, v.conj())


def unselfish_update(ch: InterferenceChannel, q: CovarianceSet, w: WeightSet, alpha, k: int, d_k: int,
                     b_k=None) -> np.ndarray:
    """Beamformer minimizing ``tr(V^H B_k V)`` subject to ``V^H V = (p_k/d_k) I``."""
    if not 1 <= d_k <= ch.M[k]:
        raise ValueError(f"d_k must lie in [1, {ch.M[k]}]")
    if b_k is None:
        b_k = compute_B(ch, q, w, alpha, k)
    return np.sqrt(ch.p[k] / d_k) * least_harmful_directions(b_k, d_k, ch.H[k][k])


def cross_interference(ch: InterferenceChannel, v: PrecoderSet) -> float:
    """Total power ``sum_k sum_{j != k} ||H_jk V_k||_F^2`` leaked to other receivers."""
    return float(sum(np.linalg.norm(ch.H[j][k] @ v[k]) ** 2
                     for k in range(ch.K) for j in range(ch.K) if j != k))


def run_unselfish(ch: InterferenceChannel, d: Sequence[int], cfg: Optional[AlgoConfig] = None, v0=None):
    """Unselfish sweeps for sum-DoF maximization. Returns ``(V, trace)``.

    Convergence is declared when the covariance change ``||V V^H - V' V'^H||_F``
    over a sweep falls below ``cfg.tol``.
    """
    cfg = cfg or AlgoConfig()
    alpha = cfg.weights_for(ch.K)
    K = ch.K
    d = [int(x) for x in d]
    if len(d) != K or any(not 1 <= d[k] <= ch.M[k] for k in range(K)):
        raise ValueError("need 1 <= d_k <= M_k for every user")
    if v0 is None:
        v = [np.zeros((ch.M[k], d[k]), dtype=complex) for k in range(K)]
        w = [np.eye(ch.N[k], dtype=complex) for k in range(K)]
    else:
        v = [np.sqrt(ch.p[k] / d[k]) * orth_columns(np.asarray(v0[k], dtype=complex)) for k in range(K)]
        w = optimal_weights(ch, covariances(v))
    q = covariances(v)
    const = float(np.dot(alpha, ch.N))
    trace = IterationTrace()
    for it in range(1, cfg.max_outer + 1):
        q_prev = [x.copy() for x in q]
        for k in range(K):
            b = compute_B(ch, q, w, alpha, k)
            v[k] = unselfish_update(ch, q, w, alpha, k, d[k], b_k=b)
            q[k] = hermitian_part(v[k] @ v[k].conj().T)
            if cfg.weight_refresh == "all":
                w = optimal_weights(ch, q)
            else:
                w[k] = weight_update(ch, q, k)
        dq = float(np.sqrt(sum(np.linalg.norm(q[k] - q_prev[k]) ** 2 for k in range(K))))
        trace.records.append(TraceRecord(it, psi2(ch, q, alpha) + const, weighted_sum_rate(ch, q, alpha), dq,
                                         leakage=cross_interference(ch, v)))
        if dq <= cfg.tol:
            trace.converged = True
            break
    return v, trace


# -- leakage-minimization baseline --------------------------------------


def interference_leakage(ch: InterferenceChannel, v: PrecoderSet, u: Sequence[np.ndarray]) -> float:
    """``sum_k sum_{j != k} ||U_k^H H_kj V_j||_F^2``."""
    return float(sum(np.linalg.norm(u[k].conj().T @ ch.H[k][j] @ v[j]) ** 2
                     for k in range(ch.K) for j in range(ch.K) if j != k))


def _smallest_eigvecs(a: np.ndarray, d: int) -> np.ndarray:
    _, vec = np.linalg.eigh(hermitian_part(a))
    return vec[:, :d]


def leakage_min_baseline(ch: InterferenceChannel, d: Sequence[int], iters: int = 1000, seed: int = 0,
                         tol: float = 0.0, callback=None):
    """Alternating leakage minimization (forward receive / reverse transmit steps).

    Transmit precoders are ``sqrt(p_j/d_j)`` times orthonormal columns. Both
    half-steps minimize the same power-weighted leakage
    ``sum_k sum_{j != k} (p_j/d_j) ||U_k^H H_kj Vbar_j||_F^2`` (``Vbar_j``
    orthonormal), so it never increases.

    Returns ``(V, U, history)`` where ``history`` holds the leakage after
    every half-iteration. ``callback(it, V)``, if given, sees the scaled
    precoders after every full iteration.
    """
    K = ch.K
    d = [int(x) for x in d]
    if len(d) != K or any(not 1 <= d[k] <= min(ch.M[k], ch.N[k]) for k in range(K)):
        raise ValueError("need 1 <= d_k <= min(M_k, N_k) for every user")
    rng = np.random.default_rng(seed)
    vbar = []
    for k in range(K):
        x = rng.standard_normal((ch.M[k], d[k])) + 1j * rng.standard_normal((ch.M[k], d[k]))
        vbar.append(np.linalg.qr(x)[0])
    scale = [ch.p[k] / d[k] for k in range(K)]
    u = [np.zeros((ch.N[k], d[k]), dtype=complex) for k in range(K)]

    def leak():
        return sum(scale[j] * np.linalg.norm(u[k].conj().T @ ch.H[k][j] @ vbar[j]) ** 2
                   for k in range(K) for j in range(K) if j != k)

    history = []
    for it in range(1, iters + 1):
        for k in range(K):
            a = np.zeros((ch.N[k], ch.N[k]), dtype=complex)
            for j in range(K):
                if j != k:
                    g = ch.H[k][j] @ vbar[j]
                    a += scale[j] * g @ g.conj().T
            u[k] = _smallest_eigvecs(a, d[k])
        history.append(float(leak()))
        for j in range(K):
            a = np.zeros((ch.M[j], ch.M[j]), dtype=complex)
            for k in range(K):
                if k != j:
                    g = ch.H[k][j].conj().T @ u[k]
                    a += scale[j] * g @ g.conj().T
            vbar[j] = _smallest_eigvecs(a, d[j])
        history.append(float(leak()))
        if callback is not None:
            callback(it, [np.sqrt(scale[k]) * vbar[k] for k in range(K)])
        if history[-1] <= tol:
            break
    v = [np.sqrt(scale[k]) * vbar[k] for k in range(K)]
    return v, u, history


def normalized_leakage(ch: InterferenceChannel, v: PrecoderSet, u: Sequence[np.ndarray]) -> float:
    """Leakage per unit transmit power: precoder columns rescaled to unit norm."""
    vn = []
    for vk in v:
        n = np.linalg.norm(vk, axis=0)
        n[n == 0] = 1.0
        vn.append(vk / n)
    return interference_leakage(ch, vn, u)
