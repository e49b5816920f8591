"""Interference-channel data model and receiver-side quantities.

Signals are described only through second-order statistics: precoders
``V[k]`` (``M_k x d_k``), receive filters ``U[k]`` (``N_k x d_k``) and
transmit covariances ``Q[k] = V[k] V[k]^H``. All rates are in nats.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .numerics import crandn, hermitian_part, logdet_psd

PrecoderSet = List[np.ndarray]
FilterSet = List[np.ndarray]
CovarianceSet = List[np.ndarray]


@dataclass(frozen=True, eq=False)
class InterferenceChannel:
    """K-user MIMO interference channel.

    ``H[k][j]`` is the ``N[k] x M[j]`` gain from transmitter ``j`` to
    receiver ``k``.
    """

    M: tuple
    N: tuple
    H: tuple
    sigma2: float
    p: tuple

    def __post_init__(self):
        M = tuple(int(m) for m in self.M)
        N = tuple(int(n) for n in self.N)
        p = tuple(float(x) for x in self.p)
        K = len(M)
        if K < 1 or len(N) != K or len(p) != K:
            raise ValueError("M, N and p must all have length K >= 1")
        if min(M) < 1 or min(N) < 1:
            raise ValueError("antenna counts must be positive")
        if not self.sigma2 > 0 or min(p) <= 0:
            raise ValueError("noise power and power budgets must be positive")
        if len(self.H) != K or any(len(row) != K for row in self.H):
            raise ValueError("H must be a K x K array of matrices")
        H = []
        for k in range(K):
            row = []
            for j in range(K):
                h = np.array(self.H[k][j], dtype=complex)
                if h.shape != (N[k], M[j]):
                    raise ValueError(f"H[{k}][{j}] has shape {h.shape}, expected {(N[k], M[j])}")
                if not np.all(np.isfinite(h)):
                    raise ValueError(f"H[{k}][{j}] has non-finite entries")
                h.setflags(write=False)
                row.append(h)
            H.append(tuple(row))
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "H", tuple(H))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def K(self) -> int:
        return len(self.M)

    def with_power(self, p: Sequence[float], sigma2: float | None = None) -> "InterferenceChannel":
        return InterferenceChannel(self.M, self.N, self.H, self.sigma2 if sigma2 is None else sigma2, tuple(p))

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        def mat(h):
            return [[[float(z.real), float(z.imag)] for z in row] for row in h]

        return {
            "K": self.K,
            "M": list(self.M),
            "N": list(self.N),
            "sigma2": self.sigma2,
            "p": list(self.p),
            "H": [[mat(self.H[k][j]) for j in range(self.K)] for k in range(self.K)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InterferenceChannel":
        K = int(data["K"])
        H = [[np.array([[complex(re, im) for re, im in row] for row in data["H"][k][j]], dtype=complex).reshape(
            int(data["N"][k]), int(data["M"][j])) for j in range(K)] for k in range(K)]
        ch = cls(tuple(data["M"]), tuple(data["N"]), H, float(data["sigma2"]), tuple(data["p"]))
        if ch.K != K:
            raise ValueError("K does not match the antenna lists")
        return ch

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "InterferenceChannel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "InterferenceChannel":
        return cls.loads(Path(path).read_text())


def gen_rayleigh(K, M, N, sigma2=1.0, p=1.0, seed=0) -> InterferenceChannel:
    """Draw an iid Rayleigh-fading channel (unit-variance CN entries).

    `M`, `N` and `p` may be scalars (shared by all users) or length-K
    sequences.
    """
    if K < 1:
        raise ValueError("K must be positive")
    M = _per_user(M, K, int)
    N = _per_user(N, K, int)
    p = _per_user(p, K, float)
    if min(M) < 1 or min(N) < 1:
        raise ValueError("antenna counts must be positive")
    rng = np.random.default_rng(seed)
    H = [[crandn(rng, N[k], M[j]) for j in range(K)] for k in range(K)]
    return InterferenceChannel(M, N, H, sigma2, p)


def _per_user(x, K, cast):
    if np.ndim(x) == 0:
        return tuple(cast(x) for _ in range(K))
    x = tuple(cast(v) for v in x)
    if len(x) != K:
        raise ValueError(f"expected {K} per-user values, got {len(x)}")
    return x


def covariances(v: PrecoderSet) -> CovarianceSet:
    return [hermitian_part(vk @ vk.conj().T) for vk in v]


def received_covariance(ch: InterferenceChannel, q: CovarianceSet, k: int, exclude=()) -> np.ndarray:
    """``sigma2 I + sum_{l not in exclude} H_kl Q_l H_kl^H`` at receiver `k`."""
    c = ch.sigma2 * np.eye(ch.N[k], dtype=complex)
    for l in range(ch.K):
        if l in exclude:
            continue
        h = ch.H[k][l]
        c = c + h @ q[l] @ h.conj().T
    return hermitian_part(c)


def mmse_receivers(ch: InterferenceChannel, v: PrecoderSet) -> FilterSet:
    """Unit-norm linear MMSE receive filters, one column per stream."""
    u = []
    for k in range(ch.K):
        total = received_covariance(ch, covariances(v), k)
        uk = np.linalg.solve(total, ch.H[k][k] @ v[k])
        norms = np.linalg.norm(uk, axis=0)
        norms[norms == 0] = 1.0
        u.append(uk / norms)
    return u


def stream_sinr(ch: InterferenceChannel, v: PrecoderSet, u: FilterSet) -> List[np.ndarray]:
    """Per-stream SINR for explicit transmit and receive beamformers."""
    out = []
    for k in range(ch.K):
        gains = [u[k].conj().T @ ch.H[k][j] @ v[j] for j in range(ch.K)]
        power = [np.abs(g) ** 2 for g in gains]
        total = sum(pw.sum(axis=1) for pw in power)
        noise = ch.sigma2 * np.sum(np.abs(u[k]) ** 2, axis=0)
        signal = np.real(np.diag(power[k])) if power[k].size else np.zeros(0)
        den = noise + total - signal
        out.append(np.divide(signal, den, out=np.zeros_like(signal), where=den > 0))
    return out


def sinr_mmse(ch: InterferenceChannel, v: PrecoderSet) -> List[np.ndarray]:
    """Per-stream SINR achieved by MMSE receivers, via the closed form."""
    q = covariances(v)
    out = []
    for k in range(ch.K):
        total = received_covariance(ch, q, k)
        g = ch.H[k][k] @ v[k]
        gam = np.empty(v[k].shape[1])
        for s in range(v[k].shape[1]):
            x = g[:, s]
            c = total - np.outer(x, x.conj())
            gam[s] = np.real(x.conj() @ np.linalg.solve(c, x))
        out.append(gam)
    return out


def dof_utility(ch: InterferenceChannel, q: CovarianceSet) -> np.ndarray:
    """Per-user ``tr[H_kk Q_k H_kk^H (sigma2 I + sum_l H_kl Q_l H_kl^H)^{-1}]``."""
    out = np.empty(ch.K)
    for k in range(ch.K):
        total = received_covariance(ch, q, k)
        h = ch.H[k][k]
        out[k] = np.real(np.trace(np.linalg.solve(total, h @ q[k] @ h.conj().T)))
    return out


def user_rate(ch: InterferenceChannel, q: CovarianceSet) -> np.ndarray:
    """Per-user achievable rate in nats, interference treated as noise."""
    out = np.empty(ch.K)
    for k in range(ch.K):
        c = received_covariance(ch, q, k, exclude=(k,))
        h = ch.H[k][k]
        out[k] = logdet_psd(c + h @ q[k] @ h.conj().T) - logdet_psd(c)
    return np.maximum(out, 0.0)


def sum_rate_bits(ch: InterferenceChannel, q: CovarianceSet) -> float:
    return float(np.sum(user_rate(ch, q)) / np.log(2.0))
