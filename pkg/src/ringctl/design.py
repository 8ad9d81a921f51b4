"""Closed-loop error budget and plaintext-modulus sizing.

From a geometric decay certificate ||A^k|| <= alpha*gamma^k of the nominal
closed loop, the quantization perturbations translate into the worst-case
deviation bound eps(L, s) and into lower bounds on the plaintext modulus for
both encrypted designs.  All norms are infinity norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SInvalid, Unstable
from .ring import is_probable_prime

_CERT_CHECK_FACTOR = 10  # certificate re-verified for k up to this multiple of K


def _inf_norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def _vec_norm(v) -> float:
    v = np.asarray(v, dtype=float).ravel()
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass(frozen=True)
class ClosedLoopModel:
    """Stacked plant+controller loop driven by the perturbation input e(k)."""

    A_cl: np.ndarray
    B_cl: np.ndarray
    C_cl: np.ndarray
    D_cl: np.ndarray
    x_cl0: np.ndarray

    @classmethod
    def assemble(cls, A, B, C, F, G, H, xp0, x0) -> "ClosedLoopModel":
        A, B, C = np.atleast_2d(A), np.atleast_2d(B), np.atleast_2d(C)
        F, G, H = np.atleast_2d(F), np.atleast_2d(G), np.atleast_2d(H)
        n_p, n = A.shape[0], F.shape[0]
        h, l = H.shape[0], C.shape[0]
        A_cl = np.block([[A, B @ H], [G @ C, F]])
        B_cl = np.block([[B, np.zeros((n_p, n))], [np.zeros((n, h)), np.eye(n)]])
        C_cl = np.block([[C, np.zeros((l, n))], [np.zeros((h, n_p)), H]])
        D_cl = np.block([[np.zeros((l, h)), np.zeros((l, n))], [np.eye(h), np.zeros((h, n))]])
        x_cl0 = np.concatenate([np.asarray(xp0, dtype=float).ravel(),
                                np.asarray(x0, dtype=float).ravel()])
        model = cls(A_cl, B_cl, C_cl, D_cl, x_cl0)
        rho = model.spectral_radius
        if rho >= 1.0:
            raise Unstable(f"closed loop is not Schur stable (rho = {rho:.6f})")
        return model

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A_cl))))


@dataclass(frozen=True)
class ErrorBudget:
    alpha: float
    gamma: float
    beta: float
    S: float
    eps: tuple  # (eps0, eps1, eps2, eps3)
    Delta: float = float("nan")
    delta: float = float("nan")
    U: float = float("nan")
    U_hat: float = float("nan")


def decay_certificate(A_cl: np.ndarray, gamma: float = None) -> tuple:
    """(alpha, gamma) with ||A^k|| <= alpha*gamma^k for all k.

    gamma defaults to the midpoint between the spectral radius and 1; alpha
    is the largest ratio ||A^k||/gamma^k up to the first index K where the
    power norm falls below gamma^k, and the certificate is then re-verified
    out to 10*K.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
    if rho >= 1.0:
        raise Unstable(f"spectral radius {rho:.6f} >= 1")
    if gamma is None:
        gamma = (rho + 1.0) / 2.0
    alpha = 1.0
    Ak = np.eye(A_cl.shape[0])
    K = None
    k = 0
    while K is None:
        k += 1
        Ak = A_cl @ Ak
        norm = _inf_norm(Ak)
        alpha = max(alpha, norm / gamma**k)
        if norm <= gamma**k:
            K = k
        if k > 100_000:
            raise Unstable("certificate search did not terminate")
    for k in range(K + 1, _CERT_CHECK_FACTOR * K + 1):
        Ak = A_cl @ Ak
        if _inf_norm(Ak) > alpha * gamma**k * (1 + 1e-9):
            raise Unstable(f"certificate violated at k = {k}")
    return alpha, gamma


def epsilon_vector(model: ClosedLoopModel, M: np.ndarray, n_bar: int,
                   z0: np.ndarray, alpha: float = None, gamma: float = None) -> ErrorBudget:
    """The constants (eps0..eps3) of the deviation bound, plus diagnostics."""
    if alpha is None or gamma is None:
        alpha, gamma = decay_certificate(model.A_cl)
    normC = _inf_norm(model.C_cl)
    normB = _inf_norm(model.B_cl)
    beta = 1.0 + alpha * normC * normB / (1.0 - gamma)
    normM = _inf_norm(M)
    normx0 = _vec_norm(model.x_cl0)
    normz0 = _vec_norm(z0)
    eps = (
        n_bar * beta / 2.0,
        normM * (alpha * normC + beta) / 2.0,
        n_bar * beta / 4.0,
        n_bar * beta * (alpha * normC * normx0 + normz0) / 2.0,
    )
    S = alpha * normC * normx0
    return ErrorBudget(alpha=alpha, gamma=gamma, beta=beta, S=S, eps=eps)


def with_diagnostics(budget: ErrorBudget, model: ClosedLoopModel, M: np.ndarray,
                     n_bar: int, z0: np.ndarray, L: float, s: float) -> ErrorBudget:
    """Attach the proof-internal envelopes Delta, delta, U, U_hat for reporting."""
    alpha, beta = budget.alpha, budget.beta
    normC = _inf_norm(model.C_cl)
    normM = _inf_norm(M)
    normx0 = _vec_norm(model.x_cl0)
    normz0 = _vec_norm(z0)
    denom = 1.0 - s * n_bar * beta / 2.0
    delta = float("inf") if denom <= 0 else (
        (s * n_bar / 2.0) * (alpha * normC * normx0 + (L / 2.0) * alpha * normC * normM + L / 2.0) / denom)
    Delta = max((L / 2.0) * normM, (s * n_bar / 2.0) * (normz0 + L / 2.0), delta)
    U = alpha * normC * (normx0 + (L / 2.0) * normM) + beta * Delta
    U_hat = (L / 2.0) * alpha * normC * normM + beta * Delta
    return ErrorBudget(alpha=alpha, gamma=budget.gamma, beta=beta, S=budget.S,
                       eps=budget.eps, Delta=Delta, delta=delta, U=U, U_hat=U_hat)


def epsilon_of(L: float, s: float, eps: Sequence[float]) -> float:
    """(eps1*L + eps2*L*s + eps3*s) / (1 - eps0*s); requires 1/s > eps0."""
    eps0, eps1, eps2, eps3 = eps
    denom = 1.0 - eps0 * s
    if denom <= 0:
        raise SInvalid(f"1/s = {1.0 / s:.6g} does not exceed eps0 = {eps0:.6g}")
    return (eps1 * L + eps2 * L * s + eps3 * s) / denom


def bound_S(model: ClosedLoopModel, alpha: float = None, gamma: float = None) -> float:
    """Signal envelope of the unperturbed loop: S = alpha * ||C|| * ||x0||."""
    if alpha is None:
        alpha, gamma = decay_certificate(model.A_cl)
    return alpha * _inf_norm(model.C_cl) * _vec_norm(model.x_cl0)


def next_ntt_prime(lower: float, p: int) -> int:
    """Smallest prime N > lower with N = 1 (mod 2p)."""
    if not math.isfinite(lower):
        raise SInvalid("modulus bound is not finite")
    step = 2 * p
    N = (max(int(lower), step) // step + 1) * step + 1
    while not is_probable_prime(N):
        N += step
    return N


def min_modulus_general(L: float, s: float, eps: Sequence[float], S: float,
                        z0: np.ndarray, p: int) -> int:
    """Smallest packing-friendly prime satisfying the elementwise design bound."""
    e = epsilon_of(L, s, eps)
    lhs = (1.0 / L) * max((e + S) / s, _vec_norm(z0)) + 0.5
    return next_ntt_prime(2.0 * lhs, p)


def min_modulus_packed(L: float, s: float, eps: Sequence[float], S: float,
                       z0: np.ndarray, H_blocks: Sequence[np.ndarray], n: int,
                       p: int) -> int:
    """Packed-design bound: the slot values carry the gain-window inner products."""
    e = epsilon_of(L, s, eps)
    lhs = ((1.0 / L) * max(e + S, _vec_norm(z0)) + 0.5) * ((1.0 / s) * vec_sum_norm(H_blocks) + n)
    return next_ntt_prime(2.0 * lhs, p)


def vec_sum_norm(H_blocks: Sequence[np.ndarray]) -> float:
    """||vec(sum_i H_i^T)|| with narrower blocks zero-padded to a common width."""
    h = H_blocks[0].shape[0]
    wmax = max(b.shape[1] for b in H_blocks)
    acc = np.zeros((wmax, h))
    for b in H_blocks:
        padded = np.zeros((wmax, h))
        padded[: b.shape[1], :] = b.T
        acc += padded
    return float(np.max(np.abs(acc)))
