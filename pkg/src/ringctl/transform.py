"""Re-realization of a linear controller as a moving window of past I/O.

Output injection with a deadbeat gain R makes Fbar = F - R*H (numerically)
nilpotent, after which the state is a fixed linear function x(k) = M z(k) of
the last n inputs and outputs.  The window itself updates through exact 0/1
shift matrices, so the only real-valued gain left in the loop is HM.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import place_poles

from .errors import DimMismatch, NotControllable, NotObservable

_RANK_RTOL = 1e-9          # singular-value threshold, relative to sigma_max
_NILPOTENCY_RTOL = 1e-8    # allowed ||Fbar^n|| relative to ||F||^n
_POLE_RADIUS = 1e-4        # placement radius for the multi-output gain


def _inf_norm(M: np.ndarray) -> float:
    M = np.atleast_2d(M)
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


@dataclass(frozen=True)
class ControllerRealization:
    """State-space controller x+ = Fx + Gy, u = Hx with initial state x0."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        x0 = np.asarray(self.x0, dtype=float).ravel()
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "x0", x0)
        n = F.shape[0]
        if F.shape != (n, n) or G.shape[0] != n or H.shape[1] != n or x0.shape[0] != n:
            raise DimMismatch("controller matrix dimensions are inconsistent")

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def l(self) -> int:
        return self.G.shape[1]

    @property
    def h(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class TransformedController:
    """Window realization: z+ = Fcal z + Gcal y + Rcal u, u = Hcal z."""

    M: np.ndarray
    z0: np.ndarray
    Hcal: np.ndarray
    Fcal: np.ndarray
    Gcal: np.ndarray
    Rcal: np.ndarray
    R: np.ndarray
    n: int
    h: int
    l: int

    @property
    def n_bar(self) -> int:
        return self.n * (self.h + self.l)


def observability_matrix(F: np.ndarray, H: np.ndarray) -> np.ndarray:
    n = F.shape[0]
    return np.vstack([H @ np.linalg.matrix_power(F, i) for i in range(n)])


def controllability_matrix(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    n = F.shape[0]
    return np.hstack([np.linalg.matrix_power(F, i) @ G for i in range(n)])


def _full_rank(M: np.ndarray, n: int) -> bool:
    sv = np.linalg.svd(M, compute_uv=False)
    return len(sv) >= n and sv[n - 1] > _RANK_RTOL * sv[0]


def deadbeat_gain(F: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Output-injection gain R driving all eigenvalues of F - RH to (near) zero.

    Single-output pairs get the exact Ackermann gain, placing every pole at
    the origin.  Multi-output pairs go through the dual placement problem
    with n distinct poles of radius 1e-4; the spread keeps the placement
    well conditioned across both channels while ||(F - RH)^n|| still lands
    many orders of magnitude below the acceptance tolerance.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n, h = F.shape[0], H.shape[0]
    if not _full_rank(observability_matrix(F, H), n):
        raise NotObservable("(F, H) fails the observability rank test")
    if n == 1:
        # scalar: F - RH = 0 directly
        Hr = H[:, 0]
        j = int(np.argmax(np.abs(Hr)))
        R = np.zeros((1, h))
        R[0, j] = float(F[0, 0]) / float(Hr[j])
        return R
    if h == 1:
        Ob = observability_matrix(F, H)
        e_n = np.zeros(n)
        e_n[-1] = 1.0
        return (np.linalg.matrix_power(F, n) @ np.linalg.solve(Ob, e_n)).reshape(n, 1)
    poles = _POLE_RADIUS * np.array([(i // 2 + 1) * (-1) ** i for i in range(n)], dtype=float) / n
    with warnings.catch_warnings():
        # the rank-2 refinement of the placer may stop early; the result is
        # still checked against the nilpotency tolerance by the caller
        warnings.simplefilter("ignore", UserWarning)
        result = place_poles(F.T, H.T, poles)
    return result.gain_matrix.T


def nilpotency_residual(F: np.ndarray, R: np.ndarray, H: np.ndarray) -> float:
    """||(F - RH)^n|| relative to ||F||^n."""
    n = F.shape[0]
    Fbar = F - R @ H
    denom = max(_inf_norm(F) ** n, np.finfo(float).tiny)
    return _inf_norm(np.linalg.matrix_power(Fbar, n)) / denom


def build_M(F: np.ndarray, G: np.ndarray, H: np.ndarray, R: np.ndarray) -> np.ndarray:
    """M = [G, Fbar G, ..., Fbar^(n-1) G | R, Fbar R, ..., Fbar^(n-1) R].

    Block i multiplies y(k-i) (respectively u(k-i)), newest first, matching
    the window ordering of z(k).
    """
    n = F.shape[0]
    Fbar = F - R @ H
    y_blocks, u_blocks = [], []
    acc = np.eye(n)
    for _ in range(n):
        y_blocks.append(acc @ G)
        u_blocks.append(acc @ R)
        acc = Fbar @ acc
    return np.hstack(y_blocks + u_blocks)


def build_z0(F: np.ndarray, G: np.ndarray, H: np.ndarray, R: np.ndarray,
             x0: np.ndarray) -> np.ndarray:
    """Virtual pre-history [y(-1)..y(-n), u(-1)..u(-n)] consistent with x(0) = x0.

    The minimum-norm output sequence driving x(-n) = 0 to x(0) = x0 is taken
    from the pseudo-inverse of the n-step controllability map; the matching
    inputs follow from u = Hx along that trajectory.  Because the trajectory
    starts at exactly zero, M z0 = x0 holds without needing Fbar^n = 0.
    """
    n, l = F.shape[0], G.shape[1]
    x0 = np.asarray(x0, dtype=float).ravel()
    Cn = controllability_matrix(F, G)
    if not _full_rank(Cn, n):
        raise NotControllable("(F, G) fails the controllability rank test")
    # x0 = sum_i F^(i-1) G y(-i): solve for the stacked [y(-1); ...; y(-n)]
    ys = np.linalg.pinv(Cn) @ x0
    y_hist = ys.reshape(n, l)          # row i-1 holds y(-i)
    x = np.zeros(n)
    u_hist = np.zeros((n, H.shape[0]))
    for i in range(n, 0, -1):          # advance k = -n .. -1
        u_hist[i - 1] = H @ x
        x = F @ x + G @ y_hist[i - 1]
    return np.concatenate([y_hist.ravel(), u_hist.ravel()])


def build_structural(n: int, h: int, l: int):
    """Exact 0/1 shift matrices (Fcal, Gcal, Rcal) of the window update."""
    if n < 1 or h < 1 or l < 1:
        raise DimMismatch("dimensions must be at least 1")
    n_bar = n * (h + l)

    def shift_block(count: int, width: int) -> np.ndarray:
        S = np.zeros((count * width, count * width), dtype=np.int64)
        if count > 1:
            S[width:, :-width] = np.eye((count - 1) * width, dtype=np.int64)
        return S

    Fcal = np.zeros((n_bar, n_bar), dtype=np.int64)
    Fcal[: n * l, : n * l] = shift_block(n, l)
    Fcal[n * l:, n * l:] = shift_block(n, h)
    Gcal = np.zeros((n_bar, l), dtype=np.int64)
    Gcal[:l, :] = np.eye(l, dtype=np.int64)
    Rcal = np.zeros((n_bar, h), dtype=np.int64)
    Rcal[n * l: n * l + h, :] = np.eye(h, dtype=np.int64)
    return Fcal, Gcal, Rcal


def transform(ctrl: ControllerRealization) -> TransformedController:
    """Full pipeline: deadbeat gain, window map M, initial window, shifts."""
    F, G, H, x0 = ctrl.F, ctrl.G, ctrl.H, ctrl.x0
    n, h, l = ctrl.n, ctrl.h, ctrl.l
    R = deadbeat_gain(F, H)
    residual = nilpotency_residual(F, R, H)
    if residual >= _NILPOTENCY_RTOL:
        raise NotObservable(f"deadbeat placement failed: relative residual {residual:.3e}")
    M = build_M(F, G, H, R)
    z0 = build_z0(F, G, H, R, x0)
    Fcal, Gcal, Rcal = build_structural(n, h, l)
    tc = TransformedController(M=M, z0=z0, Hcal=H @ M, Fcal=Fcal, Gcal=Gcal,
                               Rcal=Rcal, R=R, n=n, h=h, l=l)
    _assert_invariants(ctrl, tc)
    return tc


def _assert_invariants(ctrl: ControllerRealization, tc: TransformedController):
    F, G = ctrl.F, ctrl.G
    M, Fcal, Gcal, Rcal, Hcal = tc.M, tc.Fcal, tc.Gcal, tc.Rcal, tc.Hcal
    scale = max(_inf_norm(F) * _inf_norm(M), 1.0)
    if _inf_norm(M @ (Fcal + Rcal @ Hcal) - F @ M) > 1e-7 * scale:
        raise DimMismatch("window identity M(Fcal + Rcal Hcal) = FM violated")
    if _inf_norm(M @ Gcal - G) > 1e-7 * max(_inf_norm(G), 1.0):
        raise DimMismatch("window identity M Gcal = G violated")
    if _inf_norm(M @ tc.z0.reshape(-1, 1) - ctrl.x0.reshape(-1, 1)) > 1e-8 * max(1.0, float(np.max(np.abs(ctrl.x0)))):
        raise NotControllable("M z0 does not reproduce x0")
