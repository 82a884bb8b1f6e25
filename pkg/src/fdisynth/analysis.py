"""Structural and metric analysis: normal rank, poles, zeros, stability, norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import DomainMismatch, H2Undefined, UnstableOperand
from .lss import (
    DescriptorRealization,
    freqresp,
    minimal_realization,
    probe_points,
)

__all__ = [
    "StabilityRegion",
    "DEFAULT_BETA",
    "N_PROBE",
    "normal_rank",
    "poles",
    "zeros",
    "is_stable",
    "is_minimum_phase",
    "on_boundary",
    "hinf_norm",
    "h2_norm",
    "grid_norm",
    "system_norm",
]

DEFAULT_BETA = 0.05
N_PROBE = 3
BOUNDARY_TOL = 1e-7


@dataclass(frozen=True)
class StabilityRegion:
    """Closed stability region.

    Continuous time: ``Re(lam) <= -beta``.  Discrete time: ``|lam| <= 1 - beta``.
    """

    domain: str = "continuous"
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.domain not in ("continuous", "discrete"):
            raise DomainMismatch("unknown domain %r" % (self.domain,))
        if not self.beta > 0:
            raise ValueError("stability margin beta must be positive")
        if self.domain == "discrete" and self.beta >= 1:
            raise ValueError("discrete stability margin must be below 1")

    def contains(self, lam, slack=1e-9) -> bool:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        if self.domain == "continuous":
            return bool(np.all(lam.real <= -self.beta + slack))
        return bool(np.all(np.abs(lam) <= 1 - self.beta + slack))

    @classmethod
    def for_system(cls, G: DescriptorRealization, beta=DEFAULT_BETA):
        return cls(G.domain, beta)


def _svd_rank(M, rtol=1e-9, atol=1e-12):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= atol:
        return 0
    return int(np.sum(s > max(rtol * s[0], atol)))


def normal_rank(G: DescriptorRealization, seed=0, n_probe=N_PROBE) -> int:
    """Normal rank as the largest SVD rank of ``G`` over random boundary probes."""
    if G.p == 0 or G.m == 0:
        return 0
    if G.n == 0:
        return _svd_rank(G.D)
    pts = probe_points(G, n_probe, seed=seed)
    vals = freqresp(G, pts)
    return max(_svd_rank(v) for v in vals)


def poles(G: DescriptorRealization, tol=None) -> np.ndarray:
    """Poles: eigenvalues of a minimal realization."""
    Gm = minimal_realization(G, tol)
    if Gm.n == 0:
        return np.zeros(0, dtype=complex)
    return np.sort_complex(np.linalg.eigvals(Gm.A).astype(complex))


def _rank_and_bases(M, tol):
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > tol))
    return r, U, s, Vt


def _full_row_rank_feedthrough(A, B, C, D, tol):
    """Reduce the system pencil until the feedthrough has full row rank.

    Each pass row-compresses ``D``; the rows with zero feedthrough contribute
    algebraic constraints that eliminate states (output zeroing for the rows
    ``C1 x = 0`` forces ``C1 A x + C1 B u = 0``).
    """
    while True:
        n, p = A.shape[0], C.shape[0]
        if p == 0:
            return A, B, C, D
        rho, U, _, _ = _rank_and_bases(D, tol) if D.size else (0, np.eye(p), None, None)
        if rho == p:
            return A, B, C, D
        Ct = U.T @ C
        Dt = U.T @ D
        C2, D2 = Ct[:rho], Dt[:rho]
        C1 = Ct[rho:]
        if n == 0:
            # constant rows with zero feedthrough carry no information
            return A, B, C2, D2
        tau, _, _, Vt = _rank_and_bases(C1, tol)
        if tau == 0:
            C, D = C2, D2
            continue
        # V = [null(C1), rowspace(C1)] so that C1 V = [0, C12] with C12 full column rank
        V = np.hstack([Vt[tau:].T, Vt[:tau].T])
        At = V.T @ A @ V
        Bt = V.T @ B
        C2t = C2 @ V
        k = n - tau
        A11, A21 = At[:k, :k], At[k:, :k]
        B1, B2 = Bt[:k], Bt[k:]
        C21 = C2t[:, :k]
        # x2 = 0 is forced; its derivative equation becomes an output row
        A, B = A11, B1
        C = np.vstack([A21, C21])
        D = np.vstack([B2, D2])


def zeros(G: DescriptorRealization, tol=None) -> np.ndarray:
    """Finite transmission zeros of ``G``.

    Computed on a minimal realization by first deflating the system pencil
    until the feedthrough has full row rank and then taking the
    uncontrollable modes of the zero-output dynamics.  Works for full row
    rank systems; for systems without full normal row rank the result is the
    invariant-zero set of the row-compressed system.
    """
    Gm = minimal_realization(G)
    if Gm.n == 0:
        return np.zeros(0, dtype=complex)
    A, B, C, D = Gm.A, Gm.B, Gm.C, Gm.D
    scale = max(1.0, np.linalg.norm(np.block([[A, B], [C, D]])))
    if tol is None:
        tol = 1e-10 * scale
    A, B, C, D = _full_row_rank_feedthrough(A, B, C, D, tol)
    n, p, m = A.shape[0], C.shape[0], B.shape[1]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if p == 0:
        # no output constraints left: zeros are the uncontrollable modes of (A, B)
        return _uncontrollable_modes(A, B, tol)
    # column-compress D: D V = [0, Dbar] with Dbar invertible
    _, _, Vt = np.linalg.svd(D, full_matrices=True)
    V = np.hstack([Vt[p:].T, Vt[:p].T])
    Dv = D @ V
    Bv = B @ V
    Dbar = Dv[:, m - p:]
    B1, B2 = Bv[:, :m - p], Bv[:, m - p:]
    Ah = A - B2 @ np.linalg.solve(Dbar, C)
    if m == p:
        z = np.linalg.eigvals(Ah)
    else:
        z = _uncontrollable_modes(Ah, B1, tol)
    return np.sort_complex(np.asarray(z, dtype=complex))


def _uncontrollable_modes(A, B, tol):
    n = A.shape[0]
    if B.shape[1] == 0:
        return np.linalg.eigvals(A)
    Z = np.eye(n)
    k = 0
    Arem, Brem = A.copy(), B.copy()
    while k < n:
        U, s, _ = np.linalg.svd(Brem, full_matrices=True)
        r = int(np.sum(s > tol))
        if r == 0:
            break
        T = np.eye(n)
        T[k:, k:] = U
        Z = Z @ T
        Anew = U.T @ Arem @ U
        k += r
        if k == n:
            break
        Brem = Anew[r:, :r]
        Arem = Anew[r:, r:]
    if k >= n:
        return np.zeros(0, dtype=complex)
    At = Z.T @ A @ Z
    return np.linalg.eigvals(At[k:, k:])


def on_boundary(z, domain) -> np.ndarray:
    """Mask of values lying on the stability-domain boundary."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if domain == "continuous":
        return np.abs(z.real) <= BOUNDARY_TOL * (1 + np.abs(z))
    return np.abs(np.abs(z) - 1) <= BOUNDARY_TOL


def is_stable(G: DescriptorRealization, region: StabilityRegion | None = None) -> bool:
    if region is None:
        region = StabilityRegion.for_system(G)
    return region.contains(poles(G)) if G.n else True


def _strictly_stable(lam, domain):
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if domain == "continuous":
        return bool(np.all(lam.real < 0) and not np.any(on_boundary(lam, domain)))
    return bool(np.all(np.abs(lam) < 1) and not np.any(on_boundary(lam, domain)))


def is_minimum_phase(G: DescriptorRealization, region: StabilityRegion | None = None) -> bool:
    """True when every finite zero lies strictly inside the stability domain.

    ``region`` only selects the domain; zeros are judged against the open
    left half plane or the open unit disc with the boundary tolerance.
    """
    domain = region.domain if region is not None else G.domain
    z = zeros(G)
    return True if z.size == 0 else _strictly_stable(z, domain)


def _check_stable(G):
    if G.n and not _strictly_stable(np.linalg.eigvals(G.A), G.domain):
        Gm = minimal_realization(G)
        if Gm.n and not _strictly_stable(np.linalg.eigvals(Gm.A), G.domain):
            raise UnstableOperand("norm of an unstable system is undefined")
        return Gm
    return G


def _sigma_max(G, lams):
    vals = freqresp(G, lams)
    if vals.shape[1] == 0 or vals.shape[2] == 0:
        return np.zeros(len(lams))
    return np.linalg.svd(vals, compute_uv=False)[:, 0]


def _to_point(G, w):
    return np.exp(1j * w * G.Ts) if G.is_discrete else 1j * w


def hinf_norm(G: DescriptorRealization, n_grid=400) -> float:
    """H-infinity norm by grid search and bounded local refinement.

    The grid is logarithmic over the relevant band, augmented with zero
    frequency, the imaginary parts of the poles and (continuous time) the
    limit at infinity.  The best grid point is refined with a bounded scalar
    optimizer to about 1e-6 relative accuracy.
    """
    G = _check_stable(G)
    if G.p == 0 or G.m == 0:
        return 0.0
    if G.n == 0:
        return float(np.linalg.norm(G.D, 2))
    ev = np.linalg.eigvals(G.A)
    if G.is_discrete:
        nyq = np.pi / G.Ts
        angs = np.abs(np.angle(ev)) / G.Ts
        w = np.concatenate([np.linspace(0, nyq, n_grid), angs])
        w = np.unique(np.clip(w, 0, nyq))
        hi = nyq
    else:
        mags = np.abs(ev)
        lo = max(min(mags.min(), 1.0) * 1e-3, 1e-8)
        hi = max(mags.max(), 1.0) * 1e3
        w = np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), n_grid),
                            np.abs(ev.imag), mags])
        w = np.unique(w)
    vals = _sigma_max(G, _to_point(G, w))
    k = int(np.argmax(vals))
    best = float(vals[k])
    if not G.is_discrete:
        dinf = float(np.linalg.norm(G.D, 2))
        if dinf >= best:
            return dinf
    a = w[k - 1] if k > 0 else w[0]
    b = w[k + 1] if k + 1 < len(w) else hi
    if b > a:
        res = minimize_scalar(lambda x: -_sigma_max(G, [_to_point(G, x)])[0],
                              bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, b)})
        best = max(best, float(-res.fun))
    return best


def h2_norm(G: DescriptorRealization) -> float:
    """H2 norm from the observability Gramian."""
    G = _check_stable(G)
    if not G.is_discrete and np.any(G.D != 0):
        raise H2Undefined("continuous-time H2 norm needs D = 0")
    if G.n == 0:
        return float(np.linalg.norm(G.D)) if G.is_discrete else 0.0
    if G.is_discrete:
        Wo = sla.solve_discrete_lyapunov(G.A.T, G.C.T @ G.C)
        val = np.trace(G.B.T @ Wo @ G.B) + np.trace(G.D.T @ G.D)
    else:
        Wo = sla.solve_continuous_lyapunov(G.A.T, -G.C.T @ G.C)
        val = np.trace(G.B.T @ Wo @ G.B)
    return float(np.sqrt(max(val, 0.0)))


def system_norm(G: DescriptorRealization, kind="hinf") -> float:
    kind = kind.lower()
    if kind in ("hinf", "inf"):
        return hinf_norm(G)
    if kind == "h2":
        return h2_norm(G)
    raise ValueError("unknown norm %r" % (kind,))


def grid_norm(G: DescriptorRealization, n=60, seed=None) -> float:
    """Peak largest singular value over a fixed boundary grid (no stability check).

    Cheap lower bound of the H-infinity norm used for nonzeroness and
    decoupling checks; poles hit by the grid are nudged off the boundary.
    """
    if G.p == 0 or G.m == 0:
        return 0.0
    if G.n == 0:
        return float(np.linalg.norm(G.D, 2))
    if G.is_discrete:
        lams = np.exp(1j * np.linspace(0, np.pi, n))
    else:
        lams = np.concatenate([[0.0], 1j * np.logspace(-3, 3, n - 1)])
    if seed is not None:
        lams = np.concatenate([lams, probe_points(G, 5, seed=seed)])
    ev = np.linalg.eigvals(G.A)
    near = np.array([np.min(np.abs(ev - x)) for x in lams])
    lams = np.where(near < 1e-8, lams + 1e-6, lams)
    vals = _sigma_max(G, lams)
    out = float(np.max(vals))
    if not G.is_discrete:
        out = max(out, float(np.linalg.norm(G.D, 2)))
    return out
