"""Nullspace bases, filter updating, least-order covers and factorizations.

The central object is :class:`FilterPair`, one realization whose input
columns are split into the filter part ``Q`` (inputs ``y`` and ``u``) and the
internal-form part ``R = [R_f R_w]`` (inputs ``f`` and ``w``).  Because the
two parts share ``A``, ``C`` and the output rows, every update applied to the
pair keeps them consistent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .analysis import (
    StabilityRegion,
    is_stable,
    normal_rank,
    on_boundary,
    zeros,
)
from .errors import (
    DimensionMismatch,
    EmptyNullspace,
    NoAdmissibleCombination,
    NonStandardProblem,
    RankDeficient,
    UndetectablePair,
    UnstableOperand,
)
from .lss import (
    DescriptorRealization,
    append,
    col_concat,
    col_select,
    freqresp,
    inv,
    minimal_realization,
    probe_points,
    row_select,
    row_stack,
    scale,
    series,
    ss,
    static,
)

__all__ = [
    "FilterPair",
    "make_pair",
    "reduced_tol",
    "minreal",
    "left_nullspace_basis",
    "lcf_stabilize",
    "output_injection",
    "coouter_coinner",
    "outer_left_inverse",
    "stable_projection",
    "left_minimal_cover",
    "least_order_reduce",
    "update",
]


def reduced_tol(G: DescriptorRealization) -> float:
    """Rank tolerance used for internal order reductions (1e-9 relative)."""
    big = np.block([[G.A, G.B], [G.C, G.D]]) if G.n else G.D
    return 1e-9 * max(1.0, np.linalg.norm(big) if big.size else 1.0)


def minreal(G: DescriptorRealization) -> DescriptorRealization:
    """Minimal realization with the looser internal tolerance."""
    return minimal_realization(G, reduced_tol(G)) if G.n else G


# ---------------------------------------------------------------------------
# filter pairs


@dataclass(frozen=True, eq=False)
class FilterPair:
    """Joint realization of ``[Q | R_f R_w]``.

    Parameters
    ----------
    sys : DescriptorRealization
        Inputs ordered ``(y, u, f, w)``.
    n_q : int
        Number of filter inputs ``p + m_u``.
    m_f, m_w : int
        Widths of the fault and noise blocks of ``R``.
    blocks : tuple of int
        Output row partition (one entry per residual block of a bank).
    """

    sys: DescriptorRealization
    n_q: int
    m_f: int
    m_w: int
    blocks: tuple = field(default=())

    def __post_init__(self):
        if self.n_q + self.m_f + self.m_w != self.sys.m:
            raise DimensionMismatch("column partition %d+%d+%d does not match %d inputs"
                                    % (self.n_q, self.m_f, self.m_w, self.sys.m))
        if not self.blocks:
            object.__setattr__(self, "blocks", (self.sys.p,))
        if sum(self.blocks) != self.sys.p:
            raise DimensionMismatch("row blocks %s do not add up to %d outputs"
                                    % (self.blocks, self.sys.p))

    @property
    def q(self) -> int:
        return self.sys.p

    @property
    def order(self) -> int:
        return self.sys.n

    @property
    def Q(self):
        return col_select(self.sys, range(self.n_q))

    @property
    def R(self):
        return col_select(self.sys, range(self.n_q, self.sys.m))

    @property
    def Rf(self):
        return col_select(self.sys, range(self.n_q, self.n_q + self.m_f))

    @property
    def Rw(self):
        return col_select(self.sys, range(self.n_q + self.m_f, self.sys.m))

    def Rf_col(self, j):
        return col_select(self.sys, [self.n_q + j])

    A_Q = property(lambda self: self.sys.A)
    E_Q = property(lambda self: self.sys.E)
    C_Q = property(lambda self: self.sys.C)
    B_Q = property(lambda self: self.sys.B[:, :self.n_q])
    D_Q = property(lambda self: self.sys.D[:, :self.n_q])
    B_R = property(lambda self: self.sys.B[:, self.n_q:])
    D_R = property(lambda self: self.sys.D[:, self.n_q:])

    def block_rows(self, i):
        start = sum(self.blocks[:i])
        return list(range(start, start + self.blocks[i]))

    def block(self, i) -> "FilterPair":
        return FilterPair(minreal(row_select(self.sys, self.block_rows(i))),
                          self.n_q, self.m_f, self.m_w)

    def with_sys(self, sys, blocks=None) -> "FilterPair":
        return FilterPair(sys, self.n_q, self.m_f, self.m_w,
                          tuple(blocks) if blocks is not None else
                          (self.blocks if sys.p == self.sys.p else ()))


def make_pair(Q: DescriptorRealization, R: DescriptorRealization, m_f: int,
              blocks=None) -> FilterPair:
    """Pair from separate realizations of ``Q`` and ``R = [R_f R_w]``."""
    sys = minreal(col_concat(Q, R))
    return FilterPair(sys, Q.m, m_f, R.m - m_f, tuple(blocks) if blocks else ())


def update(F: FilterPair, Qk: DescriptorRealization, blocks=None) -> FilterPair:
    """Premultiply both components by ``Qk`` and re-minimalize."""
    if Qk.m != F.q:
        raise DimensionMismatch("update: Q_k has %d inputs, pair has %d outputs" % (Qk.m, F.q))
    return F.with_sys(minreal(series(Qk, F.sys)), blocks)


# ---------------------------------------------------------------------------
# left nullspace


def _independent_columns(G: DescriptorRealization, r: int, seed=0):
    """Indices of ``r`` columns spanning the rational column space of ``G``."""
    lams = probe_points(G, 3, seed=seed)
    V = np.vstack([np.vstack([X.real, X.imag]) for X in freqresp(G, lams)])
    _, _, piv = sla.qr(V, pivoting=True, mode="economic")
    return np.sort(piv[:r])


def _full_rank_feedthrough(G: DescriptorRealization):
    """Column interactor making ``D`` full column rank.

    Columns whose feedthrough vanishes are multiplied by ``lam``, which maps
    ``(B2, D2 = 0)`` to ``(A B2, C B2)`` and leaves ``A`` and ``C`` alone.
    The left kernel is unchanged because the column transformation is
    invertible over the rational functions.
    """
    A, B, C, D = G.A, G.B.copy(), G.C, G.D.copy()
    m = D.shape[1]
    for _ in range(G.n + 1):
        if m == 0:
            break
        U, sv, Vt = np.linalg.svd(D)
        scale = max(1.0, np.linalg.norm(np.vstack([B, D])) * max(1.0, np.linalg.norm(C)))
        rank = int(np.sum(sv > 1e-10 * scale))
        if rank == m:
            return B, D
        V = Vt.T
        B, D = B @ V, D @ V
        D[:, rank:] = 0.0
        B2 = A @ B[:, rank:]
        D2 = C @ B[:, rank:]
        nrm = np.maximum(np.linalg.norm(np.vstack([B2, D2]), axis=0), 1e-300)
        B[:, rank:] = B2 / nrm
        D[:, rank:] = D2 / nrm
    raise RankDeficient("could not reach a full column rank feedthrough")


def _normalize_rows(N: DescriptorRealization) -> DescriptorRealization:
    """Scale rows so the dominant feedthrough entry of each row is 1."""
    k = np.ones(N.p)
    for i, row in enumerate(N.D):
        mag = np.abs(row)
        if mag.max() > 0:
            j = int(np.flatnonzero(mag >= (1 - 1e-8) * mag.max())[0])
            k[i] = 1.0 / row[j]
    return scale(N, np.diag(k))


def left_nullspace_basis(G: DescriptorRealization, region: StabilityRegion | None = None,
                         stabilize=True) -> DescriptorRealization:
    """Proper stable left nullspace basis ``N_l`` with ``N_l G = 0``.

    Independent columns of ``G`` are kept, their feedthrough is brought to
    full column rank ``r`` by a column interactor, and the observer

        x' = (A - K C) x + K y,    r = D_perp (y - C x),    K = B D^+,

    annihilates every output of ``G``.  ``D_perp`` spans the left kernel of
    ``D`` so the basis has full row rank ``p - r``.  Unobservable modes are
    removed and remaining unstable ones are moved into ``region`` by output
    injection.  Rows are scaled so that the dominant feedthrough entry is 1.

    Raises
    ------
    EmptyNullspace
        If ``G`` has full normal row rank.
    """
    p, m = G.p, G.m
    if m == 0:
        return static(np.eye(p), G.domain, G.Ts)
    r = normal_rank(G)
    if r >= p:
        raise EmptyNullspace("G has full normal row rank %d; the left nullspace is empty" % p)
    if r == 0:
        return static(np.eye(p), G.domain, G.Ts)
    Gc = col_select(G, _independent_columns(G, r))
    if Gc.n == 0:
        B, D = Gc.B, Gc.D
    else:
        B, D = _full_rank_feedthrough(Gc)
    U = np.linalg.svd(D)[0]
    Dperp = U[:, r:].T
    K = B @ np.linalg.pinv(D)
    N = ss(Gc.A - K @ Gc.C, K, -Dperp @ Gc.C, Dperp, G.domain, G.Ts)
    N = minreal(N)
    if stabilize:
        region = region or StabilityRegion(G.domain)
        if not is_stable(N, region):
            N = lcf_stabilize(N, region)
    return _normalize_rows(N)


# ---------------------------------------------------------------------------
# left coprime factorization by output injection


def _targets_for(region: StabilityRegion):
    if region.domain == "discrete":
        t = 0.5 if 1 - region.beta > 0.5 else (1 - region.beta) / 2
        return t, 0.6 * t
    t = -1.0 if region.beta < 1 else -region.beta - 1.0
    return t, t - 0.5


def output_injection(A, C, region: StabilityRegion, max_iter=None):
    """Gain ``K`` such that all eigenvalues of ``A + K C`` lie in ``region``.

    Out-of-region eigenvalues are moved one real Schur block at a time to
    the default targets.  Complex pairs are placed through the dominant
    output direction of their block.

    Raises
    ------
    UndetectablePair
        If an out-of-region mode is unobservable.
    """
    n, p = A.shape[0], C.shape[0]
    K = np.zeros((n, p))
    if n == 0:
        return K
    t1, t2 = _targets_for(region)
    if region.domain == "discrete":
        def bad(x):
            return abs(x) > 1 - region.beta + 1e-9
    else:
        def bad(x):
            return x.real > -region.beta + 1e-9
    cscale = max(1.0, np.linalg.norm(C))
    for _ in range(max_iter or 4 * n + 4):
        Acl = A + K @ C
        T, Z, sdim = sla.schur(Acl, output="real", sort=lambda re, im: bad(complex(re, im)))
        if sdim == 0:
            return K
        k = 2 if sdim >= 2 and abs(T[1, 0]) > 0 else 1
        T11 = T[:k, :k]
        c = C @ Z[:, :k]
        if np.linalg.norm(c) <= 1e-10 * cscale:
            raise UndetectablePair("an unstable mode (%s) is unobservable"
                                   % np.linalg.eigvals(T11))
        if k == 1:
            Kt = (t1 - T11[0, 0]) * c.T / float((c.T @ c)[0, 0])
        else:
            u = np.linalg.svd(c)[0][:, :1]
            cb = u.T @ c  # 1 x 2
            O = np.vstack([cb, cb @ T11])
            if np.linalg.cond(O) > 1e12:
                raise UndetectablePair("complex mode pair is not observable from one output")
            phi = (T11 - t1 * np.eye(2)) @ (T11 - t2 * np.eye(2))
            kk = -phi @ np.linalg.solve(O, np.array([[0.0], [1.0]]))
            Kt = kk @ u.T
        K = K + Z[:, :k] @ Kt
    raise UndetectablePair("output injection did not converge")


def lcf_stabilize(F, region: StabilityRegion | None = None, block_diagonal=False,
                  return_denominator=False):
    """Replace ``[Q R]`` by the numerators of a left coprime factorization.

    Accepts a :class:`FilterPair` or a bare realization.  With
    ``block_diagonal=True`` each row block is stabilized separately, so the
    denominator ``M`` is block diagonal and zero blocks of ``R`` stay zero.

    Returns the stabilized object, and ``M`` when ``return_denominator``.
    """
    is_pair = isinstance(F, FilterPair)
    G = F.sys if is_pair else F
    if region is None:
        region = StabilityRegion.for_system(G)
    if block_diagonal and is_pair and len(F.blocks) > 1:
        parts, dens = [], []
        for i in range(len(F.blocks)):
            sub = minreal(row_select(G, F.block_rows(i)))
            Ns, Ms = lcf_stabilize(sub, region, return_denominator=True)
            parts.append(Ns)
            dens.append(Ms)
        out = F.with_sys(row_stack(*parts), F.blocks)
        return (out, append(*dens)) if return_denominator else out
    K = output_injection(G.A, G.C, region)
    N = ss(G.A + K @ G.C, G.B + K @ G.D, G.C, G.D, G.domain, G.Ts)
    M = ss(G.A + K @ G.C, K, G.C, np.eye(G.p), G.domain, G.Ts)
    out = F.with_sys(N) if is_pair else N
    return (out, M) if return_denominator else out


# ---------------------------------------------------------------------------
# co-outer / co-inner factorization


@dataclass(frozen=True)
class _OuterParts:
    Go: DescriptorRealization        # co-outer factor of G
    Gi1: DescriptorRealization       # co-inner rows, G = Go Gi1
    Gi: DescriptorRealization        # square inner completion
    Go_tilde: DescriptorRealization  # outer factor of the biproper G~ = Xi G
    steps: tuple                     # interactor steps (U, rho)
    a: float


def _strictly_stable(G):
    if G.n == 0:
        return True
    ev = np.linalg.eigvals(G.A)
    if G.is_discrete:
        return bool(np.all(np.abs(ev) < 1 - 1e-10))
    return bool(np.all(ev.real < -1e-10))


def _interactor(G, a, tol):
    """Multiply rows with zero feedthrough by ``(s + a)`` until D has full row rank."""
    steps = []
    A, B, C, D = G.A, G.B, G.C, G.D
    p = G.p
    for _ in range(G.n + 1):
        U, s, _ = np.linalg.svd(D, full_matrices=True) if D.size else (np.eye(p), np.zeros(0), None)
        rho = int(np.sum(s > tol))
        if rho == p:
            break
        Ct, Dt = U.T @ C, U.T @ D
        C2, D2, C1 = Ct[:rho], Dt[:rho], Ct[rho:]
        C = np.vstack([C2, C1 @ (A + a * np.eye(A.shape[0]))])
        D = np.vstack([D2, C1 @ B])
        steps.append((U, rho))
    else:
        raise RankDeficient("G does not have full normal row rank")
    if np.linalg.svd(D, compute_uv=False)[-1] <= tol:
        raise RankDeficient("G does not have full normal row rank")
    return ss(A, B, C, D, G.domain, G.Ts), tuple(steps)


def _factor_full_rank_d(G):
    """Co-outer/co-inner factorization of a stable ``G`` with full-row-rank ``D``
    (continuous) or any full-row-rank ``G`` (discrete)."""
    A, B, C, D = G.A, G.B, G.C, G.D
    n, p, m = G.n, G.p, G.m
    if n == 0:
        W = np.linalg.cholesky(D @ D.T)
        Gi1 = static(np.linalg.solve(W, D), G.domain, G.Ts)
        Go = static(W, G.domain, G.Ts)
        return Go, Gi1, _complete_static(Gi1)
    if G.is_discrete:
        Y = sla.solve_discrete_are(A.T, C.T, B @ B.T, D @ D.T, s=B @ D.T)
        Re = C @ Y @ C.T + D @ D.T
        L = (A @ Y @ C.T + B @ D.T) @ np.linalg.inv(Re)
    else:
        Re = D @ D.T
        Y = sla.solve_continuous_are(A.T, C.T, B @ B.T, Re, s=B @ D.T)
        L = (Y @ C.T + B @ D.T) @ np.linalg.inv(Re)
    Re = (Re + Re.T) / 2
    W = np.linalg.cholesky(Re)
    Wi = np.linalg.inv(W)
    Go = ss(A, L @ W, C, W, G.domain, G.Ts)
    Gi1 = minreal(ss(A - L @ C, B - L @ D, Wi @ C, Wi @ D, G.domain, G.Ts))
    if m == p:
        return Go, Gi1, Gi1
    return Go, Gi1, _complete_inner(Gi1)


def _complete_static(Gi1):
    D1 = Gi1.D
    p, m = D1.shape
    if p == m:
        return Gi1
    Dp = sla.null_space(D1).T
    return static(np.vstack([D1, Dp]), Gi1.domain, Gi1.Ts)


def _complete_inner(Gi1):
    """Square inner completion ``[Gi1; Gi2]`` sharing ``A`` and ``B``."""
    A, B, C, D = Gi1.A, Gi1.B, Gi1.C, Gi1.D
    if Gi1.n == 0:
        return _complete_static(Gi1)
    if Gi1.is_discrete:
        P = sla.solve_discrete_lyapunov(A, B @ B.T)
        P = (P + P.T) / 2
        Lp = np.linalg.cholesky(P)
        Lpi = np.linalg.inv(Lp)
        # rows orthogonal to the row space of the co-isometry [At Bt; Ct D]
        comp = sla.null_space(np.vstack([np.hstack([Lpi @ A @ Lp, Lpi @ B]),
                                         np.hstack([C @ Lp, D])])).T
        Cp = comp[:, :Gi1.n] @ Lpi
        Dp = comp[:, Gi1.n:]
    else:
        P = sla.solve_continuous_lyapunov(A, -B @ B.T)
        P = (P + P.T) / 2
        Dp = sla.null_space(D).T
        Cp = -Dp @ B.T @ np.linalg.inv(P)
    return ss(A, B, np.vstack([C, Cp]), np.vstack([D, Dp]), Gi1.domain, Gi1.Ts)


def _coouter_parts(G: DescriptorRealization, a=1.0) -> _OuterParts:
    if G.p > G.m:
        raise RankDeficient("a %dx%d system cannot have full row rank" % G.shape)
    Gm = minreal(G)
    if not _strictly_stable(Gm):
        raise UnstableOperand("co-outer/co-inner factorization needs a stable system")
    if normal_rank(Gm) < Gm.p:
        raise RankDeficient("G does not have full normal row rank")
    z = zeros(Gm)
    bnd = z[on_boundary(z, Gm.domain)] if z.size else z
    if bnd.size:
        raise NonStandardProblem("G has zeros on the stability boundary: %s"
                                 % np.array2string(bnd, precision=6), bnd)
    tol = 1e-9 * max(1.0, np.linalg.norm(np.block([[Gm.A, Gm.B], [Gm.C, Gm.D]]))
                     if Gm.n else np.linalg.norm(Gm.D))
    steps = ()
    Gt = Gm
    if not Gm.is_discrete:
        Gt, steps = _interactor(Gm, a, tol)
    elif np.linalg.svd(Gm.D, compute_uv=False)[-1] <= tol if Gm.D.size else False:
        pass  # discrete Riccati copes with a singular feedthrough
    Got, Gi1, Gi = _factor_full_rank_d(Gt)
    Go = Got
    for U, rho in reversed(steps):
        # Xi^{-1} step: U * diag(I, I/(s+a))
        k = Gm.p - rho
        lag = ss(-a * np.eye(k), np.hstack([np.zeros((k, rho)), np.eye(k)]),
                 np.vstack([np.zeros((rho, k)), np.eye(k)]),
                 np.diag(np.r_[np.ones(rho), np.zeros(k)]), Gm.domain, Gm.Ts)
        Go = series(scale(lag, U, side="left"), Go)
    Go = minreal(Go)
    return _OuterParts(Go, Gi1, Gi, Got, steps, a)


def coouter_coinner(G: DescriptorRealization, region: StabilityRegion | None = None):
    """Factor ``G = [G_o 0] G_i`` with ``G_i`` square inner and ``G_o`` co-outer.

    Returns
    -------
    Go : DescriptorRealization
        Square, stable, invertible, with all finite zeros strictly stable.
    Gi : DescriptorRealization
        Square inner factor whose first ``r`` rows form ``G_o^{-1} G``.
    r : int
        Row rank of ``G`` (number of rows of ``G_o``).

    Raises
    ------
    NonStandardProblem
        ``G`` has finite zeros on the stability boundary (carried in ``.zeros``).
    RankDeficient
        ``G`` lacks full normal row rank.
    UnstableOperand
        ``G`` is unstable.
    """
    parts = _coouter_parts(G)
    return parts.Go, parts.Gi, G.p


def outer_left_inverse(G: DescriptorRealization):
    """Stable proper ``Q`` with ``Q G = phi * G_i1`` for a scalar stable ``phi``.

    In the standard case ``phi = 1`` and ``Q = G_o^{-1}``.  When a continuous
    ``G`` has zeros at infinity the exact inverse is improper; the returned
    ``Q = phi G_o^{-1}`` uses ``phi = (a/(s+a))^k`` with ``k`` the number of
    interactor steps, which keeps it proper.

    Returns
    -------
    Q : DescriptorRealization
    Gi1 : DescriptorRealization
        Co-inner rows of the factorization.
    phi : DescriptorRealization
        Scalar factor (1x1).
    """
    parts = _coouter_parts(G)
    Q = inv(parts.Go_tilde)
    a = parts.a
    p = G.p
    phi = static(np.eye(1), G.domain, G.Ts)
    for U, rho in parts.steps:
        k = p - rho
        # diag(a/(s+a) I_rho, a I_k) U^T
        lag = ss(-a * np.eye(rho), np.hstack([np.eye(rho), np.zeros((rho, k))]),
                 np.vstack([a * np.eye(rho), np.zeros((k, rho))]),
                 np.diag(np.r_[np.zeros(rho), a * np.ones(k)]), G.domain, G.Ts)
        Q = series(Q, scale(lag, U.T, side="right"))
        phi = series(ss(-a * np.eye(1), np.eye(1), a * np.eye(1), np.zeros((1, 1)),
                        G.domain, G.Ts), phi)
    return minreal(Q), parts.Gi1, minreal(phi)


# ---------------------------------------------------------------------------
# stable / unstable additive decomposition


def stable_projection(G: DescriptorRealization):
    """Split ``G = G_s + G_u`` with ``G_s`` stable and ``G_u`` anti-stable.

    Continuous time keeps the feedthrough in ``G_s`` and leaves ``G_u``
    strictly proper.  Discrete time moves the constant term of the
    anti-causal part, ``-C_u A_u^{-1} B_u``, into ``G_s``.

    Raises
    ------
    NonStandardProblem
        If ``G`` has poles on the stability boundary.
    """
    if G.n == 0:
        return G, static(np.zeros(G.D.shape), G.domain, G.Ts)
    ev = np.linalg.eigvals(G.A)
    if np.any(on_boundary(ev, G.domain)):
        raise NonStandardProblem("poles on the stability boundary", ev[on_boundary(ev, G.domain)])
    if G.is_discrete:
        def inside(re, im):
            return abs(complex(re, im)) < 1
    else:
        def inside(re, im):
            return re < 0
    T, Z, k = sla.schur(G.A, output="real", sort=inside)
    B = Z.T @ G.B
    C = G.C @ Z
    n = G.n
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    X = sla.solve_sylvester(T11, -T22, -T12) if 0 < k < n else np.zeros((k, n - k))
    B1 = B[:k] - X @ B[k:]
    B2 = B[k:]
    C1 = C[:, :k]
    C2 = C1 @ X + C[:, k:]
    Ds = G.D.copy()
    Du = np.zeros_like(G.D)
    if G.is_discrete and k < n:
        const = -C2 @ np.linalg.solve(T22, B2)
        Ds = Ds + const
        Du = -const
    Gs = ss(T11, B1, C1, Ds, G.domain, G.Ts)
    Gu = ss(T22, B2, C2, Du, G.domain, G.Ts)
    return Gs, Gu


# ---------------------------------------------------------------------------
# least-order covers


def _eigen_groups(A, tol=1e-7):
    """Cluster eigenvalues: conjugate pairs and (numerically) repeated values."""
    ev = np.linalg.eigvals(A)
    groups = []
    for lam in ev:
        key = complex(lam.real, abs(lam.imag))
        for g in groups:
            if abs(g["key"] - key) <= tol * (1 + abs(key)):
                g["vals"].append(lam)
                break
        else:
            groups.append({"key": key, "vals": [lam]})
    groups.sort(key=lambda g: (g["key"].real, g["key"].imag))
    return [np.array(g["vals"]) for g in groups]


def _invariant_basis(A, vals, tol=1e-7):
    """Orthonormal basis of the invariant subspace for the eigenvalues ``vals``."""
    if len(vals) == 0:
        return np.zeros((A.shape[0], 0))

    def pick(re, im):
        z = complex(re, im)
        return bool(np.min(np.abs(vals - z)) <= tol * (1 + abs(z)) * 10)
    T, Z, k = sla.schur(A, output="real", sort=pick)
    if k != len(vals):
        return None
    return Z[:, :k]


def _left_null(M, tol):
    if M.shape[1] == 0:
        return np.eye(M.shape[0])
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > tol))
    return U[:, r:].T


def _feasible_sets(A, C, groups, min_null, tol, max_sets):
    """Eigen-group sets ``K`` whose modes can be nulled keeping ``min_null`` rows.

    Enumerated level by level; a set is only extended if it is feasible, since
    feasibility is inherited by subsets.
    """
    out = {(): np.eye(C.shape[0])}
    frontier = [()]
    while frontier and len(out) < max_sets:
        nxt = []
        for K in frontier:
            start = K[-1] + 1 if K else 0
            for g in range(start, len(groups)):
                K2 = K + (g,)
                if any(K2[:i] + K2[i + 1:] not in out for i in range(len(K2))):
                    continue
                vals = np.concatenate([groups[i] for i in K2])
                V = _invariant_basis(A, vals)
                if V is None:
                    continue
                N = _left_null(C @ V, tol)
                if N.shape[0] >= min_null:
                    out[K2] = N
                    nxt.append(K2)
                    if len(out) >= max_sets:
                        break
            if len(out) >= max_sets:
                break
        frontier = nxt
    return out


def _combination_candidates(sys, q, seed, max_sets=2000):
    """Candidate constant row combinations ``Q2`` (q x p) of a realization."""
    Gm = minreal(sys)
    p = Gm.p
    rng = np.random.default_rng(seed)
    tol = 1e-9 * max(1.0, np.linalg.norm(Gm.C)) if Gm.n else 1e-12
    groups = _eigen_groups(Gm.A) if Gm.n else []
    sets = _feasible_sets(Gm.A, Gm.C, groups, q, tol, max_sets) if Gm.n else {(): np.eye(p)}
    cands = []
    for K, N in sets.items():
        nu = N.shape[0]
        for T in itertools.combinations(range(p), q):
            NT = N[:, list(T)]
            if np.linalg.matrix_rank(NT, tol=1e-9) < q:
                continue
            S = np.linalg.lstsq(NT.T, np.eye(q), rcond=None)[0].T  # S NT = I
            Q2 = S @ N
            Q2[np.abs(Q2) < 1e-13] = 0.0
            cands.append((len(K), 0, T, Q2))
        if nu > q:
            S = rng.standard_normal((q, nu))
            cands.append((len(K), 1, (), S @ N))
    return cands


def least_order_reduce(F: FilterPair, q: int, admissible, seed=0, max_sets=2000) -> FilterPair:
    """Least-order ``q``-row combination ``Q2 F`` that satisfies ``admissible``.

    Constant combinations ``Q2 = [I Y]`` (over every choice of ``q`` pivot
    rows) are generated for each set of eigenvalue groups that can be made
    unobservable.  Candidates are ranked by the McMillan degree of the
    combined pair, then by the number of nulled groups, then
    deterministically by pivot rows; the first admissible one is returned.

    Raises
    ------
    NoAdmissibleCombination
        If no candidate passes ``admissible``.
    """
    if q < 1 or q > F.q:
        raise NoAdmissibleCombination("cannot form %d rows from a %d-row basis" % (q, F.q))
    cands = _combination_candidates(F.sys, q, seed, max_sets)
    scored = []
    for idx, (nK, kind, T, Q2) in enumerate(cands):
        G2 = minreal(scale(F.sys, Q2))
        scored.append((G2.n, -nK, kind, T, idx, G2))
    scored.sort(key=lambda t: t[:5])
    for order, _, _, _, _, G2 in scored:
        cand = FilterPair(G2, F.n_q, F.m_f, F.m_w)
        if admissible(cand):
            return cand
    raise NoAdmissibleCombination("no admissible %d-row combination among %d candidates"
                                  % (q, len(cands)))


def left_minimal_cover(X1: DescriptorRealization, X2: DescriptorRealization):
    """Constant ``Y`` minimizing the McMillan degree of ``X = X1 + Y X2``.

    Returns ``(X, Y)``; ``Y = 0`` when ``X2`` offers no reduction.
    """
    if X1.m != X2.m:
        raise DimensionMismatch("cover: X1 and X2 need the same number of columns")
    p1, p2 = X1.p, X2.p
    J = minreal(row_stack(X1, X2))
    best = (minreal(X1).n, np.zeros((p1, p2)))
    if p2 == 0 or J.n == 0:
        return minreal(X1), best[1]
    tol = 1e-9 * max(1.0, np.linalg.norm(J.C))
    groups = _eigen_groups(J.A)
    # sets where every row of X1 can be completed: the X2 rows must span C1 V_K
    C1, C2 = J.C[:p1], J.C[p1:]
    feasible = {(): None}
    frontier = [()]
    while frontier:
        nxt = []
        for K in frontier:
            start = K[-1] + 1 if K else 0
            for g in range(start, len(groups)):
                K2 = K + (g,)
                if any(K2[:i] + K2[i + 1:] not in feasible for i in range(len(K2))):
                    continue
                V = _invariant_basis(J.A, np.concatenate([groups[i] for i in K2]))
                if V is None:
                    continue
                M2 = C2 @ V
                U, sv, Vt = np.linalg.svd(M2, full_matrices=False)
                keep = sv > tol
                Y = -((C1 @ V) @ Vt[keep].T / sv[keep]) @ U[:, keep].T
                if np.linalg.norm(C1 @ V + Y @ M2) <= tol * 10:
                    feasible[K2] = Y
                    nxt.append(K2)
        frontier = nxt
    for K, Y in sorted(feasible.items(), key=lambda kv: -len(kv[0])):
        if Y is None:
            continue
        Y = np.where(np.abs(Y) < 1e-12, 0.0, Y)
        X = minreal(row_select(scale(J, np.hstack([np.eye(p1), Y])), range(p1)))
        if X.n < best[0]:
            best = (X.n, Y)
    Y = best[1]
    return minreal(scale(J, np.hstack([np.eye(p1), Y]))), Y
