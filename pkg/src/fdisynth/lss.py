"""Descriptor state-space realizations of proper rational matrices.

Every transfer-function matrix in the package is held as a
:class:`DescriptorRealization` ``G(lam) = C (lam*E - A)^{-1} B + D``.  A
non-identity ``E`` is accepted on construction and immediately reduced to
standard form, so all stored realizations carry ``E = I``.

Notation
--------
n, m, p : number of states, inputs and outputs.
lam     : frequency variable (``s`` in continuous time, ``z`` in discrete time).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    DomainMismatch,
    ImproperResult,
    IrregularPencil,
    SingularAtFrequency,
    SingularE,
)

__all__ = [
    "DescriptorRealization",
    "make_model",
    "ss",
    "static",
    "compose",
    "series",
    "row_stack",
    "col_concat",
    "col_select",
    "row_select",
    "scale",
    "add",
    "append",
    "inv",
    "evaluate",
    "freqresp",
    "conjugate",
    "minimal_realization",
    "default_tol",
    "probe_points",
]

E_COND_CAP = 1e6
_EPS = np.finfo(float).eps


def _as2d(M, rows=None, cols=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        r = M.shape[0] if rows is None else rows
        c = M.shape[1] if cols is None else cols
        if M.ndim == 2 and M.shape == (1, 0) and rows == 0:
            r = 0
        return np.zeros((r, c))
    return M


def _frozen(M):
    M = np.array(M, dtype=float, copy=True)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class DescriptorRealization:
    """Immutable realization ``(A, E, B, C, D)`` of a proper rational matrix.

    Instances are normally created with :func:`make_model` (validated, accepts
    a descriptor matrix) or :func:`ss` (standard form).  ``E`` is always the
    identity after construction.
    """

    A: np.ndarray
    E: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    domain: str = "continuous"
    Ts: float | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.p, self.m)

    @property
    def order(self) -> int:
        return self.n

    @property
    def is_discrete(self) -> bool:
        return self.domain == "discrete"

    def __call__(self, lam):
        return evaluate(self, lam)

    def __repr__(self):
        kind = "discrete, Ts=%g" % self.Ts if self.is_discrete else "continuous"
        return "DescriptorRealization(n=%d, m=%d, p=%d, %s)" % (
            self.n, self.m, self.p, kind)

    # small operator conveniences; the named functions remain canonical
    def __matmul__(self, other):
        if isinstance(other, DescriptorRealization):
            return series(self, other)
        return scale(self, other, side="right")

    def __rmatmul__(self, other):
        return scale(self, other, side="left")

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)


def _check_domain(domain, Ts):
    if domain not in ("continuous", "discrete"):
        raise DomainMismatch("domain must be 'continuous' or 'discrete', got %r" % (domain,))
    if domain == "discrete":
        if Ts is None or not np.isfinite(Ts) or Ts <= 0:
            raise DimensionMismatch("a discrete-time model needs a sample period Ts > 0")
        return float(Ts)
    return None


def _shapes(A, B, C, D):
    A = np.asarray(A, dtype=float)
    n = A.shape[0] if A.size else 0
    if A.size and (A.ndim != 2 or A.shape[0] != A.shape[1]):
        raise DimensionMismatch("A must be square, got shape %s" % (A.shape,))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if n == 0:
        A = np.zeros((0, 0))
        p, m = D.shape
        B = np.zeros((0, m))
        C = np.zeros((p, 0))
        return A, B, C, D
    B = B.reshape(n, -1) if B.ndim < 2 and B.size else B
    C = C.reshape(-1, n) if C.ndim < 2 and C.size else C
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatch("B must have %d rows, got shape %s" % (n, B.shape))
    if C.ndim != 2 or C.shape[1] != n:
        raise DimensionMismatch("C must have %d columns, got shape %s" % (n, C.shape))
    p, m = C.shape[0], B.shape[1]
    if D.size == 0 and p * m == 0:
        D = np.zeros((p, m))
    if D.shape != (p, m):
        raise DimensionMismatch("D must be %dx%d, got shape %s" % (p, m, D.shape))
    return A, B, C, D


def ss(A, B, C, D, domain="continuous", Ts=None) -> DescriptorRealization:
    """Standard-form realization ``C (lam I - A)^{-1} B + D`` (dimensions checked)."""
    Ts = _check_domain(domain, Ts)
    A, B, C, D = _shapes(A, B, C, D)
    n = A.shape[0]
    return DescriptorRealization(_frozen(A), _frozen(np.eye(n)), _frozen(B),
                                 _frozen(C), _frozen(D), domain, Ts)


def static(D, domain="continuous", Ts=None) -> DescriptorRealization:
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return ss(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)),
              D, domain, Ts)


def make_model(A, E, B, C, D, domain="continuous", Ts=None) -> DescriptorRealization:
    """Validated realization of ``C (lam E - A)^{-1} B + D``.

    ``E`` may be ``None`` (identity).  A regular pencil with well-conditioned
    ``E`` (``cond(E) <= 1e6``) is reduced to standard form by solving
    ``E X = A`` and ``E Y = B``.

    Raises
    ------
    DimensionMismatch, IrregularPencil, SingularE
    """
    Ts = _check_domain(domain, Ts)
    A, B, C, D = _shapes(A, B, C, D)
    n = A.shape[0]
    if E is None:
        return ss(A, B, C, D, domain, Ts)
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if n == 0:
        E = np.zeros((0, 0))
    if E.shape != (n, n):
        raise DimensionMismatch("E must be %dx%d, got shape %s" % (n, n, E.shape))
    if n == 0:
        return ss(A, B, C, D, domain, Ts)
    # regularity: det(A - lam0 E) != 0 at a random probe
    rng = np.random.default_rng(1234)
    lam0 = complex(rng.normal(), rng.normal())
    scale_ = max(1.0, np.linalg.norm(A, 1), np.linalg.norm(E, 1))
    smin = np.linalg.svd(A - lam0 * E, compute_uv=False)[-1]
    if smin <= n * 1e3 * _EPS * scale_ * (1 + abs(lam0)):
        raise IrregularPencil("pencil A - lam*E is singular for all lam")
    cond = np.linalg.cond(E)
    if not np.isfinite(cond) or cond > E_COND_CAP:
        raise SingularE("E is not invertible within tolerance (cond(E) = %.3g)" % cond)
    return ss(np.linalg.solve(E, A), np.linalg.solve(E, B), C, D, domain, Ts)


def _same_domain(*systems):
    d0 = systems[0]
    for g in systems[1:]:
        if g.domain != d0.domain or (d0.is_discrete and not np.isclose(g.Ts, d0.Ts)):
            raise DomainMismatch("operands live in different time domains")
    return d0.domain, d0.Ts


def _like(G, A, B, C, D):
    return ss(A, B, C, D, G.domain, G.Ts)


def series(G2: DescriptorRealization, G1: DescriptorRealization) -> DescriptorRealization:
    """Realization of the product ``G2 * G1`` (``G1`` acts first)."""
    _same_domain(G2, G1)
    if G2.m != G1.p:
        raise DimensionMismatch("series: G2 has %d inputs but G1 has %d outputs" % (G2.m, G1.p))
    n1, n2 = G1.n, G2.n
    A = np.block([[G1.A, np.zeros((n1, n2))], [G2.B @ G1.C, G2.A]])
    B = np.vstack([G1.B, G2.B @ G1.D])
    C = np.hstack([G2.D @ G1.C, G2.C])
    return _like(G1, A, B, C, G2.D @ G1.D)


def row_stack(*systems) -> DescriptorRealization:
    """Vertical concatenation ``[G1; G2; ...]`` (shared inputs)."""
    _same_domain(*systems)
    m = systems[0].m
    if any(g.m != m for g in systems):
        raise DimensionMismatch("row_stack: all operands need the same number of inputs")
    A = sla.block_diag(*[g.A for g in systems]) if sum(g.n for g in systems) else np.zeros((0, 0))
    B = np.vstack([g.B for g in systems])
    C = _block_diag_rect([g.C for g in systems])
    D = np.vstack([g.D for g in systems])
    return _like(systems[0], A, B, C, D)


def col_concat(*systems) -> DescriptorRealization:
    """Horizontal concatenation ``[G1, G2, ...]`` (shared outputs)."""
    _same_domain(*systems)
    p = systems[0].p
    if any(g.p != p for g in systems):
        raise DimensionMismatch("col_concat: all operands need the same number of outputs")
    A = sla.block_diag(*[g.A for g in systems]) if sum(g.n for g in systems) else np.zeros((0, 0))
    B = _block_diag_rect([g.B for g in systems])
    C = np.hstack([g.C for g in systems])
    D = np.hstack([g.D for g in systems])
    return _like(systems[0], A, B, C, D)


def append(*systems) -> DescriptorRealization:
    """Block-diagonal ``diag(G1, G2, ...)``."""
    _same_domain(*systems)
    A = sla.block_diag(*[g.A for g in systems]) if sum(g.n for g in systems) else np.zeros((0, 0))
    B = _block_diag_rect([g.B for g in systems])
    C = _block_diag_rect([g.C for g in systems])
    D = _block_diag_rect([g.D for g in systems])
    return _like(systems[0], A, B, C, D)


def _block_diag_rect(blocks):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    i = j = 0
    for b in blocks:
        out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out


def col_select(G: DescriptorRealization, idx) -> DescriptorRealization:
    idx = np.atleast_1d(np.asarray(idx, dtype=int)) if np.size(idx) else np.zeros(0, int)
    if idx.size and (idx.min() < 0 or idx.max() >= G.m):
        raise DimensionMismatch("column index out of range for %d inputs" % G.m)
    return _like(G, G.A, G.B[:, idx], G.C, G.D[:, idx])


def row_select(G: DescriptorRealization, idx) -> DescriptorRealization:
    idx = np.atleast_1d(np.asarray(idx, dtype=int)) if np.size(idx) else np.zeros(0, int)
    if idx.size and (idx.min() < 0 or idx.max() >= G.p):
        raise DimensionMismatch("row index out of range for %d outputs" % G.p)
    return _like(G, G.A, G.B, G.C[idx, :], G.D[idx, :])


def scale(G: DescriptorRealization, K, side="left") -> DescriptorRealization:
    """Multiply by a constant matrix (or scalar) from the left or right."""
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        return _like(G, G.A, G.B, K * G.C, K * G.D) if side == "left" else \
            _like(G, G.A, K * G.B, G.C, K * G.D)
    K = np.atleast_2d(K)
    if side == "left":
        if K.shape[1] != G.p:
            raise DimensionMismatch("scale: %s matrix cannot premultiply %d outputs"
                                    % (K.shape, G.p))
        return _like(G, G.A, G.B, K @ G.C, K @ G.D)
    if K.shape[0] != G.m:
        raise DimensionMismatch("scale: %s matrix cannot postmultiply %d inputs" % (K.shape, G.m))
    return _like(G, G.A, G.B @ K, G.C, G.D @ K)


def add(G1: DescriptorRealization, G2: DescriptorRealization) -> DescriptorRealization:
    """Parallel connection ``G1 + G2``."""
    _same_domain(G1, G2)
    if G1.shape != G2.shape:
        raise DimensionMismatch("add: shapes %s and %s differ" % (G1.shape, G2.shape))
    A = sla.block_diag(G1.A, G2.A) if G1.n + G2.n else np.zeros((0, 0))
    return _like(G1, A, np.vstack([G1.B, G2.B]), np.hstack([G1.C, G2.C]), G1.D + G2.D)


def inv(G: DescriptorRealization) -> DescriptorRealization:
    """Inverse of a square system with invertible feedthrough."""
    if G.p != G.m:
        raise DimensionMismatch("inv: system is %dx%d, not square" % G.shape)
    if G.p == 0:
        return G
    if np.linalg.cond(G.D) > 1e12:
        raise ImproperResult("inv: feedthrough matrix is singular, inverse is improper")
    Di = np.linalg.inv(G.D)
    return _like(G, G.A - G.B @ Di @ G.C, G.B @ Di, -Di @ G.C, Di)


def compose(kind: str, *operands, **kw) -> DescriptorRealization:
    """Dispatch to a realization-algebra operation by name.

    ``kind`` is one of ``series``, ``row_stack``, ``col_concat``,
    ``col_select``, ``row_select``, ``scale``, ``add``, ``append``.
    """
    table = {
        "series": series,
        "row_stack": row_stack,
        "col_concat": col_concat,
        "col_select": col_select,
        "row_select": row_select,
        "scale": scale,
        "add": add,
        "append": append,
    }
    try:
        fn = table[kind]
    except KeyError:
        raise ValueError("unknown composition kind %r" % (kind,)) from None
    return fn(*operands, **kw)


def _pole_margin_tol(G):
    return 1e-10 * max(1.0, np.linalg.norm(G.A, 1)) if G.n else 0.0


def evaluate(G: DescriptorRealization, lam) -> np.ndarray:
    """Complex value ``C (lam I - A)^{-1} B + D``.

    Raises
    ------
    SingularAtFrequency
        If ``lam`` is a pole (``lam I - A`` numerically singular).
    """
    lam = complex(lam)
    if G.n == 0:
        return G.D.astype(complex)
    M = lam * np.eye(G.n) - G.A
    if np.linalg.svd(M, compute_uv=False)[-1] <= _pole_margin_tol(G) * (1 + abs(lam)):
        raise SingularAtFrequency("lam = %s is a pole of the system" % lam)
    return G.C @ np.linalg.solve(M, G.B) + G.D


def freqresp(G: DescriptorRealization, lams) -> np.ndarray:
    """Batched evaluation; returns an array of shape ``(len(lams), p, m)``.

    No pole check is made; use :func:`evaluate` when that matters.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    K = lams.size
    if G.n == 0 or G.p == 0 or G.m == 0:
        out = np.empty((K, G.p, G.m), dtype=complex)
        out[:] = G.D
        if G.n and G.p and G.m:
            pass
        return out
    # Hessenberg reduction keeps batched solves cheap and accurate
    H, Z = sla.hessenberg(G.A, calc_q=True)
    Bh = Z.T @ G.B
    Ch = G.C @ Z
    M = lams[:, None, None] * np.eye(G.n)[None] - H[None]
    X = np.linalg.solve(M, np.broadcast_to(Bh.astype(complex), (K,) + Bh.shape))
    return np.einsum("ij,kjl->kil", Ch, X) + G.D[None]


def conjugate(G: DescriptorRealization) -> DescriptorRealization:
    """Realization of the conjugate ``G~``.

    Continuous time: ``G~(s) = G(-s)^T``.  Discrete time: ``G~(z) = G(1/z)^T``,
    which is proper only when ``A`` is invertible.
    """
    if not G.is_discrete:
        return _like(G, -G.A.T, G.C.T, -G.B.T, G.D.T)
    if G.n == 0:
        return _like(G, G.A, G.C.T, G.B.T, G.D.T)
    if np.linalg.cond(G.A) > 1e12:
        raise ImproperResult("conjugate of a discrete system with singular A is improper")
    F = np.linalg.inv(G.A).T
    return _like(G, F, F @ G.C.T, -G.B.T @ F, G.D.T - G.B.T @ F @ G.C.T)


def default_tol(G: DescriptorRealization) -> float:
    """``max(n, m, p) * eps * ||[A B; C D]||_F``."""
    big = np.block([[G.A, G.B], [G.C, G.D]]) if G.n else G.D
    return max(G.n, G.m, G.p, 1) * _EPS * max(np.linalg.norm(big), 1.0)


def _controllable_part(A, B, C, tol):
    """Orthogonal staircase: returns ``(Ac, Bc, Cc)`` of the controllable part."""
    n = A.shape[0]
    if n == 0:
        return A, B, C
    Z = np.eye(n)
    k = 0  # states already identified as controllable
    Arem, Brem = A.copy(), B.copy()
    while True:
        nrem = n - k
        if nrem == 0 or Brem.shape[1] == 0:
            break
        U, s, _ = np.linalg.svd(Brem, full_matrices=True)
        r = int(np.sum(s > tol))
        if r == 0:
            break
        T = np.eye(n)
        T[k:, k:] = U
        Z = Z @ T
        Anew = U.T @ Arem @ U
        k += r
        if r == nrem:
            break
        Brem = Anew[r:, :r]
        Arem = Anew[r:, r:]
    Zc = Z[:, :k]
    return Zc.T @ A @ Zc, Zc.T @ B, C @ Zc


def minimal_realization(G: DescriptorRealization, tol=None) -> DescriptorRealization:
    """Controllable and observable realization via staircase reductions.

    Rank decisions use singular values against ``tol`` (default
    :func:`default_tol`).  The result has ``order <= G.order`` and the same
    frequency response.
    """
    if G.n == 0:
        return G
    if tol is None:
        tol = default_tol(G)
    A, B, C = _controllable_part(G.A, G.B, G.C, tol)
    if A.shape[0]:
        At, Ct, Bt = _controllable_part(A.T, C.T, B.T, tol)
        A, B, C = At.T, Bt.T, Ct.T
    return _like(G, A, B, C, G.D)


def probe_points(G_or_domain, k, seed=0, avoid=None, Ts=None):
    """Random probe points on the stability boundary.

    Continuous time: ``j*w`` with ``|w|`` log-uniform in ``[1e-2, 1e2]`` and a
    random sign.  Discrete time: ``exp(j*theta)``.  Points within ``1e-6`` of
    a pole of the given system(s) are resampled.
    """
    if isinstance(G_or_domain, DescriptorRealization):
        domain = G_or_domain.domain
        systems = [G_or_domain]
    else:
        domain = G_or_domain
        systems = []
    if avoid is not None:
        systems = systems + list(avoid)
    poles = np.concatenate([np.linalg.eigvals(g.A) for g in systems if g.n]) \
        if any(g.n for g in systems) else np.zeros(0)
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < k:
        if domain == "discrete":
            lam = np.exp(1j * rng.uniform(-np.pi, np.pi))
        else:
            w = 10 ** rng.uniform(-2, 2) * rng.choice([-1.0, 1.0])
            lam = 1j * w
        if poles.size and np.min(np.abs(poles - lam)) <= 1e-6:
            continue
        pts.append(lam)
    return np.array(pts)
