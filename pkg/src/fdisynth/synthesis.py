"""Fault detection, isolation and model-matching filter synthesis.

Models are :class:`SynthesisModel` instances: one realization of
``y = G_u u + G_d d + G_f f + G_w w`` with the input columns ordered
``(u, d, f, w)``.  Filters are :class:`~fdisynth.factorizations.FilterPair`
objects carrying both ``Q`` and the fault/noise part of its internal form.

Failures of the rank conditions raise subclasses of
:class:`~fdisynth.errors.SynthesisFailure`; their ``condition`` attribute is
one of ``"complete-fault-detectability"``, ``"fault-isolability"`` or
``"strong-isolability"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    StabilityRegion,
    grid_norm,
    is_minimum_phase,
    is_stable,
    normal_rank,
    system_norm,
)
from .errors import (
    DimensionMismatch,
    EmptyNullspace,
    NoAdmissibleCombination,
    NonStandardProblem,
    NotDetectable,
    NotIsolable,
    NotStronglyIsolable,
    RankDeficient,
    UnstableOperand,
    ValidationError,
)
from .factorizations import (
    FilterPair,
    lcf_stabilize,
    least_order_reduce,
    left_nullspace_basis,
    minreal,
    outer_left_inverse,
    stable_projection,
    update,
)
from .lss import (
    DescriptorRealization,
    append,
    col_concat,
    col_select,
    conjugate,
    freqresp,
    inv,
    probe_points,
    row_select,
    row_stack,
    series,
    ss,
    static,
)

__all__ = [
    "SynthesisModel",
    "StructureMatrix",
    "SynthesisOptions",
    "SynthesisResult",
    "InternalForm",
    "internal_form",
    "is_completely_detectable",
    "is_isolable",
    "is_strongly_isolable",
    "emm_solvable",
    "efep_solvable",
    "reduce_via_nullspace",
    "synth_afd",
    "synth_efd",
    "synth_afdi",
    "synth_efdi",
    "synth_amm",
    "synth_emm",
    "structure_matrix_of",
    "fault_noise_gap",
    "bank_gap",
    "min_detectable_fault",
    "decoupling_norm",
]

DETECTABILITY = "complete-fault-detectability"
ISOLABILITY = "fault-isolability"
STRONG_ISOLABILITY = "strong-isolability"


def _empty_cols(p, domain, Ts):
    return ss(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((p, 0)), np.zeros((p, 0)), domain, Ts)


@dataclass(frozen=True, eq=False)
class SynthesisModel:
    """Plant with input columns ordered ``(u, d, f, w)``."""

    sys: DescriptorRealization
    m_u: int = 0
    m_d: int = 0
    m_f: int = 0
    m_w: int = 0

    def __post_init__(self):
        if min(self.m_u, self.m_d, self.m_f, self.m_w) < 0:
            raise DimensionMismatch("input group sizes must be non-negative")
        if self.m_u + self.m_d + self.m_f + self.m_w != self.sys.m:
            raise DimensionMismatch("input groups %d+%d+%d+%d do not match %d columns"
                                    % (self.m_u, self.m_d, self.m_f, self.m_w, self.sys.m))

    @classmethod
    def from_columns(cls, sys, controls=(), disturbances=(), faults=(), noise=()):
        """Build from a realization and disjoint column index lists."""
        groups = [list(controls), list(disturbances), list(faults), list(noise)]
        order = [i for g in groups for i in g]
        if sorted(order) != list(range(sys.m)):
            raise ValidationError("input index sets must partition the %d columns" % sys.m,
                                  field="inputs")
        return cls(col_select(sys, order), *map(len, groups))

    @classmethod
    def from_parts(cls, Gu=None, Gd=None, Gf=None, Gw=None):
        """Build from separate transfer-matrix realizations (any may be ``None``)."""
        parts = [g for g in (Gu, Gd, Gf, Gw) if g is not None]
        if not parts:
            raise DimensionMismatch("at least one input group is required")
        ref = parts[0]
        full = [g if g is not None else _empty_cols(ref.p, ref.domain, ref.Ts)
                for g in (Gu, Gd, Gf, Gw)]
        return cls(minreal(col_concat(*full)), *(g.m for g in full))

    @property
    def p(self):
        return self.sys.p

    @property
    def domain(self):
        return self.sys.domain

    def _cols(self, start, width):
        return col_select(self.sys, range(start, start + width))

    @property
    def Gu(self):
        return self._cols(0, self.m_u)

    @property
    def Gd(self):
        return self._cols(self.m_u, self.m_d)

    @property
    def Gf(self):
        return self._cols(self.m_u + self.m_d, self.m_f)

    @property
    def Gw(self):
        return self._cols(self.m_u + self.m_d + self.m_f, self.m_w)

    def Gf_col(self, j):
        return col_select(self.sys, [self.m_u + self.m_d + j])

    def plant_map(self) -> DescriptorRealization:
        """Realization of ``[G_u G_d G_f G_w; I 0 0 0]``."""
        G = self.sys
        Du = np.hstack([np.eye(self.m_u), np.zeros((self.m_u, G.m - self.m_u))])
        return ss(G.A, G.B, np.vstack([G.C, np.zeros((self.m_u, G.n))]),
                  np.vstack([G.D, Du]), G.domain, G.Ts)


@dataclass(frozen=True)
class StructureMatrix:
    """Binary matrix: entry ``(i, j)`` is 1 when residual block ``i`` responds to fault ``j``."""

    entries: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.entries))
        if S.size and not np.all(np.isin(S, (0, 1))):
            raise ValidationError("structure matrix entries must be 0 or 1", field="structure_matrix")
        S = S.astype(int)
        S.setflags(write=False)
        object.__setattr__(self, "entries", S)

    @property
    def shape(self):
        return self.entries.shape

    def has_zero_column(self) -> bool:
        return bool(np.any(self.entries.sum(axis=0) == 0))

    def tolist(self):
        return self.entries.tolist()

    def __eq__(self, other):
        other = other.entries if isinstance(other, StructureMatrix) else np.asarray(other)
        return self.entries.shape == np.shape(other) and bool(np.all(self.entries == other))

    __hash__ = None


@dataclass(frozen=True)
class SynthesisOptions:
    """Options shared by the synthesis drivers.

    ``region=None`` means the default region (margin ``beta``) in the model's
    time domain.  ``q`` is only used by the least-order search.
    """

    region: StabilityRegion | None = None
    beta: float = 0.05
    q: int | None = None
    least_order: bool = False
    nonzero_tol: float | None = None
    norm: str = "hinf"
    seed: int = 0
    soft: bool = False

    def __post_init__(self):
        if self.nonzero_tol is not None and not self.nonzero_tol > 0:
            raise ValueError("nonzero_tol must be positive")
        if self.q is not None and self.q < 1:
            raise ValueError("q must be at least 1")
        if self.norm.lower() not in ("hinf", "h2"):
            raise ValueError("norm must be 'hinf' or 'h2'")

    def region_for(self, model) -> StabilityRegion:
        return self.region or StabilityRegion(model.domain, self.beta)


@dataclass(eq=False)
class SynthesisResult:
    """Synthesized filter with its fault-to-noise gap and achieved structure."""

    filter: FilterPair
    eta: float
    achieved_structure: StructureMatrix
    problem: str
    diagnostics: dict = field(default_factory=dict)
    block_etas: tuple = ()
    M: DescriptorRealization | None = None
    matching_error: float | None = None
    degraded: bool = False

    @property
    def Q(self):
        return self.filter.Q

    def blocks(self):
        return [self.filter.block(i) for i in range(len(self.filter.blocks))]


# ---------------------------------------------------------------------------
# internal form and rank tests


@dataclass(frozen=True, eq=False)
class InternalForm:
    sys: DescriptorRealization
    m_u: int
    m_d: int
    m_f: int
    m_w: int

    def _cols(self, start, width):
        return col_select(self.sys, range(start, start + width))

    Ru = property(lambda self: self._cols(0, self.m_u))
    Rd = property(lambda self: self._cols(self.m_u, self.m_d))
    Rf = property(lambda self: self._cols(self.m_u + self.m_d, self.m_f))
    Rw = property(lambda self: self._cols(self.m_u + self.m_d + self.m_f, self.m_w))
    Rud = property(lambda self: self._cols(0, self.m_u + self.m_d))


def internal_form(model: SynthesisModel, Q: DescriptorRealization) -> InternalForm:
    """``Q [G_u G_d G_f G_w; I 0 0 0]`` partitioned as ``(R_u | R_d | R_f | R_w)``."""
    if Q.m != model.p + model.m_u:
        raise DimensionMismatch("filter has %d inputs, expected p + m_u = %d"
                                % (Q.m, model.p + model.m_u))
    R = minreal(series(Q, model.plant_map()))
    return InternalForm(R, model.m_u, model.m_d, model.m_f, model.m_w)


def decoupling_norm(model: SynthesisModel, Q: DescriptorRealization, n_probe=20, seed=0) -> float:
    """Largest ``||[R_u R_d](lam)||_2`` over random boundary probes."""
    if model.m_u + model.m_d == 0:
        return 0.0
    Rud = internal_form(model, Q).Rud
    pts = probe_points(model.sys, n_probe, seed=seed, avoid=[Q])
    vals = freqresp(Rud, pts)
    return float(max(np.linalg.norm(v, 2) for v in vals))


def _rank(G, seed):
    return normal_rank(G, seed=seed) if G.m else 0


def is_completely_detectable(model: SynthesisModel, seed=0) -> np.ndarray:
    """Per fault: ``rank [G_d G_fj] > rank G_d``."""
    Gd = model.Gd
    rd = _rank(Gd, seed)
    return np.array([_rank(col_concat(Gd, model.Gf_col(j)), seed) > rd
                     for j in range(model.m_f)], dtype=bool)


def _as_structure(S, m_f):
    S = S if isinstance(S, StructureMatrix) else StructureMatrix(S)
    if S.shape[1] != m_f:
        raise ValidationError("structure matrix has %d columns, model has %d faults"
                              % (S.shape[1], m_f), field="structure_matrix")
    return S


def is_isolable(model: SynthesisModel, S, seed=0) -> np.ndarray:
    """Per ``(i, j)`` with ``S_ij = 1``: ``rank [G_d Ghat_i G_fj] > rank [G_d Ghat_i]``.

    ``Ghat_i`` collects the fault columns with ``S_ij = 0``.  Entries where
    ``S_ij = 0`` are reported as ``True`` (nothing to check).
    """
    S = _as_structure(S, model.m_f).entries
    if not (S.any(axis=0).all() and S.any(axis=1).all()):
        raise ValidationError("structure matrix must not have zero rows or columns",
                              field="structure_matrix")
    out = np.ones(S.shape, dtype=bool)
    for i, row in enumerate(S):
        zero = [j for j in range(model.m_f) if row[j] == 0]
        base = col_concat(model.Gd, *(model.Gf_col(j) for j in zero)) if zero else model.Gd
        rb = _rank(base, seed)
        for j in np.flatnonzero(row):
            out[i, j] = _rank(col_concat(base, model.Gf_col(j)), seed) > rb
    return out


def is_strongly_isolable(model: SynthesisModel, seed=0) -> bool:
    """``rank [G_d G_f] = rank G_d + m_f``."""
    return _rank(col_concat(model.Gd, model.Gf), seed) == _rank(model.Gd, seed) + model.m_f


def emm_solvable(model: SynthesisModel, Mr: DescriptorRealization, seed=0) -> bool:
    """``rank [G_f G_d] = rank [G_f G_d; M_r 0]``."""
    top = col_concat(model.Gf, model.Gd)
    zero = static(np.zeros((Mr.p, model.m_d)), Mr.domain, Mr.Ts)
    bottom = col_concat(Mr, zero) if model.m_d else Mr
    return _rank(top, seed) == _rank(row_stack(top, bottom), seed)


def efep_solvable(model: SynthesisModel, seed=0) -> bool:
    """Strongly isolable and ``G_f`` minimum phase."""
    return is_strongly_isolable(model, seed) and is_minimum_phase(model.Gf)


# ---------------------------------------------------------------------------
# helpers


def _norm(G, kind="hinf"):
    if G.p == 0 or G.m == 0:
        return 0.0
    return system_norm(G, kind)


def _safe_hinf(G):
    try:
        return _norm(G)
    except UnstableOperand:
        return grid_norm(G)


def _col_norms(F: FilterPair, cols=None):
    cols = range(F.m_f) if cols is None else cols
    return np.array([_safe_hinf(F.Rf_col(j)) for j in cols])


def _default_tol(F: FilterPair, opts: SynthesisOptions):
    if opts.nonzero_tol is not None:
        return opts.nonzero_tol
    return 1e-5 * (1 + _safe_hinf(F.Rf)) if F.m_f else 1e-5


def _stabilize(F: FilterPair, region, block_diagonal=False):
    if is_stable(F.sys, region):
        return F, False
    return lcf_stabilize(F, region, block_diagonal=block_diagonal), True


def reduce_via_nullspace(model: SynthesisModel, region: StabilityRegion | None = None) -> FilterPair:
    """Nullspace stage: ``Q1`` annihilating ``[G_u G_d; I 0]`` and the reduced system.

    Returns a :class:`FilterPair` whose ``Q`` is ``Q1`` and whose ``R`` is
    ``[Gbar_f Gbar_w]``.  All parts are stable (a left coprime stabilization
    is applied when the plant has unstable fault or noise dynamics).

    Raises
    ------
    EmptyNullspace
        When ``[G_u G_d; I 0]`` has full normal row rank.
    """
    region = region or StabilityRegion(model.domain)
    G = model.sys
    p, mu = model.p, model.m_u
    Gud = ss(G.A, G.B[:, :mu + model.m_d],
             np.vstack([G.C, np.zeros((mu, G.n))]),
             np.vstack([G.D[:, :mu + model.m_d],
                        np.hstack([np.eye(mu), np.zeros((mu, model.m_d))])]),
             G.domain, G.Ts)
    Nl = left_nullspace_basis(Gud, region)
    nfw = model.m_f + model.m_w
    off = mu + model.m_d
    Bh = np.hstack([np.zeros((G.n, p + mu)), G.B[:, off:]])
    Ch = np.vstack([G.C, np.zeros((mu, G.n))])
    Dh = np.zeros((p + mu, p + mu + nfw))
    Dh[:, :p + mu] = np.eye(p + mu)
    Dh[:p, p + mu:] = G.D[:, off:]
    H = ss(G.A, Bh, Ch, Dh, G.domain, G.Ts)
    F = FilterPair(minreal(series(Nl, H)), p + mu, model.m_f, model.m_w)
    F, _ = _stabilize(F, region)
    return F


def structure_matrix_of(Rf, blocks=None, tol=1e-7) -> StructureMatrix:
    """Entry ``(i, j)`` is 1 iff ``||R_f^(i)_j||_inf > tol``.

    ``Rf`` is a realization of the stacked fault part or a :class:`FilterPair`
    (whose own row blocks are then used).  A bare realization without
    ``blocks`` is read one row per block.
    """
    if isinstance(Rf, FilterPair):
        blocks = Rf.blocks if blocks is None else blocks
        Rf = Rf.Rf
    blocks = tuple(blocks) if blocks is not None else (1,) * Rf.p
    if sum(blocks) != Rf.p:
        raise DimensionMismatch("row blocks %s do not cover %d rows" % (blocks, Rf.p))
    S = np.zeros((len(blocks), Rf.m), dtype=int)
    start = 0
    for i, b in enumerate(blocks):
        rows = row_select(Rf, range(start, start + b))
        for j in range(Rf.m):
            S[i, j] = int(_safe_hinf(minreal(col_select(rows, [j]))) > tol)
        start += b
    return StructureMatrix(S)


def fault_noise_gap(F: FilterPair, norm="hinf") -> float:
    """``min_j ||R_fj|| / ||R_w||``; infinite without noise or when ``R_w = 0``."""
    if not is_stable(F.sys, StabilityRegion(F.sys.domain, 1e-12)):
        raise UnstableOperand("fault-to-noise gap needs a stable filter pair")
    if F.m_w == 0:
        return float("inf")
    nw = _norm(F.Rw, norm)
    if nw <= 1e-14:
        return float("inf")
    if F.m_f == 0:
        return 0.0
    return float(min(_norm(F.Rf_col(j), norm) for j in range(F.m_f)) / nw)


def _gap(F: FilterPair, cols, norm="hinf") -> float:
    """Gap restricted to the fault columns ``cols``."""
    if F.m_w == 0:
        return float("inf")
    nw = _norm(F.Rw, norm)
    if nw <= 1e-14:
        return float("inf")
    return float(min(_norm(F.Rf_col(j), norm) for j in cols) / nw) if cols else 0.0


def bank_gap(F: FilterPair, S, norm="hinf") -> float:
    """Smallest per-block gap, each block judged on the faults it must detect."""
    S = _as_structure(S, F.m_f).entries
    etas = []
    for i in range(len(F.blocks)):
        Fi = F.block(i)
        etas.append(_gap(Fi, [int(j) for j in np.flatnonzero(S[i])], norm))
    return min(etas) if etas else float("inf")


def min_detectable_fault(F: FilterPair, delta_w: float, norm="hinf"):
    """Per-fault ``delta_w ||R_w|| / ||R_fj||`` and the global ``delta_w / eta``."""
    eta = fault_noise_gap(F, norm)
    if F.m_w == 0 or not np.isfinite(eta):
        return np.zeros(F.m_f), 0.0
    nw = _norm(F.Rw, norm)
    cols = np.array([_norm(F.Rf_col(j), norm) for j in range(F.m_f)])
    with np.errstate(divide="ignore"):
        per = np.where(cols > 0, delta_w * nw / np.where(cols > 0, cols, 1), np.inf)
    return per, float(delta_w / eta)


# ---------------------------------------------------------------------------
# Procedure AFD


def _full_row_rank(G, seed):
    return G.m >= G.p and normal_rank(G, seed=seed) == G.p


def _afd_steps(F: FilterPair, opts, region, tol, required, diag):
    """Steps 2-5 of the detection procedure on a nullspace-stage pair.

    ``required`` lists the fault columns that must stay nonzero.
    """
    degraded = False
    diag["order_nullspace"] = F.order
    if opts.least_order:
        q = min(opts.q or 1, F.q)

        def detects(c):
            return all(_safe_hinf(c.Rf_col(j)) > tol for j in required)

        def admissible(c):
            return detects(c) and (c.m_w == 0 or _full_row_rank(c.Rw, opts.seed))
        try:
            F = least_order_reduce(F, q, admissible, seed=opts.seed)
        except NoAdmissibleCombination:
            F = least_order_reduce(F, q, detects, seed=opts.seed)
            degraded = F.m_w > 0
        diag["order_least"] = F.order
    F, moved = _stabilize(F, region)
    diag["stabilized"] = bool(diag.get("stabilized")) or moved
    if F.m_w > 0 and not degraded:
        if _full_row_rank(F.Rw, opts.seed):
            try:
                Q4, _, _ = outer_left_inverse(F.Rw)
                F = update(F, Q4)
                diag["order_outer"] = F.order
            except (NonStandardProblem, RankDeficient) as exc:
                degraded = True
                diag["step4_skipped"] = str(exc)
        else:
            degraded = True
            diag["step4_skipped"] = "noise part lacks full row rank"
        F, moved = _stabilize(F, region)
    diag["degraded"] = degraded
    return F, degraded


def synth_afd(model: SynthesisModel, opts: SynthesisOptions | None = None) -> SynthesisResult:
    """Approximate (and, without noise, exact) fault detection filter.

    Raises
    ------
    NotDetectable
        Some fault column is zero in the reduced system; ``indices`` names them.
    """
    opts = opts or SynthesisOptions()
    region = opts.region_for(model)
    try:
        F = reduce_via_nullspace(model, region)
    except EmptyNullspace:
        raise NotDetectable("no fault is detectable: rank [G_d G_fj] = rank G_d = p for all j",
                            DETECTABILITY, tuple(range(model.m_f))) from None
    tol = _default_tol(F, opts)
    norms = _col_norms(F)
    bad = tuple(int(j) for j in np.flatnonzero(norms <= tol))
    if bad:
        raise NotDetectable("fault(s) %s not detectable: rank [G_d G_fj] = rank G_d"
                            % ", ".join(str(j) for j in bad), DETECTABILITY, bad)
    diag = {"nonzero_tol": tol}
    F, degraded = _afd_steps(F, opts, region, tol, range(model.m_f), diag)
    eta = fault_noise_gap(F, opts.norm)
    S = structure_matrix_of(F.Rf, (F.q,), tol=1e-7)
    diag["order"] = F.order
    diag["decoupling"] = decoupling_norm(model, F.Q, seed=opts.seed)
    problem = "AFD" if model.m_w else "EFD"
    return SynthesisResult(F, eta, S, problem, diag, (eta,), degraded=degraded)


def synth_efd(model, opts=None):
    """Exact detection: :func:`synth_afd` on the model with the noise ignored."""
    if model.m_w:
        model = SynthesisModel(col_select(model.sys, range(model.sys.m - model.m_w)),
                               model.m_u, model.m_d, model.m_f, 0)
    return synth_afd(model, opts)


# ---------------------------------------------------------------------------
# Procedure AFDI


def _permute_faults(F: FilterPair, keep, move):
    """Pair with fault columns ``keep`` as faults and ``move`` appended to noise."""
    cols = list(range(F.n_q)) + [F.n_q + j for j in keep] + [F.n_q + j for j in move] \
        + list(range(F.n_q + F.m_f, F.sys.m))
    return FilterPair(col_select(F.sys, cols), F.n_q, len(keep), len(move) + F.m_w)


def _unpermute_faults(F: FilterPair, keep, move, m_f):
    order = list(keep) + list(move)
    inv_perm = [F.n_q + order.index(j) for j in range(m_f)]
    cols = list(range(F.n_q)) + inv_perm + list(range(F.n_q + m_f, F.sys.m))
    return FilterPair(col_select(F.sys, cols), F.n_q, m_f, F.sys.m - F.n_q - m_f)


def synth_afdi(model: SynthesisModel, S, opts: SynthesisOptions | None = None) -> SynthesisResult:
    """Bank of detection filters achieving the structure matrix ``S``.

    Strict mode (default) decouples the faults with ``S_ij = 0`` exactly from
    block ``i``; soft mode treats them as extra noise.

    Raises
    ------
    NotIsolable
        A row of ``S`` cannot be achieved; ``indices`` holds ``(row, fault)`` pairs.
    NotDetectable
        Soft mode only, when some fault is not detectable at all.
    """
    opts = opts or SynthesisOptions()
    S = _as_structure(S, model.m_f)
    if S.has_zero_column() or not S.entries.any(axis=1).all():
        raise ValidationError("structure matrix must not have zero rows or columns",
                              field="structure_matrix")
    region = opts.region_for(model)
    try:
        F0 = reduce_via_nullspace(model, region)
    except EmptyNullspace:
        pairs = [(i, int(j)) for i, row in enumerate(S.entries) for j in np.flatnonzero(row)]
        exc = NotIsolable if not opts.soft else NotDetectable
        raise exc("the nullspace of [G_u G_d; I 0] is empty",
                  ISOLABILITY if not opts.soft else DETECTABILITY, pairs) from None
    tol0 = _default_tol(F0, opts)
    if opts.soft:
        bad = tuple(int(j) for j in np.flatnonzero(_col_norms(F0) <= tol0))
        if bad:
            raise NotDetectable("fault(s) %s not detectable: rank [G_d G_fj] = rank G_d"
                                % ", ".join(map(str, bad)), DETECTABILITY, bad)
    rows, etas, diags = [], [], []
    degraded_any = False
    for i, srow in enumerate(S.entries):
        ones = [int(j) for j in np.flatnonzero(srow)]
        zeros_ = [int(j) for j in np.flatnonzero(srow == 0)]
        diag = {"row": i}
        if opts.soft:
            # decoupling is not enforced: the unwanted faults join the noise
            Fi = _permute_faults(F0, ones, zeros_)
            Fi, deg = _afd_steps(Fi, opts, region, tol0, range(len(ones)), diag)
            etas.append(fault_noise_gap(Fi, opts.norm))
            Fi = _unpermute_faults(Fi, ones, zeros_, model.m_f)
        else:
            Fi = F0
            tol = tol0
            if zeros_:
                try:
                    Ni = left_nullspace_basis(col_select(F0.Rf, zeros_), region)
                except EmptyNullspace:
                    raise NotIsolable("row %d: faults %s cannot be decoupled while keeping %s"
                                      % (i, zeros_, ones), ISOLABILITY,
                                      [(i, j) for j in ones]) from None
                Fi, _ = _stabilize(update(F0, Ni), region)
                tol = opts.nonzero_tol or 1e-5 * (1 + _safe_hinf(col_select(Fi.Rf, ones)))
                bad = [j for j in ones if _safe_hinf(Fi.Rf_col(j)) <= tol]
                if bad:
                    raise NotIsolable(
                        "row %d: rank [G_d Ghat_i G_fj] = rank [G_d Ghat_i] for faults %s"
                        % (i, bad), ISOLABILITY, [(i, j) for j in bad])
            Fi, deg = _afd_steps(Fi, opts, region, tol, ones, diag)
            etas.append(_gap(Fi, ones, opts.norm))
        degraded_any |= deg
        rows.append(Fi)
        diags.append(diag)
    bank_sys = row_stack(*[r.sys for r in rows])
    bank = FilterPair(bank_sys, F0.n_q, model.m_f, model.m_w, tuple(r.q for r in rows))
    achieved = structure_matrix_of(bank, tol=1e-7)
    diag = {"rows": diags, "order": bank.order,
            "decoupling": decoupling_norm(model, bank.Q, seed=opts.seed)}
    if not opts.soft and achieved != S:
        diag["structure_mismatch"] = True
    problem = "AFDI" if model.m_w else "EFDI"
    return SynthesisResult(bank, min(etas), achieved, problem, diag,
                           tuple(etas), degraded=degraded_any)


def synth_efdi(model, S, opts=None):
    if model.m_w:
        model = SynthesisModel(col_select(model.sys, range(model.sys.m - model.m_w)),
                               model.m_u, model.m_d, model.m_f, 0)
    return synth_afdi(model, S, opts)


# ---------------------------------------------------------------------------
# Procedure AMMS


def _check_reference(Mr, m_f, domain):
    if Mr.shape != (m_f, m_f):
        raise DimensionMismatch("reference model must be %dx%d, got %dx%d"
                                % ((m_f, m_f) + Mr.shape))
    if Mr.domain != domain:
        raise DimensionMismatch("reference model lives in the wrong time domain")
    if not is_stable(Mr, StabilityRegion(domain, 1e-12)):
        raise ValidationError("reference model must be stable", field="ref")
    for i in range(m_f):
        for j in range(m_f):
            if i != j:
                g = col_select(row_select(Mr, [i]), [j])
                if grid_norm(g) > 1e-12 * (1 + grid_norm(Mr)):
                    raise ValidationError("reference model must be diagonal", field="ref")
    if normal_rank(Mr) < m_f:
        raise ValidationError("reference model must be invertible", field="ref")


def _biproper_scaling(g: DescriptorRealization, a: float):
    """``((lam + a)/a)^r g`` biproper (``z^r g`` in discrete time) and ``r``."""
    A, B, C, D = g.A, g.B, g.C, g.D
    scale_ = max(1.0, np.linalg.norm(C) * np.linalg.norm(B)) if g.n else 1.0
    r = 0
    while abs(D[0, 0]) <= 1e-10 * scale_ and r < g.n:
        if g.is_discrete:
            C, D = C @ A, C @ B
        else:
            C, D = C @ (A + a * np.eye(g.n)) / a, C @ B / a
        r += 1
    return ss(A, B, C, D, g.domain, g.Ts), r


def _lag(a, domain, Ts):
    if domain == "discrete":
        return ss(np.zeros((1, 1)), np.eye(1), np.eye(1), np.zeros((1, 1)), domain, Ts)
    return ss(-a * np.eye(1), np.eye(1), a * np.eye(1), np.zeros((1, 1)), domain, Ts)


def _emm_row(F, i, Mr_ii, region, opts, tol, a=1.0):
    """One exact model-matching row: returns the updated 1-row pair and ``m_i``."""
    others = [j for j in range(F.m_f) if j != i]
    if others:
        Ni = left_nullspace_basis(col_select(F.Rf, others), region)
        Fi = update(F, Ni)
    else:
        Fi = F
    if Fi.q > 1:
        Fi = least_order_reduce(Fi, 1, lambda c: _safe_hinf(c.Rf_col(i)) > tol,
                                seed=opts.seed)
    Fi, _ = _stabilize(Fi, region)
    g = minreal(Fi.Rf_col(i))
    gt, r = _biproper_scaling(g, a)
    N, Mt = lcf_stabilize(inv(gt), region, return_denominator=True)
    phi = series(Mr_ii, N)
    Fi = update(Fi, phi)
    mi = Mt
    for _ in range(r):
        mi = series(_lag(a, g.domain, g.Ts), mi)
    return Fi, minreal(mi)


def synth_amm(model: SynthesisModel, Mr: DescriptorRealization | None = None,
              opts: SynthesisOptions | None = None) -> SynthesisResult:
    """Model-matching filter: ``R_f ~ M M_r`` with ``M`` diagonal, stable, invertible.

    Without noise the match is exact (one row per fault).  With noise the
    2-norm least-distance solution is used after a co-outer/co-inner
    normalization of ``[R_f R_w]``.

    Raises
    ------
    NotStronglyIsolable
        ``rank Gbar_f < m_f``.
    NonStandardProblem
        ``[R_f R_w]`` has zeros on the stability boundary.
    """
    opts = opts or SynthesisOptions()
    region = opts.region_for(model)
    m_f = model.m_f
    if Mr is None:
        Mr = static(np.eye(m_f), model.domain, model.sys.Ts)
    _check_reference(Mr, m_f, model.domain)
    try:
        F = reduce_via_nullspace(model, region)
    except EmptyNullspace:
        raise NotStronglyIsolable("rank [G_d G_f] < rank G_d + m_f", STRONG_ISOLABILITY,
                                  tuple(range(m_f))) from None
    if normal_rank(F.Rf, seed=opts.seed) < m_f:
        raise NotStronglyIsolable("rank [G_d G_f] < rank G_d + m_f", STRONG_ISOLABILITY,
                                  tuple(range(m_f)))
    tol = _default_tol(F, opts)
    diag = {"order_nullspace": F.order}
    if model.m_w == 0:
        rows, ms = [], []
        for i in range(m_f):
            Mr_ii = col_select(row_select(Mr, [i]), [i])
            Fi, mi = _emm_row(F, i, Mr_ii, region, opts, tol)
            rows.append(Fi)
            ms.append(mi)
        F = FilterPair(row_stack(*[r.sys for r in rows]), F.n_q, m_f, 0, (1,) * m_f)
        M = append(*ms)
        err = _safe_hinf(minreal(series(M, Mr) - F.Rf))
        problem = "EMM"
    else:
        rR = normal_rank(F.R, seed=opts.seed)
        if opts.least_order or rR < F.q:
            F = least_order_reduce(
                F, rR, lambda c: _full_row_rank(c.R, opts.seed)
                and normal_rank(c.Rf, seed=opts.seed) == m_f, seed=opts.seed)
            diag["order_least"] = F.order
        Q3, Gi1, phi = outer_left_inverse(F.R)
        F = update(F, Q3)
        diag["order_outer"] = F.order
        target = col_concat(Mr, static(np.zeros((m_f, model.m_w)), model.domain, model.sys.Ts))
        F1 = minreal(series(target, conjugate(Gi1)))
        Q4, _ = stable_projection(F1)
        F = update(F, Q4, blocks=(1,) * m_f)
        M = append(*([phi] * m_f))
        if not is_stable(F.sys, region):
            F, M5 = lcf_stabilize(F, region, block_diagonal=True, return_denominator=True)
            M = minreal(series(M5, M))
        diff = minreal(series(M, Mr) - F.Rf)
        err = _safe_hinf(minreal(col_concat(diff, F.Rw)))
        problem = "AMM"
    diag["order"] = F.order
    diag["decoupling"] = decoupling_norm(model, F.Q, seed=opts.seed)
    eta = fault_noise_gap(F, opts.norm)
    S = structure_matrix_of(F, tol=1e-7)
    return SynthesisResult(F, eta, S, problem, diag, (eta,), M=M, matching_error=err)


def synth_emm(model, Mr=None, opts=None):
    if model.m_w:
        model = SynthesisModel(col_select(model.sys, range(model.sys.m - model.m_w)),
                               model.m_u, model.m_d, model.m_f, 0)
    return synth_amm(model, Mr, opts)
