"""Topology reconstruction from CPSD matrices at a single frequency.

Four recovery routes are implemented, all operating on the inverse of the
output CPSD matrix evaluated at one frequency ``w0`` inside the excitation
band:

* :func:`boolean_directed` -- edge presence for an arbitrary directed network
  from the full run plus the ``N`` grounded runs; needs no knowledge of the
  input noise.
* :func:`exact_directed` -- edge weights for the same setting, once the input
  density ``S_w(w0)`` is known (recoverable through
  :func:`input_psd_from_eigenpair` whenever an eigenpair of the connectivity
  matrix is known a priori, e.g. diffusive/Laplacian coupling or in-regular
  adjacencies).
* :func:`exact_undirected` -- symmetric networks, no grounding required: a
  Hermitian square root plus a scalar shift.
* :func:`nonreciprocal` -- networks with no bidirectional pairs, no grounding
  required: the skew part of the inverse CPSD carries ``G - G^T``.

Grounding node ``j`` deletes its row and column from both the coupling matrix
and the CPSD; the inverse-CPSD diagonal of surviving node ``i`` then drops by
exactly ``g_ji^2 / S_w``, which is the quantity thresholded (Boolean) or
square-rooted (exact).  Diagonal entries ``g_jj`` are unobservable by
construction (grounding removes them with the row/column); recovered
diagonals are fixed at zero and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import FrequencyRejectedError, NumericalError, ValidationError
from .graphs import BooleanStructure, ConnectivityMatrix
from .lti import CpsdMatrix, H_ZERO_TOL
from .spectral import CpsdInverse, estimate_inverse_cpsd

__all__ = [
    "ReconstructionDiagnostics",
    "ReconstructionResult",
    "RowRecovery",
    "UndirectedRecovery",
    "input_psd_from_eigenpair",
    "input_psd_laplacian",
    "recover_row",
    "boolean_directed",
    "exact_directed",
    "exact_undirected",
    "nonreciprocal",
    "threshold_heuristic",
]

#: Default edge threshold for analytic pipelines (empirical runs should use
#: the gap heuristic or a user-chosen value).
DEFAULT_TAU = 1e-6

#: |Im{1/h}| below this rejects the frequency for the skew-part method.
IM_H_INV_TOL = 1e-8


@dataclass(frozen=True)
class ReconstructionDiagnostics:
    """Raw per-entry statistics and numerical health of a reconstruction.

    ``raw_differences[j, i]`` holds the inverse-CPSD diagonal difference for
    the candidate edge ``v_i -> v_j`` (ungrounded minus grounded-at-``j``),
    before any scaling or clamping; ``nan`` on the diagonal.  For the
    grounding-free routes it holds the analogous raw edge statistic.
    """

    raw_differences: np.ndarray
    clamp_count: int = 0
    suppressed_count: int = 0
    condition_numbers: dict = field(default_factory=dict)
    loaded: tuple = ()
    notes: tuple = ()


@dataclass(frozen=True)
class ReconstructionResult:
    """Recovered topology plus everything needed to audit it."""

    omega0: float
    boolean_structure: Optional[BooleanStructure] = None
    weights: Optional[ConnectivityMatrix] = None
    input_psd_estimate: Optional[float] = None
    threshold_used: Optional[float] = None
    diagnostics: Optional[ReconstructionDiagnostics] = None


def input_psd_from_eigenpair(
    s: CpsdMatrix,
    h: complex,
    eigenvalue: float,
    eigenvector: np.ndarray,
) -> float:
    """Recover the input noise density ``S_w(w)`` from a known eigenpair.

    For ``G u = lam u`` the quadratic form of the inverse CPSD satisfies
    ``u^T S^{-1} u * S_w = ||u||^2 |lam h - 1|^2 / |h|^2``; solving for
    ``S_w`` needs no knowledge of the rest of ``G``.  The formula is invariant
    to the scaling of ``u``.
    """
    if abs(h) < H_ZERO_TOL:
        raise FrequencyRejectedError(
            "nodal transfer function vanishes at the evaluation frequency"
        )
    u = np.asarray(eigenvector, dtype=float)
    if u.shape != (s.n_nodes,):
        raise ValidationError(
            f"eigenvector has shape {u.shape}, expected ({s.n_nodes},)"
        )
    norm2 = float(u @ u)
    if norm2 == 0.0:
        raise ValidationError("eigenvector must be nonzero")
    inv = estimate_inverse_cpsd(s)
    quad = float(np.real(u @ inv.values @ u))
    if quad <= 0.0:
        raise NumericalError(
            f"quadratic form u^T S^-1 u = {quad:.3e} is not positive; the CPSD "
            f"estimate is unusable (condition number {inv.condition_number:.3e})"
        )
    lam = float(eigenvalue)
    s_w = norm2 * abs(lam * h - 1.0) ** 2 / (quad * abs(h) ** 2)
    if s_w <= 0.0:
        raise NumericalError("recovered input PSD is not positive")
    return s_w


def input_psd_laplacian(s: CpsdMatrix, h: complex) -> float:
    """Input density for diffusive (Laplacian) coupling: eigenpair ``(0, ones)``.

    Reduces to ``N / ((1^T S^{-1} 1) |h|^2)``.
    """
    return input_psd_from_eigenpair(s, h, 0.0, np.ones(s.n_nodes))


class RowRecovery(NamedTuple):
    """One recovered row of the coupling matrix (edges received by node j)."""

    weights: np.ndarray
    raw_differences: np.ndarray
    clamped: int


def recover_row(
    s_inv: np.ndarray,
    sj_inv: np.ndarray,
    j: int,
    s_w: float,
) -> RowRecovery:
    """Row ``j`` of the coupling matrix from the grounded-at-``j`` experiment.

    For every ``i != j`` the entry is ``sqrt(S_w * D_i)`` where ``D_i`` is the
    difference between diagonal entry ``i`` of the full inverse CPSD and the
    matching diagonal entry of the grounded inverse (indices above ``j`` shift
    down by one in the grounded matrix).  Negative differences are impossible
    analytically, so they are clamped to zero and counted; the diagonal entry
    is unobservable and reported as zero (``nan`` in the raw vector).
    """
    n = s_inv.shape[0]
    if s_inv.shape != (n, n) or sj_inv.shape != (n - 1, n - 1):
        raise ValidationError(
            f"expected ({n},{n}) and ({n-1},{n-1}) inverses, got "
            f"{s_inv.shape} and {sj_inv.shape}"
        )
    if not 1 <= j <= n:
        raise IndexError(f"node index {j} out of range [1, {n}]")
    if s_w <= 0:
        raise ValidationError("S_w must be positive")
    raw = np.full(n, np.nan)
    weights = np.zeros(n)
    clamped = 0
    for i in range(1, n + 1):
        if i == j:
            continue
        si = i - 1 if i < j else i - 2
        d = float(s_inv[i - 1, i - 1].real - sj_inv[si, si].real)
        raw[i - 1] = d
        if d < 0.0:
            clamped += 1
            d = 0.0
        weights[i - 1] = np.sqrt(s_w * d)
    return RowRecovery(weights=weights, raw_differences=raw, clamped=clamped)


def _grounded_inverses(
    s: CpsdMatrix, grounded: Sequence[tuple[int, CpsdMatrix]]
) -> tuple[CpsdInverse, dict[int, CpsdInverse]]:
    n = s.n_nodes
    by_node: dict[int, CpsdMatrix] = {}
    for j, sj in grounded:
        j = int(j)
        if not 1 <= j <= n:
            raise IndexError(f"grounded index {j} out of range [1, {n}]")
        if j in by_node:
            raise ValidationError(f"duplicate grounded matrix for node {j}")
        if sj.n_nodes != n - 1:
            raise ValidationError(
                f"grounded CPSD for node {j} has size {sj.n_nodes}, expected {n - 1}"
            )
        if not np.isclose(sj.omega, s.omega, rtol=1e-9, atol=1e-12):
            raise ValidationError(
                f"grounded CPSD for node {j} is at omega={sj.omega!r}, "
                f"full CPSD at omega={s.omega!r}"
            )
        by_node[j] = sj
    missing = sorted(set(range(1, n + 1)) - set(by_node))
    if missing:
        raise ValidationError(f"missing grounded CPSD for nodes {missing}")
    return estimate_inverse_cpsd(s), {
        j: estimate_inverse_cpsd(sj) for j, sj in by_node.items()
    }


def _raw_difference_matrix(
    s_inv: CpsdInverse, grounded_inv: dict[int, CpsdInverse]
) -> np.ndarray:
    n = s_inv.values.shape[0]
    raw = np.full((n, n), np.nan)
    for j, inv_j in grounded_inv.items():
        for i in range(1, n + 1):
            if i == j:
                continue
            si = i - 1 if i < j else i - 2
            raw[j - 1, i - 1] = float(
                s_inv.values[i - 1, i - 1].real - inv_j.values[si, si].real
            )
    return raw


def _conditioning(
    s_inv: CpsdInverse, grounded_inv: dict[int, CpsdInverse]
) -> tuple[dict, tuple]:
    conds = {"full": s_inv.condition_number}
    loaded = ["full"] if s_inv.loaded else []
    for j, inv_j in grounded_inv.items():
        conds[f"grounded_{j}"] = inv_j.condition_number
        if inv_j.loaded:
            loaded.append(f"grounded_{j}")
    return conds, tuple(loaded)


def boolean_directed(
    s: CpsdMatrix,
    grounded: Sequence[tuple[int, CpsdMatrix]],
    tau: float = DEFAULT_TAU,
) -> ReconstructionResult:
    """Edge presence from grounding, with no knowledge of the input noise.

    Declares ``v_i -> v_j`` present iff the raw inverse-CPSD diagonal
    difference exceeds ``tau``.  The difference itself (not scaled by
    ``S_w``) is thresholded; all raw values are retained in the diagnostics
    so other thresholds can be applied after the fact.
    """
    s_inv, grounded_inv = _grounded_inverses(s, grounded)
    raw = _raw_difference_matrix(s_inv, grounded_inv)
    entries = np.zeros_like(raw, dtype=int)
    off = ~np.eye(s.n_nodes, dtype=bool)
    entries[off] = raw[off] > tau
    conds, loaded = _conditioning(s_inv, grounded_inv)
    return ReconstructionResult(
        omega0=s.omega,
        boolean_structure=BooleanStructure(entries),
        threshold_used=float(tau),
        diagnostics=ReconstructionDiagnostics(
            raw_differences=raw,
            condition_numbers=conds,
            loaded=loaded,
            notes=("self-loops are unobservable; diagonal forced to absent",),
        ),
    )


def exact_directed(
    s: CpsdMatrix,
    grounded: Sequence[tuple[int, CpsdMatrix]],
    s_w: float,
    tau: float = DEFAULT_TAU,
) -> ReconstructionResult:
    """Edge weights from grounding plus the input density at ``w0``.

    Assembles every row through :func:`recover_row`.  Entries whose raw
    statistic does not exceed ``tau`` are reported as absent (weight zero);
    the raw statistics stay available in the diagnostics.  Negative raw
    differences (estimation noise; impossible analytically) are clamped and
    counted.
    """
    if s_w <= 0:
        raise ValidationError("S_w must be positive")
    s_inv, grounded_inv = _grounded_inverses(s, grounded)
    raw = _raw_difference_matrix(s_inv, grounded_inv)
    n = s.n_nodes
    weights = np.sqrt(np.clip(np.nan_to_num(raw, nan=0.0) * s_w, 0.0, None))
    off = ~np.eye(n, dtype=bool)
    present = np.zeros((n, n), dtype=bool)
    present[off] = raw[off] > tau
    weights[~present] = 0.0
    clamp_count = int(np.sum(raw[off] < 0.0))
    suppressed = int(np.sum((raw[off] > 0.0) & (raw[off] <= tau)))
    conds, loaded = _conditioning(s_inv, grounded_inv)
    return ReconstructionResult(
        omega0=s.omega,
        boolean_structure=BooleanStructure(present.astype(int)),
        weights=ConnectivityMatrix(weights),
        input_psd_estimate=float(s_w),
        threshold_used=float(tau),
        diagnostics=ReconstructionDiagnostics(
            raw_differences=raw,
            clamp_count=clamp_count,
            suppressed_count=suppressed,
            condition_numbers=conds,
            loaded=loaded,
            notes=(
                "recovered off-diagonal weights are magnitudes",
                "self-loops are unobservable; diagonal fixed at zero",
            ),
        ),
    )


class UndirectedRecovery(NamedTuple):
    """Symmetric-network recovery plus the square-root branch audit trail."""

    connectivity: ConnectivityMatrix
    flipped: bool
    branch_score: float
    branch_score_alternative: float
    clamped_eigenvalues: int
    condition_number: float


def _branch_score(g: np.ndarray) -> float:
    """Negative off-diagonal mass: zero for a valid nonnegative coupling."""
    off = g[~np.eye(g.shape[0], dtype=bool)]
    return float(np.clip(-off, 0.0, None).sum())


def exact_undirected(
    s: CpsdMatrix,
    h: complex,
    s_w: float,
    eig_clamp_tol: float = 1e-8,
) -> UndirectedRecovery:
    """Symmetric coupling matrix from the CPSD at one frequency, no grounding.

    Computes ``M = S^{-1} S_w - Im^2{1/h} I`` (equal to ``(G - Re{1/h} I)^2``
    for symmetric ``G``), takes its principal Hermitian square root ``R``, and
    forms ``Re{1/h} I +/- R``.  The square root only determines
    ``G - Re{1/h} I`` up to sign, and the CPSD itself cannot discriminate:
    both sign candidates reproduce it exactly.  The default takes ``-R`` when
    ``Re{1/h} >= 0`` (the case for diffusive coupling with stable first-order
    nodes, where stability forces the spectrum of ``G`` below ``Re{1/h}``)
    and the choice is verified against the model's nonnegative-coupling
    assumption: the wrong branch negates the off-diagonal, so the candidate
    with less negative off-diagonal mass (smaller norm on ties) wins.  A flip
    of the default is reported, not silent.

    Eigenvalues of ``M`` within ``-eig_clamp_tol`` (relative to the largest)
    are clamped to zero; more negative ones raise, since they signal an
    eigenvalue of ``G`` straddling ``Re{1/h}`` or an unusable estimate.
    """
    if abs(h) < H_ZERO_TOL:
        raise FrequencyRejectedError(
            "nodal transfer function vanishes at the evaluation frequency"
        )
    if s_w <= 0:
        raise ValidationError("S_w must be positive")
    inv = estimate_inverse_cpsd(s)
    a = 1.0 / h
    n = s.n_nodes
    m = inv.values * s_w - (a.imag**2) * np.eye(n)
    m = 0.5 * (m + m.conj().T)
    lam, v = np.linalg.eigh(m)
    scale = max(1.0, float(lam[-1]))
    if lam[0] < -eig_clamp_tol * scale:
        raise NumericalError(
            f"S^-1 S_w - Im^2(1/h) I has eigenvalue {lam[0]:.3e} below "
            f"-{eig_clamp_tol:.1e} * {scale:.3g}; wrong branch or bad estimate"
        )
    clamped = int(np.sum(lam < 0.0))
    root = (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.conj().T
    residue = float(np.abs(root.imag).max())
    if residue > 1e-8 * max(1.0, float(np.abs(root.real).max())):
        raise NumericalError(
            f"imaginary residue {residue:.3e} in the matrix square root; "
            "the input CPSD is inconsistent with a symmetric network"
        )
    root = root.real
    default_sign = -1.0 if a.real >= 0.0 else 1.0
    candidates = {}
    for sign in (default_sign, -default_sign):
        g = a.real * np.eye(n) + sign * root
        g = 0.5 * (g + g.T)
        candidates[sign] = (g, _branch_score(g))
    g_default, score_default = candidates[default_sign]
    g_other, score_other = candidates[-default_sign]
    tol = 1e-12 * max(1.0, float(np.abs(root).max()))
    flip = score_other < score_default - tol or (
        abs(score_other - score_default) <= tol
        and np.linalg.norm(g_other) < np.linalg.norm(g_default) - tol
    )
    if flip:
        chosen, flipped, res, res_alt = g_other, True, score_other, score_default
    else:
        chosen, flipped, res, res_alt = g_default, False, score_default, score_other
    return UndirectedRecovery(
        connectivity=ConnectivityMatrix(chosen),
        flipped=flipped,
        branch_score=res,
        branch_score_alternative=res_alt,
        clamped_eigenvalues=clamped,
        condition_number=inv.condition_number,
    )


def nonreciprocal(
    s: CpsdMatrix,
    h: complex,
    s_w: Optional[float] = None,
    tau: float = DEFAULT_TAU,
) -> ReconstructionResult:
    """Nonreciprocal (no bidirectional pairs) recovery, no grounding.

    The imaginary part of the inverse CPSD equals ``Im{1/h} (G - G^T) / S_w``;
    for a nonreciprocal nonnegative ``G`` the positive part of the skew matrix
    is ``G`` itself.  The Boolean structure needs only the sign of
    ``Im{1/h}``, so it is available without ``S_w``; weights additionally
    require ``s_w``.  Frequencies where ``Im{1/h}`` (the strictly-proper
    node's phase) vanishes are rejected.
    """
    if abs(h) < H_ZERO_TOL:
        raise FrequencyRejectedError(
            "nodal transfer function vanishes at the evaluation frequency"
        )
    a = 1.0 / h
    if abs(a.imag) < IM_H_INV_TOL:
        raise FrequencyRejectedError(
            f"|Im(1/h)| = {abs(a.imag):.3e} too small at omega={s.omega:.6g}; "
            "choose a nonzero frequency away from the node's phase zeros"
        )
    inv = estimate_inverse_cpsd(s)
    skew = inv.values.imag / a.imag  # equals (G - G^T)/S_w, zero diagonal
    n = s.n_nodes
    off = ~np.eye(n, dtype=bool)
    entries = np.zeros((n, n), dtype=int)
    entries[off] = skew[off] > tau
    weights = None
    s_w_out = None
    raw = skew.copy()
    if s_w is not None:
        if s_w <= 0:
            raise ValidationError("S_w must be positive")
        raw = s_w * skew
        w = np.clip(raw, 0.0, None)
        np.fill_diagonal(w, 0.0)
        weights = ConnectivityMatrix(w)
        s_w_out = float(s_w)
    np.fill_diagonal(raw, np.nan)
    return ReconstructionResult(
        omega0=s.omega,
        boolean_structure=BooleanStructure(entries),
        weights=weights,
        input_psd_estimate=s_w_out,
        threshold_used=float(tau),
        diagnostics=ReconstructionDiagnostics(
            raw_differences=raw,
            condition_numbers={"full": inv.condition_number},
            loaded=("full",) if inv.loaded else (),
            notes=("skew-part method; assumes Tr(G^2) = 0 and G >= 0",),
        ),
    )


def threshold_heuristic(
    raw_values: Sequence[float], fallback_tau: float = DEFAULT_TAU
) -> float:
    """Pick an edge threshold separating signal from the noise floor.

    Sorts the positive raw statistics and returns the geometric midpoint of
    the largest multiplicative gap between consecutive values.  Two guards
    keep the gap search out of the noise tail: the magnitude of the negative
    statistics (non-edges fluctuate symmetrically around zero, true edges are
    never negative) sets a robust noise scale below which gaps are ignored,
    and if the positive values span less than a decade the configured
    absolute fallback is returned instead.
    """
    vals = np.asarray(raw_values, dtype=float).ravel()
    vals = vals[np.isfinite(vals)]
    pos = np.sort(vals[vals > 0.0])[::-1]
    if pos.size == 0 or pos[0] / pos[-1] < 10.0:
        return float(fallback_tau)
    neg = vals[vals < 0.0]
    floor = 3.0 * 1.4826 * float(np.median(np.abs(neg))) if neg.size else 0.0
    cand = list(pos[pos > floor])
    if not cand:
        return float(fallback_tau)
    below = pos[pos <= floor]
    if floor > 0.0:
        cand.append(max(floor, float(below.max()) if below.size else floor))
    if len(cand) < 2:
        return float(fallback_tau)
    ratios = [cand[t] / cand[t + 1] for t in range(len(cand) - 1)]
    t = int(np.argmax(ratios))
    return float(np.sqrt(cand[t] * cand[t + 1]))
