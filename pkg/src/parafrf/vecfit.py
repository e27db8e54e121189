"""Vector Fitting: Sanathanan-Koerner iterations in barycentric form.

Each iteration solves the linearized problem

    sum_i w_i |n(s_i) - d(s_i) H(s_i)|**2 -> min,
    n(s) = sum phi_k / (s - lam_k),   d(s) = 1 + sum psi_k / (s - lam_k),

with the current poles ``lam`` as barycentric nodes, then moves the nodes to
the zeros of ``d``. The unknowns live on a realified partial-fraction basis
(conjugate pairs combined into two real-coefficient columns), so every LS
system is real and conjugate closure holds by construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from . import _io
from .errors import (EigenConditionError, InvalidArgumentError, PoleCollisionError,
                     RankDeficiencyError)

logger = logging.getLogger(__name__)

REAL, PAIR_FIRST, PAIR_SECOND = 0, 1, 2
EIG_COND_LIMIT = 1e15


@dataclass
class VfOptions:
    tol: float = 1e-6
    max_iters: int = 30
    enforce_stability: bool = True
    relaxed: bool = False
    debug: bool = False
    init_poles: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class PoleResidueModel:
    """``H(s) = sum_i residues[i] / (s - poles[i])`` with ``s = 2j*pi*f``."""

    poles: np.ndarray
    residues: np.ndarray

    def __post_init__(self):
        p = np.array(self.poles, dtype=complex).ravel()
        r = np.array(self.residues, dtype=complex).ravel()
        if p.size != r.size or p.size == 0:
            raise InvalidArgumentError("poles and residues must be non-empty and of equal length")
        object.__setattr__(self, "poles", p)
        object.__setattr__(self, "residues", r)

    @property
    def order(self) -> int:
        return self.poles.size

    def __call__(self, freq_hz):
        return pr_evaluate(self, freq_hz)

    def state_space(self):
        """Real diagonal-block realization ``(A, B, C)`` with ``C (sI - A)^-1 B = H(s)``."""
        poles, kinds = _canonical(self.poles)
        res = self.residues[_canonical_key(self.poles)]
        A, b = _real_state_matrix(poles, kinds)
        C = _residues_to_coeffs(res, kinds)
        return A, b, C

    def to_dict(self, band_hz=None, provenance=None) -> dict:
        d = {
            "poles": _io.complex_pairs(self.poles),
            "residues": _io.complex_pairs(self.residues),
            "order": self.order,
        }
        if band_hz is not None:
            d["band_hz"] = [float(band_hz[0]), float(band_hz[1])]
        if provenance:
            d["provenance"] = provenance
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PoleResidueModel":
        return cls(_io.from_pairs(d["poles"]), _io.from_pairs(d["residues"]))


@dataclass(frozen=True, eq=False)
class BarycentricModel1D:
    """``sum phi/(s - lam) / (1 + sum psi/(s - lam))``: one SK iterate."""

    nodes: np.ndarray
    num_weights: np.ndarray
    den_weights: np.ndarray

    def __call__(self, freq_hz):
        s = 2j * np.pi * np.asarray(freq_hz, dtype=float)
        C = 1.0 / (s[..., None] - self.nodes)
        return (C @ self.num_weights) / (1.0 + C @ self.den_weights)


@dataclass
class FitDiagnostics:
    iterations: int
    final_weighted_ls_error: float
    pole_movement_history: list = field(default_factory=list)
    converged: bool = False
    ls_error_history: list = field(default_factory=list)
    last_iterate: BarycentricModel1D | None = None


def pr_evaluate(model: PoleResidueModel, freq_hz) -> np.ndarray:
    s = 2j * np.pi * np.asarray(freq_hz, dtype=float)
    d = s[..., None] - model.poles
    scale = np.maximum(1.0, np.abs(model.poles))
    if np.any(np.abs(d) <= 1e-12 * scale):
        raise PoleCollisionError("evaluation point coincides with a pole")
    return (1.0 / d) @ model.residues


# --- conjugate-pair bookkeeping -------------------------------------------------

def _canonical_key(poles):
    # reals first (by value), then pairs by imaginary magnitude, +imag member first
    p = np.asarray(poles)
    is_cplx = np.abs(p.imag) > 1e-12 * np.maximum(np.abs(p), 1e-300)
    return np.lexsort((-np.sign(p.imag), p.real, np.abs(p.imag), is_cplx))


def _canonical(poles, rtol=1e-12):
    """Sort poles into [reals..., a1, conj(a1), a2, conj(a2), ...].

    Raises if the set is not closed under conjugation.
    """
    p = np.asarray(poles, dtype=complex)
    scale = np.maximum(np.abs(p), 1e-300)
    real_mask = np.abs(p.imag) <= rtol * scale
    reals = np.sort(p[real_mask].real).astype(complex)
    upper = p[~real_mask & (p.imag > 0)]
    lower = p[~real_mask & (p.imag < 0)]
    if upper.size != lower.size:
        raise InvalidArgumentError("pole set is not closed under conjugation")
    upper = upper[np.lexsort((upper.real, upper.imag))]
    lower_c = np.conj(lower)
    cost = np.abs(upper[:, None] - lower_c[None, :])
    ri, ci = linear_sum_assignment(cost)
    if upper.size and np.max(cost[ri, ci] / np.abs(upper[ri])) > 1e-8:
        raise InvalidArgumentError("pole set is not closed under conjugation")
    out = list(reals)
    kinds = [REAL] * reals.size
    for a in upper:
        out += [a, np.conj(a)]
        kinds += [PAIR_FIRST, PAIR_SECOND]
    return np.array(out, dtype=complex), np.array(kinds, dtype=int)


def _basis(s, poles, kinds):
    Phi = np.empty((s.size, poles.size), dtype=complex)
    i = 0
    while i < poles.size:
        a = poles[i]
        if kinds[i] == REAL:
            Phi[:, i] = 1.0 / (s - a.real)
            i += 1
        else:
            g1 = 1.0 / (s - a)
            g2 = 1.0 / (s - np.conj(a))
            Phi[:, i] = g1 + g2
            Phi[:, i + 1] = 1j * g1 - 1j * g2
            i += 2
    return Phi


def _coeffs_to_residues(c, kinds):
    res = np.array(c, dtype=complex)
    for i in np.flatnonzero(kinds == PAIR_FIRST):
        res[i] = c[i] + 1j * c[i + 1]
        res[i + 1] = c[i] - 1j * c[i + 1]
    return res


def _residues_to_coeffs(res, kinds):
    c = np.array(res.real, dtype=float)
    for i in np.flatnonzero(kinds == PAIR_FIRST):
        c[i] = res[i].real
        c[i + 1] = res[i].imag
    return c


def _real_state_matrix(poles, kinds):
    r = poles.size
    A = np.zeros((r, r))
    b = np.zeros(r)
    for i in range(r):
        if kinds[i] == REAL:
            A[i, i] = poles[i].real
            b[i] = 1.0
        elif kinds[i] == PAIR_FIRST:
            al, be = poles[i].real, poles[i].imag
            A[i:i + 2, i:i + 2] = [[al, be], [-be, al]]
            b[i] = 2.0
    return A, b


def _eig_checked(M):
    if M.size == 0:
        return np.zeros(0, dtype=complex)
    vals, vecs = scipy.linalg.eig(M)
    if not np.all(np.isfinite(vals)):
        raise EigenConditionError(np.inf)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > EIG_COND_LIMIT:
        raise EigenConditionError(cond)
    return vals


def relocate_poles(nodes, den_weights) -> np.ndarray:
    """Zeros of ``1 + sum psi_i / (s - lam_i)``.

    They are the eigenvalues of ``diag(lam) - 1 psi^T``. Conjugate-closed input
    is handled in real arithmetic so the output pairs are exactly conjugate.
    """
    lam = np.asarray(nodes, dtype=complex).ravel()
    psi = np.asarray(den_weights, dtype=complex).ravel()
    if lam.size != psi.size:
        raise InvalidArgumentError("nodes and den_weights differ in length")
    if np.unique(lam).size != lam.size:
        raise InvalidArgumentError("nodes must be pairwise distinct")
    try:
        poles, kinds = _canonical(lam)
    except InvalidArgumentError:
        return _eig_checked(np.diag(lam) - np.outer(np.ones(lam.size), psi))
    order = _canonical_key(lam)
    psi_c = psi[order]
    closed = np.allclose(psi_c[kinds == PAIR_SECOND], np.conj(psi_c[kinds == PAIR_FIRST]),
                         rtol=1e-12, atol=1e-300) and np.allclose(psi_c[kinds == REAL].imag, 0)
    if not closed:
        return _eig_checked(np.diag(lam) - np.outer(np.ones(lam.size), psi))
    A, b = _real_state_matrix(poles, kinds)
    c = _residues_to_coeffs(psi_c, kinds)
    return _eig_checked(A - np.outer(b, c))


# --- the fit ---------------------------------------------------------------------

def initial_poles(freq_hz, order_r: int) -> np.ndarray:
    """Conjugate pairs with imaginary parts spread linearly over the band and
    real parts ``-imag/100``."""
    f = np.asarray(freq_hz, dtype=float)
    n = order_r // 2
    w_hi = 2 * np.pi * f.max()
    pos = f[f > 0]
    w_lo = 2 * np.pi * pos.min() if pos.size else w_hi / (2 * n)
    beta = np.linspace(w_lo, w_hi, n) if n > 1 else np.array([(w_lo + w_hi) / 2])
    upper = -beta / 100 + 1j * beta
    return np.concatenate([np.column_stack([upper, upper.conj()]).ravel()])


def _solve_real_ls(M, rhs, iteration):
    """Real least squares on stacked real/imag parts with column equilibration."""
    A = np.vstack([M.real, M.imag])
    y = np.concatenate([rhs.real, rhs.imag])
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    x, _, rank, _ = np.linalg.lstsq(A / norms, y, rcond=None)
    if rank < A.shape[1]:
        raise RankDeficiencyError(iteration, rank, A.shape[1])
    return x / norms


def _residue_step(s, H, sw, poles, kinds, iteration):
    Phi = _basis(s, poles, kinds)
    c = _solve_real_ls(sw[:, None] * Phi, sw * H, iteration)
    res = _coeffs_to_residues(c, kinds)
    err = float(np.sum(np.abs(sw * (H - Phi @ c)) ** 2))
    return res, err


def _movement(old, new):
    cost = np.abs(new[:, None] - old[None, :])
    ri, ci = linear_sum_assignment(cost)
    return float(np.max(cost[ri, ci] / np.maximum(np.abs(old[ci]), 1e-300)))


def _check_closure(poles, residues):
    p, kinds = _canonical(poles)
    order = _canonical_key(poles)
    r = residues[order]
    assert np.allclose(r[kinds == PAIR_SECOND], np.conj(r[kinds == PAIR_FIRST]), rtol=1e-12, atol=0)


def vf_fit(freq_hz, values, order_r: int, weights=None, opts: VfOptions | None = None):
    """Fit ``values`` sampled at ``s = 2j*pi*freq_hz`` with ``order_r`` poles.

    Returns ``(PoleResidueModel, FitDiagnostics)``. Iterations stop when the
    largest relative pole movement drops below ``opts.tol`` or after
    ``opts.max_iters``; the returned residues come from a final LS solve with
    the denominator frozen at 1.
    """
    opts = opts or VfOptions()
    f = np.asarray(freq_hz, dtype=float).ravel()
    H = np.asarray(values, dtype=complex).ravel()
    if f.size != H.size:
        raise InvalidArgumentError("freq_hz and values differ in length")
    if order_r < 2 or order_r % 2:
        raise InvalidArgumentError("order_r must be an even integer >= 2")
    if f.size < 2 * order_r:
        raise InvalidArgumentError(f"{f.size} samples cannot support order {order_r}")
    w = np.ones(f.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != f.shape or np.any(w <= 0):
        raise InvalidArgumentError("weights must be positive, one per sample")
    if opts.max_iters < 1:
        raise InvalidArgumentError("max_iters must be >= 1")
    s = 2j * np.pi * f
    sw = np.sqrt(w)

    start = initial_poles(f, order_r) if opts.init_poles is None else np.asarray(opts.init_poles, complex)
    poles, kinds = _canonical(start)
    if poles.size != order_r:
        raise InvalidArgumentError("init_poles must have order_r entries")

    movement_hist, err_hist = [], []
    converged = False
    last = None
    res = None
    for it in range(1, opts.max_iters + 1):
        Phi = _basis(s, poles, kinds)
        last, zeros = _pole_identification(s, H, sw, Phi, poles, kinds, opts.relaxed, it)
        if opts.enforce_stability:
            zeros = np.where(zeros.real > 0, -zeros.real + 1j * zeros.imag, zeros)
        new_poles, new_kinds = _canonical(zeros)
        move = _movement(poles, new_poles)
        poles, kinds = new_poles, new_kinds
        res, err = _residue_step(s, H, sw, poles, kinds, it)
        movement_hist.append(move)
        err_hist.append(err)
        if opts.debug:
            _check_closure(poles, res)
        logger.debug("VF iteration %d: pole movement %.3e, LS error %.6e", it, move, err)
        if move < opts.tol:
            converged = True
            break

    model = PoleResidueModel(poles, res)
    diag = FitDiagnostics(
        iterations=len(movement_hist),
        final_weighted_ls_error=err_hist[-1],
        pole_movement_history=movement_hist,
        converged=converged,
        ls_error_history=err_hist,
        last_iterate=last,
    )
    return model, diag


def _pole_identification(s, H, sw, Phi, poles, kinds, relaxed, it):
    r = poles.size
    A, b = _real_state_matrix(poles, kinds)
    if relaxed:
        # sigma(s) = d0 + Phi c_d, with Re(sum sigma) pinned to avoid the trivial solution
        M = np.hstack([Phi, -H[:, None] * Phi, -H[:, None]]) * sw[:, None]
        rows = np.vstack([M.real, M.imag])
        y = np.zeros(rows.shape[0])
        scale = np.linalg.norm(sw * H) / s.size
        extra = np.concatenate([np.zeros(r), Phi.real.sum(axis=0), [s.size]]) * scale
        rows = np.vstack([rows, extra])
        y = np.append(y, s.size * scale)
        norms = np.linalg.norm(rows, axis=0)
        norms[norms == 0] = 1.0
        x, _, rank, _ = np.linalg.lstsq(rows / norms, y, rcond=None)
        if rank < rows.shape[1]:
            raise RankDeficiencyError(it, rank, rows.shape[1])
        x /= norms
        d0 = x[-1]
        if abs(d0) > 1e-8:
            c_n, c_d = x[:r] / d0, x[r:2 * r] / d0
            zeros = _eig_checked(A - np.outer(b, c_d))
            iterate = BarycentricModel1D(poles, _coeffs_to_residues(c_n, kinds),
                                         _coeffs_to_residues(c_d, kinds))
            return iterate, zeros
        logger.debug("relaxed VF: |d0| too small at iteration %d, using d0 = 1", it)
    M = np.hstack([Phi, -H[:, None] * Phi]) * sw[:, None]
    x = _solve_real_ls(M, sw * H, it)
    c_n, c_d = x[:r], x[r:]
    zeros = _eig_checked(A - np.outer(b, c_d))
    iterate = BarycentricModel1D(poles, _coeffs_to_residues(c_n, kinds),
                                 _coeffs_to_residues(c_d, kinds))
    return iterate, zeros


def write_model_json(path, model: PoleResidueModel, band_hz=None, provenance=None, extra=None):
    d = model.to_dict(band_hz, provenance)
    if extra:
        d.update(extra)
    _io.atomic_write_json(path, d)


def read_model_json(path) -> PoleResidueModel:
    import json
    with open(path) as fh:
        return PoleResidueModel.from_dict(json.load(fh))
