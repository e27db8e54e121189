"""Parametric AAA: a two-variable barycentric rational model over (s, p).

The model is

    H(s, p) = sum_jk a_jk h_jk / ((s - sig_j)(p - pi_k))
              / sum_jk a_jk / ((s - sig_j)(p - pi_k)),

with supports ``sig``, ``pi`` drawn from the training grid. Supports are
chosen greedily at the worst-fit sample and the weights ``a`` minimize the
linearized residual ``|H d - n|`` over the samples that share no coordinate
with a support (smallest right singular vector of a Loewner matrix).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .errors import (AmbiguousNullspaceWarning, InvalidArgumentError, OrderExhaustedError,
                     OutOfRangeError)
from .frf import FrfDataset

logger = logging.getLogger(__name__)

HIT_RTOL = 1e-13
GUARD_FACTORS = (0.5, 2.0)


@dataclass(frozen=True, eq=False)
class ParametricBarycentricModel:
    s_supports: np.ndarray
    p_supports: np.ndarray
    support_values: np.ndarray
    weights: np.ndarray
    param_range: tuple[float, float] | None = None
    guard_factors: tuple[float, float] = GUARD_FACTORS

    def __post_init__(self):
        s = np.array(self.s_supports, dtype=complex).ravel()
        p = np.array(self.p_supports, dtype=float).ravel()
        h = np.array(self.support_values, dtype=complex).reshape(s.size, p.size)
        a = np.array(self.weights, dtype=complex).reshape(s.size, p.size)
        if np.unique(s).size != s.size or np.unique(p).size != p.size:
            raise InvalidArgumentError("supports must be pairwise distinct per axis")
        for arr in (s, p, h, a):
            arr.setflags(write=False)
        object.__setattr__(self, "s_supports", s)
        object.__setattr__(self, "p_supports", p)
        object.__setattr__(self, "support_values", h)
        object.__setattr__(self, "weights", a)
        if self.param_range is not None:
            object.__setattr__(self, "param_range", (float(self.param_range[0]), float(self.param_range[1])))

    @property
    def orders(self) -> tuple[int, int]:
        return self.s_supports.size, self.p_supports.size

    def check_param(self, p: float, force: bool = False) -> None:
        if force or self.param_range is None:
            return
        lo = self.param_range[0] * self.guard_factors[0]
        hi = self.param_range[1] * self.guard_factors[1]
        if not (lo <= p <= hi):
            raise OutOfRangeError(f"parameter {p} outside extrapolation guard [{lo}, {hi}]")

    def fold(self, p: float):
        """Barycentric coefficients of the slice at ``p``: ``(numerator, denominator)``
        weights over the frequency supports."""
        a, h = self.weights, self.support_values
        dp = p - self.p_supports
        hit = np.flatnonzero(np.abs(dp) <= HIT_RTOL * np.maximum(np.abs(self.p_supports), 1e-300))
        if hit.size:
            k = hit[0]
            return a[:, k] * h[:, k], a[:, k].copy(), k
        cp = 1.0 / dp
        return (a * h) @ cp, a @ cp, None

    def slice_at(self, p: float, force: bool = False) -> "ParametricSlice":
        self.check_param(p, force)
        num, den, k = self.fold(p)
        return ParametricSlice(self, float(p), num, den, k)

    def __call__(self, s, p, force: bool = False):
        return paaa_evaluate(self, s, p, force=force)

    def evaluate_grid(self, s, p, force: bool = False) -> np.ndarray:
        """Values on the tensor grid ``s x p`` (shape ``(len(s), len(p))``)."""
        s = np.asarray(s, dtype=complex).ravel()
        p = np.asarray(p, dtype=float).ravel()
        out = np.empty((s.size, p.size), dtype=complex)
        for k, pk in enumerate(p):
            out[:, k] = self.slice_at(pk, force).eval_s(s)
        return out

    def to_dict(self, tolerance_achieved=None, training_digest=None, provenance=None) -> dict:
        l, q = self.orders
        d = {
            "s_supports": _io.complex_pairs(self.s_supports),
            "p_supports": [float(x) for x in self.p_supports],
            "support_values": [_io.complex_pairs(row) for row in self.support_values],
            "weights": [_io.complex_pairs(row) for row in self.weights],
            "orders": [l, q],
            "param_range": list(self.param_range) if self.param_range else None,
            "guard_factors": list(self.guard_factors),
        }
        if tolerance_achieved is not None:
            d["tolerance_achieved"] = float(tolerance_achieved)
        if training_digest is not None:
            d["training_digest"] = training_digest
        if provenance:
            d["provenance"] = provenance
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParametricBarycentricModel":
        return cls(
            _io.from_pairs(d["s_supports"]),
            np.asarray(d["p_supports"], dtype=float),
            _io.from_pairs(d["support_values"]),
            _io.from_pairs(d["weights"]),
            tuple(d["param_range"]) if d.get("param_range") else None,
            tuple(d.get("guard_factors", GUARD_FACTORS)),
        )


@dataclass(frozen=True, eq=False)
class ParametricSlice:
    """Univariate FRF ``f -> H(2j*pi*f, p)`` of a parametric model at fixed ``p``.

    Negative frequencies return ``conj(H(-f))`` (real-system symmetry).
    """

    model: ParametricBarycentricModel
    p: float
    num: np.ndarray
    den: np.ndarray
    p_hit: int | None = None

    def eval_s(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        flat = s.ravel()
        sig = self.model.s_supports
        D = flat[:, None] - sig[None, :]
        hit = np.abs(D) <= HIT_RTOL * np.maximum(np.abs(sig), 1e-300)[None, :]
        rows = np.flatnonzero(hit.any(axis=1))
        with np.errstate(divide="ignore", invalid="ignore"):
            C = 1.0 / D
            C[rows] = 0.0
            out = (C @ self.num) / (C @ self.den)
        for i in rows:
            out[i] = self._at_support(int(np.flatnonzero(hit[i])[0]))
        return out.reshape(s.shape)

    def _at_support(self, j: int) -> complex:
        if self.p_hit is not None and self.model.weights[j, self.p_hit] != 0:
            return self.model.support_values[j, self.p_hit]
        if self.den[j] != 0:
            return self.num[j] / self.den[j]
        # removable singularity: limit along s with this support's (zero) term dropped
        sig = self.model.s_supports
        others = np.arange(sig.size) != j
        c = 1.0 / (sig[j] - sig[others])
        d = c @ self.den[others]
        return (c @ self.num[others]) / d if d != 0 else complex(np.nan, np.nan)

    def __call__(self, freq_hz) -> np.ndarray:
        f = np.asarray(freq_hz, dtype=float)
        val = self.eval_s(2j * np.pi * np.abs(f))
        return np.where(f < 0, np.conj(val), val)


def paaa_evaluate(model: ParametricBarycentricModel, s, p, force: bool = False):
    """Evaluate at complex ``s`` and real ``p`` (broadcast elementwise)."""
    s_arr, p_arr = np.broadcast_arrays(np.asarray(s, dtype=complex), np.asarray(p, dtype=float))
    out = np.empty(s_arr.shape, dtype=complex)
    for pv in np.unique(p_arr):
        mask = p_arr == pv
        out[mask] = model.slice_at(float(pv), force).eval_s(s_arr[mask])
    return out[()] if out.ndim == 0 else out


def slice_at_param(model: ParametricBarycentricModel, p: float, force: bool = False) -> ParametricSlice:
    return model.slice_at(p, force)


# --- fitting ---------------------------------------------------------------------

@dataclass
class PaaaDiagnostics:
    error_history: list = field(default_factory=list)
    selected_pairs: list = field(default_factory=list)
    selected_indices: list = field(default_factory=list)
    stopped_reason: str = ""
    order_history: list = field(default_factory=list)
    best_iteration: int = 0


def greedy_select(dataset: FrfDataset, model: ParametricBarycentricModel | None,
                  allowed=None) -> tuple[int, int]:
    """Index pair ``(j, k)`` of the worst-fit sample.

    With no model the reference is the dataset mean. Samples at support pairs
    are never returned; ``allowed`` can mask further candidates. Ties go to the
    lowest frequency index, then the lowest parameter index.
    """
    H = dataset.values
    if model is None:
        err = np.abs(H - H.mean())
        cand = np.ones(H.shape, dtype=bool)
    else:
        err = np.abs(H - model.evaluate_grid(dataset.s, dataset.params, force=True))
        cand = ~_support_mask(dataset, model)
    if allowed is not None:
        cand &= allowed
    return _worst(err, cand)


def _worst(err, cand) -> tuple[int, int]:
    if not cand.any():
        raise InvalidArgumentError("no non-support sample left to select")
    # a non-finite model value is the worst possible fit
    err = np.where(np.isfinite(err), err, np.inf)
    err = np.where(cand, err, -1.0)
    return divmod(int(np.argmax(err)), err.shape[1])


def _support_mask(dataset, model):
    in_s = np.isin(dataset.s, model.s_supports)
    in_p = np.isin(dataset.params, model.p_supports)
    return in_s[:, None] & in_p[None, :]


def loewner_matrix(support_values, s_supports, p_supports, s_ls, p_ls, H_ls) -> np.ndarray:
    """Rows over LS samples (s outer, p inner), columns over supports (s outer, p inner)."""
    h = np.asarray(support_values, dtype=complex)
    Cs = 1.0 / (np.asarray(s_ls)[:, None] - np.asarray(s_supports)[None, :])
    Cp = 1.0 / (np.asarray(p_ls)[:, None] - np.asarray(p_supports)[None, :])
    diff = np.asarray(H_ls)[:, :, None, None] - h[None, None, :, :]
    L = diff * Cs[:, None, :, None] * Cp[None, :, None, :]
    return L.reshape(Cs.shape[0] * Cp.shape[0], h.size)


def solve_weights(support_values, s_supports, p_supports, ls_samples, return_singular_values=False):
    """Weights ``a`` (shape ``(l, q)``, unit Frobenius norm) minimizing the
    linearized residual on ``ls_samples = (s_ls, p_ls, H_ls)``."""
    s_ls, p_ls, H_ls = ls_samples
    h = np.asarray(support_values, dtype=complex)
    if np.size(s_ls) == 0 or np.size(p_ls) == 0:
        raise OrderExhaustedError("least-squares sample set is empty")
    L = loewner_matrix(h, s_supports, p_supports, s_ls, p_ls, H_ls)
    wide = L.shape[0] < L.shape[1]
    _, sv, Vh = np.linalg.svd(L, full_matrices=wide)
    if sv.size and np.all(sv < 1e-14):
        warnings.warn("all Loewner singular values vanish; null vector is not unique",
                      AmbiguousNullspaceWarning, stacklevel=2)
    alpha = Vh[-1].conj()
    # fix the arbitrary phase so identical problems give identical weights
    j = int(np.argmax(np.abs(alpha)))
    alpha = alpha * (abs(alpha[j]) / alpha[j])
    alpha = alpha / np.linalg.norm(alpha)
    alpha = alpha.reshape(h.shape)
    if return_singular_values:
        full_sv = np.zeros(L.shape[1])
        full_sv[:sv.size] = sv
        return alpha, full_sv
    return alpha


def paaa_fit(dataset: FrfDataset, tol_rel: float = 1e-6, max_l: int | None = None,
             max_q: int | None = None, stagnation_window: int = 5,
             stagnation_drop: float = 1e-3):
    """Greedy p-AAA fit of ``dataset``.

    Stops when the largest error over all non-support samples, relative to
    ``max |h|``, is at most ``tol_rel`` ("tolerance"), when no sample can be
    added without exceeding ``max_l``/``max_q`` ("max_order"), or when the
    best error of the last ``stagnation_window`` iterations is not at least
    ``stagnation_drop`` (relative) below the best error before them
    ("ls_stagnation"). The model with the
    lowest error seen is returned.
    """
    Ns, Np = dataset.values.shape
    if Ns < 2:
        raise InvalidArgumentError("need at least two frequency samples")
    if not tol_rel > 0:
        raise InvalidArgumentError("tol_rel must be positive")
    max_l = Ns - 1 if max_l is None else int(max_l)
    max_q = max(Np - 1, 1) if max_q is None else int(max_q)
    if not (1 <= max_l <= Ns - 1):
        raise InvalidArgumentError(f"max_l must lie in [1, {Ns - 1}]")
    if not (1 <= max_q <= max(Np - 1, 1)):
        raise InvalidArgumentError(f"max_q must lie in [1, {max(Np - 1, 1)}]")

    H = dataset.values
    s_all, p_all = dataset.s, dataset.params
    scale = float(np.max(np.abs(H)))
    if scale == 0:
        scale = 1.0
    prange = (float(p_all.min()), float(p_all.max()))

    in_s = np.zeros(Ns, dtype=bool)
    in_p = np.zeros(Np, dtype=bool)
    s_idx, p_idx = [], []
    diag = PaaaDiagnostics()
    model = None
    best = None
    best_err = np.inf

    while True:
        allowed = ~(in_s[:, None] & in_p[None, :])
        if len(s_idx) >= max_l:
            allowed &= in_s[:, None]
        if len(p_idx) >= max_q:
            allowed &= in_p[None, :]
        if not allowed.any():
            diag.stopped_reason = "max_order"
            break
        if model is None:
            j, k = greedy_select(dataset, None, allowed)
        else:
            j, k = _worst(resid, allowed)
        if not in_s[j]:
            in_s[j] = True
            s_idx.append(j)
        if not in_p[k]:
            in_p[k] = True
            p_idx.append(k)
        diag.selected_indices.append((j, k))
        diag.selected_pairs.append((float(dataset.freq_hz[j]), float(p_all[k])))

        sig, pis = s_all[s_idx], p_all[p_idx]
        hsup = H[np.ix_(s_idx, p_idx)]
        ls = (s_all[~in_s], p_all[~in_p], H[np.ix_(~in_s, ~in_p)])
        alpha = solve_weights(hsup, sig, pis, ls)
        model = ParametricBarycentricModel(sig, pis, hsup, alpha, prange)

        R = model.evaluate_grid(s_all, p_all, force=True)
        resid = np.abs(H - R)
        resid[in_s[:, None] & in_p[None, :]] = 0.0
        err = float(np.max(np.where(np.isfinite(resid), resid, np.inf))) / scale
        diag.error_history.append(err)
        diag.order_history.append(model.orders)
        logger.debug("p-AAA iteration %d: orders %s, rel. error %.3e",
                     len(diag.error_history), model.orders, err)
        if err < best_err:
            best, best_err = model, err
            diag.best_iteration = len(diag.error_history)
        if err <= tol_rel:
            diag.stopped_reason = "tolerance"
            break
        hist = diag.error_history
        # the greedy error is not monotone, so compare best values across the window
        if (len(hist) > stagnation_window
                and min(hist[-stagnation_window:])
                > min(hist[:-stagnation_window]) * (1 - stagnation_drop)):
            diag.stopped_reason = "ls_stagnation"
            break

    if best is None:
        raise OrderExhaustedError("no support could be selected")
    return best, diag


def write_model_json(path, model: ParametricBarycentricModel, **kwargs) -> None:
    _io.atomic_write_json(path, model.to_dict(**kwargs))


def read_model_json(path) -> ParametricBarycentricModel:
    import json
    with open(path) as fh:
        return ParametricBarycentricModel.from_dict(json.load(fh))
