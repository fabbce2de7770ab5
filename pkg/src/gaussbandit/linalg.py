"""Dense symmetric positive-definite matrix utilities.

Matrices are plain ``numpy`` arrays. ``as_sym`` is the single entry point
that validates and symmetrizes an input; everything downstream assumes
its output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotPositiveDefinite

PD_RELATIVE_FLOOR = 1e-12
ALLOWED_POWERS = (-1.0, -0.5, 0.5)


def pd_floor(max_eig: float) -> float:
    """Eigenvalue threshold at or below which a matrix is treated as not PD."""
    return PD_RELATIVE_FLOOR * max(1.0, float(max_eig))


def as_sym(a) -> np.ndarray:
    """Return ``(a + a.T) / 2`` as a float array after shape and finiteness checks."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has NaN or infinite entries")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class PsdFactorization:
    """Eigendecomposition ``source = Q diag(eigvals) Q^T`` of a PD matrix.

    Eigenvalues are ascending. Powers in ``ALLOWED_POWERS`` are computed
    lazily and cached.
    """

    source: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    _powers: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.source.shape[0]

    def power(self, exponent: float) -> np.ndarray:
        exponent = float(exponent)
        if exponent not in ALLOWED_POWERS:
            raise ValueError(f"exponent must be one of {ALLOWED_POWERS}, got {exponent}")
        cached = self._powers.get(exponent)
        if cached is None:
            q = self.eigvecs
            cached = (q * self.eigvals**exponent) @ q.T
            cached = 0.5 * (cached + cached.T)
            self._powers[exponent] = cached
        return cached

    @property
    def inv(self) -> np.ndarray:
        return self.power(-1.0)

    @property
    def sqrt(self) -> np.ndarray:
        return self.power(0.5)

    @property
    def inv_sqrt(self) -> np.ndarray:
        return self.power(-0.5)


def sym_eig(a) -> PsdFactorization:
    """Factorize a symmetric positive-definite matrix.

    Raises ``NotPositiveDefinite`` when the smallest eigenvalue is at or below
    ``pd_floor(max eigenvalue)`` and ``NonFinite`` for NaN/Inf input.
    """
    s = as_sym(a)
    w, q = np.linalg.eigh(s)
    if w[0] <= pd_floor(w[-1]):
        raise NotPositiveDefinite(f"min eigenvalue {w[0]:.3e} is below the PD floor")
    return PsdFactorization(source=s, eigvals=w, eigvecs=q)


def from_eig(eigvals, eigvecs) -> PsdFactorization:
    """Build a factorization from precomputed ascending eigenpairs (no re-check of orthonormality)."""
    w = np.asarray(eigvals, dtype=float)
    q = np.asarray(eigvecs, dtype=float)
    if w[0] <= pd_floor(w[-1]):
        raise NotPositiveDefinite(f"min eigenvalue {w[0]:.3e} is below the PD floor")
    s = (q * w) @ q.T
    return PsdFactorization(source=0.5 * (s + s.T), eigvals=w, eigvecs=q)


def psd_power(f: PsdFactorization, exponent: float) -> np.ndarray:
    """``Q diag(eigvals**exponent) Q^T`` for exponent in {-1, -1/2, 1/2}."""
    return f.power(exponent)


def update_precision(sigma_inv, h, eta: float):
    """Additive precision step ``sigma_inv + (eta / 4) h``.

    Returns ``(next_precision, clipped)``. When the candidate is not PD the
    step is skipped: the input precision comes back unchanged with
    ``clipped=True``.
    """
    p = as_sym(sigma_inv)
    h = as_sym(h)
    if p.shape != h.shape:
        raise DimensionMismatch(f"precision {p.shape} and update {h.shape} differ in shape")
    if not np.isfinite(eta):
        raise NonFinite("eta must be finite")
    candidate = as_sym(p + 0.25 * eta * h)
    w = np.linalg.eigvalsh(candidate)
    if w[0] > pd_floor(w[-1]):
        return candidate, False
    return p, True


def wasserstein2_gaussian(mu1, f1: PsdFactorization, mu2, f2: PsdFactorization) -> float:
    """2-Wasserstein distance between N(mu1, S1) and N(mu2, S2).

    The covariance part ``tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})``
    equals ``min_U |S1^{1/2} - S2^{1/2} U|_F^2`` over orthogonal ``U``, attained
    at the polar factor of ``S2^{1/2} S1^{1/2}``. Evaluating that residual
    directly avoids the cancellation of the trace form, so identical inputs
    give zero to rounding. Both argument orders are averaged.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    if not (mu1.shape == mu2.shape and f1.dim == f2.dim == mu1.shape[0]):
        raise DimensionMismatch("means and covariances must share one dimension")
    cov = 0.5 * (_procrustes_residual(f1.sqrt, f2.sqrt) + _procrustes_residual(f2.sqrt, f1.sqrt))
    return float(np.sqrt(np.sum((mu1 - mu2) ** 2) + cov))


def _procrustes_residual(r1, r2) -> float:
    # min over orthogonal U of |r1 - r2 U|_F^2
    p, _, qt = np.linalg.svd(r2.T @ r1)
    resid = r1 - r2 @ (p @ qt)
    return float(np.sum(resid * resid))


def spectral_stats(f: PsdFactorization):
    """``(trace, operator_norm, min_eig, logdet)`` from the eigenvalues."""
    w = f.eigvals
    return float(np.sum(w)), float(w[-1]), float(w[0]), float(np.sum(np.log(w)))


def random_spd(rng: np.random.Generator, d: int, cond: float = 10.0, scale: float = 1.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-spaced in ``[scale, scale * cond]``."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = scale * np.geomspace(1.0, cond, d) if d > 1 else np.array([scale])
    a = (q * w) @ q.T
    return 0.5 * (a + a.T)
