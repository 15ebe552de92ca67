"""Graph signal processing: shift, polynomial filters and the graph Fourier transform."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegreeError, DualityError, NumericError, ShapeError
from .graph import Graph

REPEATED_GAP = 1e-10
IMAG_TOL = 1e-8


class RepeatedSpectrumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FilterCoeffs:
    """Coefficients ``alpha_0 .. alpha_K`` of ``sum_k alpha_k A^k``."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64).ravel()
        if a.size == 0:
            raise ShapeError("filter needs at least one coefficient")
        if not np.all(np.isfinite(a)):
            raise NumericError("filter coefficients must be finite")
        object.__setattr__(self, "alpha", a)

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1

    def response(self, lam: np.ndarray) -> np.ndarray:
        """Evaluate ``g(lambda)`` entrywise (Horner)."""
        out = np.zeros_like(np.asarray(lam), dtype=np.result_type(lam, np.float64))
        for a in self.alpha[::-1]:
            out = out * lam + a
        return out


def _coeffs(c) -> FilterCoeffs:
    return c if isinstance(c, FilterCoeffs) else FilterCoeffs(c)


def _check_rows(g: Graph, x: np.ndarray):
    if x.shape[0] != g.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")


def shift(g: Graph, x) -> np.ndarray:
    """``A x`` via the sparse adjacency."""
    x = np.asarray(x, dtype=np.float64)
    _check_rows(g, x)
    return np.asarray(g.sparse() @ x)


def poly_filter(g: Graph, c, x) -> np.ndarray:
    """``sum_k alpha_k A^k x`` by Horner accumulation of sparse shifts.

    >>> from graphcnn.graph import ring_graph
    >>> poly_filter(ring_graph(4), [1, 1], [1.0, 0, 0, 0]).tolist()
    [1.0, 1.0, 0.0, 0.0]
    """
    c = _coeffs(c)
    x = np.asarray(x, dtype=np.float64)
    _check_rows(g, x)
    if c.degree >= g.n:
        raise DegreeError(f"filter degree {c.degree} must be below vertex count {g.n}")
    a = g.sparse()
    y = c.alpha[-1] * x
    for alpha in c.alpha[-2::-1]:
        y = np.asarray(a @ y) + alpha * x
    return y


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition ``A = igft @ diag(eigenvalues) @ gft``."""

    eigenvalues: np.ndarray
    gft: np.ndarray
    igft: np.ndarray
    condition_estimate: float
    min_gap: float
    repeated: bool
    symmetric: bool

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return self.igft @ np.diag(self.eigenvalues) @ self.gft


def _min_gap(lam: np.ndarray) -> float:
    if len(lam) < 2:
        return float("inf")
    diff = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min())


def spectrum(g: Graph) -> Spectrum:
    """Full eigendecomposition of the dense adjacency.

    Symmetric adjacencies go through ``eigh`` and give an orthogonal GFT;
    anything else goes through the general solver with ``gft = inv(V)``.
    A minimum eigenvalue gap below 1e-10 sets ``repeated`` and emits a
    :class:`RepeatedSpectrumWarning`; the decomposition is still returned.
    """
    a = g.dense()
    symmetric = np.array_equal(a, a.T)
    try:
        if symmetric:
            lam, v = np.linalg.eigh(a)
            lam = lam.astype(np.complex128)
            v = v.astype(np.complex128)
            inv = v.conj().T
        else:
            lam, v = np.linalg.eig(a)
            inv = np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from None
    gap = _min_gap(lam)
    repeated = gap < REPEATED_GAP
    if repeated:
        warnings.warn(f"near-repeated eigenvalues (min gap {gap:.3g})", RepeatedSpectrumWarning,
                      stacklevel=2)
    return Spectrum(
        eigenvalues=lam,
        gft=inv,
        igft=v,
        condition_estimate=float(np.linalg.cond(v)) if len(lam) else 1.0,
        min_gap=gap,
        repeated=bool(repeated),
        symmetric=bool(symmetric),
    )


def gft_apply(s: Spectrum, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != s.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, spectrum has {s.n}")
    return s.gft @ x


def igft_apply(s: Spectrum, xhat) -> np.ndarray:
    xhat = np.asarray(xhat)
    if xhat.shape[0] != s.n:
        raise ShapeError(f"spectrum has {s.n} components, got {xhat.shape[0]}")
    return s.igft @ xhat


def spectral_filter(s: Spectrum, c, x) -> np.ndarray:
    """Filter in the frequency domain: ``igft @ g(Lambda) @ gft @ x``.

    The imaginary residue must stay below 1e-8 (relative to the signal
    scale); otherwise the spectrum is too ill-conditioned for the vertex and
    spectral routes to agree and :class:`DualityError` is raised.
    """
    c = _coeffs(c)
    x = np.asarray(x, dtype=np.float64)
    xhat = gft_apply(s, x)
    resp = c.response(s.eigenvalues)
    scaled = resp[:, None] * xhat if xhat.ndim == 2 else resp * xhat
    y = igft_apply(s, scaled)
    scale = max(1.0, float(np.max(np.abs(y.real))) if y.size else 1.0)
    resid = float(np.max(np.abs(y.imag))) if y.size else 0.0
    if resid > IMAG_TOL * scale:
        raise DualityError(f"imaginary residue {resid:.3g} exceeds tolerance")
    return np.ascontiguousarray(y.real)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT, ``[exp(-2 pi j k l / n)] / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def polymul(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """Coefficients of the product filter (filter composition)."""
    return np.convolve(np.asarray(a, float), np.asarray(b, float))
