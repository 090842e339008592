"""Constrained cross-view correlation solver and filter reshaping.

The maximization is solved by whitening: with R1 = C11^(-1/2) and
R2 = C22^(-1/2), the constraints become plain orthonormality and the problem
reduces to the leading singular pairs of T = R1 * Ctilde * R2. Left singular
vectors come from a symmetric eigendecomposition of T*T', right ones by
back-substitution v = T'u / sigma (null-space completion when sigma is zero).

The eigensolver is a cyclic Jacobi iteration: every sweep visits all
off-diagonal pairs once, scheduled round-robin so each round rotates disjoint
pairs simultaneously (one orthogonal update per round). It stops when the
off-diagonal Frobenius norm falls below 1e-12 of the input norm, or fails
after 100 sweeps. Problem sizes here are small (dim = l1*l2), where Jacobi's
accuracy and simplicity beat iterative sparse methods.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .moments import DiscriminantMoments
from .patches import PatchGeometry

_SWEEP_TOL = 1e-12
_MAX_SWEEPS = 100


@functools.lru_cache(maxsize=None)
def _round_robin_rounds(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Tournament schedule visiting every index pair exactly once per sweep."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = tuple(
            (min(players[i], players[m - 1 - i]), max(players[i], players[m - 1 - i]))
            for i in range(m // 2)
            if players[i] < n and players[m - 1 - i] < n
        )
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _column_signs(v: np.ndarray) -> np.ndarray:
    """+1/-1 per column making the largest-magnitude entry positive.

    np.argmax picks the first maximum, which is the lowest-index tie rule.
    """
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def _order_degenerate(w: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fix the order inside runs of (near-)equal eigenvalues.

    Within a run the eigenbasis is arbitrary; sorting sign-fixed vectors
    lexicographically keeps repeated runs deterministic. The run tolerance
    follows the spectrum's own magnitude so tiny-scale spectra are not
    mistaken for a single degenerate run.
    """
    scale = float(np.abs(w).max()) if len(w) else 0.0
    start = 0
    order = np.arange(len(w))
    for end in range(1, len(w) + 1):
        if end < len(w) and abs(w[end] - w[start]) <= 1e-10 * scale:
            continue
        if end - start > 1:
            run = order[start:end]
            keys = [tuple(v[:, j]) for j in run]
            order[start:end] = run[np.array(sorted(range(len(run)), key=keys.__getitem__))]
        start = end
    return w[order], v[:, order]


def norm_offdiag(a: np.ndarray) -> float:
    # Zeroing a copy's diagonal avoids the cancellation that plagues
    # ||A||^2 - ||diag||^2 once the off-diagonal part is tiny.
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.linalg.norm(b))


def sym_eig(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    Raises ShapeError when the input is asymmetric beyond 1e-10 relative, and
    NumericalError if the sweep cap is hit before the off-diagonal norm drops
    below 1e-12 of the input norm.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {s.shape}")
    n = s.shape[0]
    # Pre-scaling keeps the norm itself from under/overflowing: squaring
    # entries near 1e-300 silently yields zero.
    scale = float(np.abs(s).max())
    scaled = s / scale if scale > 0.0 else s
    norm = scale * float(np.linalg.norm(scaled)) if scale > 0.0 else 0.0
    if scale > 0.0 and np.linalg.norm(scaled - scaled.T) > 1e-10 * np.linalg.norm(scaled):
        raise ShapeError("matrix is not symmetric")

    v = np.eye(n)
    if n == 1 or scale == 0.0:
        w = np.diag(s).copy()
        order = np.argsort(-w, kind="stable")
        return w[order], v[:, order]

    # Work at unit scale so extreme input magnitudes cannot underflow or
    # overflow the rotation arithmetic; eigenvalues are rescaled at the end.
    a = 0.5 * (scaled + scaled.T) * (scale / norm)

    converged = False
    for _ in range(_MAX_SWEEPS):
        if norm_offdiag(a) <= _SWEEP_TOL:
            converged = True
            break
        for pairs in _round_robin_rounds(n):
            ps = np.fromiter((p for p, _ in pairs), dtype=np.intp)
            qs = np.fromiter((q for _, q in pairs), dtype=np.intp)
            apq = a[ps, qs]
            active = apq != 0.0
            if not np.any(active):
                continue
            theta = np.zeros_like(apq)
            np.divide(a[qs, qs] - a[ps, ps], 2.0 * apq, out=theta, where=active)
            with np.errstate(over="ignore"):
                sgn = np.where(theta >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c
            c = np.where(active, c, 1.0)
            sn = np.where(active, sn, 0.0)
            j = np.eye(n)
            j[ps, ps] = c
            j[qs, qs] = c
            j[ps, qs] = sn
            j[qs, ps] = -sn
            a = j.T @ a @ j
            v = v @ j
        a = 0.5 * (a + a.T)
    if not converged and norm_offdiag(a) > _SWEEP_TOL:
        raise NumericalError(
            f"Jacobi iteration did not converge in {_MAX_SWEEPS} sweeps "
            f"(off-diagonal {norm_offdiag(a) * norm:.2e} vs bound {_SWEEP_TOL * norm:.2e})"
        )

    w = np.diag(a).copy() * norm
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    v = v * _column_signs(v)
    return _order_degenerate(w, v)


def inv_sqrt(c: np.ndarray) -> np.ndarray:
    """Inverse matrix square root of an SPD matrix via its eigensystem."""
    w, v = sym_eig(c)
    if w[-1] <= 0.0:
        raise NumericalError(
            f"matrix is not positive definite (min eigenvalue {w[-1]:.3e}); "
            "is the ridge term missing?"
        )
    r = (v * (w**-0.5)) @ v.T
    return 0.5 * (r + r.T)


@dataclass(frozen=True)
class CanonicalPairs:
    """Solved projection pairs: columns of w1/w2 with correlations rho."""

    w1: np.ndarray
    w2: np.ndarray
    rho: np.ndarray

    @property
    def count(self) -> int:
        return self.w1.shape[1]


@dataclass(frozen=True)
class FilterLayer:
    """One layer's kernels for both views, reshaped from canonical vectors."""

    filters1: np.ndarray  # (L, l1, l2)
    filters2: np.ndarray
    geom: PatchGeometry
    center: bool

    @property
    def count(self) -> int:
        return self.filters1.shape[0]


@dataclass(frozen=True)
class FilterBank:
    layers: tuple[FilterLayer, ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def maps_per_view(self) -> int:
        out = 1
        for layer in self.layers:
            out *= layer.count
        return out


def solve_dcca(m: DiscriminantMoments, count: int) -> CanonicalPairs:
    """Leading canonical pairs of the discriminant cross-correlation problem.

    Column signs are fixed per pair: view 1's largest-magnitude entry is made
    positive and view 2 inherits the same flip, so rho stays equal to the
    (non-negative) singular value. Zero-correlation columns are completed from
    the null space and sign-fixed independently.
    """
    dim = m.dim
    if not 1 <= count <= dim:
        raise ConfigError(f"filter count {count} outside [1, {dim}]")
    r1 = inv_sqrt(m.c11)
    r2 = inv_sqrt(m.c22)
    t = r1 @ m.ctilde @ r2

    tt = t @ t.T
    lam, u = sym_eig(0.5 * (tt + tt.T))
    sigma = np.sqrt(np.clip(lam, 0.0, None))

    v = np.zeros((dim, count))
    null_basis = None
    null_next = dim - 1  # null vectors live at the tail of the spectrum
    for g in range(count):
        if sigma[g] > 1e-12 * max(sigma[0], 1e-300):
            v[:, g] = (t.T @ u[:, g]) / sigma[g]
        else:
            sigma[g] = 0.0
            if null_basis is None:
                ttt = t.T @ t
                _, null_basis = sym_eig(0.5 * (ttt + ttt.T))
            v[:, g] = null_basis[:, null_next]
            null_next -= 1

    w1 = r1 @ u[:, :count]
    w2 = r2 @ v
    flip = _column_signs(w1)
    w1 = w1 * flip
    w2 = w2 * flip
    zero = sigma[:count] == 0.0
    if np.any(zero):
        w2[:, zero] = w2[:, zero] * _column_signs(w2[:, zero])
    return CanonicalPairs(w1=w1, w2=w2, rho=sigma[:count].copy())


def reshape_filters(pairs: CanonicalPairs, geom: PatchGeometry, center: bool = True) -> FilterLayer:
    """Unflatten each canonical vector into an l1 x l2 kernel (row-major).

    Exact inverse of the patch vectorization row order, so convolving with the
    kernel equals the inner product with the patch column.
    """
    if pairs.w1.shape[0] != geom.dim:
        raise ShapeError(
            f"vector length {pairs.w1.shape[0]} does not match {geom.l1}x{geom.l2} kernels"
        )
    f1 = pairs.w1.T.reshape(pairs.count, geom.l1, geom.l2).copy()
    f2 = pairs.w2.T.reshape(pairs.count, geom.l1, geom.l2).copy()
    return FilterLayer(filters1=f1, filters2=f2, geom=geom, center=center)
