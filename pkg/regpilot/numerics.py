# Copyright (C) 2026  regpilot developers
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License along
# with this program; if not, write to the Free Software Foundation, Inc.,
# 51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA.

"""
Dense numeric kernels shared by the synthesis pipeline: matrix functions,
spectra, ranks, subspace bases, polynomials and eigenvalue assignment.

Polynomials are handled as coefficient vectors a = [a_0, ..., a_{d-1}] of the
monic polynomial s^d + a_{d-1} s^{d-1} + ... + a_0.
"""

import logging
import warnings

import numpy as np
import scipy.linalg
import scipy.signal

from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.numerics')


class NumericsError(RegpilotError):
    pass


def matrix(value, rows=None, cols=None, name='matrix'):
    """
    Converts nested sequences into a 2-D float array. Empty input becomes a
    rows x cols zero-size array when the expected shape is known.
    """
    M = np.array(value if value is not None else [], dtype=float)
    if M.size == 0:
        return np.zeros((rows or 0, cols or 0))
    if M.ndim == 1:
        M = M.reshape(1, -1) if rows in (None, 1) else M.reshape(-1, 1)
    if M.ndim != 2:
        raise NumericsError("{} must be two-dimensional".format(name))
    if rows is not None and M.shape[0] != rows or cols is not None and M.shape[1] != cols:
        raise NumericsError("{} has shape {}x{}, expected {}x{}"
                            .format(name, M.shape[0], M.shape[1], rows, cols))
    if not np.all(np.isfinite(M)):
        raise NumericsError("{} has non-finite entries".format(name))
    return M


def square(M, name='matrix'):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NumericsError("{} must be square, got shape {}".format(name, M.shape))
    return M


def blkdiag(*blocks):
    """
    Block diagonal of 2-D blocks; zero-size blocks keep their shape.
    """
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=float) for b in blocks])


def expm(M, t=1.0):
    M = square(M)
    if not np.isfinite(t):
        raise NumericsError("Duration must be finite")
    if M.shape[0] == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(M * t)


def logm(M):
    """
    Principal logarithm. Fails when an eigenvalue sits on the closed negative
    real axis, which for a sampled flow means the sampling period is too long.
    """
    M = square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = max(np.linalg.norm(M, 2), 1.0)
    for lam in eigvals(M):
        if abs(lam) <= 1e-12 * scale:
            raise NumericsError("Matrix is singular, no logarithm exists; "
                                "sampling time too coarse")
        if lam.real < 0 and abs(lam.imag) <= 1e-9 * abs(lam):
            raise NumericsError("Eigenvalue {} on the negative real axis; "
                                "sampling time too coarse, decrease tau".format(lam))
    L = scipy.linalg.logm(M)
    if np.iscomplexobj(L):
        if np.max(np.abs(L.imag)) > 1e-8 * max(np.max(np.abs(L.real)), 1.0):
            raise NumericsError("Principal logarithm is not real; "
                                "sampling time too coarse, decrease tau")
        L = L.real
    return L


def eigvals(M):
    M = square(M)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.asarray(scipy.linalg.eigvals(M), dtype=complex)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericsError("Eigenvalue iteration failed: {}".format(e))


def sort_spectrum(spectrum):
    return np.array(sorted(np.asarray(spectrum, dtype=complex),
                           key=lambda s: (round(s.real, 9), round(s.imag, 9))))


def spectral_radius(M):
    spectrum = eigvals(M)
    return float(np.max(np.abs(spectrum))) if spectrum.size else 0.0


def outside_unit_disk(spectrum, margin=None):
    if margin is None:
        margin = get_config('numerics.unit_disk_margin')
    spectrum = np.asarray(spectrum, dtype=complex)
    return spectrum[np.abs(spectrum) >= 1.0 - margin]


def default_tol(M):
    tol = get_config('numerics.rank_tol', None)
    if tol is None:
        tol = max(np.shape(M)) * np.finfo(float).eps
    return tol


def singular_values(M):
    if np.size(M) == 0:
        return np.zeros(0)
    return scipy.linalg.svd(M, compute_uv=False)


def rank(M, tol=None, scale=None):
    """
    Number of singular values above tol times the largest one, or times
    `scale` when the matrix may be pure round-off of a larger computation.
    """
    s = singular_values(M)
    if s.size == 0 or s[0] == 0:
        return 0
    if tol is None:
        tol = default_tol(M)
    return int(np.sum(s > tol * (s[0] if scale is None else scale)))


def complex_rank(M, tol=None, required=None):
    """
    Rank of a complex matrix evaluated on its real embedding
    [[Re, -Im], [Im, Re]], whose singular values are those of M doubled.
    Returns the rank together with the required-th singular value of M
    (infinity when nothing is required).
    """
    M = np.asarray(M, dtype=complex)
    embedded = np.block([[M.real, -M.imag], [M.imag, M.real]])
    achieved = rank(embedded, tol) // 2
    margin = float('inf')
    if required:
        s = singular_values(embedded)[::2]
        margin = float(s[required - 1]) if s.size >= required else 0.0
    return achieved, margin


def pinv(M, tol=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((M.shape[1], M.shape[0]))
    if tol is None:
        return scipy.linalg.pinv(M)
    U, s, Vh = scipy.linalg.svd(M, full_matrices=False)
    keep = s > tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    return (Vh[keep].T / s[keep]) @ U[:, keep].T


def kron(A, B):
    return np.kron(A, B)


def kernel(M, tol=None, scale=None):
    """
    Orthonormal basis of the null space.
    """
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    U, s, Vh = scipy.linalg.svd(M, full_matrices=True)
    r = rank(M, tol, scale) if s.size and s[0] > 0 else 0
    return Vh[r:].T.copy()


def range_basis(M, tol=None):
    """
    Orthonormal basis of the column space.
    """
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return np.zeros((rows, 0))
    U, s, _ = scipy.linalg.svd(M, full_matrices=False)
    r = rank(M, tol) if s[0] > 0 else 0
    return U[:, :r].copy()


def orthogonal_complement(basis, within=None):
    """
    Orthonormal columns spanning the part of `within` (default the whole
    space) orthogonal to `basis`. Both arguments have orthonormal columns and
    span(basis) lies in span(within); the count of returned columns is the
    dimension difference, independently of any rank cutoff.
    """
    n = basis.shape[0]
    if within is None:
        within = np.eye(n)
    count = within.shape[1] - basis.shape[1]
    if count <= 0:
        return np.zeros((n, 0))
    residual = within - basis @ (basis.T @ within)
    U, _, _ = scipy.linalg.svd(residual, full_matrices=False)
    return U[:, :count].copy()


def controllable_subspace(A, B, tol=None):
    """
    Orthonormal basis of the smallest A-invariant subspace containing im B.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.atleast_2d(np.asarray(B, dtype=float))
    basis = range_basis(B, tol) if B.size else np.zeros((n, 0))
    while 0 < basis.shape[1] < n:
        grown = range_basis(np.hstack([basis, A @ basis]), tol)
        if grown.shape[1] == basis.shape[1]:
            break
        basis = grown
    return basis


def zoh(A, B, tau):
    """
    Zero-order-hold pair (e^{A tau}, int_0^tau e^{A s} ds B) read off one
    block exponential.
    """
    n, m = B.shape
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = A
    augmented[:n, n:] = B
    flow = expm(augmented, tau)
    return flow[:n, :n], flow[:n, n:]


def integral_expm(A, tau):
    return zoh(A, np.eye(A.shape[0]), tau)[1]


def char_poly(M):
    M = square(M)
    if M.shape[0] == 0:
        return np.zeros(0)
    return np.real(np.poly(M))[1:][::-1].copy()


def poly_from_roots(roots):
    if len(roots) == 0:
        return np.zeros(0)
    return np.real(np.poly(np.asarray(roots, dtype=complex)))[1:][::-1].copy()


def poly_at_matrix(a, M):
    """
    Horner evaluation of the monic polynomial with coefficients a at M.
    """
    n = M.shape[0]
    result = np.eye(n)
    for coefficient in reversed(a):
        result = result @ M + coefficient * np.eye(n)
    return result


def minimal_polynomial(M, tol=None):
    """
    Monic least-degree annihilating polynomial, found as the first power of
    M whose vectorization depends on the lower ones.
    """
    M = square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros(0)
    if tol is None:
        tol = get_config('numerics.minpoly_tol')
    scale = np.linalg.norm(M, 2) or 1.0
    scaled = M / scale
    powers = [np.eye(n).ravel()]
    power = np.eye(n)
    for degree in range(1, n + 1):
        power = power @ scaled
        lower = np.column_stack(powers)
        if rank(np.column_stack([lower, power.ravel()]), tol) <= degree:
            coefficients = np.linalg.lstsq(lower, -power.ravel(), rcond=None)[0]
            return coefficients * scale ** (degree - np.arange(degree))
        powers.append(power.ravel())
    log.debug("No dependent power below the dimension, using char poly")
    return char_poly(M)


def _cluster(values, tol):
    clusters = []
    for value in sorted(values, key=lambda v: (v.real, v.imag)):
        for cluster in clusters:
            center = np.mean(cluster)
            if abs(value - center) <= tol * max(1.0, abs(center)):
                cluster.append(value)
                break
        else:
            clusters.append([value])
    return [np.mean(cluster) for cluster in clusters]


def spectral_minimal_polynomial(M, merge_tol):
    """
    Minimal polynomial assembled from the spectrum: eigenvalues closer than
    merge_tol are one mode, and each mode enters with its largest Jordan
    block size, read off the rank sequence of powers of (M - lambda I).
    """
    M = square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros(0)
    spectrum = eigvals(M)
    real = [complex(s.real, 0) for s in spectrum if abs(s.imag) <= merge_tol * max(1.0, abs(s))]
    upper = [s for s in spectrum if s.imag > merge_tol * max(1.0, abs(s))]
    roots = []
    scale = max(np.linalg.norm(M, 2), 1.0)
    for center in _cluster(real, merge_tol) + _cluster(upper, merge_tol):
        shifted = (M - center * np.eye(n)) / scale
        power = np.eye(n, dtype=complex)
        previous = n
        index = 0
        while index < n:
            power = power @ shifted
            # shifted is normalized, so the cutoff is absolute
            current = int(np.sum(singular_values(power) > merge_tol))
            if current == previous:
                break
            previous = current
            index += 1
        index = max(index, 1)
        roots.extend([center] * index)
        if center.imag != 0:
            roots.extend([np.conj(center)] * index)
    return poly_from_roots(roots)


def companion(a):
    """
    Companion matrix with superdiagonal ones and last row -a.
    """
    a = np.asarray(a, dtype=float).ravel()
    d = a.size
    if d == 0:
        raise NumericsError("Companion matrix needs degree >= 1")
    C = np.eye(d, k=1)
    C[-1, :] = -a
    return C


def placement_targets(d, radius=None):
    """
    Conjugate-symmetric targets radius * exp(2 pi i j / d). Conjugates are
    built explicitly so that the pairing is exact.
    """
    if radius is None:
        radius = get_config('stabilizer.target_radius')
    targets = [complex(radius, 0)]
    for j in range(1, (d - 1) // 2 + 1):
        z = radius * np.exp(2j * np.pi * j / d)
        targets.extend([z, np.conj(z)])
    if d % 2 == 0 and d > 0:
        targets.append(complex(-radius, 0))
    return np.array(targets[:d], dtype=complex)


def _conjugate_symmetric(targets):
    targets = np.asarray(targets, dtype=complex)
    paired = []
    for z in targets:
        if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
            paired.append(complex(z.real, 0))
    upper = [z for z in targets if z.imag > 1e-12 * max(1.0, abs(z))]
    lower = [z for z in targets if z.imag < -1e-12 * max(1.0, abs(z))]
    if len(upper) != len(lower):
        raise NumericsError("Targets must be closed under conjugation")
    for z in upper:
        paired.extend([z, np.conj(z)])
    return np.array(paired, dtype=complex)


def place_eigenvalues(Phi, Gamma, targets=None, tol=None, stable=None):
    """
    Returns K such that the controllable part of Phi + Gamma K has the
    requested eigenvalues. The pair is split by an orthonormal basis of its
    controllable subspace; `stable` decides whether the uncontrollable
    eigenvalues are acceptable.

    Targets may be given for the whole state or for the controllable part
    only; None selects `placement_targets`.
    """
    Phi = square(np.atleast_2d(np.asarray(Phi, dtype=float)), 'Phi')
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    if Gamma.shape[0] != Phi.shape[0]:
        raise NumericsError("Gamma has {} rows, Phi is {}x{}".format(
            Gamma.shape[0], *Phi.shape))
    n, m = Gamma.shape
    if n == 0 or m == 0:
        if n and stable is not None and not all(stable(s) for s in eigvals(Phi)):
            raise NumericsError("Uncontrollable mode outside the target region")
        return np.zeros((m, n))
    basis = controllable_subspace(Phi, Gamma, tol)
    nc = basis.shape[1]
    frame = np.hstack([basis, orthogonal_complement(basis)])
    Phi_t = frame.T @ Phi @ frame
    if nc < n:
        stuck = eigvals(Phi_t[nc:, nc:])
        if stable is not None and not all(stable(s) for s in stuck):
            raise NumericsError("Uncontrollable mode {} outside the target region"
                                .format(stuck[np.argmax(np.abs(stuck))]))
    if nc == 0:
        return np.zeros((m, n))
    if targets is None:
        targets = placement_targets(nc)
    targets = np.asarray(targets, dtype=complex)
    if targets.size != nc:
        if targets.size == n:
            raise NumericsError("Pair has only {} controllable modes, {} targets given"
                                .format(nc, n))
        raise NumericsError("Expected {} targets, got {}".format(nc, targets.size))
    targets = _conjugate_symmetric(targets)
    Phi_c = Phi_t[:nc, :nc]
    Gamma_c = basis.T @ Gamma
    U, s, Vh = scipy.linalg.svd(Gamma_c, full_matrices=False)
    r = rank(Gamma_c, tol)
    Gamma_r = U[:, :r] * s[:r]
    # place_poles reports an unfinished robustness iteration as a
    # UserWarning; the gain is still valid and gets logged instead
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        try:
            placed = scipy.signal.place_poles(Phi_c, Gamma_r, targets)
        except ValueError as e:
            raise NumericsError("Eigenvalue assignment failed: {}".format(e))
    for warning in caught:
        log.info("Eigenvalue assignment: {}".format(warning.message))
    K_c = Vh[:r].T @ -placed.gain_matrix
    return K_c @ basis.T


def place_discrete(Phi, Gamma, targets=None, tol=None):
    """
    Gain K making Phi + Gamma K Schur with the controllable eigenvalues at
    targets. Raises NumericsError when an uncontrollable eigenvalue lies
    outside the open unit disk.
    """
    K = place_eigenvalues(Phi, Gamma, targets, tol,
                          stable=lambda s: abs(s) < 1.0)
    radius = spectral_radius(np.atleast_2d(Phi) + np.atleast_2d(Gamma) @ K)
    if radius >= 1.0:
        raise NumericsError("Placement left spectral radius {:.6g}".format(radius))
    log.debug("Placed {} eigenvalues, spectral radius {:.3g}".format(
        np.shape(Phi)[0], radius))
    return K
