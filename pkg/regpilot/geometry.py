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
Controlled-invariant structure of the flow map (A, B, C) and the coordinates
it induces: z = T' x splits into the reachable part of the weakly
unobservable subspace, the rest of it, and an orthogonal complement.
"""

import logging

import numpy as np

from regpilot import numerics
from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.geometry')


class GeometryError(RegpilotError):
    pass


class HybridPlant(object):
    """
    Linear plant with flows x' = Ax + Bu + Pw, e = Cx + Qw and jumps x+ = Ex.
    P, Q default to empty (q = 0), E to the identity.
    """
    def __init__(self, A, B, C, P=None, Q=None, E=None):
        self.A = numerics.square(numerics.matrix(A, name='A'), 'A')
        n = self.A.shape[0]
        self.B = numerics.matrix(B, rows=n, name='B')
        self.C = numerics.matrix(C, cols=n, name='C')
        p = self.C.shape[0]
        self.P = numerics.matrix(P, rows=n, name='P')
        q = self.P.shape[1]
        self.Q = numerics.matrix(Q, rows=p, cols=q, name='Q')
        self.E = numerics.matrix(E if E is not None else np.eye(n),
                                 rows=n, cols=n, name='E')

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def q(self):
        return self.P.shape[1]

    def matrices(self):
        return dict(A=self.A, B=self.B, P=self.P, C=self.C, Q=self.Q, E=self.E)

    def __repr__(self):
        return '<HybridPlant n={} m={} p={} q={}>'.format(self.n, self.m, self.p, self.q)


class Subspace(object):
    def __init__(self, basis):
        self.basis = np.asarray(basis, dtype=float)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, 0)))

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def ambient(self):
        return self.basis.shape[0]

    def projector(self):
        return self.basis @ self.basis.T

    def complement_projector(self):
        return np.eye(self.ambient) - self.projector()

    def contains(self, other, tol=1e-9):
        if other.dim == 0:
            return True
        residual = self.complement_projector() @ other.basis
        return np.linalg.norm(residual) <= tol * max(1.0, np.linalg.norm(other.basis))

    def __repr__(self):
        return '<Subspace dim={} of R^{}>'.format(self.dim, self.ambient)


def _geometry_tol(tol):
    return get_config('geometry.rank_tol') if tol is None else tol


def _residual_tol(tol):
    return max(1e-9, 10 * tol)


def default_shift_targets(count):
    return np.array([-1.0 - 0.1 * i for i in range(count)])


def vstar(A, B, C, tol=None):
    """
    Largest subspace V with AV in V + im B and V in ker C, by the fixed point
    V_{k+1} = ker C  intersected with  A^{-1}(V_k + im B).
    """
    tol = _geometry_tol(tol)
    n = A.shape[0]
    kerC = numerics.kernel(C, tol) if C.shape[0] else np.eye(n)
    # rank cutoff relative to A and C, not to the stacked block
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(C, 2) if C.size else 0.0) or 1.0
    V = kerC
    for _ in range(n + 1):
        if V.shape[1] == 0:
            break
        W = numerics.range_basis(np.hstack([V, B]), tol)
        if W.shape[1] == n:
            nxt = kerC
        else:
            outside = np.eye(n) - W @ W.T
            nxt = numerics.kernel(np.vstack([C, outside @ A]), tol, scale)
        if nxt.shape[1] == V.shape[1]:
            V = nxt
            break
        V = nxt
    return Subspace(V)


def _natural_friend(A, B, Vstar, tol):
    """
    Minimum-norm solution F of (I - VV')(A + BF)V = 0, F = Y V'.
    """
    n, m = B.shape
    if Vstar.dim == 0:
        return np.zeros((m, n))
    V = Vstar.basis
    outside = Vstar.complement_projector()
    Y = -numerics.pinv(outside @ B, tol) @ outside @ A @ V
    return Y @ V.T


def _invariance_residual(A, B, F, Vstar):
    if Vstar.dim == 0:
        return 0.0
    return float(np.linalg.norm(Vstar.complement_projector() @ (A + B @ F) @ Vstar.basis))


def _input_preimage(B, S, tol):
    """
    Orthonormal basis of { u : Bu in S }.
    """
    return numerics.kernel(S.complement_projector() @ B, tol)


def _reachable(A_F, B, Vstar, tol):
    n = A_F.shape[0]
    if Vstar.dim == 0:
        return Subspace.zero(n)
    G1 = _input_preimage(B, Vstar, tol)
    if G1.shape[1] == 0:
        return Subspace.zero(n)
    start = numerics.range_basis(B @ G1, tol)
    return Subspace(numerics.controllable_subspace(A_F, start, tol))


def rstar(A, B, C, Vstar, tol=None):
    """
    Smallest (A + BF)-invariant subspace containing im B intersected with
    V*, grown as a Krylov span with the natural friend F.
    """
    tol = _geometry_tol(tol)
    if Vstar.dim and C.shape[0]:
        leak = np.linalg.norm(C @ Vstar.basis)
        if leak > _residual_tol(tol) * max(1.0, np.linalg.norm(C)):
            raise GeometryError("Subspace is not inside ker C (residual {:.3g})".format(leak))
    F0 = _natural_friend(A, B, Vstar, tol)
    return _reachable(A + B @ F0, B, Vstar, tol)


def friend(A, B, Vstar, shift_targets=(), tol=None):
    """
    Feedback F with (A + BF)V* in V*. With shift_targets the reachable block
    of A + BF on R* is moved to those eigenvalues; an empty sequence gives
    the natural friend, whose component along B^{-1}R* vanishes.
    """
    tol = _geometry_tol(tol)
    F = _natural_friend(A, B, Vstar, tol)
    limit = _residual_tol(tol) * max(1.0, np.linalg.norm(A))
    residual = _invariance_residual(A, B, F, Vstar)
    if residual > limit:
        raise GeometryError("Subspace is not controlled invariant "
                            "(residual {:.3g})".format(residual))
    if shift_targets is None or len(shift_targets) == 0:
        return F
    R = _reachable(A + B @ F, B, Vstar, tol)
    if R.dim == 0:
        return F
    if len(shift_targets) < R.dim:
        raise GeometryError("{} shift targets given, reachable block has dimension {}"
                            .format(len(shift_targets), R.dim))
    G1 = _input_preimage(B, R, tol)
    A11 = R.basis.T @ (A + B @ F) @ R.basis
    B11 = R.basis.T @ B @ G1
    try:
        K = numerics.place_eigenvalues(A11, B11, np.asarray(shift_targets)[:R.dim], tol)
    except numerics.NumericsError as e:
        raise GeometryError("Cannot shift the reachable block: {}".format(e))
    F = F + G1 @ K @ R.basis.T
    residual = _invariance_residual(A, B, F, Vstar)
    if residual > limit:
        raise GeometryError("Shifted friend lost invariance (residual {:.3g})".format(residual))
    return F


def input_partition(B, Rstar, tol=None):
    """
    Returns (G, m1): G = [G1 G2] orthogonal with im G1 = B^{-1}R*.
    """
    tol = _geometry_tol(tol)
    m = B.shape[1]
    G1 = _input_preimage(B, Rstar, tol) if Rstar.dim else np.zeros((m, 0))
    m1 = G1.shape[1]
    if m1 == 0:
        return np.eye(m), 0
    G2 = numerics.orthogonal_complement(G1)
    return np.hstack([G1, G2]), m1


class Decomposition(object):
    """
    Plant in the coordinates z = T'x, v = G'u with the friend applied:

        Abar_F = T'(A + BF)T    Abar = T'AT    Bbar = T'BG
        Pbar = T'P    Cbar = CT    Ebar = T'ET    Fbar = G'FT

    State blocks have sizes (rho, nu - rho, n - nu), input blocks (m1, m - m1).
    T and G are orthogonal.
    """
    def __init__(self, plant, T, G, F, rho, nu, m1):
        self.plant = plant
        self.T = T
        self.G = G
        self.F_star_V = F
        self.rho = rho
        self.nu = nu
        self.m1 = m1
        A, B = plant.A, plant.B
        self.Abar_F = T.T @ (A + B @ F) @ T
        self.Abar = T.T @ A @ T
        self.Bbar = T.T @ B @ G
        self.Pbar = T.T @ plant.P
        self.Cbar = plant.C @ T
        self.Ebar = T.T @ plant.E @ T
        self.Fbar = G.T @ F @ T
        self.Q = plant.Q

    @property
    def n(self):
        return self.T.shape[0]

    @property
    def m(self):
        return self.G.shape[0]

    @property
    def p(self):
        return self.Cbar.shape[0]

    @property
    def n3(self):
        return self.n - self.nu

    @property
    def state_slices(self):
        return [slice(0, self.rho), slice(self.rho, self.nu), slice(self.nu, self.n)]

    @property
    def input_slices(self):
        return [slice(0, self.m1), slice(self.m1, self.m)]

    def block(self, name, i, j):
        """
        Block (i, j), 1-based, of one of the transformed matrices.
        """
        M = getattr(self, name)
        rows = self.state_slices
        if name in ('Abar_F', 'Abar', 'Ebar'):
            cols = self.state_slices
        elif name == 'Bbar':
            cols = self.input_slices
        elif name == 'Cbar':
            rows, cols = [slice(0, self.p)], self.state_slices
        elif name == 'Fbar':
            rows, cols = self.input_slices, self.state_slices
        else:
            raise KeyError(name)
        return M[rows[i - 1], cols[j - 1]]

    @property
    def A11(self):
        return self.block('Abar_F', 1, 1)

    @property
    def A22(self):
        return self.block('Abar_F', 2, 2)

    @property
    def A33(self):
        return self.block('Abar_F', 3, 3)

    @property
    def B1(self):
        return self.Bbar[:, :self.m1]

    @property
    def B2(self):
        return self.Bbar[:, self.m1:]

    @property
    def B32(self):
        return self.block('Bbar', 3, 2)

    @property
    def C3(self):
        return self.Cbar[:, self.nu:]

    def pattern_residuals(self):
        """
        Entries that vanish in these coordinates.
        """
        r, v = self.rho, self.nu
        return {
            'Abar_F[2:3, 1]': self.Abar_F[r:, :r],
            'Abar_F[3, 2]': self.Abar_F[v:, r:v],
            'Bbar[2:3, 1]': self.Bbar[r:, :self.m1],
            'Cbar[1:2]': self.Cbar[:, :v],
        }

    def enforce_pattern(self, tol, inputs=True):
        scale = max(1.0, np.linalg.norm(self.plant.A), np.linalg.norm(self.plant.B),
                    np.linalg.norm(self.plant.C))
        for name, block in self.pattern_residuals().items():
            if name.startswith('Bbar') and not inputs:
                continue
            if block.size and np.max(np.abs(block)) > tol * scale:
                raise GeometryError("Zero pattern violated in {} (residual {:.3g}); "
                                    "numerically dependent basis"
                                    .format(name, np.max(np.abs(block))))
        r, v = self.rho, self.nu
        self.Abar_F[r:, :r] = 0
        self.Abar_F[v:, r:v] = 0
        if inputs:
            self.Bbar[r:, :self.m1] = 0
        self.Cbar[:, :v] = 0

    def with_partition(self, G, m1):
        """
        Same state coordinates and friend, inputs re-expressed in another
        orthogonal partition G = [G1 G2].
        """
        return Decomposition(self.plant, self.T, G, self.F_star_V, self.rho, self.nu, m1)

    def summary(self):
        return {
            'n': self.n, 'm': self.m, 'p': self.p,
            'rho': self.rho, 'nu': self.nu, 'n3': self.n3, 'm1': self.m1,
            'invariant_zeros': numerics.sort_spectrum(invariant_zeros(self)),
            'reachable_spectrum': numerics.sort_spectrum(numerics.eigvals(self.A11)),
        }


def decompose(plant, shift_targets=None, tol=None, partition=None):
    """
    Builds the decomposition of a plant.

    :param: shift_targets
            eigenvalues for the friend's reachable block; None takes
            `geometry.shift_targets` from configuration (default pattern when
            unset), an empty sequence keeps the natural friend
    :param: partition
            optional (G, m1) replacing the computed input partition
    """
    tol = _geometry_tol(tol)
    A, B, C = plant.A, plant.B, plant.C
    V = vstar(A, B, C, tol)
    R = rstar(A, B, C, V, tol)
    if shift_targets is None:
        shift_targets = get_config('geometry.shift_targets', None)
        if shift_targets is None:
            shift_targets = default_shift_targets(R.dim)
    F = friend(A, B, V, shift_targets, tol)
    if partition is None:
        G, m1 = input_partition(B, R, tol)
    else:
        G, m1 = partition
    middle = numerics.orthogonal_complement(R.basis, V.basis)
    outer = numerics.orthogonal_complement(V.basis)
    T = np.hstack([R.basis, middle, outer])
    dec = Decomposition(plant, T, G, F, R.dim, V.dim, m1)
    dec.enforce_pattern(_residual_tol(tol), inputs=partition is None)
    log.debug("Decomposed plant: rho={} nu={} m1={}".format(R.dim, V.dim, m1))
    return dec


def invariant_zeros(dec):
    return numerics.eigvals(dec.A22)
