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
Flow and jump internal models and their interconnection with the
decomposed plant.
"""

import logging

import numpy as np

from regpilot import numerics
from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.internal_model')


class InternalModelError(RegpilotError):
    pass


class FlowIM(object):
    """
    x_F' = A_F x_F + u_F with A_F = I_p (x) companion(mu_h) and output
    C_F x_F, C_F = I_p (x) [1 0 ... 0].
    """
    def __init__(self, mu, p):
        self.mu = np.asarray(mu, dtype=float)
        self.p = p
        self.n_h = self.mu.size
        if self.n_h:
            self.A_F0 = numerics.companion(self.mu)
            self.C_F0 = np.eye(1, self.n_h)
        else:
            self.A_F0 = np.zeros((0, 0))
            self.C_F0 = np.zeros((1, 0))
        self.A_F = numerics.kron(np.eye(p), self.A_F0)
        self.C_F = numerics.kron(np.eye(p), self.C_F0)

    @property
    def n_F(self):
        return self.p * self.n_h


class JumpIM(object):
    """
    m1 + n_F copies of the exosystem: x_J' = A_J x_J + u_J, x_J+ = E_J x_J.
    C_J1 reads the last state of the first m1 copies, C_J2 that of the
    remaining n_F copies.
    """
    def __init__(self, S, J, m1, n_F):
        self.q = S.shape[0]
        self.m1 = m1
        self.n_F = n_F
        self.copies = m1 + n_F
        identity = np.eye(self.copies)
        self.A_J = numerics.kron(identity, S)
        self.E_J = numerics.kron(identity, J)
        self.C_J0 = np.eye(1, self.q, self.q - 1)
        self.C_J = numerics.kron(identity, self.C_J0)
        self.C_J1 = self.C_J[:m1]
        self.C_J2 = self.C_J[m1:]

    @property
    def n_J(self):
        return self.copies * self.q


def build_flow_im(A11_hat, A22_hat, S, p, merge_tol=None):
    """
    Companion model of the minimal polynomial of blkdiag(A11, A22, S),
    eigenvalues closer than merge_tol counted once.
    """
    if merge_tol is None:
        merge_tol = get_config('internal_model.merge_tol')
    modes = numerics.blkdiag(A11_hat, A22_hat, S)
    mu = numerics.spectral_minimal_polynomial(modes, merge_tol)
    log.debug("Flow internal model of degree {} from {} modes".format(mu.size, modes.shape[0]))
    return FlowIM(mu, p)


def build_jump_im(S, J, m1, n_F):
    if m1 < 0 or n_F < 0:
        raise InternalModelError("Copy counts must be non-negative")
    S = numerics.square(np.asarray(S, dtype=float), 'S')
    return JumpIM(S, np.asarray(J, dtype=float), m1, n_F)


def channel_mix(inputs, p):
    """
    Routes the p flow internal-model outputs into the first p of the
    `inputs` second-group channels.
    """
    if inputs < p:
        raise InternalModelError("Only {} inputs outside B^-1 R* for {} outputs"
                                 .format(inputs, p))
    return np.eye(inputs, p)


class AugmentedSystem(object):
    """
    Plant in decomposed coordinates interconnected with the internal
    models; state (z, x_F, x_J), input (u_x, u_F, u_J).
    """
    def __init__(self, dec, fim, jim, mix, A_hat, B_hat, C_hat, E_hat, P_hat, Q_hat, tau_M):
        self.dec = dec
        self.fim = fim
        self.jim = jim
        self.mix = mix
        self.A_hat = A_hat
        self.B_hat = B_hat
        self.C_hat = C_hat
        self.E_hat = E_hat
        self.P_hat = P_hat
        self.Q_hat = Q_hat
        self.tau_M = tau_M

    @property
    def friend(self):
        return self.dec.Fbar

    @property
    def dims(self):
        return {'n': self.dec.n, 'n_F': self.fim.n_F, 'n_J': self.jim.n_J}

    @property
    def n(self):
        return self.A_hat.shape[0]

    @property
    def m(self):
        return self.B_hat.shape[1]


def augment(dec, fim, jim, tau_M=None):
    n, m1, p = dec.n, dec.m1, dec.p
    n_F, n_J = fim.n_F, jim.n_J
    if fim.p != p:
        raise InternalModelError("Flow internal model has {} channels, plant has {} outputs"
                                 .format(fim.p, p))
    if jim.C_J1.shape[0] != m1:
        raise InternalModelError("Jump internal model feeds {} inputs, partition has m1={}"
                                 .format(jim.C_J1.shape[0], m1))
    if jim.C_J2.shape[0] != n_F:
        raise InternalModelError("Reset map has {} rows for {} flow internal-model states"
                                 .format(jim.C_J2.shape[0], n_F))
    mix = channel_mix(dec.m - m1, p)
    total = n + n_F + n_J
    z, f, j = slice(0, n), slice(n, n + n_F), slice(n + n_F, total)

    A_hat = np.zeros((total, total))
    A_hat[z, z] = dec.Abar
    A_hat[z, f] = dec.B2 @ mix @ fim.C_F
    A_hat[z, j] = dec.B1 @ jim.C_J1
    A_hat[f, f] = fim.A_F
    A_hat[j, j] = jim.A_J

    B_hat = numerics.blkdiag(dec.Bbar, np.eye(n_F), np.eye(n_J))

    C_hat = np.zeros((p, total))
    C_hat[:, z] = dec.Cbar

    E_hat = np.zeros((total, total))
    E_hat[z, z] = dec.Ebar
    E_hat[f, j] = jim.C_J2
    E_hat[j, j] = jim.E_J

    P_hat = np.zeros((total, dec.Pbar.shape[1]))
    P_hat[z] = dec.Pbar

    log.debug("Augmented system: n={} n_F={} n_J={}".format(n, n_F, n_J))
    return AugmentedSystem(dec, fim, jim, mix, A_hat, B_hat, C_hat, E_hat, P_hat,
                           dec.Q.copy(), tau_M)
