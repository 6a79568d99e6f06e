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
Solvability and stability tests. Check functions never raise on a failed
condition; they return a CheckReport listing one witness per tested point.
"""

import logging
from collections import namedtuple

import numpy as np

from regpilot import geometry, numerics
from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.checks')

PH_VARIANTS = ('printed', 'third')
STRUCTURE_LABELS = ('over-actuation m > p', 'rank B = m', 'rank C = p')


class ChecksFailed(RegpilotError):
    def __init__(self, reports):
        super().__init__()
        self.reports = [report for report in reports if not report.passed]

    def __str__(self):
        return "Failed checks: {}".format(
            ', '.join(report.name for report in self.reports))


class Witness(namedtuple('Witness', ['point', 'achieved', 'required', 'label'])):
    """
    One tested point: rank achieved against rank required. `point` is the
    eigenvalue the rank was evaluated at, None for clauses not tied to one.
    """
    __slots__ = ()

    def __new__(cls, point, achieved, required, label=''):
        return super().__new__(cls, point, achieved, required, label)

    @property
    def satisfied(self):
        return self.achieved >= self.required


class CheckReport(object):
    def __init__(self, name, witnesses, margin=float('inf'), note=None):
        self.name = name
        self.witnesses = list(witnesses)
        self.margin = margin
        self.note = note

    @property
    def passed(self):
        return all(witness.satisfied for witness in self.witnesses)

    def failures(self):
        return [witness for witness in self.witnesses if not witness.satisfied]

    def __repr__(self):
        return '<CheckReport {} {}>'.format(self.name, 'passed' if self.passed else 'FAILED')


class ExosystemSpec(object):
    """
    Exosystem w' = Sw between jumps, w+ = Jw at the jumps, one jump every
    tau_M time units.
    """
    def __init__(self, S, J, tau_M):
        self.S = numerics.square(numerics.matrix(S, name='S'), 'S')
        q = self.S.shape[0]
        self.J = numerics.matrix(J, rows=q, cols=q, name='J')
        self.tau_M = float(tau_M)
        if not self.tau_M > 0:
            raise ValueError("Jump period must be positive, got {}".format(tau_M))

    @property
    def q(self):
        return self.S.shape[0]

    @property
    def J_tilde(self):
        return self.J @ numerics.expm(self.S, self.tau_M)


def monodromy(E_a, A_a, tau_M):
    """
    One-period map E_a e^{A_a tau_M}, its spectrum and whether the hybrid
    system is GES, i.e. the spectrum lies in the open unit disk.
    """
    M = np.asarray(E_a) @ numerics.expm(A_a, tau_M)
    spectrum = numerics.eigvals(M)
    ges = bool(np.all(np.abs(spectrum) < 1.0))
    return M, spectrum, ges


def _rank_tol():
    return get_config('checks.rank_tol')


def _distinct(spectrum, tol):
    distinct = []
    for s in spectrum:
        if not any(abs(s - d) <= tol * max(1.0, abs(d)) for d in distinct):
            distinct.append(s)
    return distinct


def check_assumption1(plant, exo):
    m, p = plant.m, plant.p
    rank_B = numerics.rank(plant.B)
    rank_C = numerics.rank(plant.C)
    J_tilde = exo.J_tilde
    spectrum = numerics.eigvals(J_tilde)
    degree = len(numerics.minimal_polynomial(J_tilde))
    distinct = _distinct(spectrum, get_config('internal_model.merge_tol'))
    margin = get_config('numerics.unit_disk_margin')
    witnesses = [
        Witness(None, m, p + 1, 'over-actuation m > p'),
        Witness(None, rank_B, m, 'rank B = m'),
        Witness(None, rank_C, p, 'rank C = p'),
        Witness(None, len(distinct), degree, 'J~ semi-simple'),
    ]
    for s in spectrum:
        witnesses.append(Witness(s, int(abs(s) >= 1.0 - margin), 1,
                                 'J~ eigenvalue outside the unit disk'))
    singular = [numerics.singular_values(M)[-1] for M in (plant.B, plant.C) if M.size]
    return CheckReport('assumption1', witnesses, min(singular) if singular else 0.0)


def _pbh_report(name, mono, span, side):
    """
    Rank of [mono - sI, span] (side 'right') or [mono - sI; span] (side
    'bottom') at every eigenvalue of mono outside the open unit disk.
    """
    n = mono.shape[0]
    witnesses = []
    margin = float('inf')
    for s in numerics.outside_unit_disk(numerics.eigvals(mono)):
        shifted = mono - s * np.eye(n)
        if side == 'right':
            pencil = np.hstack([shifted, span.astype(complex)])
        else:
            pencil = np.vstack([shifted, span.astype(complex)])
        achieved, sigma = numerics.complex_rank(pencil, _rank_tol(), required=n)
        witnesses.append(Witness(s, achieved, n))
        margin = min(margin, sigma)
    return CheckReport(name, witnesses, margin)


def stabilizability_report(E, A, B, tau, name='hybrid_stabilizability'):
    """
    Rank of [E e^{A tau} - sI, R(A, B)] at the monodromy eigenvalues outside
    the unit disk; R(A, B) is represented by an orthonormal basis of its
    column space.
    """
    E, A, B = numerics.matrix(E), numerics.matrix(A), numerics.matrix(B)
    mono = E @ numerics.expm(A, tau)
    reach = numerics.controllable_subspace(A, B, get_config('geometry.rank_tol'))
    return _pbh_report(name, mono, reach, 'right')


def detectability_report(E, A, C, tau, name='hybrid_detectability'):
    """
    Rank of [E e^{A tau} - sI; O(A, C)], the observability matrix being
    represented by an orthonormal basis of its row space.
    """
    E, A, C = numerics.matrix(E), numerics.matrix(A), numerics.matrix(C)
    mono = E @ numerics.expm(A, tau)
    observed = numerics.controllable_subspace(A.T, C.T, get_config('geometry.rank_tol')).T
    return _pbh_report(name, mono, observed, 'bottom')


def check_hybrid_stabilizability(dec, tau_M):
    return stabilizability_report(dec.Ebar, dec.Abar_F, dec.Bbar, tau_M)


def check_hybrid_detectability(dec, tau_M):
    return detectability_report(dec.Ebar, dec.Abar_F, dec.Cbar, tau_M)


def check_nonresonance_flow(dec, exo):
    """
    Rank of [[A33 - sI, B32], [C3, 0]] = n3 + p at every eigenvalue of S.
    """
    n3, p = dec.n3, dec.p
    A33, B32, C3 = dec.A33, dec.B32, dec.C3
    required = n3 + p
    witnesses = []
    margin = float('inf')
    for s in numerics.eigvals(exo.S):
        pencil = np.block([
            [A33 - s * np.eye(n3), B32.astype(complex)],
            [C3.astype(complex), np.zeros((p, B32.shape[1]), dtype=complex)],
        ])
        achieved, sigma = numerics.complex_rank(pencil, _rank_tol(), required=required)
        witnesses.append(Witness(s, achieved, required))
        margin = min(margin, sigma)
    return CheckReport('nonresonance_flow', witnesses, margin)


def check_nonresonance_jump(dec, exo, variant=None):
    """
    Rank of P_H(s) = Ecols e^{A~ tau_M} - s blkdiag(I_rho, I_{nu-rho}, 0) = n
    at every eigenvalue of J~, with A~ the first two block rows and columns
    of Abar_F padded by zeros.

    The "printed" variant uses block columns (1, 2, 1) of Ebar and is only
    square when rho == n3; otherwise the "third" variant, Ebar itself, is
    evaluated and the report carries a note.
    """
    if variant is None:
        variant = get_config('checks.ph_variant')
    if variant not in PH_VARIANTS:
        raise ValueError("Unknown P_H variant: {}".format(variant))
    n, nu, rho = dec.n, dec.nu, dec.rho
    note = None
    if variant == 'printed' and rho != dec.n3:
        note = ("printed variant needs rho == n3 (rho={}, n3={}); "
                "evaluated the third-column variant".format(rho, dec.n3))
        log.warning(note)
        variant = 'third'
    if variant == 'printed':
        columns = dec.Ebar[:, list(range(0, nu)) + list(range(0, rho))]
    else:
        columns = dec.Ebar
    A_tilde = np.zeros((n, n))
    A_tilde[:nu, :nu] = dec.Abar_F[:nu, :nu]
    flow = columns @ numerics.expm(A_tilde, exo.tau_M)
    selector = np.zeros((n, n))
    selector[:nu, :nu] = np.eye(nu)
    witnesses = []
    margin = float('inf')
    for s in numerics.eigvals(exo.J_tilde):
        achieved, sigma = numerics.complex_rank(flow - s * selector, _rank_tol(),
                                                required=n)
        witnesses.append(Witness(s, achieved, n))
        margin = min(margin, sigma)
    return CheckReport('nonresonance_jump', witnesses, margin, note)


def run_checks(plant, exo, dec, ph_variant=None, assumption=None):
    reports = [
        assumption or check_assumption1(plant, exo),
        check_hybrid_stabilizability(dec, exo.tau_M),
        check_hybrid_detectability(dec, exo.tau_M),
        check_nonresonance_flow(dec, exo),
        check_nonresonance_jump(dec, exo, ph_variant),
    ]
    for report in reports:
        if not report.passed:
            log.info("Check {} failed at {} point(s)".format(
                report.name, len(report.failures())))
    return reports


def check_plant(plant, exo, shift_targets=None, ph_variant=None):
    """
    Runs assumption 1, then decomposes the plant and runs the structural
    checks. The decomposition needs m > p with full rank B and C; when one of
    those witnesses fails only the assumption report is returned.

    :return: (reports, decomposition), the decomposition None when skipped
    """
    assumption = check_assumption1(plant, exo)
    if any(witness.label in STRUCTURE_LABELS for witness in assumption.failures()):
        log.info("Plant structure check failed, decomposition skipped")
        return [assumption], None
    dec = geometry.decompose(plant, shift_targets=shift_targets)
    return run_checks(plant, exo, dec, ph_variant, assumption), dec
