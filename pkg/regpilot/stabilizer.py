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
Sampled-data stabilizer of the augmented system. Within a period the
augmented flow is sampled every tau_s with a zero-order hold, N samples per
period. At each period start a stacked input sequence U = K eta_hat is
committed; at each jump the observer corrects its prediction with the N
output samples collected during the period.
"""

import logging

import numpy as np

from regpilot import numerics, checks, render
from regpilot.internal_model import channel_mix, InternalModelError
from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.stabilizer')


class SynthesisError(RegpilotError):
    def __init__(self, message, reports=()):
        super().__init__(message)
        self.reports = list(reports)


def samples_per_period(tau_M, tau_s):
    ratio = tau_M / tau_s
    N = int(round(ratio))
    if N < 1 or abs(ratio - N) > 1e-9 * max(1.0, ratio):
        raise SynthesisError("Sampling period {} does not divide the jump period {}"
                             .format(tau_s, tau_M))
    return N


def discretize_augmented(aug, tau_s):
    samples_per_period(aug.tau_M, tau_s)
    return numerics.zoh(aug.A_hat, aug.B_hat, tau_s)


def _powers(A, count):
    powers = [np.eye(A.shape[0])]
    for _ in range(count - 1):
        powers.append(A @ powers[-1])
    return powers


def stacked_observability(A_D, C, N):
    """
    [C; C A_D; ...; C A_D^{N-1}]
    """
    return np.vstack([C @ power for power in _powers(A_D, N)])


def stacked_impulse(A_D, B_D, C, N):
    """
    Lower block triangular map from [u_0; ...; u_{N-1}] to
    [y_0; ...; y_{N-1}], block (h, j) = C A_D^{h-1-j} B_D for j < h.
    """
    p, m = C.shape[0], B_D.shape[1]
    D = np.zeros((N * p, N * m))
    markov = [C @ power @ B_D for power in _powers(A_D, max(N - 1, 1))]
    for h in range(N):
        for j in range(h):
            D[h * p:(h + 1) * p, j * m:(j + 1) * m] = markov[h - 1 - j]
    return D


def stacked_reachability(A_D, B_D, N):
    """
    [A_D^{N-1} B_D, ..., A_D B_D, B_D], so that
    x_N = A_D^N x_0 + R [u_0; ...; u_{N-1}].
    """
    return np.hstack([power @ B_D for power in reversed(_powers(A_D, N))])


class HybridObserver(object):
    def __init__(self, A_D, B_D, E, C_tilde, D_tilde, L, N):
        self.A_D = A_D
        self.B_D = B_D
        self.E = E
        self.C_tilde = C_tilde
        self.D_tilde = D_tilde
        self.L = L
        self.N = N

    @property
    def error_map(self):
        return self.E @ np.linalg.matrix_power(self.A_D, self.N) - self.L @ self.C_tilde

    @property
    def spectral_radius(self):
        return numerics.spectral_radius(self.error_map)


class PeriodFeedback(object):
    def __init__(self, K, F_full, A_Df, B_D, E, N):
        self.K = K
        self.F_full = F_full
        self.A_Df = A_Df
        self.B_D = B_D
        self.E = E
        self.N = N

    @property
    def period_map(self):
        Phi = self.E @ np.linalg.matrix_power(self.A_Df, self.N)
        Gamma = self.E @ stacked_reachability(self.A_Df, self.B_D, self.N)
        return Phi + Gamma @ self.K

    @property
    def spectral_radius(self):
        return numerics.spectral_radius(self.period_map)


def _default_tau_s(aug, tau_s):
    if tau_s is None:
        tau_s = get_config('stabilizer.tau_s', None)
    if tau_s is None:
        raise SynthesisError("No stabilizer sampling period given")
    return tau_s


def verify_augmented(aug):
    """
    Hybrid stabilizability and detectability of the augmented system; the
    internal models add marginally stable modes that the tests must cover.
    """
    reports = [
        checks.stabilizability_report(aug.E_hat, aug.A_hat, aug.B_hat, aug.tau_M,
                                      name='augmented_stabilizability'),
        checks.detectability_report(aug.E_hat, aug.A_hat, aug.C_hat, aug.tau_M,
                                    name='augmented_detectability'),
    ]
    failed = [report for report in reports if not report.passed]
    if failed:
        raise SynthesisError("Augmented system fails {}".format(
            ', '.join(report.name for report in failed)), failed)
    return reports


def design_observer(aug, tau_s=None, targets=None):
    """
    Gain L placing the eigenvalues of E A_D^N - L C~ with the dual pair.
    """
    tau_s = _default_tau_s(aug, tau_s)
    N = samples_per_period(aug.tau_M, tau_s)
    A_D, B_D = discretize_augmented(aug, tau_s)
    C_tilde = stacked_observability(A_D, aug.C_hat, N)
    D_tilde = stacked_impulse(A_D, B_D, aug.C_hat, N)
    Phi = aug.E_hat @ np.linalg.matrix_power(A_D, N)
    try:
        K_dual = numerics.place_discrete(Phi.T, C_tilde.T, targets)
    except numerics.NumericsError as e:
        raise SynthesisError("Observer design failed, augmented system not "
                             "detectable: {}".format(e))
    observer = HybridObserver(A_D, B_D, aug.E_hat, C_tilde, D_tilde, -K_dual.T, N)
    radius = observer.spectral_radius
    if radius >= 1.0:
        raise SynthesisError("Observer error map has spectral radius {:.6g}".format(radius))
    log.info("Observer placed, error spectral radius {:.3g}".format(radius))
    return observer


def friend_gain(aug, enabled=None):
    """
    Gain acting on the augmented state that adds the friend term Fbar z to
    u_x and nothing to u_F, u_J.
    """
    if enabled is None:
        enabled = get_config('stabilizer.friend_feedback')
    n, m = aug.dec.n, aug.dec.m
    F_full = np.zeros((aug.m, aug.n))
    if enabled:
        F_full[:m, :n] = aug.friend
    return F_full


def design_feedback(aug, tau_s=None, targets=None, friend_feedback=None):
    """
    Stacked gain K with U = K eta_hat making E A_Df^N + E R K Schur, A_Df the
    sampled flow with the friend term closed.
    """
    tau_s = _default_tau_s(aug, tau_s)
    N = samples_per_period(aug.tau_M, tau_s)
    A_D, B_D = discretize_augmented(aug, tau_s)
    F_full = friend_gain(aug, friend_feedback)
    A_Df = A_D + B_D @ F_full
    Phi = aug.E_hat @ np.linalg.matrix_power(A_Df, N)
    Gamma = aug.E_hat @ stacked_reachability(A_Df, B_D, N)
    try:
        K = numerics.place_discrete(Phi, Gamma, targets)
    except numerics.NumericsError as e:
        raise SynthesisError("Feedback design failed, augmented system not "
                             "stabilizable: {}".format(e))
    feedback = PeriodFeedback(K, F_full, A_Df, B_D, aug.E_hat, N)
    radius = feedback.spectral_radius
    if radius >= 1.0:
        raise SynthesisError("Period map has spectral radius {:.6g}".format(radius))
    log.info("Feedback placed, period map spectral radius {:.3g}".format(radius))
    return feedback


class RegulatorRealization(object):
    """
    Complete error-feedback regulator.

    Continuous part: x_c = (x_F, x_J) with x_c' = A_c x_c + B_c (u_F, u_J),
    u = C_c x_c + D_c u_x and x_c+ = E_c x_c at the jumps. The discrete part
    (observer, feedback) produces the held signals u_x, u_F, u_J.
    """
    def __init__(self, dec, fim, jim, mix, observer, feedback):
        self.dec = dec
        self.fim = fim
        self.jim = jim
        self.mix = mix
        self.observer = observer
        self.feedback = feedback
        m, m1 = dec.m, dec.m1
        n_F, n_J = fim.n_F, jim.n_J
        self.A_c = numerics.blkdiag(fim.A_F, jim.A_J)
        self.B_c = np.eye(n_F + n_J)
        selection = np.zeros((m, n_F + n_J))
        selection[:m1, n_F:] = jim.C_J1
        selection[m1:, :n_F] = mix @ fim.C_F
        self.C_c = dec.G @ selection
        self.D_c = dec.G
        self.E_c = np.zeros((n_F + n_J, n_F + n_J))
        self.E_c[:n_F, n_F:] = jim.C_J2
        self.E_c[n_F:, n_F:] = jim.E_J

    @property
    def N(self):
        return self.observer.N

    @property
    def n_c(self):
        return self.A_c.shape[0]

    @property
    def n_hat(self):
        return self.observer.A_D.shape[0]

    @property
    def m(self):
        return self.D_c.shape[0]

    @property
    def m_hat(self):
        return self.observer.B_D.shape[1]

    def dims(self):
        return {
            'n': self.dec.n, 'm': self.dec.m, 'p': self.dec.p, 'm1': self.dec.m1,
            'n_h': self.fim.n_h, 'n_F': self.fim.n_F, 'n_J': self.jim.n_J,
            'n_hat': self.n_hat, 'N': self.N,
        }

    def dump(self):
        return render.render('regulator.txt', regulator=self, dims=self.dims())


def assemble_regulator(dec, fim, jim, obs, fb):
    try:
        mix = channel_mix(dec.m - dec.m1, fim.p)
    except InternalModelError as e:
        raise SynthesisError(str(e))
    if obs.N != fb.N:
        raise SynthesisError("Observer runs {} samples per period, feedback {}"
                             .format(obs.N, fb.N))
    return RegulatorRealization(dec, fim, jim, mix, obs, fb)


def synthesize(aug, tau_s=None, observer_targets=None, feedback_targets=None,
               friend_feedback=None):
    """
    Verifies the augmented system, designs observer and feedback on the same
    sampling grid and assembles the regulator.
    """
    reports = verify_augmented(aug)
    observer = design_observer(aug, tau_s, observer_targets)
    feedback = design_feedback(aug, tau_s, feedback_targets, friend_feedback)
    regulator = assemble_regulator(aug.dec, aug.fim, aug.jim, observer, feedback)
    return regulator, reports


class HybridRegulator(object):
    """
    Runtime of the discrete part. Per period: begin_period(), then N calls
    of sample(e) returning the held signal (u_x, u_F, u_J), then jump().
    Estimates may be vectors or column batches.
    """
    def __init__(self, realization):
        self.realization = realization
        self.estimate = None
        self.reset()

    def reset(self, batch=None):
        n_hat = self.realization.n_hat
        self.estimate = np.zeros(n_hat) if batch is None else np.zeros((n_hat, batch))
        self._start = None
        self._spool = None
        self._outputs = []
        self._applied = []

    def begin_period(self):
        self._start = self.estimate.copy()
        self._spool = self.realization.feedback.K @ self.estimate
        self._outputs = []
        self._applied = []

    def sample(self, e):
        h = len(self._outputs)
        if h >= self.realization.N:
            raise SynthesisError("More than {} samples in one period".format(self.realization.N))
        m_hat = self.realization.m_hat
        feedback = self.realization.feedback
        held = self._spool[h * m_hat:(h + 1) * m_hat] + feedback.F_full @ self.estimate
        self._outputs.append(np.asarray(e, dtype=float))
        self._applied.append(held)
        observer = self.realization.observer
        self.estimate = observer.A_D @ self.estimate + observer.B_D @ held
        return held

    def jump(self):
        observer = self.realization.observer
        if len(self._outputs) != observer.N:
            raise SynthesisError("Jump after {} of {} samples".format(
                len(self._outputs), observer.N))
        Y = np.concatenate(self._outputs, axis=0)
        V = np.concatenate(self._applied, axis=0)
        innovation = Y - observer.D_tilde @ V - observer.C_tilde @ self._start
        self.estimate = observer.E @ self.estimate + observer.L @ innovation
        return self.estimate
