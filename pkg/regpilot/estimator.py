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
Identification of the flow dynamics from sampled input/output data.

The experiment holds the input at zero for one flow interval and then sends
unit pulses, one channel at a time, in two further intervals. Every window
used for identification lies inside a single flow interval, so jumps never
enter the regressions.
"""

import csv
import logging

import numpy as np
import scipy.linalg

from regpilot import numerics, geometry
from regpilot.config import get_config
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.estimator')


class EstimationError(RegpilotError):
    pass


class SampleLog(object):
    """
    Samples u_[i], y_[i] taken every tau time units. jump_indices lists the
    samples taken right after a plant jump.
    """
    def __init__(self, tau, inputs, outputs, jump_indices=()):
        self.tau = float(tau)
        if not self.tau > 0:
            raise EstimationError("Sampling period must be positive")
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise EstimationError("Log has {} input and {} output samples"
                                  .format(self.inputs.shape[0], self.outputs.shape[0]))
        self.jump_indices = [int(i) for i in jump_indices]
        if any(b <= a for a, b in zip(self.jump_indices, self.jump_indices[1:])):
            raise EstimationError("Jump indices must be strictly increasing")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def m(self):
        return self.inputs.shape[1]

    @property
    def p(self):
        return self.outputs.shape[1]

    def intervals(self):
        """
        (start, stop) sample ranges of the flow intervals.
        """
        bounds = [0] + [i for i in self.jump_indices if 0 < i < len(self)] + [len(self)]
        return [(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]

    def jump_counts(self):
        counts = np.zeros(len(self), dtype=int)
        for index in self.jump_indices:
            counts[index:] += 1
        return counts

    def to_csv(self, path):
        counts = self.jump_counts()
        jumped = set(self.jump_indices)
        with open(path, 'w', newline='') as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(['i', 't', 'k'] +
                            ['u_{}'.format(j + 1) for j in range(self.m)] +
                            ['y_{}'.format(j + 1) for j in range(self.p)] +
                            ['jumped'])
            for i in range(len(self)):
                writer.writerow([i, repr(i * self.tau), int(counts[i])] +
                                [repr(float(v)) for v in self.inputs[i]] +
                                [repr(float(v)) for v in self.outputs[i]] +
                                [int(i in jumped)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline='') as csv_file:
            reader = csv.reader(csv_file)
            header = next(reader)
            rows = [row for row in reader if row]
        u_cols = [j for j, name in enumerate(header) if name.startswith('u_')]
        y_cols = [j for j, name in enumerate(header) if name.startswith('y_')]
        if not rows:
            raise EstimationError("Empty sample log: {}".format(path))
        times = [float(row[header.index('t')]) for row in rows]
        tau = times[1] - times[0] if len(times) > 1 else 1.0
        inputs = [[float(row[j]) for j in u_cols] for row in rows]
        outputs = [[float(row[j]) for j in y_cols] for row in rows]
        jumps = [i for i, row in enumerate(rows) if row[header.index('jumped')] == '1']
        return cls(tau, np.array(inputs).reshape(len(rows), len(u_cols)),
                   np.array(outputs).reshape(len(rows), len(y_cols)), jumps)


class ExperimentPlan(object):
    """
    Input schedule: N samples per flow interval, one (N x m) block per
    interval. The first interval has zero input.
    """
    def __init__(self, tau, samples_per_period, periods):
        self.tau = tau
        self.samples_per_period = samples_per_period
        self.periods = periods

    def __iter__(self):
        return iter((self.tau, self.periods))

    def schedule(self):
        return np.vstack(self.periods)


def design_experiment(n, m, p, tau_M, order=None):
    """
    Picks tau = tau_M / N, N the smallest power of two with 2n <= N and
    m(np + 1) <= N, and builds the zero-input interval followed by two pulse
    intervals. In the second pulse interval the channel order is rotated by
    one (for a single channel the pulse moves to the end) so every channel
    also gets pulsed after a stretch of zero input.
    """
    order = order or n
    tau_M = float(tau_M)
    if not tau_M > 0:
        raise EstimationError("Jump period must be positive")
    block = order * p + 1
    needed = max(2 * order, m * block, 1)
    max_doublings = get_config('estimation.max_doublings')
    N = 1
    while N < needed:
        N *= 2
    if N > 2 ** max_doublings:
        raise EstimationError("Experiment needs {} samples per interval, more than {}"
                              .format(needed, 2 ** max_doublings))
    tau = tau_M / N
    if tau < get_config('estimation.min_tau'):
        raise EstimationError("Infeasible experiment: sampling period {:.3g} below the floor"
                              .format(tau))
    amplitude = get_config('estimation.pulse_amplitude')
    zero = np.zeros((N, m))
    first = np.zeros((N, m))
    second = np.zeros((N, m))
    for slot in range(m):
        first[slot * block, slot] = amplitude
    if m == 1:
        second[N - block, 0] = amplitude
    else:
        for slot, channel in enumerate(list(range(1, m)) + [0]):
            second[slot * block, channel] = amplitude
    log.debug("Experiment: tau={:.6g}, {} samples per interval".format(tau, N))
    return ExperimentPlan(tau, N, [zero, first, second])


def _zero_input_windows(log_, order):
    """
    Start indices i whose window y_i .. y_{i+2n-1} lies in one flow interval
    with u_i .. u_{i+2n-2} all zero.
    """
    quiet = np.all(log_.inputs == 0, axis=1)
    starts = []
    for start, stop in log_.intervals():
        for i in range(start, stop - 2 * order + 1):
            if np.all(quiet[i:i + 2 * order - 1]):
                starts.append(i)
    return starts


def estimate_char_poly(log_, n, least_squares=None):
    """
    Coefficients a of the characteristic polynomial of the sampled flow map:
    on a zero-input window the outputs obey y_{i+n} = -sum_j a_j y_{i+j}, so
    a = -pinv(H) [y_n; ...; y_{2n-1}] with H the stacked windows.
    """
    if least_squares is None:
        least_squares = get_config('estimation.least_squares')
    starts = _zero_input_windows(log_, n)
    if not starts:
        raise EstimationError("No zero-input window of {} samples inside a flow interval"
                              .format(2 * n))
    if not least_squares:
        starts = starts[:1]
    Y = log_.outputs
    rows = set()
    for start in starts:
        rows.update(range(start, start + n))
    rows = sorted(rows)
    H = np.vstack([Y[i:i + n].T for i in rows])
    rhs = np.concatenate([Y[i + n] for i in rows])
    if numerics.rank(H, get_config('estimation.rank_tol')) < n:
        raise EstimationError("Window matrix is rank deficient for order {}; "
                              "initial state not exciting enough".format(n))
    return -numerics.pinv(H) @ rhs


class ObservableForm(object):
    """
    Observable canonical realization: A_O = I_p (x) companion(a),
    C_O = I_p (x) [1 0 ... 0], B_O stacking the first n Markov parameters of
    every output channel.
    """
    def __init__(self, a, B_O, p):
        self.a = np.asarray(a, dtype=float).ravel()
        self.p = p
        self.B_O = np.asarray(B_O, dtype=float)

    @property
    def order(self):
        return self.a.size

    @property
    def A_O(self):
        return numerics.kron(np.eye(self.p), numerics.companion(self.a))

    @property
    def C_O(self):
        first = np.zeros((1, self.order))
        first[0, 0] = 1.0
        return numerics.kron(np.eye(self.p), first)

    def realization(self):
        return self.A_O, self.B_O, self.C_O


def estimate_B_O(log_, obs):
    """
    Recovers B_O from the relation
        y_{i+n} + sum_j a_j y_{i+j} = sum_k beta_k u_{i+k}
    over every window inside a flow interval, then converts beta to Markov
    parameters h_1 .. h_n.
    """
    n, a = obs.order, obs.a
    m, p = log_.m, log_.p
    residuals, regressors = [], []
    for start, stop in log_.intervals():
        for i in range(start, stop - n):
            window = log_.outputs[i:i + n]
            residuals.append(log_.outputs[i + n] + a @ window)
            regressors.append(log_.inputs[i:i + n].ravel())
    if not regressors:
        raise EstimationError("Log has no window of {} samples".format(n + 1))
    R = np.array(residuals).T
    Phi = np.array(regressors).T
    if numerics.rank(Phi, get_config('estimation.rank_tol')) < n * m:
        raise EstimationError("Inconsistent log: pulses do not excite every "
                              "input lag (regression rank below {})".format(n * m))
    beta = R @ numerics.pinv(Phi)
    blocks = [beta[:, k * m:(k + 1) * m] for k in range(n)]
    markov = []
    for k in range(1, n + 1):
        h = blocks[n - k].copy()
        for l in range(1, k):
            h -= a[n - l] * markov[k - l - 1]
        markov.append(h)
    B_O = np.zeros((n * p, m))
    for channel in range(p):
        for k, h in enumerate(markov):
            B_O[channel * n + k] = h[channel]
    return B_O


def markov_parameters(model, count):
    """
    h_1 .. h_count, h_k = C A^(k-1) B, of an ObservableForm or an (A, B, C)
    triple.
    """
    A, B, C = model.realization() if hasattr(model, 'realization') else model
    A, B, C = numerics.matrix(A), numerics.matrix(B), numerics.matrix(C)
    markov = []
    column = B
    for _ in range(count):
        markov.append(C @ column)
        column = A @ column
    return markov


def hankel_order(s, tol=None):
    """
    Number of Hankel singular values above tol * s[0].
    """
    if tol is None:
        tol = get_config('estimation.hankel_tol')
    s = np.asarray(s, dtype=float)
    if not s.size or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def balanced_realization(markov, state_dim=None, tol=None):
    """
    Balanced realization from 2r Markov parameters: with the block Hankel
    matrices H0 = [h_(i+j+1)] and H1 = [h_(i+j+2)], i, j < r, and the
    truncated SVD H0 = U S V',
        A = S^-1/2 U' H1 V S^-1/2, B = S^1/2 V' (first m columns),
        C = U S^1/2 (first p rows).
    The order is state_dim when given, else the numerical rank of H0.
    """
    if tol is None:
        tol = get_config('estimation.hankel_tol')
    r = len(markov) // 2
    if r < 1:
        raise EstimationError("Balanced realization needs at least two Markov parameters")
    p, m = markov[0].shape
    H0 = np.block([[markov[i + j] for j in range(r)] for i in range(r)])
    H1 = np.block([[markov[i + j + 1] for j in range(r)] for i in range(r)])
    U, s, Vh = scipy.linalg.svd(H0)
    rank = hankel_order(s, tol)
    order = rank if state_dim is None else state_dim
    if order < 1 or order > rank:
        raise EstimationError("Hankel matrix has numerical rank {}, realization of "
                              "dimension {} requested".format(rank, order))
    if state_dim is not None and rank != state_dim:
        log.warning("Hankel matrix has numerical rank {}, truncated to {}"
                    .format(rank, state_dim))
    log.debug("Hankel singular values: {}".format(
        ', '.join('{:.3g}'.format(value) for value in s)))
    root = np.sqrt(s[:order])
    U, Vh = U[:, :order], Vh[:order]
    A = (U.T @ H1 @ Vh.T) / np.outer(root, root)
    B = (root[:, None] * Vh)[:, :m]
    C = (U * root)[:p]
    return A, B, C


def minimal_realization(A, B, C, tol=None):
    """
    Keeps the part reachable from B, then the part of it observed by C.
    """
    if tol is None:
        tol = get_config('estimation.reduction_tol')
    A, B, C = numerics.matrix(A), numerics.matrix(B), numerics.matrix(C)
    reach = numerics.controllable_subspace(A, B, tol)
    A1, B1, C1 = reach.T @ A @ reach, reach.T @ B, C @ reach
    observed = numerics.controllable_subspace(A1.T, C1.T, tol)
    return observed.T @ A1 @ observed, observed.T @ B1, C1 @ observed


def to_continuous(model, tau):
    """
    Inverts the sampling relations A_D = e^{A tau},
    B_D = int_0^tau e^{A s} ds B. `model` is an ObservableForm or an
    (A_D, B_D, C) triple.
    """
    A_D, B_D, C = model.realization() if hasattr(model, 'realization') else model
    try:
        A_hat = numerics.logm(A_D) / tau
        Psi = numerics.integral_expm(A_hat, tau)
        B_hat = scipy.linalg.solve(Psi, B_D)
    except numerics.NumericsError as e:
        raise EstimationError("Cannot lift the sampled model: {}".format(e))
    except scipy.linalg.LinAlgError as e:
        raise EstimationError("Singular hold integral, decrease tau: {}".format(e))
    return A_hat, B_hat, np.array(C, dtype=float)


def extract_flow_data(A_hat, B_hat, C_hat, tol=None):
    """
    Decomposes the identified realization with the natural friend and
    returns (A11, A22, G, m1). Only the spectra of A11 and A22 are
    coordinate independent.
    """
    if tol is None:
        tol = get_config('estimation.geometry_tol')
    plant = geometry.HybridPlant(A_hat, B_hat, C_hat)
    try:
        dec = geometry.decompose(plant, shift_targets=(), tol=tol)
    except geometry.GeometryError as e:
        raise EstimationError("Identified realization is inconsistent: {}".format(e))
    return dec.A11.copy(), dec.A22.copy(), dec.G, dec.m1


def check_observable(A, C, tol=None):
    if tol is None:
        tol = get_config('geometry.rank_tol')
    observed = numerics.controllable_subspace(A.T, C.T, tol).shape[1]
    if observed < A.shape[0]:
        raise EstimationError("Pair (A, C) is not observable ({} of {} modes)"
                              .format(observed, A.shape[0]))


class FlowEstimate(object):
    def __init__(self, order, a, obs, A_hat, B_hat, C_hat, A11, A22, G, m1):
        self.order = order
        self.a = a
        self.obs = obs
        self.A_hat = A_hat
        self.B_hat = B_hat
        self.C_hat = C_hat
        self.A11 = A11
        self.A22 = A22
        self.G = G
        self.m1 = m1


REDUCTIONS = ('balanced', 'kalman', 'none')


def reduce_realization(obs, reduction=None, state_dim=None):
    """
    Discrete realization of the identified input/output map: the balanced
    Hankel realization, the Kalman reduction of the observable form, or
    the observable form itself.
    """
    if reduction is None:
        reduction = get_config('estimation.reduction')
    if reduction == 'balanced':
        return balanced_realization(markov_parameters(obs, 2 * obs.order), state_dim)
    if reduction == 'kalman':
        return minimal_realization(*obs.realization())
    if reduction == 'none':
        return obs.realization()
    raise EstimationError("Unknown reduction {!r}, expected one of {}"
                          .format(reduction, ', '.join(REDUCTIONS)))


def identify(log_, order_max, order_min=1, least_squares=None, reduction=None,
             state_dim=None):
    """
    Runs the identification chain, lowering the model order while the
    window matrix is rank deficient. The exosystem keeps acting during the
    experiment, so order_max usually counts its modes too; the input cannot
    reach them, so they vanish from the Markov parameters and the reduced
    realization drops them. When state_dim is given the realization must
    have exactly that dimension.
    """
    for order in range(order_max, order_min - 1, -1):
        try:
            a = estimate_char_poly(log_, order, least_squares)
        except EstimationError as e:
            log.info("Order {} rejected: {}".format(order, e))
            continue
        obs = ObservableForm(a, np.zeros((order * log_.p, log_.m)), log_.p)
        obs.B_O = estimate_B_O(log_, obs)
        realization = reduce_realization(obs, reduction, state_dim)
        if state_dim is not None and realization[0].shape[0] != state_dim:
            raise EstimationError("Identified realization has dimension {}, plant has n={}"
                                  .format(realization[0].shape[0], state_dim))
        A_hat, B_hat, C_hat = to_continuous(realization, log_.tau)
        A11, A22, G, m1 = extract_flow_data(A_hat, B_hat, C_hat)
        log.info("Identified order {} (realization of dimension {}), m1={}"
                 .format(order, A_hat.shape[0], m1))
        return FlowEstimate(order, a, obs, A_hat, B_hat, C_hat, A11, A22, G, m1)
    raise EstimationError("No model order between {} and {} fits the log"
                          .format(order_min, order_max))
