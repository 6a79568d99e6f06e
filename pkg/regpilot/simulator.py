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
Exact simulation of the hybrid closed loop. Flows are propagated with
matrix exponentials (ZOH pairs when an input is held), jumps by the reset
matrices, one jump every tau_M.
"""

import csv
import hashlib
import logging
import math
from collections import namedtuple

import numpy as np

from regpilot import (
    numerics, geometry, checks, estimator, internal_model, stabilizer, render,
)
from regpilot.config import get_config
from regpilot.session import RegpilotSession
from regpilot.util import Stopwatch

log = logging.getLogger('regpilot.simulator')

ESTIMATION_PHASE = 'estimation'
REGULATION_PHASE = 'regulation'


class HybridTime(namedtuple('HybridTime', ['t', 'k'])):
    """
    Point (t, k) of the hybrid time domain, k jumps having occurred by
    time t. Tuple ordering is the lexicographic order of the domain.
    """
    __slots__ = ()

    def __new__(cls, t, k):
        if k < 0:
            raise ValueError("Jump count must be non-negative")
        return super().__new__(cls, float(t), int(k))


class HybridTrajectory(object):
    """
    Append-only record of a run. Every jump instant appears twice: as the
    last row of the period (pre-jump) and as the first row of the next one
    (jumped = 1).
    """
    def __init__(self, n, q, m, p):
        self.n, self.q, self.m, self.p = n, q, m, p
        self.times = []
        self.states = []
        self.exo_states = []
        self.outputs = []
        self.inputs = []
        self.jumped = []
        self.phases = []
        self.boundary = None

    def __len__(self):
        return len(self.times)

    def record(self, time, x, w, e, u, jumped=False, phase=REGULATION_PHASE):
        if self.times and time < self.times[-1]:
            raise ValueError("Trajectory time must be monotone, got {} after {}"
                             .format(time, self.times[-1]))
        self.times.append(time)
        self.states.append(np.array(x, dtype=float))
        self.exo_states.append(np.array(w, dtype=float))
        self.outputs.append(np.array(e, dtype=float))
        self.inputs.append(np.array(u, dtype=float))
        self.jumped.append(bool(jumped))
        self.phases.append(phase)

    def mark_boundary(self):
        """
        Marks the end of the recorded rows as the estimation phase boundary.
        """
        self.boundary = self.times[-1] if self.times else HybridTime(0.0, 0)

    @property
    def periods(self):
        return self.times[-1].k + 1 if self.times else 0

    def output_array(self):
        return np.array(self.outputs).reshape(len(self), self.p)

    def input_array(self):
        return np.array(self.inputs).reshape(len(self), self.m)

    def time_array(self):
        return np.array([time.t for time in self.times])

    def max_error(self, k=None):
        """
        Largest |e| over the rows of period k, the last period by default.
        """
        if not self.times:
            return 0.0
        if k is None:
            k = self.times[-1].k
        rows = [e for time, e in zip(self.times, self.outputs) if time.k == k]
        if not rows:
            raise ValueError("Period {} not in trajectory".format(k))
        return float(np.max(np.abs(np.array(rows)))) if self.p else 0.0

    def to_csv(self, path):
        with open(path, 'w', newline='') as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(['i', 't', 'k'] +
                            ['u_{}'.format(j + 1) for j in range(self.m)] +
                            ['y_{}'.format(j + 1) for j in range(self.p)] +
                            ['jumped'] +
                            ['x_{}'.format(j + 1) for j in range(self.n)] +
                            ['w_{}'.format(j + 1) for j in range(self.q)] +
                            ['phase'])
            for i, time in enumerate(self.times):
                writer.writerow([i, repr(time.t), time.k] +
                                [repr(float(v)) for v in self.inputs[i]] +
                                [repr(float(v)) for v in self.outputs[i]] +
                                [int(self.jumped[i])] +
                                [repr(float(v)) for v in self.states[i]] +
                                [repr(float(v)) for v in self.exo_states[i]] +
                                [self.phases[i]])


def _matrix_key(*arrays, step=None):
    digest = hashlib.sha1()
    for array in arrays:
        array = np.ascontiguousarray(array, dtype=float)
        digest.update(repr(array.shape).encode())
        digest.update(array.tobytes())
    digest.update(repr(step).encode())
    return digest.hexdigest()


class Propagator(object):
    """
    Exact flow maps cached in the session's `propagators` region.
    """
    def __init__(self, session=None):
        self.session = session or RegpilotSession()

    @property
    def cache(self):
        return self.session.cache('propagators')

    def flow(self, A, dt):
        return self.cache.get_or_create(
            'flow-' + _matrix_key(A, step=dt),
            lambda: numerics.expm(A, dt),
        )

    def hold(self, A, B, dt):
        return self.cache.get_or_create(
            'hold-' + _matrix_key(A, B, step=dt),
            lambda: numerics.zoh(A, B, dt),
        )


def step_flow(A_cl, state, dt, propagator=None):
    if not dt > 0:
        raise ValueError("Flow step must be positive, got {}".format(dt))
    M = propagator.flow(A_cl, dt) if propagator else numerics.expm(A_cl, dt)
    return M @ state


def step_jump(E_cl, state, time=None):
    """
    Applies the reset; with a HybridTime also returns the post-jump time.
    """
    state = np.asarray(E_cl) @ state
    if time is None:
        return state
    return state, HybridTime(time.t, time.k + 1)


def period_map(E_a, A_a, tau_M, steps=1, propagator=None):
    """
    One-period map of the autonomous hybrid system, built by stepping the
    identity through `steps` flow steps and one jump.
    """
    A_a = numerics.square(np.atleast_2d(np.asarray(A_a, dtype=float)), 'A_a')
    state = np.eye(A_a.shape[0])
    dt = tau_M / steps
    for _ in range(steps):
        state = step_flow(A_a, state, dt, propagator)
    return step_jump(E_a, state)


def _substeps(N, points_per_period=None):
    if points_per_period is None:
        points_per_period = get_config('simulation.points_per_period')
    return max(1, int(math.ceil(points_per_period / N)))


def open_loop_matrices(plant, exo):
    n, q = plant.n, exo.q
    A_ol = np.block([[plant.A, plant.P], [np.zeros((q, n)), exo.S]])
    B_ol = np.vstack([plant.B, np.zeros((q, plant.m))])
    E_ol = numerics.blkdiag(plant.E, exo.J)
    return A_ol, B_ol, E_ol


def simulate_experiment(plant, exo, plan, x0, w0, trajectory=None, propagator=None,
                        points_per_period=None, first_period=0):
    """
    Applies the experiment schedule open loop and returns the sample log
    together with the plant and exosystem states after the last jump.
    """
    propagator = propagator or Propagator()
    n, q = plant.n, exo.q
    N = plan.samples_per_period
    substeps = _substeps(N, points_per_period)
    A_ol, B_ol, E_ol = open_loop_matrices(plant, exo)
    A_d, B_d = propagator.hold(A_ol, B_ol, plan.tau / substeps)
    schedule = plan.schedule()
    state = np.concatenate([np.asarray(x0, dtype=float), np.asarray(w0, dtype=float)])
    outputs = []
    jumps = []
    for period in range(len(plan.periods)):
        k = first_period + period
        if period:
            jumps.append(period * N)
        for h in range(N):
            u = schedule[period * N + h]
            for j in range(substeps):
                x, w = state[:n], state[n:]
                e = plant.C @ x + plant.Q @ w
                if j == 0:
                    outputs.append(e)
                if trajectory is not None:
                    t = k * exo.tau_M + (h * substeps + j) * exo.tau_M / (N * substeps)
                    trajectory.record(HybridTime(t, k), x, w, e, u,
                                      jumped=(k > 0 and h == 0 and j == 0),
                                      phase=ESTIMATION_PHASE)
                state = A_d @ state + B_d @ u
        if trajectory is not None:
            x, w = state[:n], state[n:]
            trajectory.record(HybridTime((k + 1) * exo.tau_M, k), x, w,
                              plant.C @ x + plant.Q @ w, schedule[(period + 1) * N - 1],
                              phase=ESTIMATION_PHASE)
        state = E_ol @ state
    sample_log = estimator.SampleLog(plan.tau, schedule, np.array(outputs), jumps)
    return sample_log, state[:n], state[n:n + q]


def closed_loop_matrices(plant, exo, realization):
    """
    Closed loop in the state (x, w, x_c), held input (u_x, u_F, u_J):
    x' = Ax + Pw + B(C_c x_c + G u_x), x_c' = A_c x_c + (u_F, u_J).
    """
    n, q, n_c, m = plant.n, exo.q, realization.n_c, plant.m
    total = n + q + n_c
    x, w, c = slice(0, n), slice(n, n + q), slice(n + q, total)
    A_cl = np.zeros((total, total))
    A_cl[x, x] = plant.A
    A_cl[x, w] = plant.P
    A_cl[x, c] = plant.B @ realization.C_c
    A_cl[w, w] = exo.S
    A_cl[c, c] = realization.A_c
    B_cl = np.zeros((total, m + n_c))
    B_cl[x, :m] = plant.B @ realization.D_c
    B_cl[c, m:] = realization.B_c
    E_cl = numerics.blkdiag(plant.E, exo.J, realization.E_c)
    return A_cl, B_cl, E_cl


class _ClosedLoop(object):
    def __init__(self, plant, exo, realization, propagator, substeps):
        self.plant = plant
        self.exo = exo
        self.realization = realization
        self.n, self.q = plant.n, exo.q
        self.A_cl, self.B_cl, self.E_cl = closed_loop_matrices(plant, exo, realization)
        self.substeps = substeps
        dt = exo.tau_M / (realization.N * substeps)
        self.A_d, self.B_d = propagator.hold(self.A_cl, self.B_cl, dt)

    def split(self, state):
        n, q = self.n, self.q
        return state[:n], state[n:n + q], state[n + q:]

    def signals(self, state, v):
        x, w, x_c = self.split(state)
        e = self.plant.C @ x + self.plant.Q @ w
        u = self.realization.C_c @ x_c + self.realization.D_c @ v[:self.plant.m]
        return e, u


def simulate_closed_loop(plant, exo, realization, x0, w0, periods, trajectory=None,
                         propagator=None, points_per_period=None, first_period=0,
                         regulator=None):
    """
    Runs the regulated loop for `periods` periods from x0, w0 with the
    continuous regulator states at zero. Returns the stacked (x, w, x_c,
    eta_hat) at every period start, including the final one.
    """
    propagator = propagator or Propagator()
    N = realization.N
    loop = _ClosedLoop(plant, exo, realization, propagator, _substeps(N, points_per_period))
    substeps = loop.substeps
    regulator = regulator or stabilizer.HybridRegulator(realization)
    state = np.concatenate([np.asarray(x0, dtype=float), np.asarray(w0, dtype=float),
                            np.zeros(realization.n_c)])
    starts = [np.concatenate([state, regulator.estimate])]
    for period in range(periods):
        k = first_period + period
        regulator.begin_period()
        v = None
        for h in range(N):
            x, w, x_c = loop.split(state)
            v = regulator.sample(plant.C @ x + plant.Q @ w)
            for j in range(substeps):
                if trajectory is not None:
                    e, u = loop.signals(state, v)
                    t = k * exo.tau_M + (h * substeps + j) * exo.tau_M / (N * substeps)
                    trajectory.record(HybridTime(t, k), loop.split(state)[0],
                                      loop.split(state)[1], e, u,
                                      jumped=(k > 0 and h == 0 and j == 0))
                state = loop.A_d @ state + loop.B_d @ v
        if trajectory is not None:
            e, u = loop.signals(state, v)
            x, w, _ = loop.split(state)
            trajectory.record(HybridTime((k + 1) * exo.tau_M, k), x, w, e, u)
        state = loop.E_cl @ state
        regulator.jump()
        starts.append(np.concatenate([state, regulator.estimate]))
    return np.array(starts)


def closed_loop_period_map(plant, exo, realization, propagator=None, substeps=1):
    """
    One-period map of (x, x_c, eta_hat) with w = 0, obtained by running a
    period on the identity columns.
    """
    propagator = propagator or Propagator()
    loop = _ClosedLoop(plant, exo, realization, propagator, substeps)
    n, q, n_c = plant.n, exo.q, realization.n_c
    n_hat = realization.n_hat
    size = n + n_c + n_hat
    columns = np.eye(size)
    state = np.vstack([columns[:n], np.zeros((q, size)), columns[n:n + n_c]])
    regulator = stabilizer.HybridRegulator(realization)
    regulator.reset(batch=size)
    regulator.estimate = columns[n + n_c:].copy()
    regulator.begin_period()
    for h in range(realization.N):
        x, w, _ = loop.split(state)
        v = regulator.sample(plant.C @ x + plant.Q @ w)
        for _ in range(substeps):
            state = loop.A_d @ state + loop.B_d @ v
    state = loop.E_cl @ state
    regulator.jump()
    return np.vstack([state[:n], state[n + q:], regulator.estimate])


class Diagnostics(object):
    def __init__(self, name=None):
        self.name = name
        self.reports = []
        self.estimate = None
        self.dims = {}
        self.observer_radius = None
        self.feedback_radius = None
        self.monodromy_radius = None
        self.final_error = None
        self.periods = 0
        self.tau = None
        self.tau_s = None
        self.notes = []

    @property
    def passed(self):
        return all(report.passed for report in self.reports)

    def summary(self):
        return {
            'monodromy_radius': self.monodromy_radius,
            'final_error': self.final_error,
            'observer_radius': self.observer_radius,
            'feedback_radius': self.feedback_radius,
        }

    def dump(self):
        return render.render('diagnostics.txt', diagnostics=self)


def _option(scn, section, key):
    return scn.option(section, key, get_config('{}.{}'.format(section, key), None))


def _flow_modes(nominal, sample_log, estimate_flow, n, q, diagnostics, least_squares=None,
                reduction=None):
    """
    (A11, A22, partition) feeding the flow internal model; partition is
    None when the nominal input partition stays in use.
    """
    if not estimate_flow:
        natural = geometry.decompose(nominal, shift_targets=())
        diagnostics.notes.append('flow internal model built from nominal matrices')
        return natural.A11, natural.A22, None
    estimate = estimator.identify(sample_log, n + q, n, least_squares, reduction,
                                  state_dim=n)
    diagnostics.estimate = estimate
    return estimate.A11, estimate.A22, (estimate.G, estimate.m1)


class PipelineRun(object):
    """
    Results of the phases preceding the closed loop: the trajectory of the
    experiment, the sample log, the plant and exosystem states at its end
    and the synthesized regulator.
    """
    def __init__(self, scn, propagator, diagnostics):
        self.scn = scn
        self.propagator = propagator
        self.diagnostics = diagnostics
        self.trajectory = None
        self.sample_log = None
        self.plan = None
        self.x = None
        self.w = None
        self.realization = None
        self.first_period = 0


def run_experiment(scn, propagator, diagnostics, estimation=True):
    """
    Runs the identification experiment on the true plant. Without
    estimation only the plan is designed, its sampling period feeding the
    stabilizer, and the regulated run starts from the initial states.
    """
    nominal, exo = scn.nominal, scn.exo
    n, m, p, q = nominal.n, nominal.m, nominal.p, exo.q
    run = PipelineRun(scn, propagator, diagnostics)
    if estimation:
        estimator.check_observable(nominal.A, nominal.C)
    run.plan = estimator.design_experiment(n, m, p, exo.tau_M, order=n + q)
    diagnostics.tau = run.plan.tau
    run.trajectory = HybridTrajectory(n, q, m, p)
    if not estimation:
        diagnostics.notes.append('identification experiment skipped')
        run.x, run.w = np.array(scn.x0, dtype=float), np.array(scn.w0, dtype=float)
        return run
    run.sample_log, run.x, run.w = simulate_experiment(
        scn.plant, exo, run.plan, scn.x0, scn.w0, run.trajectory, propagator)
    run.trajectory.mark_boundary()
    run.first_period = len(run.plan.periods)
    return run


def design_regulator(scn, session, ph_variant=None, estimation=None, watch=None):
    """
    Checks, experiment, identification and synthesis. Raises ChecksFailed
    when the nominal plant fails a check.
    """
    propagator = Propagator(session)
    nominal, exo = scn.nominal, scn.exo
    n, p, q = nominal.n, nominal.p, exo.q
    if estimation is None:
        estimation = _option(scn, 'estimation', 'enabled')
    diagnostics = Diagnostics(scn.name)

    phase = Stopwatch('checks', watch, start=True)
    reports, dec = checks.check_plant(
        nominal, exo, scn.option('geometry', 'shift_targets'), ph_variant)
    diagnostics.reports = reports
    if not all(report.passed for report in reports):
        raise checks.ChecksFailed(reports)
    phase.stop()

    phase = Stopwatch('experiment', watch, start=True)
    run = run_experiment(scn, propagator, diagnostics, estimation)
    phase.stop()

    phase = Stopwatch('identification', watch, start=True)
    A11, A22, partition = _flow_modes(
        nominal, run.sample_log, estimation, n, q, diagnostics,
        _option(scn, 'estimation', 'least_squares'), _option(scn, 'estimation', 'reduction'))
    if partition is not None and _option(scn, 'estimation', 'partition') == 'estimated':
        G_hat, m1_hat = partition
        if m1_hat != dec.m1:
            raise estimator.EstimationError(
                "Identified partition has m1={}, nominal plant m1={}".format(m1_hat, dec.m1))
        dec = dec.with_partition(G_hat, m1_hat)
    phase.stop()

    phase = Stopwatch('synthesis', watch, start=True)
    fim = internal_model.build_flow_im(A11, A22, exo.S, p)
    jim = internal_model.build_jump_im(exo.S, exo.J, dec.m1, fim.n_F)
    aug = internal_model.augment(dec, fim, jim, exo.tau_M)
    tau_s = _option(scn, 'stabilizer', 'tau_s') or run.plan.tau
    diagnostics.tau_s = tau_s
    run.realization, aug_reports = stabilizer.synthesize(
        aug, tau_s, friend_feedback=_option(scn, 'stabilizer', 'friend_feedback'))
    diagnostics.reports = reports + aug_reports
    diagnostics.dims = run.realization.dims()
    diagnostics.observer_radius = run.realization.observer.spectral_radius
    diagnostics.feedback_radius = run.realization.feedback.spectral_radius
    phase.stop()
    return run


def run_pipeline(scn, session=None, ph_variant=None, estimation=None, periods=None):
    """
    Full run: design phases followed by `periods` regulated periods
    (the scenario horizon by default). Returns (trajectory, regulator
    realization, diagnostics).
    """
    own_session = session is None
    session = session or RegpilotSession()
    if periods is None:
        periods = scn.horizon_periods
    watch = Stopwatch('pipeline', start=True)
    try:
        run = design_regulator(scn, session, ph_variant, estimation, watch)
        diagnostics = run.diagnostics
        diagnostics.periods = periods
        phase = Stopwatch('closed_loop', watch, start=True)
        monodromy = closed_loop_period_map(scn.plant, scn.exo, run.realization,
                                           run.propagator)
        diagnostics.monodromy_radius = numerics.spectral_radius(monodromy)
        if diagnostics.monodromy_radius >= 1.0:
            raise stabilizer.SynthesisError(
                "Closed-loop monodromy radius {:.6g} >= 1 on the true plant"
                .format(diagnostics.monodromy_radius))
        simulate_closed_loop(scn.plant, scn.exo, run.realization, run.x, run.w, periods,
                             run.trajectory, run.propagator, first_period=run.first_period)
        diagnostics.final_error = run.trajectory.max_error()
        phase.stop()
    finally:
        if own_session:
            session.close()
    watch.stop()
    watch.display()
    log.info("Closed-loop monodromy radius {:.4g}, final-period max|e| {:.3g}"
             .format(diagnostics.monodromy_radius, diagnostics.final_error))
    return run.trajectory, run.realization, diagnostics


def export_trajectory(traj, path):
    traj.to_csv(path)
