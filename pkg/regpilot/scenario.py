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
Scenario files: JSON documents holding the nominal plant, the exosystem,
initial conditions and optional per-run settings. A perturbation entry
turns the nominal plant into the true plant used by the simulator.
"""

import json
import logging

import numpy as np

from regpilot import numerics
from regpilot.checks import ExosystemSpec
from regpilot.geometry import HybridPlant
from regpilot.util import RegpilotError

log = logging.getLogger('regpilot.scenario')

SCHEMA_VERSION = 1

PLANT_MATRICES = ('A', 'B', 'P', 'C', 'Q', 'E')

OPTIONS = {
    'estimation': ('enabled', 'least_squares', 'partition'),
    'stabilizer': ('tau_s', 'friend_feedback'),
    'geometry': ('shift_targets',),
}


class ScenarioError(RegpilotError):
    pass


class Scenario(object):
    def __init__(self, name, nominal, exo, x0, w0, horizon_periods,
                 options=None, perturbation=None, plant=None):
        self.name = name
        self.nominal = nominal
        self.exo = exo
        self.x0 = np.asarray(x0, dtype=float)
        self.w0 = np.asarray(w0, dtype=float)
        self.horizon_periods = horizon_periods
        self.options = options or {}
        self.perturbation = perturbation
        self.plant = plant if plant is not None else perturb(nominal, perturbation)
        if self.x0.shape != (nominal.n,):
            raise ScenarioError("x0 has {} entries, plant has n={}"
                                .format(self.x0.size, nominal.n))
        if self.w0.shape != (exo.q,):
            raise ScenarioError("w0 has {} entries, exosystem has q={}"
                                .format(self.w0.size, exo.q))
        if nominal.q != exo.q:
            raise ScenarioError("P and Q act on {} exogenous signals, S is {}x{}"
                                .format(nominal.q, exo.q, exo.q))

    def option(self, section, key, default=None):
        return self.options.get(section, {}).get(key, default)

    def with_perturbation(self, epsilon, seed):
        perturbation = {'epsilon': epsilon, 'seed': seed}
        return Scenario('{}-seed{}'.format(self.name, seed), self.nominal, self.exo,
                        self.x0, self.w0, self.horizon_periods, self.options,
                        perturbation)

    def __repr__(self):
        return '<Scenario {} {!r}>'.format(self.name, self.nominal)


def random_delta(shape, epsilon, rng):
    """
    Gaussian matrix rescaled to spectral norm epsilon.
    """
    delta = rng.standard_normal(shape)
    if delta.size == 0:
        return delta
    norm = np.linalg.norm(delta, 2)
    return delta * (epsilon / norm) if norm > 0 else delta


def perturb(plant, perturbation):
    """
    Plant with every matrix moved by its Delta. Random Deltas are drawn in
    the order A, B, P, C, Q, E from a generator seeded by `seed`.
    """
    if not perturbation:
        return plant
    epsilon = float(perturbation['epsilon'])
    matrices = plant.matrices()
    if 'delta' in perturbation:
        deltas = {}
        for name, value in perturbation['delta'].items():
            if name not in PLANT_MATRICES:
                raise ScenarioError("Unknown perturbed matrix: {}".format(name))
            M = matrices[name]
            delta = _matrix(value, name='delta ' + name, rows=M.shape[0], cols=M.shape[1])
            if delta.size and np.linalg.norm(delta, 2) > epsilon * (1 + 1e-12):
                raise ScenarioError("Perturbation of {} exceeds epsilon={}".format(name, epsilon))
            deltas[name] = delta
    else:
        rng = np.random.default_rng(perturbation['seed'])
        deltas = {name: random_delta(matrices[name].shape, epsilon, rng)
                  for name in PLANT_MATRICES}
    perturbed = {name: matrices[name] + deltas.get(name, 0.0) for name in PLANT_MATRICES}
    return HybridPlant(**perturbed)


def _matrix(value, name, rows=None, cols=None):
    if value is not None and not isinstance(value, list):
        raise ScenarioError("{} must be a nested list".format(name))
    if value and isinstance(value[0], list) and len({len(row) for row in value}) != 1:
        raise ScenarioError("{} is not rectangular".format(name))
    try:
        return numerics.matrix(value, rows=rows, cols=cols, name=name)
    except (numerics.NumericsError, TypeError, ValueError) as e:
        raise ScenarioError(str(e))


def _vector(value, size, name):
    if not isinstance(value, list):
        raise ScenarioError("{} must be a list".format(name))
    try:
        vector = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise ScenarioError("{}: {}".format(name, e))
    if vector.shape != (size,):
        raise ScenarioError("{} must have {} entries".format(name, size))
    return vector


def _section(data, key, source):
    try:
        section = data[key]
    except KeyError:
        raise ScenarioError("{}: missing '{}'".format(source, key))
    if not isinstance(section, dict):
        raise ScenarioError("{}: '{}' must be an object".format(source, key))
    return section


def _shift_targets(value):
    targets = []
    for item in value:
        if isinstance(item, list) and len(item) == 2:
            targets.append(complex(item[0], item[1]))
        elif isinstance(item, (int, float)):
            targets.append(complex(item, 0))
        else:
            raise ScenarioError("Shift targets are numbers or [re, im] pairs")
    return targets


def _options(data, source):
    options = {}
    for section, keys in OPTIONS.items():
        if section not in data:
            continue
        values = _section(data, section, source)
        unknown = set(values) - set(keys)
        if unknown:
            raise ScenarioError("{}: unknown {} settings: {}".format(
                source, section, ', '.join(sorted(unknown))))
        options[section] = dict(values)
    if 'shift_targets' in options.get('geometry', {}):
        options['geometry']['shift_targets'] = \
            _shift_targets(options['geometry']['shift_targets'])
    partition = options.get('estimation', {}).get('partition')
    if partition not in (None, 'estimated', 'nominal'):
        raise ScenarioError("Unknown input partition: {}".format(partition))
    return options


def _perturbation(data, source):
    if 'perturbation' not in data:
        return None
    perturbation = _section(data, 'perturbation', source)
    try:
        epsilon = float(perturbation['epsilon'])
    except (KeyError, TypeError, ValueError):
        raise ScenarioError("{}: perturbation needs a numeric epsilon".format(source))
    if epsilon < 0:
        raise ScenarioError("{}: epsilon must be non-negative".format(source))
    if ('seed' in perturbation) == ('delta' in perturbation):
        raise ScenarioError("{}: perturbation needs either 'seed' or 'delta'".format(source))
    if 'seed' in perturbation and not isinstance(perturbation['seed'], int):
        raise ScenarioError("{}: perturbation seed must be an integer".format(source))
    return dict(perturbation, epsilon=epsilon)


def parse_scenario(data, source='<scenario>'):
    if not isinstance(data, dict):
        raise ScenarioError("{}: scenario must be a JSON object".format(source))
    version = data.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ScenarioError("{}: unsupported schema_version {!r}".format(source, version))
    dims = _section(data, 'dimensions', source)
    try:
        n, m, p, q = (int(dims[key]) for key in 'nmpq')
    except (KeyError, TypeError, ValueError):
        raise ScenarioError("{}: dimensions need integer n, m, p, q".format(source))
    plant_data = _section(data, 'plant', source)
    shapes = {'A': (n, n), 'B': (n, m), 'P': (n, q), 'C': (p, n), 'Q': (p, q), 'E': (n, n)}
    matrices = {}
    for name in PLANT_MATRICES:
        if name not in plant_data:
            raise ScenarioError("{}: plant misses {}".format(source, name))
        matrices[name] = _matrix(plant_data[name], name, *shapes[name])
    exo_data = _section(data, 'exosystem', source)
    initial = _section(data, 'initial', source)
    for key in ('S', 'J', 'tau_M'):
        if key not in exo_data:
            raise ScenarioError("{}: exosystem misses {}".format(source, key))
    try:
        nominal = HybridPlant(**matrices)
        exo = ExosystemSpec(_matrix(exo_data['S'], 'S', q, q),
                            _matrix(exo_data['J'], 'J', q, q),
                            exo_data['tau_M'])
    except (numerics.NumericsError, TypeError, ValueError) as e:
        raise ScenarioError("{}: {}".format(source, e))
    horizon = data.get('horizon_periods', 40)
    if not isinstance(horizon, int) or horizon < 1:
        raise ScenarioError("{}: horizon_periods must be a positive integer".format(source))
    return Scenario(data.get('name', 'scenario'), nominal, exo,
                    _vector(initial.get('x0'), n, 'x0'),
                    _vector(initial.get('w0'), q, 'w0'),
                    horizon, _options(data, source), _perturbation(data, source))


def load_scenario(path):
    try:
        with open(path) as scenario_file:
            data = json.load(scenario_file)
    except (OSError, ValueError) as e:
        raise ScenarioError("Cannot read scenario {}: {}".format(path, e))
    scn = parse_scenario(data, path)
    log.debug("Loaded {!r} from {}".format(scn, path))
    return scn


def _nested(M):
    return [[float(v) for v in row] for row in np.atleast_2d(M)]


def dump_scenario(scn):
    """
    JSON-ready dictionary of the scenario; parse_scenario reads it back.
    """
    nominal = scn.nominal
    data = {
        'schema_version': SCHEMA_VERSION,
        'name': scn.name,
        'dimensions': {'n': nominal.n, 'm': nominal.m, 'p': nominal.p, 'q': scn.exo.q},
        'plant': {name: _nested(M) for name, M in nominal.matrices().items()},
        'exosystem': {'S': _nested(scn.exo.S), 'J': _nested(scn.exo.J),
                      'tau_M': scn.exo.tau_M},
        'initial': {'x0': [float(v) for v in scn.x0], 'w0': [float(v) for v in scn.w0]},
        'horizon_periods': scn.horizon_periods,
    }
    for section, values in scn.options.items():
        values = dict(values)
        if 'shift_targets' in values:
            values['shift_targets'] = [[z.real, z.imag] for z in values['shift_targets']]
        data[section] = values
    if scn.perturbation:
        data['perturbation'] = scn.perturbation
    return data


def save_scenario(scn, path):
    with open(path, 'w') as scenario_file:
        json.dump(dump_scenario(scn), scenario_file, indent=2, sort_keys=True)
