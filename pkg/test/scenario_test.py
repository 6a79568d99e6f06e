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

import numpy as np

from test.common import AbstractTest, EXAMPLE_SCENARIO
from regpilot import scenario
from regpilot.scenario import ScenarioError, load_scenario, parse_scenario


class LoadScenarioTest(AbstractTest):
    def test_example(self):
        scn = load_scenario(EXAMPLE_SCENARIO)
        self.assertEqual('hybrid-example', scn.name)
        self.assertEqual((3, 2, 1, 2), (scn.nominal.n, scn.nominal.m, scn.nominal.p, scn.exo.q))
        self.assertEqual(6.5, scn.exo.tau_M)
        self.assertEqual(40, scn.horizon_periods)
        self.assertMatrixAlmostEqual([0.559, 0.259, 0.415], scn.x0, 0.0)
        self.assertMatrixAlmostEqual([[-1.0, 0.0]], scn.nominal.Q, 0.0)
        self.assertIs(scn.nominal, scn.plant)
        self.assertEqual({}, scn.options)

    def test_missing_file(self):
        with self.assertRaises(ScenarioError):
            load_scenario('missing.json')

    def test_invalid_json(self):
        with open('broken.json', 'w') as broken:
            broken.write('{"schema_version": 1,')
        with self.assertRaises(ScenarioError):
            load_scenario('broken.json')

    def test_save_and_load(self):
        scn = self.example_scenario(geometry={'shift_targets': [-2.0, [-1.0, 0.5]]})
        scenario.save_scenario(scn, 'saved.json')
        restored = load_scenario('saved.json')
        self.assertEqual(scn.name, restored.name)
        self.assertMatrixAlmostEqual(scn.nominal.E, restored.nominal.E, 0.0)
        self.assertEqual([-2.0, complex(-1.0, 0.5)],
                         restored.option('geometry', 'shift_targets'))


class ParseScenarioTest(AbstractTest):
    def parse(self, **overrides):
        data = self.example_data()
        data.update(overrides)
        return parse_scenario(data, 'test')

    def test_not_an_object(self):
        with self.assertRaises(ScenarioError):
            parse_scenario([], 'test')

    def test_schema_version(self):
        with self.assertRaises(ScenarioError):
            self.parse(schema_version=2)

    def test_missing_jump_map(self):
        data = self.example_data()
        del data['exosystem']['J']
        with self.assertRaises(ScenarioError):
            parse_scenario(data, 'test')

    def test_missing_plant_matrix(self):
        data = self.example_data()
        del data['plant']['E']
        with self.assertRaises(ScenarioError):
            parse_scenario(data, 'test')

    def test_wrong_shape(self):
        data = self.example_data()
        data['plant']['C'] = [[0.0, 1.0]]
        with self.assertRaises(ScenarioError):
            parse_scenario(data, 'test')

    def test_ragged(self):
        data = self.example_data()
        data['plant']['A'] = [[1.0, 0.0, 0.0], [0.0, 1.0], [0.0, 0.0, 1.0]]
        with self.assertRaises(ScenarioError):
            parse_scenario(data, 'test')

    def test_bad_period(self):
        data = self.example_data()
        data['exosystem']['tau_M'] = -1.0
        with self.assertRaises(ScenarioError):
            parse_scenario(data, 'test')

    def test_initial_length(self):
        with self.assertRaises(ScenarioError):
            self.parse(initial={'x0': [1.0, 2.0], 'w0': [1.0, 0.0]})

    def test_horizon(self):
        self.assertEqual(40, self.parse(horizon_periods=40).horizon_periods)
        data = self.example_data()
        del data['horizon_periods']
        self.assertEqual(40, parse_scenario(data).horizon_periods)
        with self.assertRaises(ScenarioError):
            self.parse(horizon_periods=0)

    def test_options(self):
        scn = self.parse(estimation={'enabled': False, 'partition': 'nominal'},
                         stabilizer={'tau_s': 0.8125})
        self.assertFalse(scn.option('estimation', 'enabled'))
        self.assertEqual('nominal', scn.option('estimation', 'partition'))
        self.assertEqual(0.8125, scn.option('stabilizer', 'tau_s'))
        self.assertEqual('fallback', scn.option('stabilizer', 'friend_feedback', 'fallback'))

    def test_unknown_option(self):
        with self.assertRaises(ScenarioError):
            self.parse(stabilizer={'gain': 2.0})

    def test_unknown_partition(self):
        with self.assertRaises(ScenarioError):
            self.parse(estimation={'partition': 'sideways'})

    def test_shift_targets(self):
        scn = self.parse(geometry={'shift_targets': [-1, [-2.0, 1.0], [-2.0, -1.0]]})
        self.assertEqual([complex(-1, 0), complex(-2, 1), complex(-2, -1)],
                         scn.option('geometry', 'shift_targets'))
        with self.assertRaises(ScenarioError):
            self.parse(geometry={'shift_targets': ['fast']})


class PerturbationTest(AbstractTest):
    def test_seeded_is_deterministic(self):
        scn = self.example_scenario()
        first = scn.with_perturbation(1e-3, 7).plant
        second = scn.with_perturbation(1e-3, 7).plant
        for name, M in first.matrices().items():
            self.assertMatrixAlmostEqual(M, second.matrices()[name], 0.0)

    def test_seeds_differ(self):
        scn = self.example_scenario()
        first = scn.with_perturbation(1e-3, 0).plant
        second = scn.with_perturbation(1e-3, 1).plant
        self.assertGreater(np.max(np.abs(first.A - second.A)), 0.0)

    def test_norm(self):
        scn = self.example_scenario().with_perturbation(1e-3, 3)
        self.assertEqual('hybrid-example-seed3', scn.name)
        for name, M in scn.plant.matrices().items():
            delta = M - scn.nominal.matrices()[name]
            self.assertAlmostEqual(1e-3, np.linalg.norm(delta, 2), places=12)

    def test_random_delta_empty(self):
        delta = scenario.random_delta((3, 0), 1.0, np.random.default_rng(0))
        self.assertEqual((3, 0), delta.shape)

    def test_explicit_delta(self):
        scn = self.example_scenario(perturbation={
            'epsilon': 0.01, 'delta': {'C': [[0.0, 0.0, 0.01]]}})
        self.assertMatrixAlmostEqual([[0.0, 0.0, 1.06]], scn.plant.C, 1e-12)
        self.assertMatrixAlmostEqual(scn.nominal.A, scn.plant.A, 0.0)

    def test_explicit_delta_too_large(self):
        with self.assertRaises(ScenarioError):
            self.example_scenario(perturbation={
                'epsilon': 0.001, 'delta': {'C': [[0.0, 0.0, 0.01]]}})

    def test_unknown_matrix(self):
        with self.assertRaises(ScenarioError):
            self.example_scenario(perturbation={'epsilon': 0.1, 'delta': {'S': [[0.0]]}})

    def test_seed_or_delta(self):
        with self.assertRaises(ScenarioError):
            self.example_scenario(perturbation={'epsilon': 0.1})
        with self.assertRaises(ScenarioError):
            self.example_scenario(perturbation={'epsilon': 0.1, 'seed': 1,
                                                'delta': {'A': [[0.0] * 3] * 3}})

    def test_negative_epsilon(self):
        with self.assertRaises(ScenarioError):
            self.example_scenario(perturbation={'epsilon': -0.1, 'seed': 1})
