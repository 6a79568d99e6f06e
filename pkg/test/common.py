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

import os
import json
import shutil
import unittest

import numpy as np
import scipy.linalg

from test import testdir
from regpilot.checks import ExosystemSpec
from regpilot.geometry import HybridPlant
from regpilot.scenario import load_scenario, parse_scenario

workdir = '.workdir'

EXAMPLE_SCENARIO = os.path.join(testdir, '..', 'scenarios', 'hybrid_example.json')

ROTATION = [[0.0, 1.0], [-1.0, 0.0]]


class AbstractTest(unittest.TestCase):

    def __init__(self, *args, **kwargs):
        super(AbstractTest, self).__init__(*args, **kwargs)
        os.chdir(testdir)
        self.oldpwd = os.getcwd()

    def _rm_workdir(self):
        try:
            shutil.rmtree(workdir)
        except OSError:
            pass

    def setUp(self):
        self._rm_workdir()
        os.mkdir(workdir)
        os.chdir(workdir)

    def tearDown(self):
        os.chdir(testdir)
        self._rm_workdir()

    def assertMatrixAlmostEqual(self, expected, actual, tol=1e-9):
        expected = np.asarray(expected)
        actual = np.asarray(actual)
        self.assertEqual(expected.shape, actual.shape)
        if expected.size:
            error = np.max(np.abs(expected - actual))
            self.assertLessEqual(error, tol, "max deviation {:.3g} > {:.3g}\n{}\n{}"
                                 .format(error, tol, expected, actual))

    def assertSpectrumAlmostEqual(self, expected, actual, tol=1e-8):
        expected = sorted(np.asarray(expected, dtype=complex), key=lambda z: (z.real, z.imag))
        actual = list(np.asarray(actual, dtype=complex))
        self.assertEqual(len(expected), len(actual))
        # greedy matching, robust to ordering of nearly equal real parts
        for z in expected:
            distances = [abs(z - w) for w in actual]
            best = int(np.argmin(distances))
            self.assertLessEqual(distances[best], tol, "{} not in {}".format(z, actual))
            actual.pop(best)

    def assertSameSubspace(self, U, V, tol=1e-8):
        U, V = np.asarray(U), np.asarray(V)
        self.assertEqual(U.shape[1], V.shape[1])
        if U.shape[1]:
            angles = scipy.linalg.subspace_angles(U, V)
            self.assertLessEqual(np.max(angles), tol)

    def example_data(self):
        with open(EXAMPLE_SCENARIO) as scenario_file:
            return json.load(scenario_file)

    def example_scenario(self, **overrides):
        if not overrides:
            return load_scenario(EXAMPLE_SCENARIO)
        data = self.example_data()
        data.update(overrides)
        return parse_scenario(data, 'example')

    def example_plant(self):
        return self.example_scenario().nominal

    def example_exo(self):
        return ExosystemSpec(ROTATION, ROTATION, 6.5)

    def write_scenario(self, data, name='scenario.json'):
        with open(name, 'w') as scenario_file:
            json.dump(data, scenario_file)
        return name


def random_plant(rng, n, m, p, q=0, scale=1.0):
    return HybridPlant(
        scale * rng.standard_normal((n, n)),
        rng.standard_normal((n, m)),
        rng.standard_normal((p, n)),
        np.zeros((n, q)), np.zeros((p, q)),
    )


def stable_matrix(rng, n, shift=1.0):
    """
    Random matrix with spectrum in Re s <= -shift.
    """
    M = rng.standard_normal((n, n))
    abscissa = np.max(np.linalg.eigvals(M).real)
    return M - (abscissa + shift) * np.eye(n)
