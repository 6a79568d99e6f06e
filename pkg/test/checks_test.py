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

import itertools
import math

import numpy as np
from mock import Mock, patch

from test.common import AbstractTest, ROTATION
from regpilot import checks, geometry, numerics
from regpilot.checks import ChecksFailed, CheckReport, ExosystemSpec, Witness
from regpilot.geometry import HybridPlant


class ExosystemTest(AbstractTest):
    def test_dimensions(self):
        exo = self.example_exo()
        self.assertEqual(2, exo.q)
        self.assertEqual(6.5, exo.tau_M)

    def test_J_tilde(self):
        exo = ExosystemSpec(np.zeros((1, 1)), [[0.5]], 2.0)
        self.assertMatrixAlmostEqual([[0.5]], exo.J_tilde)

    def test_non_positive_period(self):
        with self.assertRaises(ValueError):
            ExosystemSpec(ROTATION, ROTATION, 0.0)

    def test_jump_shape(self):
        with self.assertRaises(numerics.NumericsError):
            ExosystemSpec(ROTATION, [[1.0]], 1.0)


class MonodromyTest(AbstractTest):
    def test_scalar(self):
        M, spectrum, ges = checks.monodromy([[2.0]], [[-1.0]], 1.0)
        self.assertAlmostEqual(2.0 / math.e, M[0, 0])
        self.assertTrue(ges)

    def test_jumps_destabilize(self):
        _, spectrum, ges = checks.monodromy([[4.0]], [[-1.0]], 1.0)
        self.assertFalse(ges)
        self.assertSpectrumAlmostEqual([4.0 / math.e], spectrum)

    def test_rotation_is_marginal(self):
        _, spectrum, ges = checks.monodromy(np.eye(2), ROTATION, 6.5)
        self.assertFalse(ges)
        self.assertMatrixAlmostEqual(np.ones(2), np.abs(spectrum), 1e-12)


class Assumption1Test(AbstractTest):
    def test_example(self):
        report = checks.check_assumption1(self.example_plant(), self.example_exo())
        self.assertTrue(report.passed, report.failures())
        self.assertGreater(report.margin, 0.0)

    def test_square_plant(self):
        plant = HybridPlant(np.eye(2), [[1.0], [0.0]], [[1.0, 0.0]])
        report = checks.check_assumption1(plant, self.example_exo())
        self.assertEqual(['over-actuation m > p'],
                         [witness.label for witness in report.failures()])

    def test_rank_deficient_input(self):
        plant = HybridPlant(np.eye(3), [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
                            [[0.0, 0.0, 1.0]])
        report = checks.check_assumption1(plant, self.example_exo())
        self.assertEqual(['rank B = m'], [witness.label for witness in report.failures()])

    def test_jordan_block_jump(self):
        exo = ExosystemSpec(np.zeros((2, 2)), [[1.0, 1.0], [0.0, 1.0]], 1.0)
        report = checks.check_assumption1(self.example_plant(), exo)
        self.assertIn('J~ semi-simple', [witness.label for witness in report.failures()])

    def test_contracting_jump(self):
        exo = ExosystemSpec(np.zeros((2, 2)), 0.5 * np.eye(2), 1.0)
        report = checks.check_assumption1(self.example_plant(), exo)
        failed = [witness for witness in report.failures()
                  if witness.label == 'J~ eigenvalue outside the unit disk']
        self.assertEqual(2, len(failed))


class PBHTest(AbstractTest):
    def test_uncontrollable_unstable(self):
        report = checks.stabilizability_report(np.eye(2), np.diag([1.0, -1.0]),
                                               [[0.0], [1.0]], 1.0)
        self.assertFalse(report.passed)
        self.assertEqual(1, len(report.witnesses))
        self.assertSpectrumAlmostEqual([math.e], [report.witnesses[0].point], 1e-9)

    def test_controllable(self):
        report = checks.stabilizability_report(np.eye(2), np.diag([1.0, -1.0]),
                                               [[1.0], [0.0]], 1.0)
        self.assertTrue(report.passed)

    def test_jump_kills_unstable_mode(self):
        report = checks.stabilizability_report(np.diag([0.0, 1.0]), np.diag([1.0, -1.0]),
                                               [[0.0], [1.0]], 1.0)
        self.assertTrue(report.passed)
        self.assertEqual([], report.witnesses)

    def test_undetectable(self):
        report = checks.detectability_report(np.eye(2), np.diag([1.0, -1.0]),
                                             [[0.0, 1.0]], 1.0)
        self.assertFalse(report.passed)

    def test_nested_lists(self):
        report = checks.stabilizability_report([[1.0, 0.0], [0.0, 1.0]],
                                               [[1.0, 0.0], [0.0, -1.0]], [[0.0], [1.0]], 1.0)
        self.assertFalse(report.passed)
        report = checks.detectability_report([[1.0, 0.0], [0.0, 1.0]],
                                             [[1.0, 0.0], [0.0, -1.0]], [[1.0, 0.0]], 1.0)
        self.assertTrue(report.passed)

    def test_detectable(self):
        report = checks.detectability_report(np.eye(2), np.diag([1.0, -1.0]),
                                             [[1.0, 0.0]], 1.0)
        self.assertTrue(report.passed)
        self.assertEqual('hybrid_detectability', report.name)


class NonresonanceTest(AbstractTest):
    def setUp(self):
        super(NonresonanceTest, self).setUp()
        self.dec = geometry.decompose(self.example_plant())
        self.exo = self.example_exo()

    def test_flow_example(self):
        report = checks.check_nonresonance_flow(self.dec, self.exo)
        self.assertTrue(report.passed)
        self.assertEqual(2, len(report.witnesses))

    def test_flow_brute_force_rank(self):
        report = checks.check_nonresonance_flow(self.dec, self.exo)
        for witness in report.witnesses:
            s = witness.point
            pencil = np.block([
                [self.dec.A33 - s * np.eye(self.dec.n3), self.dec.B32],
                [self.dec.C3, np.zeros((self.dec.p, self.dec.B32.shape[1]))],
            ])
            self.assertEqual(np.linalg.matrix_rank(pencil), witness.achieved)

    def test_flow_blocked_input(self):
        dec = Mock(n3=1, p=1, A33=np.zeros((1, 1)), B32=np.zeros((1, 1)),
                   C3=np.ones((1, 1)))
        report = checks.check_nonresonance_flow(dec, self.exo)
        self.assertFalse(report.passed)
        self.assertEqual([1, 1], [witness.achieved for witness in report.witnesses])

    def test_jump_example(self):
        report = checks.check_nonresonance_jump(self.dec, self.exo, 'printed')
        self.assertTrue(report.passed)
        self.assertIsNone(report.note)

    def test_jump_third_variant(self):
        report = checks.check_nonresonance_jump(self.dec, self.exo, 'third')
        self.assertEqual(2, len(report.witnesses))
        self.assertTrue(all(witness.required == 3 for witness in report.witnesses))

    def test_jump_printed_falls_back(self):
        plant = HybridPlant(self.example_plant().A, self.example_plant().B,
                            np.zeros((1, 3)))
        dec = geometry.decompose(plant)
        self.assertNotEqual(dec.rho, dec.n3)
        report = checks.check_nonresonance_jump(dec, self.exo, 'printed')
        self.assertIn('third-column', report.note)

    def test_jump_unknown_variant(self):
        with self.assertRaises(ValueError):
            checks.check_nonresonance_jump(self.dec, self.exo, 'fourth')


class RunChecksTest(AbstractTest):
    def test_example_passes(self):
        plant = self.example_plant()
        reports = checks.run_checks(plant, self.example_exo(), geometry.decompose(plant))
        self.assertEqual(['assumption1', 'hybrid_stabilizability', 'hybrid_detectability',
                          'nonresonance_flow', 'nonresonance_jump'],
                         [report.name for report in reports])
        for report in reports:
            self.assertTrue(report.passed, report)

    def test_checks_failed(self):
        good = CheckReport('good', [Witness(None, 1, 1)])
        bad = CheckReport('bad', [Witness(0.5, 0, 1)])
        error = ChecksFailed([good, bad])
        self.assertEqual([bad], error.reports)
        self.assertEqual("Failed checks: bad", str(error))

    def test_witness(self):
        self.assertTrue(Witness(None, 3, 2).satisfied)
        self.assertFalse(Witness(1j, 1, 2, 'label').satisfied)


def brute_force_full_rank(pencil, tol=1e-8):
    """
    Full row rank iff some square minor is nonzero, columns of non-negligible
    norm scaled to unit length first.
    """
    pencil = np.array(pencil, dtype=complex)
    norms = np.linalg.norm(pencil, axis=0)
    scaled = norms > 1e-6
    pencil[:, scaled] /= norms[scaled]
    rows = pencil.shape[0]
    return any(abs(np.linalg.det(pencil[:, list(columns)])) > tol
               for columns in itertools.combinations(range(pencil.shape[1]), rows))


def krylov(A, B):
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


class PBHBruteForceTest(AbstractTest):
    """
    Random instances, every other one with an unstable mode the input (or
    the output) cannot touch.
    """
    def random_instance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        E = rng.standard_normal((n, n))
        engineered = seed % 2 == 1
        if engineered:
            A[-1, :] = 0.0
            A[:, -1] = 0.0
            A[-1, -1] = 0.5
            B[-1, :] = 0.0
            E[-1, :] = 0.0
            E[:, -1] = 0.0
            E[-1, -1] = 1.0
        return A, B, E, engineered

    def assertMatchesBruteForce(self, report, mono, span, side):
        n = mono.shape[0]
        for witness in report.witnesses:
            shifted = mono - witness.point * np.eye(n)
            if side == 'right':
                full = brute_force_full_rank(np.hstack([shifted, span]))
            else:
                full = brute_force_full_rank(np.vstack([shifted, span]).T)
            self.assertEqual(full, witness.satisfied, witness)

    def test_stabilizability(self):
        for seed in range(50):
            A, B, E, engineered = self.random_instance(seed)
            report = checks.stabilizability_report(E, A, B, 1.0)
            mono = E @ numerics.expm(A, 1.0)
            self.assertMatchesBruteForce(report, mono, krylov(A, B), 'right')
            if engineered:
                self.assertFalse(report.passed)

    def test_detectability(self):
        for seed in range(50):
            A, B, E, engineered = self.random_instance(seed)
            A, C, E = A.T, B.T, E.T
            report = checks.detectability_report(E, A, C, 1.0)
            mono = E @ numerics.expm(A, 1.0)
            self.assertMatchesBruteForce(report, mono, krylov(A.T, C.T).T, 'bottom')
            if engineered:
                self.assertFalse(report.passed)


class CheckPlantTest(AbstractTest):
    def test_example(self):
        reports, dec = checks.check_plant(self.example_plant(), self.example_exo())
        self.assertEqual(5, len(reports))
        self.assertEqual(1, dec.m1)

    def test_rank_deficient_input_skips_decomposition(self):
        plant = HybridPlant(self.example_plant().A, [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
                            self.example_plant().C)
        with patch('regpilot.checks.geometry.decompose') as decompose:
            reports, dec = checks.check_plant(plant, self.example_exo())
        self.assertFalse(decompose.called)
        self.assertIsNone(dec)
        self.assertEqual(['assumption1'], [report.name for report in reports])
        self.assertEqual(['rank B = m'], [witness.label for witness in reports[0].failures()])

    def test_survives_small_perturbations(self):
        scn = self.example_scenario()
        plant, exo = scn.nominal, scn.exo
        reports, dec = checks.check_plant(plant, exo, ph_variant='third')
        margins = [report.margin for report in reports if math.isfinite(report.margin)]
        epsilon = min(min(margins) / 100.0, 1e-3)
        n, m, p = dec.n, dec.m, dec.p
        r, v = dec.rho, dec.nu
        # perturbations keeping the zero pattern of the decomposition
        masks = {'A': np.ones((n, n)), 'B': np.ones((n, m)), 'C': np.ones((p, n)),
                 'E': np.ones((n, n))}
        masks['A'][r:, :r] = 0.0
        masks['A'][v:, r:v] = 0.0
        masks['B'][r:, :dec.m1] = 0.0
        masks['C'][:, :v] = 0.0
        T, G = dec.T, dec.G
        rng = np.random.default_rng(0)
        for _ in range(100):
            delta = {}
            for name, mask in masks.items():
                D = rng.standard_normal(mask.shape) * mask
                delta[name] = epsilon * D / np.linalg.norm(D)
            B = T @ (dec.Bbar + delta['B']) @ G.T
            A = T @ (dec.Abar_F + delta['A']) @ T.T - B @ dec.F_star_V
            C = (dec.Cbar + delta['C']) @ T.T
            E = T @ (dec.Ebar + delta['E']) @ T.T
            perturbed = HybridPlant(A, B, C, plant.P, plant.Q, E)
            reports, perturbed_dec = checks.check_plant(perturbed, exo, ph_variant='third')
            self.assertEqual((r, v, dec.m1),
                             (perturbed_dec.rho, perturbed_dec.nu, perturbed_dec.m1))
            for report in reports:
                self.assertTrue(report.passed, report)
