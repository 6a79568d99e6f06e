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

import jinja2
import numpy as np

from test.common import AbstractTest
from regpilot import plot, render
from regpilot.checks import CheckReport, Witness
from regpilot.simulator import HybridTime, HybridTrajectory


class FilterTest(AbstractTest):
    def test_number(self):
        self.assertEqual('0.40625', render.number(0.40625))
        self.assertEqual('-1+2i', render.number(complex(-1, 2)))
        self.assertEqual('0-1i', render.number(complex(0, -1)))
        self.assertEqual('n/a', render.number(None))

    def test_spectrum(self):
        self.assertEqual('{-1, 2}', render.spectrum([-1.0, 2.0]))
        self.assertEqual('{-0.808}', render.spectrum_of([[-0.808]]))

    def test_matrix_rows(self):
        self.assertEqual(['[  1  -2]', '[0.5   3]'], render.matrix_rows([[1, -2], [0.5, 3]]))
        self.assertEqual(['[] (3x0)'], render.matrix_rows(np.zeros((3, 0))))

    def test_fixed(self):
        self.assertEqual('0.000', render.fixed(-1e-9))
        self.assertEqual('-1.50', render.fixed(-1.5, 2))


class TemplateTest(AbstractTest):
    def test_report(self):
        reports = [
            CheckReport('assumption1', [Witness(None, 2, 2, 'over-actuation m > p')], 1.0),
            CheckReport('nonresonance_flow', [Witness(1j, 1, 2)], 0.0, note='blocked'),
        ]
        text = render.render('report.txt', reports=reports)
        self.assertIn('assumption1: passed (margin 1)', text)
        self.assertIn('ok   over-actuation m > p: 2/2', text)
        self.assertIn('nonresonance_flow: FAILED', text)
        self.assertIn('FAIL rank at s=0+1i: 1/2', text)
        self.assertIn('note: blocked', text)

    def test_strict_context(self):
        with self.assertRaises(jinja2.UndefinedError):
            render.render('decomposition.txt')


class PlotTest(AbstractTest):
    def trajectory(self):
        traj = HybridTrajectory(1, 1, 2, 1)
        for k in range(2):
            for i in range(5):
                t = k * 1.0 + i * 0.25
                traj.record(HybridTime(t, k), [0.0], [0.0], [np.cos(t)], [t, -t],
                            jumped=(k and not i))
            if k == 0:
                traj.mark_boundary()
        return traj

    def test_panels(self):
        panels, t_range = plot.trajectory_panels(self.trajectory())
        self.assertEqual(['e_1(t, k)', 'u_1(t, k)', 'u_2(t, k)'],
                         [panel.title for panel in panels])
        self.assertEqual((0.0, 2.0), t_range)
        self.assertEqual(10, len(panels[0].points.split()))

    def test_svg(self):
        plot.write_svg(self.trajectory(), 'trajectory.svg')
        with open('trajectory.svg') as svg_file:
            svg = svg_file.read()
        self.assertIn('<title>Evolution of the regulated output</title>', svg)
        self.assertEqual(3, svg.count('<polyline'))
        self.assertEqual(3, svg.count('stroke-dasharray'))

    def test_svg_without_boundary(self):
        traj = HybridTrajectory(1, 0, 1, 1)
        traj.record(HybridTime(0.0, 0), [0.0], [], [1.0], [0.0])
        svg = plot.render_svg(traj)
        self.assertNotIn('stroke-dasharray', svg)
