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

from mock import patch

from test.common import AbstractTest
from regpilot.session import RegpilotSession
from regpilot.util import Stopwatch, to_dashed


class DashedTest(AbstractTest):
    def test_to_dashed(self):
        self.assertEqual('check', to_dashed('Check'))
        self.assertEqual('design-regulator', to_dashed('DesignRegulator'))


class StopwatchTest(AbstractTest):
    @patch('regpilot.util.time.perf_counter', side_effect=[10.0, 11.5, 20.0, 20.25])
    def test_accumulates(self, perf_counter):
        watch = Stopwatch('pipeline')
        watch.start()
        watch.stop()
        watch.start()
        watch.stop()
        self.assertAlmostEqual(1.75, watch.elapsed)

    @patch('regpilot.util.time.perf_counter', side_effect=[0.0, 1.0, 3.0, 3.0])
    def test_parent_stops_children(self, perf_counter):
        parent = Stopwatch('pipeline')
        child = Stopwatch('synthesis', parent, start=True)
        parent.stop()
        self.assertAlmostEqual(2.0, child.elapsed)
        self.assertAlmostEqual(3.0, parent.elapsed)

    @patch('regpilot.util.time.perf_counter', side_effect=[0.0, 1.5])
    def test_display(self, perf_counter):
        watch = Stopwatch('checks', start=True)
        watch.stop()
        with self.assertLogs('regpilot.util.Stopwatch.checks', 'INFO') as logs:
            watch.display()
        self.assertIn('checks time: 1 second', logs.output[0])

    def test_reset(self):
        watch = Stopwatch('checks', start=True)
        watch.stop()
        watch.reset()
        self.assertEqual(0, watch.elapsed)


class SessionTest(AbstractTest):
    @patch('regpilot.session.get_config', return_value={'backend': 'dogpile.cache.memory'})
    def test_cache_region(self, get_config):
        session = RegpilotSession()
        region = session.cache('propagators')
        self.assertIs(region, session.cache('propagators'))
        get_config.assert_called_once_with('caching.propagators')
        region.set('key', 42)
        self.assertEqual(42, region.get('key'))
        session.close()
        self.assertIsNot(region, session.cache('propagators'))
