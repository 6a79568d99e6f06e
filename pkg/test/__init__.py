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

from regpilot.config import load_config, get_config, DEFAULT_CONFIG_PATH

testdir = os.path.dirname(os.path.realpath(__file__))

load_config([DEFAULT_CONFIG_PATH,
             '{0}/test_config.cfg'.format(testdir)],
            ignore_env=True)

config = get_config(None)
