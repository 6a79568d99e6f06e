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
Self-contained SVG plot of a trajectory: one panel per output channel and
one per input channel over continuous time, with a dashed line where the
estimation phase ends.
"""

from collections import namedtuple

import numpy as np

from regpilot import render

WIDTH = 800
LEFT = 80
RIGHT = 20
PANEL_HEIGHT = 150
PANEL_GAP = 40
TOP = 30

Panel = namedtuple('Panel', ['title', 'top', 'points', 'y_min', 'y_max', 'zero'])


def _scale(values, lo, hi, start, length, flip=False):
    span = hi - lo if hi > lo else 1.0
    ratio = (np.asarray(values, dtype=float) - lo) / span
    if flip:
        ratio = 1.0 - ratio
    return start + ratio * length


def _limits(values):
    if not len(values):
        return -1.0, 1.0
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def _panel(title, times, values, t_range, top):
    plot_width = WIDTH - LEFT - RIGHT
    lo, hi = _limits(values)
    xs = _scale(times, t_range[0], t_range[1], LEFT, plot_width)
    ys = _scale(values, lo, hi, top, PANEL_HEIGHT, flip=True)
    points = ' '.join('{},{}'.format(render.fixed(x, 2), render.fixed(y, 2))
                      for x, y in zip(xs, ys))
    zero = None
    if lo < 0 < hi:
        zero = float(_scale([0.0], lo, hi, top, PANEL_HEIGHT, flip=True)[0])
    return Panel(title, top, points, lo, hi, zero)


def trajectory_panels(traj):
    times = traj.time_array()
    t_range = (float(times[0]), float(times[-1])) if len(times) else (0.0, 1.0)
    series = []
    outputs, inputs = traj.output_array(), traj.input_array()
    for j in range(traj.p):
        series.append(('e_{}(t, k)'.format(j + 1), outputs[:, j]))
    for j in range(traj.m):
        series.append(('u_{}(t, k)'.format(j + 1), inputs[:, j]))
    panels = []
    for index, (title, values) in enumerate(series):
        top = TOP + index * (PANEL_HEIGHT + PANEL_GAP)
        panels.append(_panel(title, times, values, t_range, top))
    return panels, t_range


def render_svg(traj):
    panels, t_range = trajectory_panels(traj)
    height = TOP + len(panels) * (PANEL_HEIGHT + PANEL_GAP)
    boundary = None
    if traj.boundary is not None and len(traj):
        boundary = float(_scale([traj.boundary.t], t_range[0], t_range[1],
                                LEFT, WIDTH - LEFT - RIGHT)[0])
    return render.render('trajectory.svg', panels=panels, width=WIDTH, height=height,
                         left=LEFT, right=WIDTH - RIGHT, panel_height=PANEL_HEIGHT,
                         boundary=boundary, t_range=t_range)


def write_svg(traj, path):
    with open(path, 'w') as svg_file:
        svg_file.write(render_svg(traj))
