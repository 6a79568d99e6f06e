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
Text and SVG rendering through jinja2 templates, with the filters the
templates use to format numbers, spectra and matrices.
"""

import os

import humanize
import jinja2
import numpy as np

from regpilot import numerics
from regpilot.config import get_config

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'templates')

_environments = {}


def number(value, digits=6):
    if value is None:
        return 'n/a'
    value = complex(value)
    if value.imag == 0:
        return '{:.{}g}'.format(value.real, digits)
    sign = '+' if value.imag >= 0 else '-'
    return '{:.{}g}{}{:.{}g}i'.format(value.real, digits, sign, abs(value.imag), digits)


def spectrum(values, digits=6):
    return '{' + ', '.join(number(v, digits) for v in values) + '}'


def spectrum_of(M, digits=6):
    return spectrum(numerics.sort_spectrum(numerics.eigvals(M)), digits)


def matrix_rows(M, digits=6):
    """
    Lines of a matrix with right-aligned columns; empty matrices print as
    their shape.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return ['[] ({}x{})'.format(*M.shape)]
    cells = [['{:.{}g}'.format(v, digits) for v in row] for row in M]
    width = max(len(cell) for row in cells for cell in row)
    return ['[' + ' '.join(cell.rjust(width) for cell in row) + ']' for row in cells]


def fixed(value, digits=3):
    """
    Fixed point formatting for SVG coordinates, never '-0.000'.
    """
    text = '{:.{}f}'.format(value, digits)
    return text[1:] if text.startswith('-') and float(text) == 0 else text


def environment():
    directory = get_config('directories.templates', None) or TEMPLATE_DIR
    if directory not in _environments:
        env = jinja2.Environment(
            loader=jinja2.FileSystemLoader(directory),
            undefined=jinja2.StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        env.filters['number'] = number
        env.filters['spectrum'] = spectrum
        env.filters['spectrum_of'] = spectrum_of
        env.filters['matrix_rows'] = matrix_rows
        env.filters['fixed'] = fixed
        env.filters['intcomma'] = humanize.intcomma
        _environments[directory] = env
    return _environments[directory]


def render(name, **context):
    return environment().get_template(name + '.j2').render(**context)
