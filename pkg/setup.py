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

import re
from setuptools import setup, find_packages

with open('regpilot/__init__.py') as init_file:
    for line in init_file:
        match = re.match(r"^__version__\s*=\s*'([0-9.]+)'", line)
        if match:
            version = match.group(1)

setup(
    name='regpilot',
    version=version,
    description='Output regulation of linear hybrid systems with periodic jumps',
    author='regpilot developers',
    author_email='',
    url='',
    license='GPLv2+',
    packages=find_packages(exclude=["test"]),
    include_package_data=True,
    package_data={'regpilot': ['config.cfg', 'templates/*.j2']},
    python_requires='>=3.6',
    install_requires=[
        'numpy',
        'scipy>=1.0',
        'jinja2',
        'dogpile.cache',
        'humanize',
    ],
    tests_require=['nose', 'mock'],
    entry_points={
        'console_scripts': ['regpilot = regpilot.cli:run'],
    },
    test_suite='nose.collector',
)
