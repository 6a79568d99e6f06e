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
import logging
import logging.config

__config = {}

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                                   'config.cfg')


def merge_dict(d1, d2):
    ret = d1.copy()
    for k, v in d2.items():
        if k in ret and isinstance(v, dict) and isinstance(ret[k], dict):
            ret[k] = merge_dict(ret[k], v)
        else:
            ret[k] = v
    return ret


def parse_config(config_path):
    if os.path.exists(config_path):
        with open(config_path) as config_file:
            code = compile(config_file.read(), config_path, 'exec')
            conf_vars = {}
            exec(code, conf_vars)
            return conf_vars.get('config', {})
    raise RuntimeError("Config file not found: {}".format(config_path))


def _tolerance_override(config):
    raw = os.environ.get('REGPILOT_TOL')
    if not raw:
        return config
    try:
        tol = float(raw)
    except ValueError:
        raise RuntimeError("REGPILOT_TOL is not a number: {}".format(raw))
    if not tol > 0:
        raise RuntimeError("REGPILOT_TOL must be positive, got {}".format(raw))
    return merge_dict(config, {
        'numerics': {'rank_tol': tol},
        'geometry': {'rank_tol': tol},
        'checks': {'rank_tol': tol},
    })


def load_config(config_paths, ignore_env=False):
    """
    Loads configuration from given files and merges them recursively into one
    dictionary, that is then accessible using get_config function.

    :param: config_paths
            list of paths to config files. They must exist.
    :param: ignore_env
            whether to disable overriding the paths by REGPILOT_CONFIG and the
            rank tolerance by REGPILOT_TOL
    """
    config = {}
    if not ignore_env and os.environ.get('REGPILOT_CONFIG'):
        config_paths = os.environ['REGPILOT_CONFIG'].split(':')
    for config_path in config_paths:
        config = merge_dict(config, parse_config(config_path))

    assert config

    if not ignore_env:
        config = _tolerance_override(config)

    logging.config.dictConfig(config['logging'])

    global __config
    __config = config


NO_DEFAULT = object()


def get_config(key, default=NO_DEFAULT):
    """
    Gets a value from configuration.

    :param: key
            a dot separated path of configuration keys from the top level.
            (i.e. "estimation.min_tau")
    :param: default
            value to be returned if key is not found
    :raises: KeyError if key is not found and no default was supplied
    :return: configuration value
    """
    if not __config:
        raise RuntimeError("No configuration loaded")
    ret = __config
    if key is None:
        return ret
    try:
        for component in key.split('.'):
            ret = ret[component]
    except KeyError:
        if default is not NO_DEFAULT:
            return default
        raise KeyError("Configuration value not found: {}".format(key))
    return ret
