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

import argparse
import logging
import os
import sys

from regpilot import checks, geometry, estimator, simulator, plot, render
from regpilot.config import load_config, DEFAULT_CONFIG_PATH
from regpilot.scenario import load_scenario, ScenarioError
from regpilot.session import RegpilotSession
from regpilot.util import RegpilotError, to_dashed

log = logging.getLogger('regpilot.cli')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class Command(object):
    needs_session = True

    def setup_parser(self, parser):
        pass

    def execute(self, **kwargs):
        raise NotImplementedError()


def _scenario_argument(parser):
    parser.add_argument('scenario', help="scenario JSON file")


def _ph_variant_argument(parser):
    parser.add_argument('--ph-variant', choices=checks.PH_VARIANTS,
                        help="variant of the jump non-resonance pencil")


def _out_dir_argument(parser):
    parser.add_argument('-o', '--out-dir', default='.',
                        help="directory receiving the output files")


def _out_path(out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _print_failure(e):
    reports = getattr(e, 'reports', None)
    if reports:
        print(render.render('report.txt', reports=reports), end='')
    print("error: {}".format(e), file=sys.stderr)


class Check(Command):
    """ Runs the solvability and structural checks on a scenario """

    needs_session = False

    def setup_parser(self, parser):
        _scenario_argument(parser)
        _ph_variant_argument(parser)

    def execute(self, scenario, ph_variant):
        scn = load_scenario(scenario)
        reports, _ = checks.check_plant(scn.nominal, scn.exo,
                                        scn.option('geometry', 'shift_targets'),
                                        ph_variant)
        print(render.render('report.txt', reports=reports), end='')
        return EXIT_OK if all(report.passed for report in reports) else EXIT_FAILURE


class Decompose(Command):
    """ Prints the geometric decomposition of the nominal plant """

    needs_session = False

    def setup_parser(self, parser):
        _scenario_argument(parser)
        parser.add_argument('--blocks', action='store_true',
                            help="also print T, G and the transformed matrices")

    def execute(self, scenario, blocks):
        scn = load_scenario(scenario)
        assumption = checks.check_assumption1(scn.nominal, scn.exo)
        structure_failures = [witness for witness in assumption.failures()
                         if witness.label in checks.STRUCTURE_LABELS]
        if structure_failures:
            print(render.render('report.txt', reports=[assumption]), end='')
            return EXIT_FAILURE
        dec = geometry.decompose(scn.nominal,
                                 shift_targets=scn.option('geometry', 'shift_targets'))
        shown = []
        if blocks:
            shown = [('T', dec.T), ('G', dec.G), ('Abar_F', dec.Abar_F),
                     ('Bbar', dec.Bbar), ('Cbar', dec.Cbar), ('Ebar', dec.Ebar)]
        print(render.render('decomposition.txt', summary=dec.summary(), blocks=shown),
              end='')
        return EXIT_OK


class Estimate(Command):
    """ Runs the identification experiment and prints the identified flow data """

    def setup_parser(self, parser):
        _scenario_argument(parser)
        _out_dir_argument(parser)

    def execute(self, session, scenario, out_dir):
        scn = load_scenario(scenario)
        diagnostics = simulator.Diagnostics(scn.name)
        run = simulator.run_experiment(scn, simulator.Propagator(session), diagnostics)
        run.sample_log.to_csv(_out_path(out_dir, 'samples.csv'))
        estimate = estimator.identify(run.sample_log, scn.nominal.n + scn.exo.q,
                                      scn.nominal.n, state_dim=scn.nominal.n)
        print("sampling period: {}".format(render.number(run.plan.tau)))
        print("identified order: {}".format(estimate.order))
        print("realization dimension: {}".format(estimate.A_hat.shape[0]))
        print("m1: {}".format(estimate.m1))
        print("spectrum: {}".format(render.spectrum_of(estimate.A_hat)))
        print("reachable block spectrum: {}".format(render.spectrum_of(estimate.A11)))
        print("zero dynamics spectrum: {}".format(render.spectrum_of(estimate.A22)))
        return EXIT_OK


class Synthesize(Command):
    """ Designs the regulator and writes its realization """

    def setup_parser(self, parser):
        _scenario_argument(parser)
        _ph_variant_argument(parser)
        _out_dir_argument(parser)
        parser.add_argument('--no-estimation', action='store_true',
                            help="build the internal models from nominal matrices")

    def execute(self, session, scenario, ph_variant, out_dir, no_estimation):
        scn = load_scenario(scenario)
        run = simulator.design_regulator(scn, session, ph_variant,
                                         False if no_estimation else None)
        with open(_out_path(out_dir, 'regulator.txt'), 'w') as regulator_file:
            regulator_file.write(run.realization.dump())
        for key, value in run.realization.dims().items():
            print("{}={}".format(key, value))
        print("observer error radius: {}".format(
            render.number(run.realization.observer.spectral_radius, 4)))
        print("period map radius: {}".format(
            render.number(run.realization.feedback.spectral_radius, 4)))
        return EXIT_OK


class Simulate(Command):
    """ Runs estimation, synthesis and the regulated closed loop """

    def setup_parser(self, parser):
        _scenario_argument(parser)
        _ph_variant_argument(parser)
        _out_dir_argument(parser)
        parser.add_argument('--periods', type=int,
                            help="regulated periods, the scenario horizon by default")
        parser.add_argument('--plot', dest='write_plot', action='store_true',
                            help="also write trajectory.svg")
        parser.add_argument('--no-estimation', action='store_true',
                            help="build the internal models from nominal matrices")

    def execute(self, session, scenario, ph_variant, out_dir, periods, write_plot,
                no_estimation):
        scn = load_scenario(scenario)
        if periods is not None and periods < 1:
            raise ScenarioError("--periods must be positive")
        traj, realization, diagnostics = simulator.run_pipeline(
            scn, session, ph_variant, False if no_estimation else None, periods)
        simulator.export_trajectory(traj, _out_path(out_dir, 'trajectory.csv'))
        with open(_out_path(out_dir, 'regulator.txt'), 'w') as regulator_file:
            regulator_file.write(realization.dump())
        with open(_out_path(out_dir, 'diagnostics.txt'), 'w') as diagnostics_file:
            diagnostics_file.write(diagnostics.dump())
        if write_plot:
            plot.write_svg(traj, _out_path(out_dir, 'trajectory.svg'))
        print("closed-loop monodromy radius: {}".format(
            render.number(diagnostics.monodromy_radius, 6)))
        print("final-period max|e|: {}".format(render.number(diagnostics.final_error, 6)))
        return EXIT_OK


class Sweep(Command):
    """ Regulates randomly perturbed copies of a scenario, in seed order """

    def setup_parser(self, parser):
        _scenario_argument(parser)
        parser.add_argument('--seeds', type=int, default=20,
                            help="number of perturbed plants, seeds 0 .. N-1")
        parser.add_argument('--epsilon', type=float, default=1e-3,
                            help="spectral norm of every perturbation")
        parser.add_argument('--threshold', type=float, default=1e-2,
                            help="largest admissible final-period max|e|")
        parser.add_argument('--periods', type=int,
                            help="regulated periods, the scenario horizon by default")
        parser.add_argument('--no-estimation', action='store_true',
                            help="build the internal models from nominal matrices")

    def execute(self, session, scenario, seeds, epsilon, threshold, periods, no_estimation):
        scn = load_scenario(scenario)
        failed = 0
        print("seed  radius        max|e|        verdict")
        for seed in range(seeds):
            perturbed = scn.with_perturbation(epsilon, seed)
            try:
                _, _, diagnostics = simulator.run_pipeline(
                    perturbed, session, estimation=False if no_estimation else None,
                    periods=periods)
            except RegpilotError as e:
                failed += 1
                print("{:<5} {:<13} {:<13} error: {}".format(seed, '-', '-', e))
                continue
            ok = diagnostics.monodromy_radius < 1.0 and diagnostics.final_error <= threshold
            failed += not ok
            print("{:<5} {:<13} {:<13} {}".format(
                seed, render.number(diagnostics.monodromy_radius, 6),
                render.number(diagnostics.final_error, 6), 'ok' if ok else 'FAILED'))
        print("{} of {} runs regulated".format(seeds - failed, seeds))
        return EXIT_OK if not failed else EXIT_FAILURE


def build_parser():
    main_parser = argparse.ArgumentParser(
        prog='regpilot',
        description="Output regulation of linear hybrid systems with periodic jumps",
    )
    main_parser.add_argument('-d', '--debug', action='store_true',
                             help="log at debug level")
    main_parser.add_argument('--config', action='append', default=[],
                             help="additional configuration file")
    subparser = main_parser.add_subparsers(dest='command')
    subparser.required = True
    for Cmd in Command.__subclasses__():
        cmd = Cmd()
        parser = subparser.add_parser(to_dashed(Cmd.__name__), help=cmd.__doc__)
        cmd.setup_parser(parser)
        parser.set_defaults(cmd=cmd)
        parser.description = cmd.__doc__
    return main_parser


def main(args, session=None):
    args = build_parser().parse_args(args)
    cmd = args.cmd
    kwargs = vars(args)
    if kwargs.pop('debug'):
        logging.getLogger('regpilot').setLevel(logging.DEBUG)
    for key in ('cmd', 'config', 'command'):
        del kwargs[key]
    own_session = False
    if cmd.needs_session:
        own_session = session is None
        session = session or RegpilotSession()
        kwargs['session'] = session
    try:
        return cmd.execute(**kwargs)
    except ScenarioError as e:
        print("error: {}".format(e), file=sys.stderr)
        return EXIT_USAGE
    except RegpilotError as e:
        _print_failure(e)
        return EXIT_FAILURE
    finally:
        if own_session:
            session.close()


def run(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument('--config', action='append', default=[])
    known, _ = pre_parser.parse_known_args(argv)
    load_config([DEFAULT_CONFIG_PATH] + known.config)
    sys.exit(main(argv))
