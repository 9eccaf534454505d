from __future__ import print_function

import click

from morphrl import settings, __version__
from morphrl.cli import experiments
from morphrl.results import run_status
from morphrl.utils import json_dumps


@click.group()
def manager():
    """Management script for morphrl experiments"""


manager.add_command(experiments.train, "train")
manager.add_command(experiments.evaluate, "eval")
manager.add_command(experiments.plot, "plot")


@manager.command()
def version():
    """Displays morphrl version."""
    print(__version__)


@manager.command()
@click.argument('run_dir')
def status(run_dir):
    """Summary of a run directory: last epoch, steps, best return, checkpoints."""
    try:
        print(json_dumps(run_status(run_dir), indent=2, sort_keys=True))
    except experiments.USER_ERRORS as e:
        experiments.fail(e)


@manager.command()
def check_settings():
    """Show the settings as morphrl sees them (useful for debugging)."""
    for name, item in sorted(settings.all_settings().items()):
        print("{} = {}".format(name, item))
