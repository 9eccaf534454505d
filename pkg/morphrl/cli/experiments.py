from __future__ import print_function
from sys import exit
import os

import click

from morphrl.checkpoints import FINAL_CHECKPOINT, CheckpointError, latest_checkpoint
from morphrl.design_graph import DesignError, save_design
from morphrl.envs import DesignRejected, NotSupported
from morphrl.results import ResultsError, plot_runs
from morphrl.trainer import Trainer, TrainerError, evaluate_checkpoint
from morphrl.utils import json_dumps
from morphrl.utils.configuration import ConfigurationError, ExperimentConfig

USER_ERRORS = (ConfigurationError, DesignError, DesignRejected, NotSupported, CheckpointError, ResultsError,
               TrainerError)


def fail(error):
    print("Error: {}".format(error))
    exit(1)


def load_config(path, seed=None, budget_scale=None, finetune=None, output_dir=None):
    config = ExperimentConfig.from_file(path)
    if seed is not None:
        config.update('experiment', 'seed', seed)
    if budget_scale is not None:
        config.update('experiment', 'budget_scale', budget_scale)
    if finetune is not None:
        config.update('experiment', 'finetune_design', finetune)
    if output_dir is not None:
        config.update('experiment', 'output_dir', output_dir)
    return config


@click.command()
@click.argument('config')
@click.option('--seed', type=int, default=None, help="Override experiment.seed.")
@click.option('--budget-scale', 'budget_scale', type=float, default=None,
              help="Multiply per-iteration batch sizes (e.g. 0.01 for a 1% budget).")
@click.option('--finetune', default=None, metavar='DESIGNFILE',
              help="Start from this design with the skeleton stage disabled.")
@click.option('--resume', is_flag=True, default=False, help="Continue from the run's latest checkpoint.")
@click.option('--output-dir', 'output_dir', default=None, help="Run directory (default: under MORPHRL_RUNS_DIR).")
def train(config, seed=None, budget_scale=None, finetune=None, resume=False, output_dir=None):
    """Train the method named in CONFIG and write a run directory."""
    try:
        experiment = load_config(config, seed, budget_scale, finetune, output_dir)
        trainer = Trainer(experiment)
        summary = trainer.run(resume=resume)
    except USER_ERRORS as e:
        fail(e)

    print("Run directory: {}".format(trainer.run_dir))
    print(json_dumps(summary, indent=2, sort_keys=True))


def resolve_checkpoint(path):
    if os.path.isdir(path):
        final = os.path.join(path, FINAL_CHECKPOINT)
        if os.path.exists(final):
            return final
        latest = latest_checkpoint(path)
        if latest is None:
            raise CheckpointError("No checkpoint in {}".format(path))
        return latest
    return path


@click.command()
@click.argument('checkpoint')
@click.option('--episodes', type=click.IntRange(min=0), default=1, help="Argmax episodes to run (0: design only).")
@click.option('--seed', type=int, default=None, help="Evaluation seed (default: the run's seed).")
@click.option('--design-out', 'design_out', default=None,
              help="Where to write the transformed design (default: eval.design next to the checkpoint).")
def evaluate(checkpoint, episodes=1, seed=None, design_out=None):
    """Deterministic rollouts of CHECKPOINT (a checkpoint file or run directory)."""
    try:
        path = resolve_checkpoint(checkpoint)
        summary, design = evaluate_checkpoint(path, episodes, seed=seed)
        design_out = design_out or os.path.join(os.path.dirname(os.path.abspath(path)), 'eval.design')
        save_design(design, design_out)
    except USER_ERRORS as e:
        fail(e)

    summary['design'] = design_out
    print(json_dumps(summary, indent=2, sort_keys=True))


@click.command()
@click.argument('run_dirs', nargs=-1, required=True)
@click.option('--output', default='plots', help="Directory for the curve CSVs and curves.svg.")
@click.option('--column', default='mean_return', help="metrics.csv column to aggregate.")
def plot(run_dirs, output='plots', column='mean_return'):
    """Merge metrics.csv across RUN_DIRS into mean/std curves per method."""
    try:
        written = plot_runs(list(run_dirs), output, column)
    except USER_ERRORS as e:
        fail(e)

    for path in written:
        print(path)
