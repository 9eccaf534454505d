"""
Run artifacts: the per-epoch metrics table, multi-seed aggregation, learning-curve and design plots.
"""
import csv
import logging
import math
import os

import matplotlib
matplotlib.use('Agg')
matplotlib.rcParams['svg.hashsalt'] = 'morphrl'
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402
import numpy as np  # noqa: E402

from morphrl.checkpoints import latest_checkpoint  # noqa: E402
from morphrl.design_graph import load_design  # noqa: E402
from morphrl.envs.physics import BodyModel  # noqa: E402

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.csv'
CONFIG_FILE = 'config.cfg'
FINAL_DESIGN_FILE = 'final.design'
FINAL_DESIGN_PLOT = 'final_design.svg'
SUMMARY_FILE = 'summary.json'
# Final designs are read back without their run's joint cap.
STATUS_MAX_JOINTS = 10 ** 6

METRICS_COLUMNS = ['epoch', 'method', 'total_steps', 'mean_return', 'max_return', 'eval_return', 'population_mean',
                   'policy_loss', 'value_loss', 'kl', 'clip_fraction', 'num_joints']
CURVE_COLUMNS = ['epoch', 'total_steps', 'mean', 'std', 'runs']

INT_COLUMNS = {'epoch', 'total_steps'}
TEXT_COLUMNS = {'method'}


class ResultsError(Exception):
    pass


def _format_value(value):
    if value is None:
        return ''
    if isinstance(value, float):
        if math.isnan(value):
            return ''
        return repr(value)
    return str(value)


def _parse_value(column, text):
    if text == '' or column in TEXT_COLUMNS:
        return text if column in TEXT_COLUMNS else None
    if column in INT_COLUMNS:
        return int(text)
    return float(text)


class MetricsWriter(object):
    """Appends one row per epoch to metrics.csv.

    `start_epoch` > 0 (a resumed run) keeps the rows of earlier epochs and drops the rest, so the
    file matches what an uninterrupted run would have written.
    """

    def __init__(self, path, start_epoch=0):
        self.path = path
        kept = []
        if start_epoch > 0 and os.path.exists(path):
            kept = [row for row in read_metrics(path) if row['epoch'] < start_epoch]

        with open(self.path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, lineterminator='\n')
            writer.writeheader()
            for row in kept:
                writer.writerow(self._formatted(row))

    @staticmethod
    def _formatted(row):
        return dict((column, _format_value(row.get(column))) for column in METRICS_COLUMNS)

    def write(self, row):
        with open(self.path, 'a', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, lineterminator='\n', extrasaction='ignore')
            writer.writerow(self._formatted(row))


def read_metrics(path):
    if not os.path.exists(path):
        raise ResultsError("No metrics file at {}".format(path))

    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != METRICS_COLUMNS:
            raise ResultsError("{} has columns {}, expected {}".format(path, reader.fieldnames, METRICS_COLUMNS))
        try:
            return [dict((column, _parse_value(column, row[column])) for column in METRICS_COLUMNS)
                    for row in reader]
        except ValueError as e:
            raise ResultsError("Malformed row in {}: {}".format(path, e))


def load_runs(run_dirs):
    """Metrics rows of each run directory, keyed by run directory."""
    if not run_dirs:
        raise ResultsError("No run directories given")

    runs = {}
    for run_dir in run_dirs:
        path = os.path.join(run_dir, METRICS_FILE)
        rows = read_metrics(path)
        if not rows:
            raise ResultsError("{} has no rows".format(path))
        runs[run_dir] = rows
    return runs


def aggregate_runs(runs, column='mean_return'):
    """Mean and standard deviation of `column` across runs, aligned by epoch.

    Runs of different lengths are cut to the shortest one.
    """
    runs = list(runs)
    if not runs:
        raise ResultsError("Nothing to aggregate")
    if column not in METRICS_COLUMNS or column in TEXT_COLUMNS:
        raise ResultsError("Cannot aggregate column '{}'".format(column))

    length = min(len(rows) for rows in runs)
    if any(len(rows) != length for rows in runs):
        logger.warning("Runs have different lengths; aggregating the first %d epochs.", length)

    curve = []
    for i in range(length):
        values = [rows[i][column] for rows in runs if rows[i][column] is not None]
        curve.append({
            'epoch': runs[0][i]['epoch'],
            'total_steps': int(np.mean([rows[i]['total_steps'] for rows in runs])),
            'mean': float(np.mean(values)) if values else None,
            'std': float(np.std(values)) if values else None,
            'runs': len(values),
        })
    return curve


def group_by_method(runs):
    groups = {}
    for run_dir, rows in sorted(runs.items()):
        groups.setdefault(rows[0]['method'], []).append(rows)
    return groups


def write_curve(curve, path):
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in curve:
            writer.writerow(dict((column, _format_value(row[column])) for column in CURVE_COLUMNS))


def plot_curves(curves, path, column='mean_return'):
    """One mean ± std band per method against cumulative execution steps."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, curve in sorted(curves.items()):
        points = [row for row in curve if row['mean'] is not None]
        if not points:
            continue
        steps = np.array([row['total_steps'] for row in points])
        mean = np.array([row['mean'] for row in points])
        std = np.array([row['std'] for row in points])
        ax.plot(steps, mean, label=method)
        ax.fill_between(steps, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel('execution steps')
    ax.set_ylabel(column.replace('_', ' '))
    ax.legend(loc='best')
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def plot_runs(run_dirs, output_dir, column='mean_return'):
    """Write `curve_<method>.csv` per method and a combined `curves.svg`; returns the written paths."""
    groups = group_by_method(load_runs(run_dirs))
    os.makedirs(output_dir, exist_ok=True)

    written = []
    curves = {}
    for method, runs in groups.items():
        curves[method] = aggregate_runs(runs, column)
        path = os.path.join(output_dir, 'curve_{}.csv'.format(method))
        write_curve(curves[method], path)
        written.append(path)
    written.append(plot_curves(curves, os.path.join(output_dir, 'curves.svg'), column))
    return written


def plot_design(design, env_config, path):
    """Draw the rest pose of a design as capsules."""
    model = BodyModel(design, env_config)
    state = model.state(model.rest_q((0.0, 0.0)), np.zeros(model.ndof))

    fig, ax = plt.subplots(figsize=(4, 4))
    for start, end, radius in zip(state.starts, state.ends, model.radii):
        direction = end - start
        norm = np.hypot(*direction) or 1.0
        offset = radius * np.array([-direction[1], direction[0]]) / norm
        ax.add_patch(Polygon([start + offset, end + offset, end - offset, start - offset], closed=True,
                             facecolor='tab:orange', edgecolor='none'))
        ax.add_patch(Circle(start, radius, facecolor='tab:orange', edgecolor='none'))
        ax.add_patch(Circle(end, radius, facecolor='tab:orange', edgecolor='none'))
    ax.plot(state.starts[:1, 0], state.starts[:1, 1], 'ko', markersize=3)

    points = np.concatenate([state.starts, state.ends])
    margin = float(np.max(model.radii)) + 0.1
    ax.set_xlim(points[:, 0].min() - margin, points[:, 0].max() + margin)
    ax.set_ylim(points[:, 1].min() - margin, points[:, 1].max() + margin)
    ax.set_aspect('equal')
    ax.set_axis_off()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def run_status(run_dir):
    status = {'run_dir': run_dir}
    metrics_path = os.path.join(run_dir, METRICS_FILE)
    rows = read_metrics(metrics_path) if os.path.exists(metrics_path) else []
    if rows:
        returns = [row['mean_return'] for row in rows if row['mean_return'] is not None]
        status.update({
            'method': rows[-1]['method'],
            'last_epoch': rows[-1]['epoch'],
            'total_steps': rows[-1]['total_steps'],
            'best_mean_return': max(returns) if returns else None,
        })
    status['latest_checkpoint'] = latest_checkpoint(run_dir)

    design_path = os.path.join(run_dir, FINAL_DESIGN_FILE)
    status['final_design_joints'] = None
    if os.path.exists(design_path):
        status['final_design_joints'] = len(load_design(design_path, max_joints=STATUS_MAX_JOINTS))
    return status
