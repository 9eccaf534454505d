"""
Training checkpoints: everything `train --resume` and `eval` need, in one torch file per save.
"""
import glob
import logging
import os
import re

import torch

from morphrl import settings
from morphrl.design_graph import deserialize, serialize
from morphrl.rollout import EpisodeConfig

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
CHECKPOINT_DIR = 'checkpoints'
FINAL_CHECKPOINT = 'final.pt'
EPOCH_FILE_RE = re.compile(r'^epoch_(\d+)\.pt$')


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def checkpoint_path(run_dir, epoch):
    return os.path.join(run_dir, CHECKPOINT_DIR, 'epoch_{:06d}.pt'.format(epoch))


def list_checkpoints(run_dir):
    """Epoch checkpoints of a run as (epoch, path), oldest first."""
    found = []
    for path in glob.glob(os.path.join(run_dir, CHECKPOINT_DIR, 'epoch_*.pt')):
        match = EPOCH_FILE_RE.match(os.path.basename(path))
        if match:
            found.append((int(match.group(1)), path))
    return sorted(found)


def latest_checkpoint(run_dir):
    found = list_checkpoints(run_dir)
    return found[-1][1] if found else None


def prune_checkpoints(run_dir, keep=None):
    keep = settings.KEEP_CHECKPOINTS if keep is None else keep
    if not keep:
        return []
    stale = [path for _, path in list_checkpoints(run_dir)[:-keep]]
    for path in stale:
        os.remove(path)
        logger.debug("Removed old checkpoint %s", path)
    return stale


def build_checkpoint(config, policy, episode_config, epoch, total_steps, optimizer=None, method=None):
    return {
        'version': CHECKPOINT_VERSION,
        'method': method or config.method,
        'config': config.to_text(),
        'epoch': epoch,
        'total_steps': total_steps,
        'obs_dim': policy.obs_dim,
        'policy': policy.snapshot(),
        'optimizer': optimizer.state_dict() if optimizer is not None else None,
        'initial_design': serialize(episode_config.initial_design),
        'skeleton_transforms': episode_config.skeleton_transforms,
        'attribute_transforms': episode_config.attribute_transforms,
    }


def save_checkpoint(path, checkpoint):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + '.tmp'
    torch.save(checkpoint, tmp_path)
    os.replace(tmp_path, path)
    logger.info("Saved checkpoint %s (epoch %d, %d steps)", path, checkpoint['epoch'], checkpoint['total_steps'])
    return path


def load_checkpoint(path):
    if not os.path.exists(path):
        raise CheckpointError("Checkpoint {} does not exist".format(path))
    try:
        checkpoint = torch.load(path, map_location='cpu', weights_only=False)
    except Exception as e:
        raise CheckpointError("Cannot read checkpoint {}: {}".format(path, e))

    if not isinstance(checkpoint, dict) or 'version' not in checkpoint:
        raise CheckpointError("{} is not a morphrl checkpoint".format(path))
    if checkpoint['version'] != CHECKPOINT_VERSION:
        raise CheckpointVersionError("Checkpoint {} has version {}, expected {}".format(
            path, checkpoint['version'], CHECKPOINT_VERSION))
    return checkpoint


def check_compatible(checkpoint, config, obs_dim):
    """Resuming under a different experiment config would silently mix two runs."""
    if checkpoint['config'] != config.to_text():
        raise CheckpointVersionError("Checkpoint was written with a different experiment configuration")
    if checkpoint['obs_dim'] != obs_dim:
        raise CheckpointVersionError("Checkpoint observation size {} does not match environment ({})".format(
            checkpoint['obs_dim'], obs_dim))


def checkpoint_episode_config(checkpoint, max_joints):
    return EpisodeConfig(skeleton_transforms=checkpoint['skeleton_transforms'],
                         attribute_transforms=checkpoint['attribute_transforms'],
                         initial_design=deserialize(checkpoint['initial_design'], max_joints=max_joints))
