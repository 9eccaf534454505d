"""
Experiment runs: a run directory per (config, seed) holding config.cfg, metrics.csv, checkpoints
and the final design.
"""
import logging
import os
from dataclasses import replace

from morphrl import settings
from morphrl.baselines import get_baseline
from morphrl.baselines.evolution import EvoConfig
from morphrl.checkpoints import (FINAL_CHECKPOINT, CheckpointVersionError, build_checkpoint, check_compatible,
                                 checkpoint_episode_config, checkpoint_path, latest_checkpoint, load_checkpoint,
                                 prune_checkpoints, save_checkpoint)
from morphrl.design_graph import save_design
from morphrl.metrics import gauge, timed
from morphrl.optim import PolicyOptimizer, ppo_update
from morphrl.policy import Transform2ActPolicy
from morphrl.results import (CONFIG_FILE, FINAL_DESIGN_FILE, FINAL_DESIGN_PLOT, METRICS_FILE, SUMMARY_FILE,
                             MetricsWriter, plot_design)
from morphrl.rollout import EpisodeConfig, collect_batch, evaluate_design
from morphrl.utils import json_dumps, slugify
from morphrl.utils.configuration import ExperimentConfig
from morphrl.worker import RolloutPool

logger = logging.getLogger(__name__)


class TrainerError(Exception):
    pass


def default_run_dir(config):
    experiment = config.section('experiment')
    if experiment['output_dir']:
        return experiment['output_dir']
    name = experiment['name'] or "{}-{}".format(experiment['env'], config.method)
    return os.path.join(settings.RUNS_DIR, slugify("{}-seed{}".format(name, config.seed)))


class Trainer(object):
    def __init__(self, config, run_dir=None, workers=None):
        self.config = config
        self.run_dir = run_dir or default_run_dir(config)
        self.workers = workers or settings.WORKERS
        self.env = config.make_env()
        self.seed = config.seed
        self.eval_episodes = config.get('experiment', 'eval_episodes')
        self.checkpoint_every = config.get('experiment', 'checkpoint_every') or settings.CHECKPOINT_EVERY

    def path(self, *parts):
        return os.path.join(self.run_dir, *parts)

    def _prepare(self, resume):
        config_path = self.path(CONFIG_FILE)
        if resume:
            if not os.path.exists(config_path):
                raise TrainerError("{} is not a run directory (no {})".format(self.run_dir, CONFIG_FILE))
            return
        os.makedirs(self.run_dir, exist_ok=True)
        self.config.save(config_path)

    def run(self, resume=False):
        """Train to completion; returns the run summary (also written to summary.json)."""
        self._prepare(resume)
        logger.info("Training %s on %s (seed %d) in %s", self.config.method, self.env.type(), self.seed,
                    self.run_dir)

        with RolloutPool(self.workers) as pool:
            if self.config.method == 'transform2act':
                summary = self._train_transform2act(pool, resume)
            else:
                if resume:
                    raise TrainerError("Only transform2act runs can be resumed")
                summary = self._train_baseline(pool)

        with open(self.path(SUMMARY_FILE), 'w') as f:
            f.write(json_dumps(summary, indent=2, sort_keys=True))
        return summary

    def _is_checkpoint_epoch(self, epoch, epochs):
        return (epoch + 1) % self.checkpoint_every == 0 or epoch == epochs - 1

    def _train_transform2act(self, pool, resume):
        ppo_config = self.config.ppo_config()
        episode_config = self.config.episode_config(self.env.config)
        policy = Transform2ActPolicy(self.config.policy_config(), self.env.obs_dim)
        policy.ensure_blocks([episode_config.initial_design])

        start_epoch, total_steps = 0, 0
        checkpoint = latest_checkpoint(self.run_dir) if resume else None
        if checkpoint is not None:
            saved = load_checkpoint(checkpoint)
            check_compatible(saved, self.config, self.env.obs_dim)
            policy.load_snapshot(saved['policy'])
            start_epoch, total_steps = saved['epoch'] + 1, saved['total_steps']
            logger.info("Resuming from %s at epoch %d", checkpoint, start_epoch)
        elif resume:
            logger.warning("No checkpoint in %s; starting from scratch.", self.run_dir)

        optimizer = PolicyOptimizer(policy, ppo_config)
        if checkpoint is not None:
            optimizer.load_state_dict(saved['optimizer'])

        writer = MetricsWriter(self.path(METRICS_FILE), start_epoch=start_epoch)
        eval_return, design = None, None

        for epoch in range(start_epoch, ppo_config.epochs):
            with timed('train.collect', env=self.env.type()):
                memory = collect_batch(policy, self.env, episode_config, ppo_config.batch_size, self.seed,
                                       epoch=epoch, pool=pool)
            with timed('train.update', env=self.env.type()):
                stats = ppo_update(policy, optimizer, memory, ppo_config, seed=self.seed, epoch=epoch)
            policy.update_observation_stats(memory.observations())
            total_steps += memory.total_steps

            eval_return = None
            if self._is_checkpoint_epoch(epoch, ppo_config.epochs):
                eval_return, design = evaluate_design(policy, self.env, episode_config, self.eval_episodes,
                                                      self.seed)
                save_checkpoint(checkpoint_path(self.run_dir, epoch),
                                build_checkpoint(self.config, policy, episode_config, epoch, total_steps, optimizer))
                prune_checkpoints(self.run_dir)

            row = dict(epoch=epoch, method=self.config.method, total_steps=total_steps,
                       mean_return=memory.mean_return, max_return=memory.max_return, eval_return=eval_return,
                       num_joints=memory.mean_num_joints(), **stats.to_dict())
            writer.write(row)
            gauge('train.mean_return', memory.mean_return, env=self.env.type())
            logger.info("epoch %d: steps=%d mean return=%.3f max=%.3f joints=%.1f policy loss=%.4f value loss=%.4f",
                        epoch, total_steps, memory.mean_return, memory.max_return, row['num_joints'],
                        stats.policy_loss, stats.value_loss)

        if design is None:
            eval_return, design = evaluate_design(policy, self.env, episode_config, self.eval_episodes, self.seed)
        save_checkpoint(self.path(FINAL_CHECKPOINT),
                        build_checkpoint(self.config, policy, episode_config, ppo_config.epochs - 1, total_steps,
                                         optimizer))
        return self._finish(design, eval_return, total_steps)

    def _train_baseline(self, pool):
        baseline = get_baseline(self.config.method)
        if baseline is None:
            raise TrainerError("Baseline '{}' is not enabled".format(self.config.method))

        evo_config = EvoConfig(**self.config.evolution_section())
        ppo_config = replace(self.config.ppo_config(), batch_size=evo_config.species_batch_size,
                             minibatch_size=min(self.config.get('ppo', 'minibatch_size'),
                                                evo_config.species_batch_size))
        writer = MetricsWriter(self.path(METRICS_FILE))

        result = baseline.run(self.env, evo_config, self.config.policy_config(), ppo_config, self.seed,
                              callback=writer.write, pool=pool)

        episode_config = EpisodeConfig(skeleton_transforms=0, attribute_transforms=0,
                                       initial_design=result.best_design)
        eval_return, design = evaluate_design(result.best_policy, self.env, episode_config, self.eval_episodes,
                                              self.seed)
        save_checkpoint(self.path(FINAL_CHECKPOINT),
                        build_checkpoint(self.config, result.best_policy, episode_config, evo_config.generations - 1,
                                         result.total_steps))
        return self._finish(design, eval_return, result.total_steps)

    def _finish(self, design, eval_return, total_steps):
        save_design(design, self.path(FINAL_DESIGN_FILE))
        plot_design(design, self.env.config, self.path(FINAL_DESIGN_PLOT))
        summary = {
            'method': self.config.method,
            'env': self.env.type(),
            'seed': self.seed,
            'total_steps': total_steps,
            'final_eval_return': eval_return,
            'final_design_joints': len(design),
        }
        logger.info("Finished %s: %d steps, final eval return %s, %d joints", self.config.method, total_steps,
                    eval_return, len(design))
        return summary


def evaluate_checkpoint(path, episodes, seed=None):
    """Argmax rollouts of a saved policy; returns (summary, transformed design)."""
    saved = load_checkpoint(path)
    config = ExperimentConfig.from_text(saved['config'])
    env = config.make_env()
    if saved['obs_dim'] != env.obs_dim:
        raise CheckpointVersionError("Checkpoint observation size {} does not match environment ({})".format(
            saved['obs_dim'], env.obs_dim))

    episode_config = checkpoint_episode_config(saved, env.config.max_joints)
    policy = Transform2ActPolicy(config.policy_config(), env.obs_dim)
    policy.load_snapshot(saved['policy'])
    policy.eval()

    seed = config.seed if seed is None else seed
    mean_return, design = evaluate_design(policy, env, episode_config, episodes, seed)
    summary = {
        'checkpoint': path,
        'method': saved['method'],
        'epoch': saved['epoch'],
        'total_steps': saved['total_steps'],
        'episodes': episodes,
        'mean_return': mean_return,
        'num_joints': len(design),
    }
    return summary, design
