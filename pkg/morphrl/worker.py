"""
Rollout worker processes.

Each worker rebuilds the policy from a parameter snapshot and collects its share of the batch with
seeds derived from (seed, epoch, worker id); shares are merged back in worker order, so a batch only
depends on the worker count, never on scheduling.
"""
import logging
import sys

import torch
import torch.multiprocessing as mp

from morphrl import settings
from morphrl.policy import Transform2ActPolicy
from morphrl.rollout import Memory, collect_share

logger = logging.getLogger(__name__)


def init_worker(torch_threads):
    handler = logging.StreamHandler(sys.stdout if settings.LOG_STDOUT else sys.stderr)
    handler.setFormatter(logging.Formatter(settings.WORKER_LOG_FORMAT))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(settings.LOG_LEVEL)
    torch.set_num_threads(torch_threads)


def collect_task(policy_config, obs_dim, snapshot, env, episode_config, num_steps, seed, epoch, worker_id, mode):
    policy = Transform2ActPolicy(policy_config, obs_dim)
    policy.load_snapshot(snapshot)
    policy.eval()
    memory = collect_share(policy, env, episode_config, num_steps, seed, epoch, worker_id=worker_id, mode=mode)
    logger.debug("Worker %d collected %d steps in %d episodes.", worker_id, memory.total_steps, memory.num_episodes)
    return memory


class RolloutPool(object):
    """A persistent pool of spawned rollout processes."""

    def __init__(self, workers=None, torch_threads=None):
        self.workers = workers or settings.WORKERS
        self._pool = None
        if self.workers > 1:
            context = mp.get_context('spawn')
            self._pool = context.Pool(self.workers, initializer=init_worker,
                                      initargs=(torch_threads or settings.WORKER_TORCH_THREADS,))
            logger.info("Started %d rollout workers.", self.workers)

    def collect(self, policy, env, episode_config, shares, seed, epoch, mode='sample'):
        snapshot = policy.snapshot()
        tasks = [(policy.config, policy.obs_dim, snapshot, env, episode_config, share, seed, epoch, worker_id, mode)
                 for worker_id, share in enumerate(shares) if share > 0]

        if self._pool is None:
            results = [collect_task(*task) for task in tasks]
        else:
            results = self._pool.starmap(collect_task, tasks)

        memory = Memory()
        for result in results:
            memory.extend(result)
        return memory

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
