"""
Episode collection: N_s skeleton transforms, N_z attribute transforms, then execution until the
episode terminates, reaches the horizon, or the batch runs out of simulation budget.

Only execution steps count against the budget; transform steps never touch the simulator.
"""
import logging
from dataclasses import dataclass

import numpy as np
import torch

from morphrl.design_graph import NonFiniteActionError, apply_attribute_actions, apply_skeleton_actions, chain_design
from morphrl.policy import PolicyState, StageFlag
from morphrl.utils import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_ATTR = (0.5, 0.0, 0.0, 0.0)
MAX_REJECTED_EPISODES = 100


def default_initial_design(n_children_max=3, max_joints=20):
    """Root plus two descendants in a straight horizontal chain, mid-range size and gear."""
    return chain_design(3, DEFAULT_INITIAL_ATTR, n_children_max=n_children_max, max_joints=max_joints)


@dataclass
class EpisodeConfig(object):
    skeleton_transforms: int = 5
    attribute_transforms: int = 1
    initial_design: object = None
    skeleton_stage_enabled: bool = True

    def __post_init__(self):
        if self.skeleton_transforms < 0 or self.attribute_transforms < 0:
            raise ValueError("Transform step counts must be non-negative.")
        if not self.skeleton_stage_enabled:
            self.skeleton_transforms = 0
        if self.initial_design is None:
            self.initial_design = default_initial_design()

    @property
    def transform_steps(self):
        return self.skeleton_transforms + self.attribute_transforms


class Transition(object):
    __slots__ = ('stage', 'design', 'observation', 'action', 'reward', 'log_prob', 'value', 'done')

    def __init__(self, stage, design, observation, action, reward, log_prob, value, done=False):
        self.stage = StageFlag(stage)
        self.design = design
        self.observation = observation
        self.action = action
        self.reward = reward
        self.log_prob = log_prob
        self.value = value
        self.done = done

    def policy_state(self):
        return PolicyState(self.design, self.stage, self.observation)

    def __repr__(self):
        return "Transition(stage={}, joints={}, reward={})".format(self.stage.name, len(self.design), self.reward)


class Episode(object):
    """Transitions of one episode plus what GAE needs to close it off.

    `bootstrap_value` is V(s_T) when the episode was cut short (horizon or batch boundary) and 0 when
    it terminated or the simulator failed.
    """

    def __init__(self, seed):
        self.seed = seed
        self.transitions = []
        self.bootstrap_value = 0.0
        self.terminated = False
        self.truncated = False
        self.failed = False
        self.cut_by_batch = False
        self.final_design = None

    def __len__(self):
        return len(self.transitions)

    @property
    def num_steps(self):
        return sum(1 for t in self.transitions if t.stage == StageFlag.EXECUTION)

    @property
    def episode_return(self):
        return float(sum(t.reward for t in self.transitions))

    @property
    def stages(self):
        return [t.stage for t in self.transitions]


class Memory(object):
    def __init__(self, episodes=None):
        self.episodes = []
        self.total_steps = 0
        for episode in episodes or []:
            self.add(episode)

    def add(self, episode):
        self.episodes.append(episode)
        self.total_steps += episode.num_steps

    def extend(self, other):
        for episode in other.episodes:
            self.add(episode)

    def __len__(self):
        return sum(len(e) for e in self.episodes)

    @property
    def num_episodes(self):
        return len(self.episodes)

    def transitions(self):
        return [t for episode in self.episodes for t in episode.transitions]

    def observations(self):
        """Per-joint execution observations of every step, for observation statistics."""
        return [t.observation for t in self.transitions() if t.stage == StageFlag.EXECUTION]

    def finished_episodes(self):
        finished = [e for e in self.episodes if not e.cut_by_batch]
        return finished or list(self.episodes)

    def returns(self):
        return [e.episode_return for e in self.finished_episodes()]

    @property
    def mean_return(self):
        returns = self.returns()
        return float(np.mean(returns)) if returns else 0.0

    @property
    def max_return(self):
        returns = self.returns()
        return float(np.max(returns)) if returns else 0.0

    def mean_num_joints(self):
        designs = [e.final_design for e in self.finished_episodes() if e.final_design is not None]
        return float(np.mean([len(d) for d in designs])) if designs else 0.0


def collect_episode(policy, env, episode_config, seed, mode='sample', max_steps=None):
    """Run one transform-then-execute episode.

    `max_steps` caps the execution steps (the remaining batch budget); an episode cut there is
    bootstrapped with the value estimate of its last state.
    """
    generator = torch.Generator()
    generator.manual_seed(derive_seed(seed, 'policy'))
    episode = Episode(seed)
    design = episode_config.initial_design

    for stage in transform_stage_schedule(episode_config):
        state = PolicyState(design, stage)
        result = policy.act(state, mode=mode, generator=generator)
        episode.transitions.append(Transition(stage, design, None, result.action, 0.0, result.log_prob,
                                              policy.value(state)))
        if stage == StageFlag.SKELETON:
            design = apply_skeleton_actions(design, result.action)
        else:
            design = apply_attribute_actions(design, result.action)

    episode.final_design = design
    sim = env.build(design, seed=derive_seed(seed, 'env'))
    observation = sim.reset()
    steps = 0

    while True:
        state = PolicyState(design, StageFlag.EXECUTION, observation)
        result = policy.act(state, mode=mode, generator=generator)
        step = sim.step(np.asarray(result.action)[1:, 0])
        transition = Transition(StageFlag.EXECUTION, design, observation, result.action, step.reward,
                                result.log_prob, policy.value(state))
        episode.transitions.append(transition)
        observation = step.observation
        steps += 1

        if step.done:
            transition.done = True
            episode.terminated = step.terminated
            episode.failed = step.failed
            episode.truncated = step.truncated
            if step.truncated:
                episode.bootstrap_value = policy.value(PolicyState(design, StageFlag.EXECUTION, observation))
            break

        if max_steps is not None and steps >= max_steps:
            transition.done = True
            episode.cut_by_batch = True
            episode.bootstrap_value = policy.value(PolicyState(design, StageFlag.EXECUTION, observation))
            break

    return episode


def collect_share(policy, env, episode_config, num_steps, seed, epoch, worker_id=0, mode='sample'):
    """Collect exactly `num_steps` execution steps with episode seeds derived from (seed, epoch, worker id)."""
    memory = Memory()
    index = 0
    rejected = 0
    while memory.total_steps < num_steps:
        episode_seed = derive_seed(seed, epoch, worker_id, index)
        index += 1
        try:
            episode = collect_episode(policy, env, episode_config, episode_seed, mode=mode,
                                      max_steps=num_steps - memory.total_steps)
        except NonFiniteActionError:
            rejected += 1
            logger.warning("Rejected an episode with a non-finite attribute action (%d so far).", rejected)
            if rejected >= MAX_REJECTED_EPISODES:
                raise
            continue
        memory.add(episode)
    return memory


def split_batch(batch_size, workers):
    base, extra = divmod(batch_size, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def collect_batch(policy, env, episode_config, batch_size, seed, epoch=0, pool=None, mode='sample'):
    """Collect `batch_size` execution steps, in-process or split across a RolloutPool."""
    if batch_size <= 0:
        raise ValueError("batch_size must be positive, got {}".format(batch_size))

    if pool is None or pool.workers <= 1:
        return collect_share(policy, env, episode_config, batch_size, seed, epoch, worker_id=0, mode=mode)

    return pool.collect(policy, env, episode_config, split_batch(batch_size, pool.workers), seed, epoch, mode=mode)


def transform_stage_schedule(episode_config):
    return [StageFlag.SKELETON] * episode_config.skeleton_transforms + \
        [StageFlag.ATTRIBUTE] * episode_config.attribute_transforms


def transform_design(policy, episode_config, mode='argmax', generator=None):
    """Run only the transform stages and return the resulting design."""
    design = episode_config.initial_design
    for stage in transform_stage_schedule(episode_config):
        result = policy.act(PolicyState(design, stage), mode=mode, generator=generator)
        if stage == StageFlag.SKELETON:
            design = apply_skeleton_actions(design, result.action)
        else:
            design = apply_attribute_actions(design, result.action)
    return design


def evaluate_design(policy, env, episode_config, episodes, seed):
    """Deterministic (argmax) rollouts; returns (mean return or None, transformed design)."""
    if episodes <= 0:
        return None, transform_design(policy, episode_config)

    design = None
    returns = []
    for i in range(episodes):
        episode = collect_episode(policy, env, episode_config, derive_seed(seed, 'eval', i), mode='argmax')
        design = episode.final_design
        returns.append(episode.episode_return)
    return float(np.mean(returns)), design
