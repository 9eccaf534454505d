"""
Population training shared by the evolutionary baselines.

Every species owns a fixed design and an execution-only GNN policy trained with PPO on its own
samples. After each generation the worst `elimination_rate` fraction is replaced by mutated
children of surviving species (unless the method keeps a fixed population).
"""
import copy
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from morphrl.design_graph import SkeletonAction, apply_attribute_actions, apply_skeleton_actions, random_design
from morphrl.metrics import gauge, timed
from morphrl.optim import PolicyOptimizer, ppo_update
from morphrl.policy import Transform2ActPolicy
from morphrl.rollout import EpisodeConfig, collect_batch
from morphrl.utils import derive_seed

logger = logging.getLogger(__name__)


@dataclass
class EvoConfig(object):
    population_size: int = 20
    generations: int = 125
    elimination_rate: float = 0.15
    species_batch_size: int = 20000
    add_joint_prob: float = 0.3
    delete_joint_prob: float = 0.15
    attribute_sigma: float = 0.1

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be positive.")
        if not 0 <= self.elimination_rate <= 1:
            raise ValueError("elimination_rate must be in [0, 1], got {}".format(self.elimination_rate))

    @property
    def num_eliminated(self):
        return int(math.floor(self.elimination_rate * self.population_size + 1e-9))

    @property
    def total_steps(self):
        return self.population_size * self.species_batch_size * self.generations


def mutate_design(design, rng, add_prob, delete_prob, attribute_sigma):
    """Maybe add a child to a random joint, maybe delete a random childless joint, then jitter attributes."""
    if rng.random() < add_prob:
        target = design.bfs_order[int(rng.integers(len(design)))]
        actions = dict((jid, SkeletonAction.NO_CHANGE) for jid in design.bfs_order)
        actions[target] = SkeletonAction.ADD_JOINT
        design = apply_skeleton_actions(design, actions)

    if rng.random() < delete_prob:
        leaves = [node.id for node in design if not node.is_root and not node.children]
        if leaves:
            target = leaves[int(rng.integers(len(leaves)))]
            actions = dict((jid, SkeletonAction.NO_CHANGE) for jid in design.bfs_order)
            actions[target] = SkeletonAction.DEL_JOINT
            design = apply_skeleton_actions(design, actions)

    deltas = rng.normal(0.0, attribute_sigma, size=design.attrs.shape) if attribute_sigma else \
        np.zeros(design.attrs.shape)
    return apply_attribute_actions(design, deltas)


class Species(object):
    def __init__(self, species_id, design, policy, ppo_config, parent_id=None):
        self.id = species_id
        self.design = design
        self.policy = policy
        self.optimizer = PolicyOptimizer(policy, ppo_config)
        self.parent_id = parent_id
        self.fitness = -math.inf
        self.max_return = -math.inf
        self.episode_config = EpisodeConfig(skeleton_transforms=0, attribute_transforms=0, initial_design=design)

    def __repr__(self):
        return "Species(id={}, joints={}, fitness={:.3f})".format(self.id, len(self.design), self.fitness)


class EvolutionResult(object):
    def __init__(self, curve, best_design, best_policy, total_steps):
        self.curve = curve
        self.best_design = best_design
        self.best_policy = best_policy
        self.total_steps = total_steps


class Population(object):
    def __init__(self, method, env, evo_config, policy_config, ppo_config, seed, pool=None):
        self.method = method
        self.pool = pool
        self.env = env
        self.evo_config = evo_config
        self.policy_config = policy_config
        self.ppo_config = ppo_config
        self.seed = seed
        self.rng = np.random.default_rng(derive_seed(seed, method.type(), 'population'))
        self.next_id = 0
        self.species = [self.new_species(self.random_design()) for _ in range(evo_config.population_size)]

    def random_design(self):
        config = self.env.config
        return random_design(self.rng, n_children_max=config.n_children_max, max_joints=config.max_joints)

    def fresh_policy(self, species_id):
        config = replace(self.policy_config, seed=derive_seed(self.seed, 'species', species_id))
        return Transform2ActPolicy(config, self.env.obs_dim)

    def new_species(self, design, policy=None, parent_id=None):
        species_id = self.next_id
        self.next_id += 1
        if policy is None:
            policy = self.fresh_policy(species_id)
        return Species(species_id, design, policy, self.ppo_config, parent_id=parent_id)

    def train_generation(self, generation):
        steps = 0
        for species in self.species:
            memory = collect_batch(species.policy, self.env, species.episode_config,
                                   self.evo_config.species_batch_size, derive_seed(self.seed, species.id),
                                   epoch=generation, pool=self.pool)
            ppo_update(species.policy, species.optimizer, memory, self.ppo_config,
                       seed=derive_seed(self.seed, species.id), epoch=generation)
            species.fitness = memory.mean_return
            species.max_return = memory.max_return
            steps += memory.total_steps
        return steps

    def ranked(self):
        return sorted(self.species, key=lambda s: (-s.fitness, s.id))

    def next_generation(self):
        ranked = self.ranked()
        survivors = ranked[:len(ranked) - self.evo_config.num_eliminated]
        children = []
        for _ in range(len(ranked) - len(survivors)):
            parent = survivors[int(self.rng.integers(len(survivors)))]
            design = mutate_design(parent.design, self.rng, self.evo_config.add_joint_prob,
                                   self.evo_config.delete_joint_prob, self.evo_config.attribute_sigma)
            policy = copy.deepcopy(parent.policy) if self.method.inherit_weights else None
            children.append(self.new_species(design, policy=policy, parent_id=parent.id))
        logger.debug("Replaced species %s with children of %s.",
                     [s.id for s in ranked[len(survivors):]], [c.parent_id for c in children])
        self.species = survivors + children


def run_evolution(method, env, evo_config, policy_config, ppo_config, seed, callback=None, pool=None):
    """Train the population for `evo_config.generations` generations; returns an EvolutionResult.

    `callback(record)` is called once per generation with the curve row.
    """
    population = Population(method, env, evo_config, policy_config, ppo_config, seed, pool=pool)
    curve = []
    total_steps = 0
    best_so_far = -math.inf
    best_design, best_policy = None, None

    for generation in range(evo_config.generations):
        with timed('evolution.generation', method=method.type()):
            total_steps += population.train_generation(generation)

        best = population.ranked()[0]
        if best.fitness > best_so_far:
            best_so_far = best.fitness
            best_design, best_policy = best.design, copy.deepcopy(best.policy)

        record = {
            'epoch': generation,
            'method': method.type(),
            'total_steps': total_steps,
            'mean_return': best_so_far,
            'max_return': max(s.max_return for s in population.species),
            'population_mean': float(np.mean([s.fitness for s in population.species])),
            'num_joints': len(best_design),
        }
        curve.append(record)
        gauge('evolution.best_return', best_so_far, method=method.type())
        logger.info("[%s] generation %d: steps=%d best=%.3f population mean=%.3f", method.type(), generation,
                    total_steps, best_so_far, record['population_mean'])
        if callback is not None:
            callback(record)

        if method.evolve and generation < evo_config.generations - 1:
            population.next_generation()

    return EvolutionResult(curve, best_design, best_policy, total_steps)
