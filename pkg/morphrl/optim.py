"""
PPO with a clipped surrogate and GAE, updating all three sub-policies and the value net from
mixed-stage batches. Transform-stage transitions earn no reward; their advantages come entirely
from the execution rewards that follow them in the same episode.
"""
import logging
from dataclasses import dataclass

import numpy as np
import torch

from morphrl.networks import DTYPE
from morphrl.utils import derive_seed

logger = logging.getLogger(__name__)


class ContractViolation(Exception):
    pass


@dataclass
class PpoConfig(object):
    clip_epsilon: float = 0.2
    policy_lr: float = 5e-5
    value_lr: float = 3e-4
    gamma: float = 0.995
    gae_lambda: float = 0.95
    batch_size: int = 50000
    minibatch_size: int = 2048
    iterations: int = 10
    epochs: int = 1000
    entropy_coef: float = 0.0
    normalize_advantages: bool = True
    max_grad_norm: float = 40.0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1], got {}".format(self.gamma))
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1], got {}".format(self.gae_lambda))
        if not self.clip_epsilon > 0:
            raise ValueError("clip_epsilon must be positive, got {}".format(self.clip_epsilon))
        if self.minibatch_size < 1 or self.iterations < 0:
            raise ValueError("minibatch_size must be positive and iterations non-negative.")


def compute_gae(rewards, values, dones, gamma, lam, last_value=0.0):
    """Generalized advantage estimates and value targets for one aligned sequence.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t); A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}.
    V(s_{T}) past the last step is `last_value`.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not (rewards.shape == values.shape == dones.shape) or rewards.ndim != 1:
        raise ContractViolation("rewards, values and dones must be aligned 1-D sequences, got {}, {}, {}".format(
            rewards.shape, values.shape, dones.shape))

    advantages = np.zeros_like(rewards)
    gae = 0.0
    next_value = last_value
    for t in reversed(range(rewards.shape[0])):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        advantages[t] = gae
        next_value = values[t]
    return advantages, advantages + values


def episode_advantages(episode, gamma, lam):
    rewards = [t.reward for t in episode.transitions]
    values = [t.value for t in episode.transitions]
    dones = np.zeros(len(rewards))
    if episode.terminated or episode.failed:
        dones[-1] = 1.0
    return compute_gae(rewards, values, dones, gamma, lam, last_value=episode.bootstrap_value)


def memory_advantages(memory, gamma, lam):
    """Advantages and returns for every transition of a Memory, in `memory.transitions()` order."""
    advantages, returns = [], []
    for episode in memory.episodes:
        adv, ret = episode_advantages(episode, gamma, lam)
        advantages.append(adv)
        returns.append(ret)
    if not advantages:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(advantages), np.concatenate(returns)


def normalize_advantages(advantages):
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.size == 0:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def clipped_surrogate(ratio, advantages, clip_epsilon):
    """Per-sample min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)."""
    return torch.min(ratio * advantages, torch.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages)


def ppo_policy_loss(log_probs, old_log_probs, advantages, clip_epsilon, entropies=None, entropy_coef=0.0):
    ratio = torch.exp(log_probs - old_log_probs)
    loss = -clipped_surrogate(ratio, advantages, clip_epsilon).mean()
    if entropies is not None and entropy_coef:
        loss = loss - entropy_coef * entropies.mean()
    return loss, ratio


class AdamOptimizer(object):
    """Adam over one parameter group of a ParamStore.

    Parameters created after construction (new JSMLP blocks) are added on the next step; steps with
    non-finite gradients are skipped.
    """

    def __init__(self, store, group, lr, betas=(0.9, 0.999), eps=1e-8, max_grad_norm=None):
        self.store = store
        self.group = group
        self.max_grad_norm = max_grad_norm
        self.skipped_steps = 0
        self._known = set()
        self.optimizer = torch.optim.Adam(self._new_parameters(), lr=lr, betas=betas, eps=eps)

    def _new_parameters(self):
        params = [p for p in self.store.parameters(self.group) if id(p) not in self._known]
        self._known.update(id(p) for p in params)
        return params

    def sync(self):
        params = self._new_parameters()
        if params:
            self.optimizer.add_param_group({'params': params})

    def step(self):
        self.sync()
        if not self.store.grads_finite(self.group):
            self.skipped_steps += 1
            logger.warning("Non-finite gradient in %s parameters; skipping the optimizer step.", self.group)
            return False

        params = self.store.parameters(self.group)
        if self.max_grad_norm:
            torch.nn.utils.clip_grad_norm_(params, self.max_grad_norm)
        self.optimizer.step()
        return True

    def state_dict(self):
        """Moments keyed by parameter name, so a restored policy may create its blocks in any order."""
        state = {}
        for name, param in self.store.named_parameters(self.group):
            if param in self.optimizer.state:
                state[name] = dict(self.optimizer.state[param])
        return {'lr': self.optimizer.param_groups[0]['lr'], 'state': state}

    def load_state_dict(self, saved):
        self.sync()
        for name, param in self.store.named_parameters(self.group):
            if name in saved['state']:
                self.optimizer.state[param] = dict(saved['state'][name])
        for group in self.optimizer.param_groups:
            group['lr'] = saved['lr']


class PolicyOptimizer(object):
    """Separate Adam optimizers for the policy (theta) and value (phi) parameters."""

    def __init__(self, policy, config):
        self.store = policy.param_store()
        self.policy = AdamOptimizer(self.store, 'policy', config.policy_lr, max_grad_norm=config.max_grad_norm)
        self.value = AdamOptimizer(self.store, 'value', config.value_lr, max_grad_norm=config.max_grad_norm)

    def zero_grad(self):
        self.store.zero_grad()

    def backward(self, loss):
        self.store.backward(loss)

    def step(self):
        return self.policy.step(), self.value.step()

    def state_dict(self):
        return {'policy': self.policy.state_dict(), 'value': self.value.state_dict()}

    def load_state_dict(self, saved):
        self.policy.load_state_dict(saved['policy'])
        self.value.load_state_dict(saved['value'])


class UpdateStats(object):
    def __init__(self, policy_loss=0.0, value_loss=0.0, kl=0.0, clip_fraction=0.0, minibatches=0, skipped_steps=0):
        self.policy_loss = policy_loss
        self.value_loss = value_loss
        self.kl = kl
        self.clip_fraction = clip_fraction
        self.minibatches = minibatches
        self.skipped_steps = skipped_steps

    def to_dict(self):
        return dict(policy_loss=self.policy_loss, value_loss=self.value_loss, kl=self.kl,
                    clip_fraction=self.clip_fraction)


def ppo_update(policy, optimizer, memory, config, seed=0, epoch=0):
    """Run `config.iterations` passes of shuffled minibatch PPO over the memory."""
    transitions = memory.transitions()
    if not transitions:
        return UpdateStats()

    advantages, returns = memory_advantages(memory, config.gamma, config.gae_lambda)
    if config.normalize_advantages:
        advantages = normalize_advantages(advantages)
    advantages = torch.as_tensor(advantages, dtype=DTYPE)
    returns = torch.as_tensor(returns, dtype=DTYPE)
    old_log_probs = torch.tensor([t.log_prob for t in transitions], dtype=DTYPE)

    rng = np.random.default_rng(derive_seed(seed, epoch, 'ppo'))
    policy_losses, value_losses, kls, clip_fractions = [], [], [], []
    skipped_before = optimizer.policy.skipped_steps + optimizer.value.skipped_steps

    for _ in range(config.iterations):
        order = rng.permutation(len(transitions))
        for start in range(0, len(order), config.minibatch_size):
            idx = torch.as_tensor(order[start:start + config.minibatch_size])
            minibatch = [transitions[i] for i in idx.tolist()]

            log_probs, entropies, values = policy.evaluate(minibatch)
            policy_loss, ratio = ppo_policy_loss(log_probs, old_log_probs[idx], advantages[idx],
                                                 config.clip_epsilon, entropies, config.entropy_coef)
            value_loss = ((values - returns[idx]) ** 2).mean()

            optimizer.zero_grad()
            optimizer.backward(policy_loss + value_loss)
            optimizer.step()

            with torch.no_grad():
                policy_losses.append(float(policy_loss))
                value_losses.append(float(value_loss))
                kls.append(float((old_log_probs[idx] - log_probs).mean()))
                clip_fractions.append(float(((ratio - 1.0).abs() > config.clip_epsilon).double().mean()))

    if not policy_losses:
        return UpdateStats()
    skipped = optimizer.policy.skipped_steps + optimizer.value.skipped_steps - skipped_before
    return UpdateStats(float(np.mean(policy_losses)), float(np.mean(value_losses)), float(np.mean(kls)),
                       float(np.mean(clip_fractions)), len(policy_losses), skipped)
