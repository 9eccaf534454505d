"""
The Transform2Act policy: one conditional policy that edits a design and then controls it.

The stage flag picks the sub-policy: a per-joint categorical over skeleton edits, a per-joint
Gaussian over attribute deltas, or a per-joint Gaussian over motor actions. Every sub-policy is a
GNN followed by a joint-specialized MLP and a linear output layer; the value network is a separate
GNN + MLP read out at the root joint.
"""
import enum
import logging
import math
import re
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.distributions import Categorical, Normal

from morphrl.design_graph import ATTR_DIM, SkeletonAction
from morphrl.networks import (DTYPE, GNN, MLP, OUTPUT_INIT_SCALE, JsmlpHead, NodeFeatureBatch, ParamStore,
                              init_linear, make_generator)

logger = logging.getLogger(__name__)

NUM_SKELETON_ACTIONS = len(SkeletonAction)
CONTROL_DIM = 1


class StageContractError(Exception):
    pass


class DataCorruptionError(Exception):
    pass


class StageFlag(enum.IntEnum):
    SKELETON = 0
    ATTRIBUTE = 1
    EXECUTION = 2

    @property
    def one_hot(self):
        vec = np.zeros(len(StageFlag))
        vec[int(self)] = 1.0
        return vec

    @property
    def is_transform(self):
        return self != StageFlag.EXECUTION


@dataclass
class PolicyConfig(object):
    gnn_sizes: tuple = (64, 64, 64)
    jsmlp_sizes: tuple = (128, 128)
    value_gnn_sizes: tuple = (64, 64, 64)
    value_mlp_sizes: tuple = (512, 256)
    attribute_init_std: float = 0.1
    control_init_std: float = 1.0
    use_gnn: bool = True
    transform_jsmlp: bool = True
    control_jsmlp: bool = True
    normalize_observations: bool = False
    seed: int = 0


class PolicyState(object):
    """(s^e, D_t, Phi_t); `observation` is None in the transform stages."""

    def __init__(self, design, stage, observation=None):
        self.design = design
        self.stage = StageFlag(stage)
        self.observation = observation


class ActResult(object):
    def __init__(self, action, log_prob):
        self.action = action
        self.log_prob = log_prob


class RunningMeanStd(nn.Module):
    """Welford running mean/variance of per-joint observations, stored as buffers."""

    def __init__(self, dim, clip=5.0):
        super(RunningMeanStd, self).__init__()
        self.clip = clip
        self.register_buffer('mean', torch.zeros(dim, dtype=DTYPE))
        self.register_buffer('var', torch.ones(dim, dtype=DTYPE))
        self.register_buffer('count', torch.tensor(1e-4, dtype=DTYPE))

    def update(self, batch):
        batch = torch.as_tensor(np.asarray(batch, dtype=np.float64))
        if batch.shape[0] == 0:
            return
        batch_mean = batch.mean(dim=0)
        batch_var = batch.var(dim=0, unbiased=False)
        batch_count = batch.shape[0]

        delta = batch_mean - self.mean
        total = self.count + batch_count
        m_a = self.var * self.count
        m_b = batch_var * batch_count
        self.mean.add_(delta * batch_count / total)
        self.var.copy_((m_a + m_b + delta ** 2 * self.count * batch_count / total) / total)
        self.count.fill_(float(total))

    def normalize(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        normed = (obs - self.mean.numpy()) / np.sqrt(self.var.numpy() + 1e-8)
        return np.clip(normed, -self.clip, self.clip)


class SubPolicy(nn.Module):
    """GNN -> JSMLP -> linear output, producing one output row per joint."""

    def __init__(self, name, in_dim, out_dim, config, use_jsmlp):
        super(SubPolicy, self).__init__()
        self.name = name
        self.gnn = GNN(in_dim, config.gnn_sizes, make_generator(config.seed, name, 'gnn'), enabled=config.use_gnn)
        self.jsmlp = JsmlpHead(name, self.gnn.out_dim, config.jsmlp_sizes, config.seed, enabled=use_jsmlp)
        self.output = init_linear(nn.Linear(self.jsmlp.out_dim, out_dim, dtype=DTYPE),
                                  make_generator(config.seed, name, 'output'),
                                  scale=OUTPUT_INIT_SCALE, zero_bias=True)

    def forward(self, batch):
        hidden = self.gnn(batch)
        hidden = self.jsmlp(hidden, batch.index_ints)
        return self.output(hidden)


class Actor(nn.Module):
    """All policy parameters theta: the three sub-policies and the shared log-stds of Sigma^z, Sigma^e."""

    def __init__(self, config, obs_dim):
        super(Actor, self).__init__()
        self.skeleton = SubPolicy('skeleton', ATTR_DIM, NUM_SKELETON_ACTIONS, config, config.transform_jsmlp)
        self.attribute = SubPolicy('attribute', ATTR_DIM, ATTR_DIM, config, config.transform_jsmlp)
        self.control = SubPolicy('control', obs_dim + ATTR_DIM, CONTROL_DIM, config, config.control_jsmlp)
        self.attribute_log_std = nn.Parameter(torch.full((ATTR_DIM,), math.log(config.attribute_init_std),
                                                         dtype=DTYPE))
        self.control_log_std = nn.Parameter(torch.full((CONTROL_DIM,), math.log(config.control_init_std),
                                                       dtype=DTYPE))

    def sub_policies(self):
        return (self.skeleton, self.attribute, self.control)


class ValueNet(nn.Module):
    """Value GNN over [s^e or zeros, attributes, one-hot stage], MLP head, root joint readout."""

    def __init__(self, config, obs_dim):
        super(ValueNet, self).__init__()
        in_dim = obs_dim + ATTR_DIM + len(StageFlag)
        self.gnn = GNN(in_dim, config.value_gnn_sizes, make_generator(config.seed, 'value', 'gnn'),
                       enabled=config.use_gnn)
        self.mlp = MLP(self.gnn.out_dim, config.value_mlp_sizes, make_generator(config.seed, 'value', 'mlp'))
        self.output = init_linear(nn.Linear(self.mlp.out_dim, 1, dtype=DTYPE),
                                  make_generator(config.seed, 'value', 'output'), zero_bias=True)

    def forward(self, batch):
        hidden = self.gnn(batch).index_select(0, batch.root_positions)
        return self.output(self.mlp(hidden)).squeeze(-1)


BLOCK_KEY_RE = re.compile(r'^actor\.(skeleton|attribute|control)\.jsmlp\.blocks\.(\d+)\.')


class Transform2ActPolicy(nn.Module):
    def __init__(self, config, obs_dim):
        super(Transform2ActPolicy, self).__init__()
        self.config = config
        self.obs_dim = obs_dim
        self.actor = Actor(config, obs_dim)
        self.value_net = ValueNet(config, obs_dim)
        self.obs_rms = RunningMeanStd(obs_dim) if config.normalize_observations else None

    def param_store(self):
        return ParamStore(OrderedDict([('policy', self.actor), ('value', self.value_net)]))

    # -- features --

    def _observation(self, observation):
        if self.obs_rms is not None:
            return self.obs_rms.normalize(observation)
        return np.asarray(observation, dtype=np.float64)

    def check_state(self, state):
        if state.stage == StageFlag.EXECUTION:
            if state.observation is None:
                raise StageContractError("Execution stage needs an environment observation.")
            obs = np.asarray(state.observation)
            if obs.shape != (len(state.design), self.obs_dim):
                raise StageContractError("Observation shape {} does not match a {}-joint design with width {}.".format(
                    obs.shape, len(state.design), self.obs_dim))
        elif state.observation is not None:
            raise StageContractError("{} stage does not take an environment observation.".format(state.stage.name))

    def policy_features(self, state):
        attrs = state.design.attrs
        if state.stage == StageFlag.EXECUTION:
            return np.concatenate([self._observation(state.observation), attrs], axis=1)
        return attrs

    def value_features(self, state):
        num_joints = len(state.design)
        if state.stage == StageFlag.EXECUTION and state.observation is not None:
            obs = self._observation(state.observation)
        else:
            obs = np.zeros((num_joints, self.obs_dim))
        stage = np.broadcast_to(state.stage.one_hot, (num_joints, len(StageFlag)))
        return np.concatenate([obs, state.design.attrs, stage], axis=1)

    # -- distributions --

    def _sub_policy(self, stage):
        return self.actor.sub_policies()[int(stage)]

    def distribution(self, stage, batch):
        """Per-joint distribution of one stage over a NodeFeatureBatch."""
        out = self._sub_policy(stage)(batch)
        if stage == StageFlag.SKELETON:
            return Categorical(logits=out)
        log_std = self.actor.attribute_log_std if stage == StageFlag.ATTRIBUTE else self.actor.control_log_std
        return Normal(out, log_std.exp().expand_as(out))

    def ensure_blocks(self, designs):
        index_ints = set()
        for design in designs:
            index_ints.update(design.index_ints())
        for sub_policy in self.actor.sub_policies():
            sub_policy.jsmlp.ensure_blocks(index_ints)

    # -- operations --

    @torch.no_grad()
    def act(self, state, mode='sample', generator=None):
        """Sample (or take the most likely) per-joint action; log_prob is summed over joints."""
        self.check_state(state)
        batch = NodeFeatureBatch.from_designs([state.design], [self.policy_features(state)])
        dist = self.distribution(state.stage, batch)

        if state.stage == StageFlag.SKELETON:
            if mode == 'argmax':
                action = torch.argmax(dist.logits, dim=-1)
            else:
                action = torch.multinomial(dist.probs, 1, generator=generator).squeeze(-1)
        else:
            if mode == 'argmax':
                action = dist.mean.clone()
            else:
                noise = torch.randn(dist.mean.shape, generator=generator, dtype=DTYPE)
                action = dist.mean + dist.stddev * noise

        log_prob = dist.log_prob(action)
        if log_prob.dim() > 1:
            log_prob = log_prob.sum(-1)
        return ActResult(action.numpy(), float(log_prob.sum()))

    @torch.no_grad()
    def value(self, state):
        batch = NodeFeatureBatch.from_designs([state.design], [self.value_features(state)])
        return float(self.value_net(batch)[0])

    def values(self, states):
        batch = NodeFeatureBatch.from_designs([s.design for s in states], [self.value_features(s) for s in states])
        return self.value_net(batch)

    def evaluate(self, transitions):
        """Recompute (log_probs, entropies, values) of stored transitions under the current parameters."""
        count = len(transitions)
        log_probs = [None] * count
        entropies = [None] * count

        by_stage = OrderedDict()
        for i, transition in enumerate(transitions):
            by_stage.setdefault(StageFlag(transition.stage), []).append(i)

        for stage in sorted(by_stage):
            positions = by_stage[stage]
            states = [transitions[i].policy_state() for i in positions]
            actions = []
            for i, state in zip(positions, states):
                action = np.asarray(transitions[i].action)
                if action.shape[0] != len(state.design):
                    raise DataCorruptionError("Transition {} stores {} joint actions for a {}-joint design.".format(
                        i, action.shape[0], len(state.design)))
                actions.append(action)

            batch = NodeFeatureBatch.from_designs([s.design for s in states], [self.policy_features(s) for s in states])
            dist = self.distribution(stage, batch)
            if stage == StageFlag.SKELETON:
                action = torch.as_tensor(np.concatenate(actions).astype(np.int64))
                joint_log_prob = dist.log_prob(action)
                joint_entropy = dist.entropy()
            else:
                action = torch.as_tensor(np.concatenate(actions).astype(np.float64))
                joint_log_prob = dist.log_prob(action).sum(-1)
                joint_entropy = dist.entropy().sum(-1)

            graph_log_prob = batch.sum_per_graph(joint_log_prob)
            graph_entropy = batch.sum_per_graph(joint_entropy)
            for k, i in enumerate(positions):
                log_probs[i] = graph_log_prob[k]
                entropies[i] = graph_entropy[k]

        values = self.values([t.policy_state() for t in transitions])
        return torch.stack(log_probs), torch.stack(entropies), values

    # -- snapshots --

    def snapshot(self):
        """State dict that `load_snapshot` can restore into a freshly built policy (lazy JSMLP blocks included)."""
        return OrderedDict((k, v.detach().clone()) for k, v in self.state_dict().items())

    def load_snapshot(self, state_dict):
        blocks = {}
        for key in state_dict:
            match = BLOCK_KEY_RE.match(key)
            if match:
                blocks.setdefault(match.group(1), set()).add(int(match.group(2)))
        for name, indices in blocks.items():
            getattr(self.actor, name).jsmlp.ensure_blocks(indices)
        self.load_state_dict(state_dict)

    def update_observation_stats(self, observations):
        if self.obs_rms is not None and len(observations):
            self.obs_rms.update(np.concatenate(observations))
