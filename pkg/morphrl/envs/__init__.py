import logging
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from morphrl.envs.physics import BodyModel, World
from morphrl.envs.rewards import reward_formula

logger = logging.getLogger(__name__)

__all__ = [
    'BaseEnv',
    'EnvConfig',
    'Simulation',
    'StepResult',
    'NotSupported',
    'DesignRejected',
    'register',
    'get_env',
    'make_env',
    'import_envs'
]


class NotSupported(Exception):
    pass


class DesignRejected(Exception):
    pass


@dataclass(frozen=True)
class EnvConfig(object):
    env_kind: str
    dt: float
    substeps: int = 4
    gravity: float = 9.81
    viscosity: float = 0.0
    terrain: str = 'flat'
    terrain_height: float = 0.0
    gap_width: float = 0.96
    gap_period: float = 3.2
    n_children_max: int = 3
    max_joints: int = 20
    horizon: int = 1000
    alive_bonus: float = 0.0
    termination_height: float = None
    control_weight: float = 0.0
    spawn_height: float = 1.5
    joint_range: float = 60.0
    bone_scale: float = 1.0
    bone_length_range: tuple = (0.1, 1.0)
    bone_size_range: tuple = (0.02, 0.12)
    gear_range: tuple = (10.0, 300.0)
    density: float = 1000.0
    init_noise: float = 0.0
    contact_tolerance: float = 0.005

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive, got {}".format(self.dt))
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1, got {}".format(self.substeps))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1, got {}".format(self.horizon))

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class StepResult(object):
    def __init__(self, observation, reward, done, terminated=False, truncated=False, failed=False):
        self.observation = observation
        self.reward = reward
        self.done = done
        self.terminated = terminated
        self.truncated = truncated
        self.failed = failed


class BaseEnv(object):
    # width of the root-only entries appended to [joint angle, joint velocity]
    root_extras_dim = 0

    def __init__(self, config):
        self.config = config

    @classmethod
    def name(cls):
        return cls.__name__

    @classmethod
    def type(cls):
        return cls.__name__.lower()

    @classmethod
    def enabled(cls):
        return True

    @classmethod
    def default_config(cls):
        raise NotImplementedError()

    @classmethod
    def configuration(cls, **overrides):
        return replace(cls.default_config(), **overrides)

    @property
    def obs_dim(self):
        return 2 + self.root_extras_dim

    def check_design(self, design):
        too_many = [str(node.index_string) for node in design if len(node.children) > self.config.n_children_max]
        if too_many:
            raise DesignRejected("Joints {} have more than {} children.".format(
                ", ".join(too_many), self.config.n_children_max))
        if len(design) > self.config.max_joints:
            raise DesignRejected("Design has {} joints, more than {}.".format(len(design), self.config.max_joints))

    def build(self, design, seed=0):
        self.check_design(design)
        return Simulation(self, design, seed)

    def root_extras(self, state):
        return np.zeros(self.root_extras_dim)

    def terminated(self, state):
        limit = self.config.termination_height
        return limit is not None and state.root_position[1] < limit

    def reward(self, dx, actions, num_joints):
        return reward_formula(self.config.env_kind, dx, self.config.dt, actions, num_joints,
                              alive_bonus=self.config.alive_bonus, control_weight=self.config.control_weight)

    def observation(self, state):
        """Per-joint [angle, velocity, root extras | zero padding], breadth-first order."""
        num_joints = state.q.shape[0] - 2
        obs = np.zeros((num_joints, self.obs_dim))
        obs[:, 0] = state.joint_angles
        obs[:, 1] = state.joint_velocities
        if self.root_extras_dim:
            obs[0, 2:] = self.root_extras(state)
        return obs


class Simulation(object):
    """One articulated body living in one environment."""

    def __init__(self, env, design, seed=0):
        self.env = env
        self.config = env.config
        self.design = design
        self.model = BodyModel(design, self.config)
        self.world = World.from_config(self.config)
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.q = None
        self.qd = None
        self.reset()

    @property
    def num_joints(self):
        return self.model.num_links

    @property
    def action_dim(self):
        return self.model.num_links - 1

    @property
    def state(self):
        return self.model.state(self.q, self.qd)

    def reset(self):
        q = self.model.rest_q(self.model.spawn_position(self.world, 0.0, self.config.spawn_height))
        qd = np.zeros(self.model.ndof)
        if self.config.init_noise:
            q[2:] += self.rng.uniform(-self.config.init_noise, self.config.init_noise, self.model.num_links)
            qd[2:] += self.config.init_noise * self.rng.standard_normal(self.model.num_links)
        self.q, self.qd = q, qd
        self.t = 0
        return self.env.observation(self.state)

    def step(self, actions):
        actions = np.asarray(actions, dtype=np.float64).reshape(-1)
        if actions.shape[0] != self.action_dim:
            raise ValueError("Expected {} actuated joint actions, got {}.".format(self.action_dim, actions.shape[0]))

        applied = np.clip(actions, -1.0, 1.0)
        if not np.all(np.isfinite(applied)):
            applied = np.nan_to_num(applied)
        torques = self.model.gears[1:] * applied

        x_before = self.q[0]
        q, qd, failed = self.model.step(self.q, self.qd, torques, self.world, self.config.dt, self.config.substeps)
        self.t += 1

        if failed:
            logger.warning("Physics failure at step %d of a %d-joint design; truncating episode.",
                           self.t, self.num_joints)
            return StepResult(self.env.observation(self.model.state(self.q, self.qd)), 0.0, True, failed=True)

        self.q, self.qd = q, qd
        state = self.state
        reward = self.env.reward(self.q[0] - x_before, applied, self.num_joints)
        terminated = bool(self.env.terminated(state))
        truncated = not terminated and self.t >= self.config.horizon
        return StepResult(self.env.observation(state), reward, terminated or truncated,
                          terminated=terminated, truncated=truncated)

    def penetration(self):
        """Deepest capsule penetration into the ground (0 when nothing touches)."""
        state = self.state
        points = np.concatenate([state.starts, state.ends])
        radii = np.concatenate([self.model.radii, self.model.radii])
        ground = self.world.terrain.height_at(points[:, 0])
        depth = np.where(np.isfinite(ground), ground + radii - points[:, 1], -math.inf)
        return max(0.0, float(depth.max()))

    def kinetic_energy(self):
        return self.model.kinetic_energy(self.q, self.qd)


envs = {}


def register(env_class):
    global envs
    if env_class.enabled():
        logger.debug("Registering %s (%s) environment.", env_class.name(), env_class.type())
        envs[env_class.type()] = env_class
    else:
        logger.debug("%s environment enabled but not supported, not registering.", env_class.name())


def get_env(env_type):
    return envs.get(env_type, None)


def make_env(env_type, **overrides):
    env_class = get_env(env_type)
    if env_class is None:
        raise KeyError("Unknown environment: {}".format(env_type))
    return env_class(env_class.configuration(**overrides))


def import_envs(env_imports):
    for env_import in env_imports:
        __import__(env_import)
