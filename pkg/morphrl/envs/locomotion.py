import numpy as np

from morphrl.envs import BaseEnv, EnvConfig, register


class Locomotion2D(BaseEnv):
    """xz-plane walker on flat ground at z=0, rewarded by forward speed plus an alive bonus."""
    root_extras_dim = 3

    @classmethod
    def name(cls):
        return "2D Locomotion"

    @classmethod
    def type(cls):
        return "loco2d"

    @classmethod
    def default_config(cls):
        return EnvConfig(env_kind=cls.type(),
                         dt=0.008,
                         gravity=9.81,
                         terrain='flat',
                         terrain_height=0.0,
                         alive_bonus=1.0,
                         termination_height=0.7,
                         spawn_height=1.5,
                         joint_range=60.0)

    def root_extras(self, state):
        vx, vz = state.root_velocity
        return np.array([state.root_position[1], vx, vz])


register(Locomotion2D)
