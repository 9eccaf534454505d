import numpy as np

from morphrl.envs import BaseEnv, EnvConfig, register
from morphrl.envs.physics import Terrain


class GapCrosser(BaseEnv):
    """xz-plane body on 0.5-high terrain with 0.96-wide gaps every 3.2 length units."""
    root_extras_dim = 4

    @classmethod
    def name(cls):
        return "Gap Crosser"

    @classmethod
    def type(cls):
        return "gap"

    @classmethod
    def default_config(cls):
        return EnvConfig(env_kind=cls.type(),
                         dt=0.008,
                         gravity=9.81,
                         terrain='gaps',
                         terrain_height=0.5,
                         gap_width=0.96,
                         gap_period=3.2,
                         alive_bonus=0.1,
                         termination_height=1.0,
                         spawn_height=2.0,
                         joint_range=60.0)

    def phase(self, x):
        return Terrain('gaps', self.config.terrain_height, self.config.gap_width, self.config.gap_period).phase(x)

    def root_extras(self, state):
        x, z = state.root_position
        vx, vz = state.root_velocity
        return np.array([z, vx, vz, self.phase(x)])


register(GapCrosser)
