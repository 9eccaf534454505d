import numpy as np

from morphrl.envs import BaseEnv, EnvConfig, register


class Swimmer(BaseEnv):
    """Top-down (xy-plane) body in water: no gravity or ground contact, anisotropic viscous drag.

    Links resist sideways motion ten times more than lengthwise motion, so a bending wave that travels
    from the tail toward the root pushes the body tail first, along +x for the default chain.
    """
    root_extras_dim = 2

    @classmethod
    def type(cls):
        return "swimmer"

    @classmethod
    def default_config(cls):
        return EnvConfig(env_kind=cls.type(),
                         dt=0.04,
                         gravity=0.0,
                         viscosity=0.1,
                         terrain='none',
                         control_weight=0.0001,
                         spawn_height=0.0,
                         joint_range=100.0)

    def root_extras(self, state):
        return np.array(state.root_velocity)


register(Swimmer)
