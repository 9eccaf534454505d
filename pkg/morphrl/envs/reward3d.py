from morphrl.envs import BaseEnv, EnvConfig, NotSupported, register


class Reward3D(BaseEnv):
    """3D Locomotion reward only; there is no 3D simulator behind it."""

    @classmethod
    def name(cls):
        return "3D Locomotion (reward only)"

    @classmethod
    def type(cls):
        return "reward3d-test"

    @classmethod
    def default_config(cls):
        return EnvConfig(env_kind=cls.type(),
                         dt=0.04,
                         n_children_max=2,
                         control_weight=0.0001)

    def build(self, design, seed=0):
        raise NotSupported("{} has no dynamics; only its reward formula can be evaluated.".format(self.name()))


register(Reward3D)
