from morphrl.baselines import BaseBaseline, register
from morphrl.baselines.evolution import run_evolution


class RGS(BaseBaseline):
    """Random graph search: one fixed population of random designs, each trained independently."""
    inherit_weights = False
    evolve = False

    def run(self, env, evo_config, policy_config, ppo_config, seed, callback=None, pool=None):
        return run_evolution(self, env, evo_config, policy_config, ppo_config, seed, callback=callback, pool=pool)


def run_rgs(env, evo_config, policy_config, ppo_config, seed, callback=None):
    return RGS().run(env, evo_config, policy_config, ppo_config, seed, callback=callback)


register(RGS)
