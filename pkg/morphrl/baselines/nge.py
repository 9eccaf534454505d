from morphrl.baselines import BaseBaseline, register
from morphrl.baselines.evolution import run_evolution


class NGE(BaseBaseline):
    """Graph evolution where children start from their parent's GNN policy weights."""
    inherit_weights = True
    evolve = True

    @classmethod
    def name(cls):
        return "NGE-lite"

    def run(self, env, evo_config, policy_config, ppo_config, seed, callback=None, pool=None):
        return run_evolution(self, env, evo_config, policy_config, ppo_config, seed, callback=callback, pool=pool)


def run_nge_lite(env, evo_config, policy_config, ppo_config, seed, callback=None):
    return NGE().run(env, evo_config, policy_config, ppo_config, seed, callback=callback)


register(NGE)
