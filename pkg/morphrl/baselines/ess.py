from morphrl.baselines import BaseBaseline, register
from morphrl.baselines.evolution import run_evolution


class ESS(BaseBaseline):
    """Evolutionary structure search: mutated children are trained from freshly initialized policies."""
    inherit_weights = False
    evolve = True

    def run(self, env, evo_config, policy_config, ppo_config, seed, callback=None, pool=None):
        return run_evolution(self, env, evo_config, policy_config, ppo_config, seed, callback=callback, pool=pool)


def run_ess(env, evo_config, policy_config, ppo_config, seed, callback=None):
    return ESS().run(env, evo_config, policy_config, ppo_config, seed, callback=callback)


register(ESS)
