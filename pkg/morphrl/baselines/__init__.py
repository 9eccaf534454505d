import logging

logger = logging.getLogger(__name__)

__all__ = [
    'BaseBaseline',
    'register',
    'get_baseline',
    'import_baselines'
]


class BaseBaseline(object):
    """An evolutionary design-search method trained under the same simulation budget as Transform2Act."""
    # children start from their parent's policy weights
    inherit_weights = False
    # select and mutate between generations (False: one fixed random population)
    evolve = True

    @classmethod
    def name(cls):
        return cls.__name__

    @classmethod
    def type(cls):
        return cls.__name__.lower()

    @classmethod
    def enabled(cls):
        return True

    def run(self, env, evo_config, policy_config, ppo_config, seed, callback=None, pool=None):
        raise NotImplementedError()


baselines = {}


def register(baseline_class):
    global baselines
    if baseline_class.enabled():
        logger.debug("Registering %s (%s) baseline.", baseline_class.name(), baseline_class.type())
        baselines[baseline_class.type()] = baseline_class
    else:
        logger.debug("%s baseline enabled but not supported, not registering.", baseline_class.name())


def get_baseline(baseline_type):
    baseline_class = baselines.get(baseline_type, None)
    if baseline_class is None:
        return None

    return baseline_class()


def import_baselines(baseline_imports):
    for baseline_import in baseline_imports:
        __import__(baseline_import)
