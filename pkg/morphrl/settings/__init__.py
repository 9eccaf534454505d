import os
from funcy import distinct, remove

from .helpers import fix_runs_path, array_from_string, parse_boolean, int_or_none


def all_settings():
    from types import ModuleType

    settings = {}
    for name, item in globals().items():
        if not callable(item) and not name.startswith("__") and not isinstance(item, ModuleType):
            settings[name] = item

    return settings


STATSD_HOST = os.environ.get('MORPHRL_STATSD_HOST', "127.0.0.1")
STATSD_PORT = int(os.environ.get('MORPHRL_STATSD_PORT', "8125"))
STATSD_PREFIX = os.environ.get('MORPHRL_STATSD_PREFIX', "morphrl")
STATSD_USE_TAGS = parse_boolean(os.environ.get('MORPHRL_STATSD_USE_TAGS', "false"))

LOG_LEVEL = os.environ.get("MORPHRL_LOG_LEVEL", "INFO")
LOG_STDOUT = parse_boolean(os.environ.get('MORPHRL_LOG_STDOUT', 'false'))
LOG_PREFIX = os.environ.get('MORPHRL_LOG_PREFIX', '')
LOG_FORMAT = os.environ.get('MORPHRL_LOG_FORMAT', LOG_PREFIX + '[%(asctime)s][PID:%(process)d][%(levelname)s][%(name)s] %(message)s')
WORKER_LOG_FORMAT = os.environ.get(
    "MORPHRL_WORKER_LOG_FORMAT",
    LOG_PREFIX + '[%(asctime)s][PID:%(process)d][%(levelname)s][%(processName)s] %(message)s')

# Number of rollout worker processes. With 1 worker, episodes are collected in the training process.
WORKERS = int(os.environ.get("MORPHRL_WORKERS", "1"))
# Torch intra-op threads per rollout worker; the small graphs don't benefit from more.
WORKER_TORCH_THREADS = int(os.environ.get("MORPHRL_WORKER_TORCH_THREADS", "1"))

# Where `train` puts run directories when the experiment config doesn't name one.
RUNS_DIR = fix_runs_path(os.environ.get("MORPHRL_RUNS_DIR", "runs"))
CHECKPOINT_EVERY = int(os.environ.get("MORPHRL_CHECKPOINT_EVERY", "50"))
KEEP_CHECKPOINTS = int_or_none(os.environ.get("MORPHRL_KEEP_CHECKPOINTS", None))

# Environments
default_envs = [
    'morphrl.envs.locomotion',
    'morphrl.envs.swimmer',
    'morphrl.envs.gap_crosser',
    'morphrl.envs.reward3d',
]

enabled_envs = array_from_string(os.environ.get("MORPHRL_ENABLED_ENVS", ",".join(default_envs)))
additional_envs = array_from_string(os.environ.get("MORPHRL_ADDITIONAL_ENVS", ""))
disabled_envs = array_from_string(os.environ.get("MORPHRL_DISABLED_ENVS", ""))

ENVS = list(remove(set(disabled_envs), distinct(enabled_envs + additional_envs)))

# Evolutionary baselines
default_baselines = [
    'morphrl.baselines.nge',
    'morphrl.baselines.ess',
    'morphrl.baselines.rgs',
]

enabled_baselines = array_from_string(os.environ.get("MORPHRL_ENABLED_BASELINES", ",".join(default_baselines)))
additional_baselines = array_from_string(os.environ.get("MORPHRL_ADDITIONAL_BASELINES", ""))

BASELINES = list(distinct(enabled_baselines + additional_baselines))
