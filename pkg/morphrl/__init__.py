import sys
import logging

from statsd import StatsClient

from morphrl import settings
from morphrl.envs import import_envs
from morphrl.baselines import import_baselines


__version__ = '1.0.0'


def setup_logging():
    handler = logging.StreamHandler(sys.stdout if settings.LOG_STDOUT else sys.stderr)
    formatter = logging.Formatter(settings.LOG_FORMAT)
    handler.setFormatter(formatter)
    logging.getLogger().addHandler(handler)
    logging.getLogger().setLevel(settings.LOG_LEVEL)

    # Make noisy libraries less noisy
    if settings.LOG_LEVEL != "DEBUG":
        logging.getLogger("matplotlib").setLevel("ERROR")
        logging.getLogger("PIL").setLevel("ERROR")


setup_logging()
statsd_client = StatsClient(host=settings.STATSD_HOST, port=settings.STATSD_PORT, prefix=settings.STATSD_PREFIX)

import_envs(settings.ENVS)
import_baselines(settings.BASELINES)
