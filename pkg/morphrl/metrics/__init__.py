import logging
import time
from contextlib import contextmanager

from morphrl import settings, statsd_client

logger = logging.getLogger(__name__)


def metric_name(name, tags):
    if not settings.STATSD_USE_TAGS or not tags:
        return name

    tags_string = ",".join(["{}={}".format(k, v) for k, v in sorted(tags.items())])
    return "{},{}".format(name, tags_string)


@contextmanager
def timed(name, **tags):
    """Report the wall time of the block to statsd, in milliseconds."""
    start = time.time()
    try:
        yield
    finally:
        run_time = 1000 * (time.time() - start)
        try:
            statsd_client.timing(metric_name(name, tags), run_time)
        except Exception:
            logger.exception("Failed reporting timing for %s.", name)


def gauge(name, value, **tags):
    try:
        statsd_client.gauge(metric_name(name, tags), value)
    except Exception:
        logger.exception("Failed reporting gauge %s.", name)
