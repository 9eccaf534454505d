import datetime
import hashlib
import re

import numpy as np
import simplejson


def slugify(s):
    return re.sub(r'[^a-z0-9_\-]+', '-', s.lower())


def derive_seed(*parts):
    """Return a 63-bit seed determined only by `parts`.

    Used wherever independent random streams must not depend on the order in which they are requested
    (rollout workers, lazily created network blocks, species in a population).
    """
    key = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') >> 1


class JSONEncoder(simplejson.JSONEncoder):
    """Custom JSON encoding class, to handle numpy scalars/arrays and datetime instances."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)

        if isinstance(o, np.floating):
            return float(o)

        if isinstance(o, np.ndarray):
            return o.tolist()

        if isinstance(o, (datetime.date, datetime.time)):
            return o.isoformat()

        return super(JSONEncoder, self).default(o)


def json_dumps(data, **kwargs):
    return simplejson.dumps(data, cls=JSONEncoder, ignore_nan=True, **kwargs)
