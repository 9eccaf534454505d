import os
import logging
import shutil
import tempfile
from unittest import TestCase

os.environ['MORPHRL_WORKERS'] = "1"
os.environ['MORPHRL_STATSD_HOST'] = os.environ.get('MORPHRL_STATSD_HOST', "127.0.0.1")
os.environ['MORPHRL_RUNS_DIR'] = os.environ.get('MORPHRL_RUNS_DIR', tempfile.mkdtemp(prefix='morphrl-runs-'))

import torch  # noqa: E402

from tests.factories import Factory  # noqa: E402


logging.disable(logging.INFO)
logging.getLogger("metrics").setLevel("ERROR")


class BaseTestCase(TestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.factory = Factory()
        self.tmp_dir = tempfile.mkdtemp(prefix='morphrl-test-')

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def tmp_path(self, *parts):
        return os.path.join(self.tmp_dir, *parts)

    def write_file(self, name, text):
        path = self.tmp_path(name)
        with open(path, 'wb' if isinstance(text, bytes) else 'w') as f:
            f.write(text)
        return path
