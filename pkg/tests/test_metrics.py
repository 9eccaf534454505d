import mock

from morphrl import metrics
from tests import BaseTestCase


class TestMetrics(BaseTestCase):
    def test_metric_name_without_tags(self):
        self.assertEqual('train.collect', metrics.metric_name('train.collect', {'env': 'gap'}))

    def test_metric_name_with_tags(self):
        with mock.patch('morphrl.settings.STATSD_USE_TAGS', True):
            self.assertEqual('train.collect,env=gap,method=nge',
                             metrics.metric_name('train.collect', {'method': 'nge', 'env': 'gap'}))

    def test_timed_reports_milliseconds(self):
        with mock.patch('morphrl.metrics.statsd_client') as client:
            with metrics.timed('train.update'):
                pass
        name, run_time = client.timing.call_args[0]
        self.assertEqual('train.update', name)
        self.assertGreaterEqual(run_time, 0.0)

    def test_reporting_failures_are_swallowed(self):
        with mock.patch('morphrl.metrics.statsd_client') as client:
            client.gauge.side_effect = IOError("statsd is down")
            metrics.gauge('train.mean_return', 1.0)
        client.gauge.assert_called_once_with('train.mean_return', 1.0)
