import numpy as np

from morphrl.rollout import collect_batch
from morphrl.worker import RolloutPool
from tests import BaseTestCase


class TestRolloutPool(BaseTestCase):
    def test_worker_processes_match_in_process_collection(self):
        env = self.factory.env('swimmer', horizon=8)
        policy = self.factory.policy(obs_dim=env.obs_dim)
        episode_config = self.factory.episode_config(2, 1)

        with RolloutPool(workers=2) as pool:
            parallel = collect_batch(policy, env, episode_config, 25, seed=4, epoch=1, pool=pool)
        with RolloutPool(workers=1) as pool:
            serial = pool.collect(policy, env, episode_config, [13, 12], seed=4, epoch=1)

        self.assertEqual(25, parallel.total_steps)
        self.assertEqual([e.seed for e in serial.episodes], [e.seed for e in parallel.episodes])
        for a, b in zip(serial.transitions(), parallel.transitions()):
            np.testing.assert_array_equal(a.action, b.action)
            self.assertEqual(a.reward, b.reward)

    def test_single_worker_has_no_processes(self):
        pool = RolloutPool(workers=1)
        self.assertIsNone(pool._pool)
        pool.close()
