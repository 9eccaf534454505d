import numpy as np

from morphrl.policy import StageFlag
from morphrl.rollout import (Episode, EpisodeConfig, Memory, Transition, collect_batch, collect_episode, collect_share,
                             evaluate_design, split_batch, transform_design)
from morphrl.worker import RolloutPool
from tests import BaseTestCase

S, A, E = StageFlag.SKELETON, StageFlag.ATTRIBUTE, StageFlag.EXECUTION


def fake_episode(returns, num_steps, cut=False, joints=3, factory=None):
    episode = Episode(seed=0)
    for _ in range(num_steps):
        episode.transitions.append(Transition(E, None, None, None, returns / num_steps, 0.0, 0.0))
    episode.cut_by_batch = cut
    episode.final_design = factory.chain(joints) if factory else None
    return episode


class RolloutTestCase(BaseTestCase):
    def setUp(self):
        super(RolloutTestCase, self).setUp()
        self.env = self.factory.env('swimmer', horizon=15)
        self.policy = self.factory.policy(obs_dim=self.env.obs_dim)


class TestCollectEpisode(RolloutTestCase):
    def test_stage_sequence(self):
        # 10000 = 666 * 15 + 10: the last episode is cut by the batch boundary
        memory = collect_batch(self.policy, self.env, self.factory.episode_config(5, 1), 10000, seed=3)
        self.assertEqual(10000, memory.total_steps)
        self.assertGreater(memory.num_episodes, 600)
        for episode in memory.episodes:
            stages = episode.stages
            self.assertEqual([S] * 5 + [A], stages[:6])
            self.assertTrue(all(stage == E for stage in stages[6:]))
            self.assertGreater(len(stages), 6)
            self.assertEqual(0.0, sum(t.reward for t in episode.transitions[:6]))
            self.assertTrue(episode.transitions[-1].done)
            self.assertEqual(1, sum(1 for t in episode.transitions if t.done))

        self.assertEqual([False] * (memory.num_episodes - 1) + [True], [e.cut_by_batch for e in memory.episodes])
        last = memory.episodes[-1]
        self.assertEqual(10000 - sum(e.num_steps for e in memory.episodes[:-1]), last.num_steps)
        self.assertFalse(last.truncated or last.terminated)
        self.assertTrue(np.isfinite(last.bootstrap_value))
        self.assertNotEqual(0.0, last.bootstrap_value)

    def test_transform_stages_earn_nothing(self):
        memory = collect_batch(self.policy, self.env, self.factory.episode_config(5, 1), 120, seed=4)
        transform_rewards = [t.reward for t in memory.transitions() if t.stage != E]
        self.assertTrue(transform_rewards)
        self.assertEqual(0.0, sum(transform_rewards))
        self.assertTrue(all(t.observation is None for t in memory.transitions() if t.stage != E))

    def test_execution_runs_the_final_design(self):
        episode = collect_episode(self.policy, self.env, self.factory.episode_config(3, 1), seed=5)
        execution = [t for t in episode.transitions if t.stage == E]
        self.assertTrue(all(t.design is episode.final_design for t in execution))
        self.assertEqual((len(episode.final_design), self.env.obs_dim), execution[0].observation.shape)

    def test_horizon_truncation_bootstraps(self):
        episode = collect_episode(self.policy, self.env, self.factory.episode_config(0, 0), seed=1)
        self.assertEqual(15, episode.num_steps)
        self.assertTrue(episode.truncated)
        self.assertFalse(episode.terminated)
        self.assertTrue(episode.transitions[-1].done)

    def test_frozen_design(self):
        design = self.factory.chain(4)
        episode = collect_episode(self.policy, self.env, self.factory.episode_config(0, 0, design=design), seed=2)
        self.assertEqual(design, episode.final_design)
        self.assertTrue(all(stage == E for stage in episode.stages))

    def test_finetune_keeps_the_skeleton(self):
        design = self.factory.chain(3)
        config = EpisodeConfig(skeleton_transforms=5, attribute_transforms=1, initial_design=design,
                               skeleton_stage_enabled=False)
        self.assertEqual(0, config.skeleton_transforms)
        episode = collect_episode(self.policy, self.env, config, seed=6)
        self.assertEqual(A, episode.stages[0])
        self.assertEqual(design.to_nodes().keys(), episode.final_design.to_nodes().keys())
        self.assertEqual(design.index_strings, episode.final_design.index_strings)

    def test_same_seed_same_episode(self):
        config = self.factory.episode_config(3, 1)
        first = collect_episode(self.policy, self.env, config, seed=8)
        second = collect_episode(self.policy, self.env, config, seed=8)
        self.assertEqual(first.episode_return, second.episode_return)
        for a, b in zip(first.transitions, second.transitions):
            np.testing.assert_array_equal(a.action, b.action)

    def test_negative_transform_counts(self):
        with self.assertRaises(ValueError):
            EpisodeConfig(skeleton_transforms=-1)


class TestBatches(RolloutTestCase):
    def test_exact_step_budget(self):
        memory = collect_batch(self.policy, self.env, self.factory.episode_config(2, 1), 37, seed=0)
        self.assertEqual(37, memory.total_steps)
        self.assertEqual(37, sum(1 for t in memory.transitions() if t.stage == E))

    def test_last_episode_is_cut_by_the_batch(self):
        memory = collect_share(self.policy, self.env, self.factory.episode_config(0, 0), 20, seed=0, epoch=0)
        self.assertEqual([15, 5], [e.num_steps for e in memory.episodes])
        self.assertFalse(memory.episodes[0].cut_by_batch)
        self.assertTrue(memory.episodes[1].cut_by_batch)
        self.assertTrue(memory.episodes[1].transitions[-1].done)

    def test_split_batch(self):
        self.assertEqual([4, 3, 3], split_batch(10, 3))
        self.assertEqual([1, 1, 0, 0], split_batch(2, 4))

    def test_empty_batch(self):
        with self.assertRaises(ValueError):
            collect_batch(self.policy, self.env, self.factory.episode_config(), 0, seed=0)

    def test_pool_merges_shares_in_worker_order(self):
        config = self.factory.episode_config(1, 1)
        with RolloutPool(workers=1) as pool:
            merged = pool.collect(self.policy, self.env, config, [12, 8], seed=2, epoch=5)

        expected = collect_share(self.policy, self.env, config, 12, seed=2, epoch=5, worker_id=0)
        expected.extend(collect_share(self.policy, self.env, config, 8, seed=2, epoch=5, worker_id=1))
        self.assertEqual(20, merged.total_steps)
        self.assertEqual([e.seed for e in expected.episodes], [e.seed for e in merged.episodes])
        self.assertEqual(expected.returns(), merged.returns())

    def test_epochs_draw_different_episodes(self):
        config = self.factory.episode_config(1, 1)
        first = collect_batch(self.policy, self.env, config, 15, seed=0, epoch=0)
        second = collect_batch(self.policy, self.env, config, 15, seed=0, epoch=1)
        self.assertNotEqual(first.episodes[0].seed, second.episodes[0].seed)


class TestMemoryStats(BaseTestCase):
    def test_statistics_skip_episodes_cut_by_the_batch(self):
        memory = Memory([fake_episode(10.0, 5, joints=3, factory=self.factory),
                         fake_episode(20.0, 5, joints=5, factory=self.factory),
                         fake_episode(1.0, 2, cut=True, joints=9, factory=self.factory)])
        self.assertEqual(12, memory.total_steps)
        self.assertAlmostEqual(15.0, memory.mean_return)
        self.assertAlmostEqual(20.0, memory.max_return)
        self.assertAlmostEqual(4.0, memory.mean_num_joints())

    def test_only_cut_episodes(self):
        memory = Memory([fake_episode(4.0, 4, cut=True)])
        self.assertAlmostEqual(4.0, memory.mean_return)

    def test_empty(self):
        memory = Memory()
        self.assertEqual(0.0, memory.mean_return)
        self.assertEqual(0, len(memory))


class TestEvaluateDesign(RolloutTestCase):
    def test_argmax_is_deterministic(self):
        config = self.factory.episode_config(3, 1)
        first = evaluate_design(self.policy, self.env, config, 2, seed=0)
        second = evaluate_design(self.policy, self.env, config, 2, seed=0)
        self.assertEqual(first[0], second[0])
        self.assertEqual(first[1], second[1])

    def test_zero_episodes_only_transforms(self):
        config = self.factory.episode_config(3, 1)
        mean_return, design = evaluate_design(self.policy, self.env, config, 0, seed=0)
        self.assertIsNone(mean_return)
        self.assertEqual(transform_design(self.policy, config), design)
