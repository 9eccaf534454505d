import numpy as np

from morphrl.envs.rewards import reward_formula
from tests import BaseTestCase


class TestRewardFormula(BaseTestCase):
    def test_locomotion_speed_plus_alive_bonus(self):
        self.assertAlmostEqual(2.0, reward_formula('loco2d', 0.008, 0.008, [0.3, -0.2], 3), places=12)

    def test_gap_crosser_alive_bonus(self):
        self.assertAlmostEqual(2.1, reward_formula('gap', 0.016, 0.008, [0.0], 2), places=12)

    def test_backwards_motion_counts_as_speed(self):
        self.assertAlmostEqual(2.0, reward_formula('loco2d', -0.008, 0.008, [], 1), places=12)

    def test_idle_swimmer(self):
        self.assertEqual(0.0, reward_formula('swimmer', 0.0, 0.04, [0.0, 0.0], 3))

    def test_reward3d_without_control(self):
        self.assertAlmostEqual(1.0, reward_formula('reward3d-test', 0.04, 0.04, [0.0, 0.0], 2), places=12)

    def test_reward3d_control_penalty(self):
        self.assertAlmostEqual(-0.0001, reward_formula('reward3d-test', 0.0, 0.04, [1.0, -1.0], 2), places=15)

    def test_swimmer_penalty_is_averaged_over_joints(self):
        reward = reward_formula('swimmer', 0.0, 0.04, [1.0, 1.0, 1.0, 1.0], 5)
        self.assertAlmostEqual(-0.0001 * 4 / 5, reward, places=15)

    def test_unknown_env(self):
        with self.assertRaises(KeyError):
            reward_formula('hopper', 0.0, 0.01, [], 1)

    def test_needs_a_joint(self):
        with self.assertRaises(ValueError):
            reward_formula('swimmer', 0.0, 0.04, [], 0)

    def test_explicit_bonus_and_weight(self):
        reward = reward_formula('loco2d', 0.0, 0.008, [1.0, 1.0], 3, alive_bonus=5.0, control_weight=1.0)
        self.assertAlmostEqual(5.0 - 2.0 / 3, reward, places=12)


class TestEnvReward(BaseTestCase):
    def test_default_config_matches_formula(self):
        env = self.factory.env('loco2d')
        self.assertEqual(reward_formula('loco2d', 0.0, 0.008, [1.0, 1.0], 3), env.reward(0.0, np.ones(2), 3))

    def test_config_overrides_reach_the_reward(self):
        env = self.factory.env('loco2d', alive_bonus=5.0, control_weight=1.0)
        self.assertAlmostEqual(5.0 - 2.0 / 3, env.reward(0.0, np.ones(2), 3), places=12)

    def test_swimmer_penalty_from_config(self):
        env = self.factory.env('swimmer', control_weight=0.01)
        self.assertAlmostEqual(-0.01 * 2 / 3, env.reward(0.0, np.ones(2), 3), places=12)
