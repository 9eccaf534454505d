import glob
import os

from morphrl.design_graph import save_design
from morphrl.utils.configuration import ConfigurationError, ExperimentConfig
from tests import BaseTestCase

CONFIGS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')


class TestParsing(BaseTestCase):
    def test_defaults_are_filled_in(self):
        config = ExperimentConfig.from_text("[experiment]\nenv = swimmer\n")
        self.assertEqual('transform2act', config.method)
        self.assertEqual(0, config.seed)
        self.assertEqual(5, config.get('episode', 'skeleton_transforms'))
        self.assertEqual([64, 64, 64], config.get('policy', 'gnn_sizes'))
        self.assertEqual(50000, config.ppo_config().batch_size)

    def test_typed_values(self):
        config = self.factory.experiment()
        self.assertEqual(15, config.get('env', 'horizon'))
        self.assertEqual([4], config.get('policy', 'jsmlp_sizes'))
        self.assertIs(True, config.get('episode', 'skeleton_stage_enabled'))

    def test_missing_env(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("[experiment]\nseed = 1\n")

    def test_unknown_method(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("[experiment]\nenv = swimmer\nmethod = cem\n")

    def test_unknown_key(self):
        with self.assertRaisesRegex(ConfigurationError, "learning_rate"):
            ExperimentConfig.from_text("[experiment]\nenv = swimmer\n[ppo]\nlearning_rate = 0.1\n")

    def test_unknown_section(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("[experiment]\nenv = swimmer\n[sac]\nalpha = 0.2\n")

    def test_bad_number(self):
        with self.assertRaisesRegex(ConfigurationError, "ppo.epochs"):
            ExperimentConfig.from_text("[experiment]\nenv = swimmer\n[ppo]\nepochs = many\n")

    def test_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("[experiment]\nenv = swimmer\n[ppo]\ngae_lambda = 1.5\n")

    def test_malformed_file(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("env = swimmer\n")

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_file(self.tmp_path('missing.cfg'))

    def test_text_round_trip(self):
        config = self.factory.experiment(method='nge', env='gap', seed=4)
        self.assertEqual(config.to_dict(), ExperimentConfig.from_text(config.to_text()).to_dict())

    def test_update_validates(self):
        config = self.factory.experiment()
        config.update('experiment', 'seed', 9)
        self.assertEqual(9, config.seed)
        with self.assertRaises(ConfigurationError):
            config.update('experiment', 'seed', -1)

    def test_shipped_configs(self):
        paths = glob.glob(os.path.join(CONFIGS_DIR, '*.cfg'))
        self.assertTrue(paths)
        for path in paths:
            config = ExperimentConfig.from_file(path)
            self.assertEqual(config.get('experiment', 'env'), config.make_env().type())


class TestTypedViews(BaseTestCase):
    def test_gap_crosser_discount(self):
        self.assertEqual(0.999, self.factory.experiment(env='gap').ppo_config().gamma)
        self.assertEqual(0.995, self.factory.experiment(env='swimmer').ppo_config().gamma)

    def test_explicit_discount_wins(self):
        text = "[experiment]\nenv = gap\n[ppo]\ngamma = 0.9\n"
        self.assertEqual(0.9, ExperimentConfig.from_text(text).ppo_config().gamma)

    def test_budget_scale(self):
        config = ExperimentConfig.from_text("[experiment]\nenv = swimmer\nbudget_scale = 0.01\n")
        ppo = config.ppo_config()
        self.assertEqual(500, ppo.batch_size)
        self.assertEqual(500, ppo.minibatch_size)
        self.assertEqual(200, config.evolution_section()['species_batch_size'])

    def test_env_overrides(self):
        env = self.factory.experiment().make_env()
        self.assertEqual(15, env.config.horizon)
        self.assertEqual('swimmer', env.type())

    def test_policy_config(self):
        policy_config = self.factory.experiment(seed=3).policy_config()
        self.assertEqual((4,), policy_config.gnn_sizes)
        self.assertEqual(3, policy_config.seed)

    def test_default_initial_design(self):
        config = self.factory.experiment()
        episode_config = config.episode_config(config.make_env().config)
        self.assertEqual(3, len(episode_config.initial_design))
        self.assertEqual(2, episode_config.skeleton_transforms)

    def test_finetune_disables_the_skeleton_stage(self):
        design = self.factory.chain(4)
        path = self.tmp_path('expert.design')
        save_design(design, path)
        config = self.factory.experiment()
        config.update('experiment', 'finetune_design', path)

        episode_config = config.episode_config(config.make_env().config)
        self.assertEqual(design, episode_config.initial_design)
        self.assertEqual(0, episode_config.skeleton_transforms)
        self.assertFalse(episode_config.skeleton_stage_enabled)
        self.assertEqual(1, episode_config.attribute_transforms)

    def test_budget_parity_at_one_percent(self):
        config = ExperimentConfig.from_text("[experiment]\nenv = swimmer\nbudget_scale = 0.01\n")
        ppo = config.ppo_config()
        evolution = config.evolution_section()
        transform2act_steps = ppo.epochs * ppo.batch_size
        baseline_steps = evolution['population_size'] * evolution['species_batch_size'] * evolution['generations']
        self.assertEqual(500000, transform2act_steps)
        self.assertEqual(transform2act_steps, baseline_steps)
