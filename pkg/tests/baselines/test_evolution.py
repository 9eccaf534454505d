import numpy as np
import torch

from morphrl.baselines import get_baseline
from morphrl.baselines.ess import ESS, run_ess
from morphrl.baselines.evolution import EvoConfig, Population, mutate_design
from morphrl.baselines.nge import NGE, run_nge_lite
from morphrl.baselines.rgs import RGS, run_rgs
from morphrl.optim import PpoConfig
from tests import BaseTestCase


class EvolutionTestCase(BaseTestCase):
    def setUp(self):
        super(EvolutionTestCase, self).setUp()
        self.env = self.factory.env('swimmer', horizon=5, max_joints=6)
        self.evo_config = EvoConfig(population_size=3, generations=2, species_batch_size=10)
        self.policy_config = self.factory.policy_config()
        self.ppo_config = PpoConfig(batch_size=10, minibatch_size=8, iterations=1, epochs=1)

    def population(self, method, **kwargs):
        evo_config = EvoConfig(**dict(dict(population_size=4, generations=2, species_batch_size=10), **kwargs))
        return Population(method, self.env, evo_config, self.policy_config, self.ppo_config, seed=7)


class TestEvoConfig(BaseTestCase):
    def test_num_eliminated(self):
        self.assertEqual(3, EvoConfig(population_size=20, elimination_rate=0.15).num_eliminated)
        self.assertEqual(0, EvoConfig(population_size=1, elimination_rate=0.15).num_eliminated)

    def test_budget_matches_transform2act(self):
        self.assertEqual(1000 * 50000, EvoConfig().total_steps)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            EvoConfig(elimination_rate=1.5)
        with self.assertRaises(ValueError):
            EvoConfig(population_size=0)


class TestRegistry(BaseTestCase):
    def test_known_baselines(self):
        self.assertIsInstance(get_baseline('nge'), NGE)
        self.assertIsInstance(get_baseline('ess'), ESS)
        self.assertIsInstance(get_baseline('rgs'), RGS)
        self.assertIsNone(get_baseline('transform2act'))


class TestMutation(BaseTestCase):
    def test_zero_mutation_is_a_clone(self):
        design = self.factory.random_design(seed=3)
        rng = np.random.default_rng(0)
        self.assertEqual(design, mutate_design(design, rng, 0.0, 0.0, 0.0))

    def test_mutations_stay_valid(self):
        rng = np.random.default_rng(1)
        design = self.factory.chain(2, max_joints=8)
        for _ in range(100):
            design = mutate_design(design, rng, 0.8, 0.4, 0.5)
            self.assertLessEqual(len(design), 8)
            self.assertGreaterEqual(len(design), 1)
            self.assertTrue(all(len(node.children) <= 3 for node in design))
            self.assertTrue(np.all(np.abs(design.attrs) <= 1.0))


class TestPopulation(EvolutionTestCase):
    def rank(self, population):
        for i, species in enumerate(population.species):
            species.fitness = float(i)

    def test_worst_species_are_replaced(self):
        population = self.population(ESS(), elimination_rate=0.5)
        self.rank(population)
        population.next_generation()
        self.assertEqual([3, 2, 4, 5], [s.id for s in population.species])
        self.assertTrue(all(s.parent_id in (2, 3) for s in population.species[2:]))

    def test_zero_mutation_children_are_clones(self):
        population = self.population(ESS(), elimination_rate=0.5, add_joint_prob=0.0, delete_joint_prob=0.0,
                                     attribute_sigma=0.0)
        self.rank(population)
        population.next_generation()
        designs = dict((s.id, s.design) for s in population.species)
        for child in population.species[2:]:
            self.assertEqual(designs[child.parent_id], child.design)

    def test_nge_children_inherit_weights(self):
        population = self.population(NGE(), elimination_rate=0.25)
        self.rank(population)
        population.next_generation()
        child = population.species[-1]
        parent = [s for s in population.species if s.id == child.parent_id][0]
        for key, value in parent.policy.state_dict().items():
            self.assertTrue(torch.equal(value, child.policy.state_dict()[key]))
        self.assertIsNot(parent.policy, child.policy)

    def test_ess_children_start_fresh(self):
        population = self.population(ESS(), elimination_rate=0.25)
        self.rank(population)
        population.next_generation()
        child = population.species[-1]
        parent = [s for s in population.species if s.id == child.parent_id][0]
        key = 'actor.control.output.weight'
        self.assertFalse(torch.equal(parent.policy.state_dict()[key], child.policy.state_dict()[key]))

    def test_same_seed_same_population(self):
        first, second = self.population(RGS()), self.population(RGS())
        self.assertEqual([s.design for s in first.species], [s.design for s in second.species])


class TestRunEvolution(EvolutionTestCase):
    def test_budget_and_curve(self):
        records = []
        result = run_ess(self.env, self.evo_config, self.policy_config, self.ppo_config, seed=0,
                         callback=records.append)
        self.assertEqual(self.evo_config.total_steps, result.total_steps)
        self.assertEqual(result.curve, records)
        self.assertEqual([30, 60], [r['total_steps'] for r in result.curve])
        self.assertEqual([0, 1], [r['epoch'] for r in result.curve])
        self.assertEqual('ess', result.curve[0]['method'])

        best = [r['mean_return'] for r in result.curve]
        self.assertEqual(sorted(best), best)
        self.assertEqual(len(result.best_design), result.curve[-1]['num_joints'])

    def test_rgs_is_deterministic_and_keeps_its_population(self):
        first = run_rgs(self.env, self.evo_config, self.policy_config, self.ppo_config, seed=2)
        second = run_rgs(self.env, self.evo_config, self.policy_config, self.ppo_config, seed=2)
        self.assertEqual(first.curve, second.curve)
        self.assertEqual(first.best_design, second.best_design)

        initial = Population(RGS(), self.env, self.evo_config, self.policy_config, self.ppo_config, seed=2)
        self.assertIn(first.best_design, [s.design for s in initial.species])

    def test_single_species(self):
        evo_config = EvoConfig(population_size=1, generations=2, species_batch_size=10)
        result = run_nge_lite(self.env, evo_config, self.policy_config, self.ppo_config, seed=0)
        self.assertEqual(20, result.total_steps)
        self.assertIsNotNone(result.best_policy)
