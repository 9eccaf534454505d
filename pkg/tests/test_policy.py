import math

import numpy as np
import torch

from morphrl.networks import NodeFeatureBatch
from morphrl.policy import (DataCorruptionError, PolicyState, RunningMeanStd, StageContractError, StageFlag,
                            Transform2ActPolicy)
from morphrl.rollout import Transition
from tests import BaseTestCase


def zero_output(sub_policy, bias=None):
    with torch.no_grad():
        sub_policy.output.weight.zero_()
        sub_policy.output.bias.zero_()
        if bias is not None:
            sub_policy.output.bias.copy_(torch.as_tensor(bias, dtype=sub_policy.output.bias.dtype))


class TestStageContract(BaseTestCase):
    def setUp(self):
        super(TestStageContract, self).setUp()
        self.policy = self.factory.policy(obs_dim=2)
        self.design = self.factory.chain(3)

    def test_execution_needs_observation(self):
        with self.assertRaises(StageContractError):
            self.policy.act(PolicyState(self.design, StageFlag.EXECUTION))

    def test_transform_rejects_observation(self):
        with self.assertRaises(StageContractError):
            self.policy.act(PolicyState(self.design, StageFlag.SKELETON, np.zeros((3, 2))))

    def test_observation_shape(self):
        with self.assertRaises(StageContractError):
            self.policy.act(PolicyState(self.design, StageFlag.EXECUTION, np.zeros((2, 2))))

    def test_action_shapes_per_stage(self):
        skeleton = self.policy.act(PolicyState(self.design, StageFlag.SKELETON), generator=torch.Generator())
        attribute = self.policy.act(PolicyState(self.design, StageFlag.ATTRIBUTE), generator=torch.Generator())
        control = self.policy.act(PolicyState(self.design, StageFlag.EXECUTION, np.zeros((3, 2))),
                                  generator=torch.Generator())
        self.assertEqual((3,), skeleton.action.shape)
        self.assertEqual((3, 4), attribute.action.shape)
        self.assertEqual((3, 1), control.action.shape)


class TestDistributions(BaseTestCase):
    def setUp(self):
        super(TestDistributions, self).setUp()
        self.policy = self.factory.policy(obs_dim=2)
        self.design = self.factory.chain(4)

    def test_argmax_picks_first_of_tied_actions(self):
        zero_output(self.policy.actor.skeleton, bias=[1.0, 1.0, 0.0])
        result = self.policy.act(PolicyState(self.design, StageFlag.SKELETON), mode='argmax')
        self.assertEqual([0, 0, 0, 0], result.action.tolist())

    def test_argmax_attribute_is_the_mean(self):
        zero_output(self.policy.actor.attribute, bias=[0.1, -0.2, 0.0, 0.3])
        result = self.policy.act(PolicyState(self.design, StageFlag.ATTRIBUTE), mode='argmax')
        np.testing.assert_array_equal(np.tile([0.1, -0.2, 0.0, 0.3], (4, 1)), result.action)

    def test_uniform_skeleton_entropy(self):
        zero_output(self.policy.actor.skeleton)
        transition = Transition(StageFlag.SKELETON, self.design, None, np.full(4, 2), 0.0, 0.0, 0.0)
        _, entropies, _ = self.policy.evaluate([transition])
        self.assertAlmostEqual(4 * math.log(3), entropies[0].item(), places=10)

    def test_attribute_entropy(self):
        transition = Transition(StageFlag.ATTRIBUTE, self.design, None, np.zeros((4, 4)), 0.0, 0.0, 0.0)
        _, entropies, _ = self.policy.evaluate([transition])
        per_dim = 0.5 * math.log(2 * math.pi * math.e * 0.01)
        self.assertAlmostEqual(4 * 4 * per_dim, entropies[0].item(), places=10)

    def test_log_prob_factorizes_over_joints(self):
        generator = torch.Generator()
        generator.manual_seed(3)
        state = PolicyState(self.design, StageFlag.SKELETON)
        result = self.policy.act(state, generator=generator)

        batch = NodeFeatureBatch.from_designs([self.design], [self.policy.policy_features(state)])
        with torch.no_grad():
            dist = self.policy.distribution(StageFlag.SKELETON, batch)
            per_joint = dist.log_prob(torch.as_tensor(result.action))
        self.assertAlmostEqual(per_joint.sum().item(), result.log_prob, places=12)

    def test_sampling_is_reproducible_with_a_generator(self):
        state = PolicyState(self.design, StageFlag.EXECUTION, np.ones((4, 2)))
        first = self.policy.act(state, generator=torch.Generator().manual_seed(9))
        second = self.policy.act(state, generator=torch.Generator().manual_seed(9))
        np.testing.assert_array_equal(first.action, second.action)


class TestEvaluate(BaseTestCase):
    def test_matches_log_probs_recorded_at_act_time(self):
        policy = self.factory.policy(obs_dim=2)
        design = self.factory.chain(3)
        generator = torch.Generator().manual_seed(1)
        transitions = []
        for stage, observation in ((StageFlag.SKELETON, None), (StageFlag.ATTRIBUTE, None),
                                   (StageFlag.EXECUTION, np.full((3, 2), 0.5)), (StageFlag.SKELETON, None)):
            state = PolicyState(design, stage, observation)
            result = policy.act(state, generator=generator)
            transitions.append(Transition(stage, design, observation, result.action, 0.0, result.log_prob,
                                          policy.value(state)))

        log_probs, entropies, values = policy.evaluate(transitions)
        np.testing.assert_allclose([t.log_prob for t in transitions], log_probs.detach().numpy(), atol=1e-10)
        np.testing.assert_allclose([t.value for t in transitions], values.detach().numpy(), atol=1e-10)
        self.assertEqual((4,), entropies.shape)

    def test_action_count_must_match_design(self):
        policy = self.factory.policy(obs_dim=2)
        transition = Transition(StageFlag.SKELETON, self.factory.chain(3), None, np.zeros(2), 0.0, 0.0, 0.0)
        with self.assertRaises(DataCorruptionError):
            policy.evaluate([transition])


class TestValueFeatures(BaseTestCase):
    def test_transform_stage_uses_zero_observations(self):
        policy = self.factory.policy(obs_dim=3)
        design = self.factory.chain(2)
        features = policy.value_features(PolicyState(design, StageFlag.ATTRIBUTE))
        self.assertEqual((2, 3 + 4 + 3), features.shape)
        self.assertEqual(0.0, np.abs(features[:, :3]).sum())
        np.testing.assert_array_equal([0, 1, 0], features[0, -3:])


class TestSymmetry(BaseTestCase):
    def setUp(self):
        super(TestSymmetry, self).setUp()
        self.design = self.factory.mirror_design()

    def outputs(self, policy):
        batch = NodeFeatureBatch.from_designs([self.design], [self.design.attrs])
        with torch.no_grad():
            logits = policy.distribution(StageFlag.SKELETON, batch).logits
            means = policy.distribution(StageFlag.ATTRIBUTE, batch).mean
        return logits, means

    def test_mirrored_joints_match_without_jsmlp(self):
        policy = self.factory.policy(transform_jsmlp=False, control_jsmlp=False)
        logits, means = self.outputs(policy)
        for a, b in ((1, 2), (3, 4)):
            self.assertTrue(torch.equal(logits[a], logits[b]), "skeleton logits differ")
            self.assertTrue(torch.equal(means[a], means[b]))

    def test_jsmlp_lets_mirrored_joints_differ(self):
        policy = self.factory.policy()
        policy.ensure_blocks([self.design])
        with torch.no_grad():
            policy.actor.skeleton.output.bias.normal_()
            policy.actor.skeleton.output.weight.normal_()
        logits, _ = self.outputs(policy)
        self.assertFalse(torch.equal(logits[1], logits[2]))


class TestSnapshots(BaseTestCase):
    def test_restores_lazily_created_blocks(self):
        policy = self.factory.policy(obs_dim=2, seed=4)
        design = self.factory.random_design(seed=12, max_joints=8)
        policy.ensure_blocks([design])
        with torch.no_grad():
            for param in policy.parameters():
                param.add_(0.01)

        restored = Transform2ActPolicy(policy.config, 2)
        restored.load_snapshot(policy.snapshot())
        state = PolicyState(design, StageFlag.ATTRIBUTE)
        self.assertEqual(policy.value(state), restored.value(state))
        np.testing.assert_array_equal(policy.act(state, mode='argmax').action,
                                      restored.act(state, mode='argmax').action)


class TestRunningMeanStd(BaseTestCase):
    def test_tracks_batches(self):
        rms = RunningMeanStd(2)
        data = np.random.default_rng(0).normal(loc=[1.0, -2.0], scale=[0.5, 3.0], size=(400, 2))
        rms.update(data[:150])
        rms.update(data[150:])
        np.testing.assert_allclose(data.mean(0), rms.mean.numpy(), rtol=1e-4)
        np.testing.assert_allclose(data.var(0), rms.var.numpy(), rtol=1e-3)

    def test_normalized_observations_are_clipped(self):
        rms = RunningMeanStd(1, clip=5.0)
        rms.update(np.zeros((10, 1)))
        self.assertEqual(5.0, float(rms.normalize([[100.0]])[0, 0]))

    def test_policy_updates_statistics_when_enabled(self):
        policy = self.factory.policy(obs_dim=2, normalize_observations=True)
        policy.update_observation_stats([np.ones((3, 2)), np.ones((2, 2))])
        self.assertGreater(policy.obs_rms.count.item(), 5.0 - 1e-3)
