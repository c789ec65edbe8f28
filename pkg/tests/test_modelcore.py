import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from diffcore import Tape, Tensor, add, finite_difference_check, take_rows
from errors import ContractViolationError, InputError, UndefinedMetricError
from modelcore import DOMAIN_LABELS, TwoStreamModel, domain_targets
from synthdomains import Domain, DomainSpec, evaluation_labels, generate


SPEC = DomainSpec(num_classes=3, feature_dim=8, samples_per_class=6, seed=4)


@pytest.fixture(scope="module")
def dataset():
    return generate(SPEC)


@pytest.fixture
def model():
    return TwoStreamModel(2, 8, 3, embed_dim=8, hidden_dim=8, disc_hidden_dim=8, dropout=0.5, seed=1)


def zero_classifiers(model):
    for stack in model.stacks:
        for p in stack.classifier_parameters():
            p.data[:] = 0.0


class TestDomainLabels:
    """Test cases for the domain label convention"""
    
    def test_source_zero_target_one(self):
        assert DOMAIN_LABELS[Domain.SOURCE] == 0
        assert DOMAIN_LABELS[Domain.TARGET] == 1
    
    def test_domain_targets(self, dataset):
        segments = dataset.source[:2] + dataset.target[:1]
        assert list(domain_targets(segments)) == [0.0, 0.0, 1.0]


class TestClassifyFused:
    """Test cases for late fusion"""
    
    def test_fused_is_sum_of_modalities(self, model, dataset):
        """Test fused logits equal the sum of per-modality classifier outputs"""
        features = model.segment_features(dataset.source[:4])
        embeddings = model.embed(features)
        expected = sum(stack.classify(e).data for stack, e in zip(model.stacks, embeddings))
        assert np.allclose(model.classify_fused(features).data, expected)
    
    def test_manual_logits_sum(self, model):
        """Test per-modality logits [1,0] and [0,1] fuse to [1,1]"""
        model2 = TwoStreamModel(2, 8, 2, embed_dim=4, hidden_dim=4, seed=0)
        for k, stack in enumerate(model2.stacks):
            stack.classifier.weight.data[:] = 0.0
            stack.classifier.bias.data[:] = [[1.0, 0.0]] if k == 0 else [[0.0, 1.0]]
        fused = model2.classify_fused([np.zeros((1, 8)), np.zeros((1, 8))]).data
        assert np.array_equal(fused, [[1.0, 1.0]])
    
    def test_single_modality(self, dataset):
        """Test K=1 reduces to the single stream"""
        single = TwoStreamModel(1, 8, 3, embed_dim=4, hidden_dim=4, seed=0)
        x = dataset.source[0].features[0].reshape(1, -1)
        stack = single.stacks[0]
        assert np.array_equal(single.classify_fused([x]).data, stack.classify(stack.extract(Tensor(x))).data)
    
    def test_missing_modality(self, model):
        """Test that a missing modality is an input error"""
        with pytest.raises(InputError):
            model.classify_fused([np.zeros((1, 8))])
        with pytest.raises(InputError):
            model.classify_fused([np.zeros((1, 8)), None])
    
    def test_wrong_width(self, model):
        """Test features of the wrong dimension"""
        with pytest.raises(InputError):
            model.classify_fused([np.zeros((1, 8)), np.zeros((1, 7))])
    
    def test_fused_gradient(self, dataset):
        """Test fused-loss gradients against finite differences"""
        model = TwoStreamModel(2, 8, 3, embed_dim=4, hidden_dim=6, dropout=0.0, seed=3)
        segments = dataset.source[:5]
        assert finite_difference_check(lambda: model.loss_cls(segments), model.extractor_parameters() + model.classifier_parameters()) < 1e-4


class TestLosses:
    """Test cases for loss_cls and loss_adv"""
    
    def test_uniform_logits_give_batch_ln_c(self, model, dataset):
        """Test loss_cls with zeroed classifiers equals n ln C"""
        zero_classifiers(model)
        batch = dataset.source[:6]
        assert model.loss_cls(batch).item() == pytest.approx(6 * math.log(3))
    
    def test_target_segment_rejected(self, model, dataset):
        """Test that loss_cls refuses target segments"""
        with pytest.raises(ContractViolationError):
            model.loss_cls(dataset.source[:2] + dataset.target[:1])
    
    def test_zero_logit_gives_ln2(self, model, dataset):
        """Test a zero domain logit costs ln 2 per segment and modality"""
        for stack in model.stacks:
            stack.disc_fc2.weight.data[:] = 0.0
            stack.disc_fc2.bias.data[:] = 0.0
        segments = dataset.source[:2] + dataset.target[:2]
        assert model.loss_adv(segments).item() == pytest.approx(2 * 4 * math.log(2))
    
    def test_adv_decomposes_by_modality(self, model, dataset):
        """Test loss_adv equals the sum of per-modality losses"""
        segments = dataset.source[:3] + dataset.target[:3]
        embeddings = model.embed(model.segment_features(segments))
        targets = domain_targets(segments)
        total = model.adversarial_loss(embeddings, targets).item()
        parts = sum(model.adversarial_loss_modality(k, e, targets).item() for k, e in enumerate(embeddings))
        assert total == pytest.approx(parts)
    
    def test_masks_drop_rows(self, model, dataset):
        """Test a keep-mask excludes rows from the adversarial loss"""
        segments = dataset.source[:3] + dataset.target[:3]
        embeddings = model.embed(model.segment_features(segments))
        targets = domain_targets(segments)
        keep = np.array([True, False, True, True, True, False])
        masked = model.adversarial_loss(embeddings, targets, [keep, keep]).item()
        rows = np.flatnonzero(keep)
        sub = [Tensor(e.data[rows]) for e in embeddings]
        assert masked == pytest.approx(model.adversarial_loss(sub, targets[rows]).item())
    
    def test_single_domain_batch_still_computed(self, model, dataset):
        """Test a source-only adversarial batch gives a finite loss"""
        assert np.isfinite(model.loss_adv(dataset.source[:4]).item())
    
    def test_domain_logit_independent_of_grl_scale(self, dataset):
        """Test the GRL does not change the forward value"""
        x = dataset.source[0].features[0].reshape(1, -1)
        a = TwoStreamModel(2, 8, 3, embed_dim=4, hidden_dim=4, grl_scale=1.0, seed=5)
        b = TwoStreamModel(2, 8, 3, embed_dim=4, hidden_dim=4, grl_scale=0.3, seed=5)
        assert np.array_equal(a.domain_logit(x, 0).data, b.domain_logit(x, 0).data)
    
    def test_domain_logit_bad_modality(self, model):
        with pytest.raises(InputError):
            model.domain_logit(np.zeros((1, 8)), 2)


class TestAdversarialGradients:
    """Gradient reversal on the adversarial path"""
    
    def _extractor_grads(self, grl_scale, dataset):
        model = TwoStreamModel(2, 8, 3, embed_dim=4, hidden_dim=6, disc_hidden_dim=5, dropout=0.0, grl_scale=grl_scale, seed=9)
        segments = dataset.source[:3] + dataset.target[:3]
        with Tape() as tape:
            loss = model.loss_adv(segments)
        grads = tape.backward(loss)
        return [grads[p].copy() for p in model.extractor_parameters()], [grads[p].copy() for p in model.discriminator_parameters()]
    
    @pytest.mark.parametrize("scale", [0.0, 0.5, 1.0])
    def test_extractor_gradient_reversed(self, scale, dataset):
        """Test extractor gradients equal -scale times the un-reversed ones"""
        plain_f, plain_d = self._extractor_grads(None, dataset)
        rev_f, rev_d = self._extractor_grads(scale, dataset)
        for g_rev, g_plain in zip(rev_f, plain_f):
            assert np.array_equal(g_rev, -scale * g_plain)
        for g_rev, g_plain in zip(rev_d, plain_d):
            assert np.array_equal(g_rev, g_plain)
    
    def test_zero_scale_still_trains_discriminator(self, dataset):
        """Test GRL scale 0 zeroes extractor gradients but not discriminator ones"""
        f, d = self._extractor_grads(0.0, dataset)
        assert all(not np.any(g) for g in f)
        assert any(np.any(g) for g in d)


class TestAccuracy:
    """Test cases for top1_accuracy"""
    
    def test_deterministic(self, model, dataset):
        """Test two evaluations agree exactly"""
        labels = evaluation_labels(dataset.target)
        assert model.top1_accuracy(dataset.target, labels) == model.top1_accuracy(dataset.target, labels)
    
    def test_ties_break_low(self, model, dataset):
        """Test uniform logits predict class 0"""
        zero_classifiers(model)
        segments = dataset.target[:5]
        assert list(model.predict(segments)) == [0] * 5
        assert model.top1_accuracy(segments, [0] * 5) == 1.0
    
    def test_empty_set(self, model):
        with pytest.raises(UndefinedMetricError):
            model.top1_accuracy([], [])
    
    def test_inference_is_not_recorded(self, model, dataset):
        """Test numpy inference helpers leave an active tape empty"""
        x = dataset.target[0].features[0].reshape(1, -1)
        with Tape() as tape:
            emb = model.embeddings(x, 0)
            model.discriminator_logits(emb, 0)
        assert tape.nodes == []


class TestStateDict:
    """Test cases for parameter access"""
    
    def test_named_parameters_are_unique(self, model):
        names = list(model.named_parameters())
        assert len(names) == len(set(names))
        assert "m0.extractor.fc1.weight" in names
        assert "m1.discriminator.fc2.bias" in names
    
    def test_groups_partition_parameters(self, model):
        groups = model.extractor_parameters() + model.classifier_parameters() + model.discriminator_parameters()
        assert {id(p) for p in groups} == {id(p) for p in model.parameters()}
    
    def test_round_trip(self, model):
        other = TwoStreamModel(2, 8, 3, embed_dim=8, hidden_dim=8, disc_hidden_dim=8, seed=99)
        other.load_state_dict(model.state_dict())
        for name, p in model.named_parameters().items():
            assert np.array_equal(other.named_parameters()[name].data, p.data)
    
    def test_shape_mismatch(self, model):
        other = TwoStreamModel(2, 8, 3, embed_dim=4, hidden_dim=8, disc_hidden_dim=8, seed=0)
        with pytest.raises(InputError):
            other.load_state_dict(model.state_dict())


class TestComposedGradient:
    """L_cls + L_adv with partial masks against finite differences"""
    
    MASKS = [np.array([True, False, True, True, True, False]), np.array([False, True, True, True, False, True])]
    
    @staticmethod
    def stage2_loss(seed, grl_scale):
        spec = DomainSpec(num_classes=3, feature_dim=8, samples_per_class=4, seed=seed)
        data = generate(spec)
        model = TwoStreamModel(2, 8, 3, embed_dim=8, hidden_dim=8, disc_hidden_dim=8, dropout=0.0,
                               grl_scale=grl_scale, seed=seed)
        source, target = data.source[:3], data.target[:3]
        segments = source + target
        features = model.segment_features(segments)
        labels = [s.class_label for s in source]
        
        def loss_fn():
            embeddings = model.embed(features)
            loss_cls = model.labeled_loss([take_rows(e, np.arange(3)) for e in embeddings], labels)
            return add(loss_cls, model.adversarial_loss(embeddings, domain_targets(segments), TestComposedGradient.MASKS))
        
        return model, loss_fn
    
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_stage2_loss(self, seed):
        """Test the composed loss without a reversal matches finite differences everywhere"""
        model, loss_fn = self.stage2_loss(seed, grl_scale=None)
        assert finite_difference_check(loss_fn, model.parameters()) < 1e-4
    
    @pytest.mark.parametrize("seed", [0, 1])
    def test_reversal_spares_heads(self, seed):
        """Test classifier and discriminator gradients are untouched by an active reversal"""
        model, loss_fn = self.stage2_loss(seed, grl_scale=1.0)
        heads = model.classifier_parameters() + model.discriminator_parameters()
        assert finite_difference_check(loss_fn, heads) < 1e-4
