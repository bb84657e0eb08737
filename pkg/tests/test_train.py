"""
SI-SNR objective, permutation-invariant training and the optimization loop
"""
import itertools

import numpy as np
import pandas as pd
import pytest

from conftest import make_example
from src.dsp.stft import stft
from src.graph import OpGraph, Tensor, grad_check
from src.model.network import build_network
from src.model.params import init_params
from src.train.objectives import (
    SISNR_FLOOR_DB,
    best_permutation,
    pit_loss,
    pit_loss_graph,
    scale_allowing_sdr,
    si_snr,
    si_snr_graph,
)
from src.train.optimizer import Adam, clip_by_global_norm, global_norm
from src.train.scheduler import PlateauScheduler, decay_epochs
from src.train.trainer import (
    LOG_COLUMNS,
    TrainConfig,
    Trainer,
    build_masks,
    evaluate_loss,
    mixture_sisnr,
    read_log,
    separate_channel0,
    training_step,
)
from src.utils.errors import ShapeError


@pytest.fixture
def short_example(rng):
    return make_example(rng, num_channels=2, seconds=0.06, taps=16)


class TestSiSnr:

    def test_hand_example(self):
        assert si_snr(np.array([1.0, -1.0, 0.0, 0.0]), np.array([1.0, -1.0, 1.0, -1.0])) == pytest.approx(0.0, abs=1e-9)

    def test_scale_invariance(self, rng):
        ref = rng.standard_normal(500)
        est = ref + 0.3 * rng.standard_normal(500)
        values = [si_snr(alpha * est, ref) for alpha in (0.1, 1.0, 10.0)]
        assert max(values) - min(values) < 1e-6

    def test_perfect_estimate_is_capped(self, rng):
        ref = rng.standard_normal(200)
        assert si_snr(3.0 * ref, ref) == pytest.approx(80.0, abs=1e-6)

    def test_orthogonal_estimate_hits_floor(self):
        ref = np.array([1.0, -1.0, 1.0, -1.0])
        est = np.array([1.0, 1.0, -1.0, -1.0])
        assert si_snr(est, ref) == SISNR_FLOOR_DB

    def test_degenerate_reference(self):
        with pytest.raises(ValueError, match="degenerate reference"):
            si_snr(np.ones(4), np.full(4, 2.0))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            si_snr(np.ones(4), np.ones(5))

    def test_graph_version_matches(self, rng, float64):
        ref = rng.standard_normal(300)
        est = ref + 0.5 * rng.standard_normal(300)
        assert si_snr_graph(OpGraph(), Tensor(est), ref).item() == pytest.approx(si_snr(est, ref), abs=1e-9)

    def test_sdr_allows_scaling(self, rng):
        ref = rng.standard_normal(300)
        noisy = ref + 0.1 * rng.standard_normal(300)
        assert scale_allowing_sdr(0.2 * noisy, ref) == pytest.approx(scale_allowing_sdr(noisy, ref), abs=1e-9)
        assert scale_allowing_sdr(noisy, ref) > 10.0


class TestPit:

    def test_swapped_references(self, rng):
        refs = rng.standard_normal((2, 400))
        loss, perm = pit_loss(refs[::-1].copy(), refs)
        assert perm == (1, 0)
        assert loss == pytest.approx(-80.0, abs=1e-6)

    def test_ordered_references(self, rng):
        refs = rng.standard_normal((2, 400))
        assert pit_loss(refs, refs)[1] == (0, 1)

    def test_matches_brute_force(self, rng):
        for _ in range(1000):
            refs = rng.standard_normal((2, 256))
            ests = rng.standard_normal((2, 256)) + 0.5 * refs[rng.permutation(2)]
            scores = {
                perm: np.mean([si_snr(ests[k], refs[perm[k]]) for k in range(2)])
                for perm in itertools.permutations(range(2))
            }
            winner = max(scores, key=scores.get)
            loss, perm = pit_loss(ests, refs)
            assert perm == winner
            assert loss == pytest.approx(-scores[winner])
            assert best_permutation(ests, refs) == (winner, pytest.approx(scores[winner]))

    def test_needs_two_sources(self, rng):
        with pytest.raises(ShapeError):
            pit_loss(rng.standard_normal((3, 10)), rng.standard_normal((3, 10)))

    def test_graph_loss_only_uses_winning_assignment(self, rng, float64):
        refs = rng.standard_normal((2, 128))
        ests = Tensor(refs[::-1] + 0.2 * rng.standard_normal((2, 128)), requires_grad=True)
        loss, perm = pit_loss_graph(OpGraph(), ests, refs)
        assert perm == (1, 0)
        assert loss.item() == pytest.approx(pit_loss(ests.data, refs)[0])


class TestTrainingStep:

    def test_unit_masks_reproduce_the_mixture(self, short_example, tiny_stft, float64):
        spec = stft(short_example.mixture, tiny_stft)
        g = OpGraph()
        ones = Tensor(np.ones((2, spec.num_frames, spec.num_bins)))
        estimates = separate_channel0(g, ones, spec, short_example.mixture.length)
        loss, _ = pit_loss_graph(g, estimates, short_example.references)

        ch0 = np.repeat(short_example.mixture.samples[:1], 2, axis=0)
        assert loss.item() == pytest.approx(pit_loss(ch0, short_example.references)[0], abs=1e-6)
        assert loss.item() == pytest.approx(-mixture_sisnr([short_example]), abs=1e-6)

    def test_deterministic(self, short_example, tiny_net, tiny_stft):
        first, grads_a, _ = training_step(short_example, tiny_net, tiny_stft)
        second, grads_b, _ = training_step(short_example, tiny_net, tiny_stft)
        assert first == second
        assert all(np.array_equal(grads_a[k], grads_b[k]) for k in grads_a)

    def test_loss_matches_evaluation(self, short_example, tiny_net, tiny_stft):
        loss, grads, perm = training_step(short_example, tiny_net, tiny_stft)
        assert loss == pytest.approx(evaluate_loss(short_example, tiny_net, tiny_stft), abs=1e-9)
        assert set(grads) == set(tiny_net.params)
        assert sorted(perm) == [0, 1]

    def test_gradient_matches_finite_differences(self, short_example, tiny_net, tiny_stft):
        spec = stft(short_example.mixture, tiny_stft)

        def loss_fn(g, params):
            masks = build_masks(g, tiny_net, spec)
            estimates = separate_channel0(g, masks, spec, short_example.mixture.length)
            return pit_loss_graph(g, estimates, short_example.references)[0]

        subset = {name: tiny_net.params[name] for name in ('block0.rnn.fwd.b',)}
        assert grad_check(loss_fn, subset) < 1e-4

    @pytest.mark.slow
    def test_full_gradient_check(self, short_example, tiny_net, tiny_stft):
        spec = stft(short_example.mixture, tiny_stft)

        def loss_fn(g, params):
            masks = build_masks(g, tiny_net, spec)
            estimates = separate_channel0(g, masks, spec, short_example.mixture.length)
            return pit_loss_graph(g, estimates, short_example.references)[0]

        assert grad_check(loss_fn, tiny_net.params) < 1e-4

    def test_small_step_does_not_increase_loss(self, short_example, tiny_net, tiny_stft):
        before, grads, _ = training_step(short_example, tiny_net, tiny_stft)
        Adam().step(tiny_net.params, grads, lr=1e-6)
        assert evaluate_loss(short_example, tiny_net, tiny_stft) <= before + 1e-9

    def test_single_channel_architecture(self, short_example, tiny_config, tiny_stft, float64):
        cfg = tiny_config.model_copy(update={'architecture': 'single_channel', 'single_channel_layers': 1,
                                             'input_feature': 'magnitude+relational'})
        net = build_network(cfg, init_params(cfg, np.random.default_rng(0)))
        loss, grads, _ = training_step(short_example, net, tiny_stft)
        assert np.isfinite(loss)
        assert set(grads) == set(net.params)


class TestOptimizer:

    def test_zero_gradient_leaves_params(self, float64):
        params = {'w': Tensor(np.array([1.0, -2.0]), requires_grad=True)}
        Adam().step(params, {'w': np.zeros(2)}, lr=0.1)
        np.testing.assert_array_equal(params['w'].data, [1.0, -2.0])

    def test_first_step_moves_by_lr(self, float64):
        params = {'w': Tensor(np.array([1.0, -2.0]), requires_grad=True)}
        Adam().step(params, {'w': np.array([0.5, -4.0])}, lr=0.01)
        np.testing.assert_allclose(params['w'].data, [0.99, -1.99], atol=1e-7)

    def test_state_round_trip(self, float64):
        params = {'w': Tensor(np.ones(3), requires_grad=True)}
        adam = Adam()
        adam.step(params, {'w': np.arange(3.0)}, lr=0.1)
        restored = Adam()
        restored.load_state(adam.state_tensors(), adam.step_count)
        assert restored.step_count == 1
        np.testing.assert_array_equal(restored.m['w'], adam.m['w'])
        np.testing.assert_array_equal(restored.v['w'], adam.v['w'])

    def test_clipping(self):
        grads = {'a': np.array([3.0]), 'b': np.array([4.0])}
        clipped, norm = clip_by_global_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert global_norm(clipped) == pytest.approx(1.0)
        unchanged, _ = clip_by_global_norm(grads, 10.0)
        np.testing.assert_array_equal(unchanged['a'], [3.0])


class TestScheduler:

    def test_flat_scores_decay_once(self):
        assert decay_epochs([5, 5, 5, 5], patience=3) == [4]

    def test_improvement_resets_counter(self):
        assert decay_epochs([5, 6, 5, 5, 5], patience=3) == [5]

    def test_counter_restarts_after_decay(self):
        assert decay_epochs([1, 0, 0, 0, 0, 0, 0], patience=3) == [4, 7]

    def test_lr_halves(self):
        scheduler = PlateauScheduler(1e-3, patience=1, factor=0.5)
        scheduler.step(1.0)
        assert scheduler.step(0.5)
        assert scheduler.lr == pytest.approx(5e-4)

    def test_state_round_trip(self):
        scheduler = PlateauScheduler(1e-3, patience=2)
        for score in (1.0, 0.5, 0.4, 0.3):
            scheduler.step(score)
        restored = PlateauScheduler(1.0, patience=2)
        restored.load_state_dict(scheduler.state_dict())
        assert restored.state_dict() == scheduler.state_dict()

    @pytest.mark.parametrize('patience, factor', [(0, 0.5), (3, 1.0), (3, 0.0)])
    def test_rejects_invalid(self, patience, factor):
        with pytest.raises(ValueError):
            PlateauScheduler(1e-3, patience, factor)


class TestTrainer:

    def _trainer(self, tiny_net, tiny_stft, epochs):
        cfg = TrainConfig(learning_rate=3e-3, batch_size=2, max_epochs=epochs, seed=5)
        return Trainer(tiny_net, tiny_stft, cfg)

    def test_fit_writes_checkpoints_and_log(self, tmp_path, rng, tiny_net, tiny_stft):
        examples = [make_example(rng, 2, seconds=0.06, taps=16, example_id=f"ex{i}") for i in range(3)]
        out = tmp_path / 'run' / 'model.ckpt'
        history = self._trainer(tiny_net, tiny_stft, 2).fit(examples, examples, out, tmp_path / 'log.csv')

        assert out.exists() and (tmp_path / 'run' / 'model.ckpt.last').exists()
        log = read_log(tmp_path / 'log.csv')
        assert list(log.columns) == LOG_COLUMNS
        assert log['epoch'].tolist() == [1, 2]
        pd.testing.assert_frame_equal(log, history, check_dtype=False)

    def test_resume_continues_the_run(self, tmp_path, rng, tiny_net, tiny_stft, tiny_config):
        examples = [make_example(rng, 2, seconds=0.06, taps=16, example_id=f"ex{i}") for i in range(2)]
        initial = {k: t.data.copy() for k, t in tiny_net.params.items()}

        straight = self._trainer(tiny_net, tiny_stft, 3)
        straight.fit(examples, examples, tmp_path / 'a.ckpt', tmp_path / 'a.csv')

        params = init_params(tiny_config, np.random.default_rng(0))
        for name, tensor in params.items():
            tensor.data = initial[name]
        first = self._trainer(build_network(tiny_config, params), tiny_stft, 2)
        first.fit(examples, examples, tmp_path / 'b.ckpt', tmp_path / 'b.csv')

        params = init_params(tiny_config, np.random.default_rng(99))
        resumed = self._trainer(build_network(tiny_config, params), tiny_stft, 3)
        resumed.fit(examples, examples, tmp_path / 'b.ckpt', tmp_path / 'b.csv', resume=tmp_path / 'b.ckpt.last')

        assert resumed.epoch == 3
        assert read_log(tmp_path / 'b.csv')['epoch'].tolist() == [1, 2, 3]
        for name, tensor in straight.net.params.items():
            np.testing.assert_allclose(resumed.net.params[name].data, tensor.data, atol=1e-6)

    def test_rejects_empty_sets(self, tmp_path, tiny_net, tiny_stft, short_example):
        with pytest.raises(ValueError):
            self._trainer(tiny_net, tiny_stft, 1).fit([], [short_example], tmp_path / 'm', tmp_path / 'l.csv')

    @pytest.mark.slow
    def test_overfits_four_examples(self, tmp_path, rng, tiny_config, tiny_stft):
        examples = [make_example(rng, 4, seconds=0.5, example_id=f"ex{i}") for i in range(4)]
        net = build_network(tiny_config, init_params(tiny_config, np.random.default_rng(0)))
        cfg = TrainConfig(learning_rate=3e-3, batch_size=4, max_epochs=300, seed=0)
        trainer = Trainer(net, tiny_stft, cfg)
        trainer.fit(examples, examples, tmp_path / 'm.ckpt', tmp_path / 'log.csv')
        assert trainer.best_val - mixture_sisnr(examples) >= 5.0
