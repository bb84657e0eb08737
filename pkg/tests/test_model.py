"""
Separation networks: layers, invariances, gradients and checkpoints
"""
import math

import numpy as np
import pytest
from scipy.special import expit, softmax

from src.dsp.stft import ComplexSpectrogram, StftConfig
from src.graph import OpGraph, Tensor, constant, grad_check, precision
from src.model.checkpoint import load_checkpoint, save_checkpoint
from src.model.config import ModelConfig
from src.model.layers import channel_attention, input_features, relational_features, temporal_layer
from src.model.network import (
    MaskSet,
    SingleChannelNet,
    SpatioTemporalNet,
    build_network,
    forward,
    load_network,
    network_metadata,
    single_channel_forward,
)
from src.model.params import count_parameters, expected_shapes, init_params, params_from_arrays, validate_params
from src.utils.errors import ConfigError, DataError, ShapeError

# 16-point FFT gives N = 9 bins
SMALL_STFT = StftConfig(fft_size=16, hop=8)
SMALL = ModelConfig(num_blocks=2, feature_dim=9, embed_dim=4, num_heads=2, hidden_size=8)


def _spectrogram(rng, num_channels, num_frames=6, cfg=SMALL_STFT):
    shape = (num_channels, num_frames, cfg.num_bins)
    return ComplexSpectrogram(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), cfg)


def _params(cfg, seed=0):
    return init_params(cfg, np.random.default_rng(seed))


def _weighted_mask_sum(net, spec, weights):
    def f(g, params):
        return g.sum(g.mul(net.build(g, spec), constant(weights)))
    return f


def _first_layer_norm_input(g):
    return next(n for n in g.nodes if n.kind == 'layer_norm').inputs[0].data


class TestParams:

    def test_names_and_shapes(self):
        shapes = expected_shapes(SMALL)
        assert shapes['block0.attn.head1.WQ'] == (4, 9)
        assert shapes['block1.rnn.fwd.W_hh'] == (32, 8)
        assert shapes['fusion.attn.ffn.W'] == (9, 8)
        assert shapes['head1.W'] == (9, 9)

    def test_stacked_has_same_layer_counts_without_fusion(self):
        stacked = expected_shapes(SMALL.model_copy(update={'topology': 'stacked'}))
        interleaved = expected_shapes(SMALL)
        assert not any(name.startswith('fusion') for name in stacked)
        assert sum(n.endswith('.WQ') for n in stacked) == SMALL.num_blocks * SMALL.num_heads
        assert set(stacked) < set(interleaved)

    def test_init_is_seeded_and_bounded(self):
        a, b = _params(SMALL, 3), _params(SMALL, 3)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a)
        w = a['block0.attn.head0.WQ'].data
        assert np.all(np.abs(w) <= 1 / math.sqrt(9))
        np.testing.assert_array_equal(a['input_norm.gain'].data, np.ones(9))
        np.testing.assert_array_equal(a['block0.rnn.fwd.b'].data[8:16], 1.0)

    def test_validate_rejects_mismatch(self):
        params = _params(SMALL)
        params.pop('head0.b')
        with pytest.raises(ConfigError, match="missing"):
            validate_params(params, SMALL)

        params = _params(SMALL)
        params['head0.b'] = Tensor(np.zeros(3))
        with pytest.raises(ConfigError, match="head0.b"):
            validate_params(params, SMALL)

    def test_count(self):
        params = _params(SMALL)
        assert count_parameters(params) == sum(int(np.prod(s)) for s in expected_shapes(SMALL).values())


class TestLayers:

    def test_input_features_normalize_each_frame(self, rng, float64):
        params = _params(SMALL)
        magnitudes = np.abs(rng.standard_normal((2, 4, 9)))
        out = input_features(OpGraph(), magnitudes, params, SMALL).data
        mu = magnitudes.mean(axis=-1, keepdims=True)
        expected = (magnitudes - mu) / np.sqrt(magnitudes.var(axis=-1, keepdims=True) + 1e-5)
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_input_features_wrong_bin_count(self, float64):
        with pytest.raises(ShapeError, match="bins"):
            input_features(OpGraph(), np.ones((1, 2, 5)), _params(SMALL), SMALL)

    def test_channel_attention_hand_example(self, float64):
        cfg = ModelConfig(num_blocks=1, feature_dim=2, embed_dim=1, num_heads=1, hidden_size=1)
        params = {
            'a.head0.WQ': constant([[1.0, 0.0]]), 'a.head0.bQ': constant([0.0]),
            'a.head0.WK': constant([[1.0, 0.0]]), 'a.head0.bK': constant([0.0]),
            'a.head0.WV': constant([[0.0, 1.0]]), 'a.head0.bV': constant([0.0]),
            'a.ffn.W': constant([[1.0], [1.0]]), 'a.ffn.b': constant([0.0, 0.0]),
        }
        x = np.array([[[1.0, 2.0]], [[2.0, 3.0]]])  # (C=2, T=1, N=2)
        out = channel_attention(OpGraph(), constant(x), params, 'a', cfg).data

        for i in range(2):
            a_i = x[i, 0, 0]
            weights = softmax([a_i * x[0, 0, 0], a_i * x[1, 0, 0]])
            head = weights[0] * x[0, 0, 1] + weights[1] * x[1, 0, 1]
            np.testing.assert_allclose(out[i, 0], max(head, 0.0) + x[i, 0], atol=1e-12)

    def test_channel_attention_single_channel(self, rng, float64):
        params = _params(SMALL)
        x = rng.standard_normal((1, 3, 9))
        out = channel_attention(OpGraph(), constant(x), params, 'block0.attn', SMALL).data

        heads = []
        for i in range(SMALL.num_heads):
            w, b = params[f"block0.attn.head{i}.WV"].data, params[f"block0.attn.head{i}.bV"].data
            heads.append(x[0] @ w.T + b)
        ffn_w, ffn_b = params['block0.attn.ffn.W'].data, params['block0.attn.ffn.b'].data
        expected = np.maximum(np.concatenate(heads, axis=-1) @ ffn_w.T + ffn_b, 0) + x[0]
        np.testing.assert_allclose(out[0], expected, atol=1e-10)

    def test_channel_attention_equivariance(self, rng):
        params = _params(SMALL)
        x = rng.standard_normal((3, 4, 9))
        perm = [2, 0, 1]
        out = channel_attention(OpGraph(), constant(x), params, 'block0.attn', SMALL).data
        permuted = channel_attention(OpGraph(), constant(x[perm]), params, 'block0.attn', SMALL).data
        assert np.max(np.abs(permuted - out[perm])) < 1e-5

    def test_temporal_layer_single_step(self, rng, float64):
        params = _params(SMALL)
        x = rng.standard_normal((1, 1, 9))
        out = temporal_layer(OpGraph(), constant(x), params, 'block0.rnn', SMALL).data

        states = []
        for direction in ('fwd', 'bwd'):
            w = params[f"block0.rnn.{direction}.W_ih"].data
            z = w @ x[0, 0] + params[f"block0.rnn.{direction}.b"].data
            i, f, c, o = np.split(z, 4)
            states.append(expit(o) * np.tanh(expit(i) * np.tanh(c)))
        expected = params['block0.rnn.proj.W'].data @ np.concatenate(states) + params['block0.rnn.proj.b'].data
        np.testing.assert_allclose(out[0, 0], expected, atol=1e-10)

    def test_temporal_layer_duplicate_channels(self, rng, float64):
        params = _params(SMALL)
        x = rng.standard_normal((1, 5, 9))
        out = temporal_layer(OpGraph(), constant(np.concatenate([x, x])), params, 'block0.rnn', SMALL).data
        np.testing.assert_allclose(out[0], out[1], rtol=0, atol=1e-12)

    def test_temporal_layer_zero_input_gives_projection_bias(self, float64):
        params = _params(SMALL)
        for direction in ('fwd', 'bwd'):
            params[f"block0.rnn.{direction}.b"] = Tensor(np.zeros(32))
        out = temporal_layer(OpGraph(), constant(np.zeros((2, 3, 9))), params, 'block0.rnn', SMALL).data
        np.testing.assert_allclose(out, np.broadcast_to(params['block0.rnn.proj.b'].data, out.shape), atol=1e-12)

    def test_relational_two_channels_swap(self, rng):
        x = rng.standard_normal((2, 3, 5))
        y = relational_features(x)
        np.testing.assert_allclose(y[0], x[1])
        np.testing.assert_allclose(y[1], x[0])

    def test_relational_identical_channels(self, rng):
        frame = rng.standard_normal((1, 3, 5))
        x = np.repeat(frame, 4, axis=0)
        np.testing.assert_allclose(relational_features(x), x, atol=1e-12)

    def test_relational_hand_weights(self):
        eps = 1e-3
        x = np.zeros((3, 1, 2))
        x[1, 0] = [1.0, 0.0]
        x[2, 0] = [3.0, 0.0]
        y = relational_features(x, eps_d=eps)
        w = softmax([1 / (1 + eps), 1 / (3 + eps)])
        np.testing.assert_allclose(y[0, 0], w[0] * x[1, 0] + w[1] * x[2, 0])

    def test_relational_needs_two_channels(self):
        with pytest.raises(ValueError, match="2 channels"):
            relational_features(np.zeros((1, 2, 3)))


class TestSpatioTemporalNet:

    @pytest.mark.parametrize('num_channels', [1, 2, 3, 5, 8])
    def test_any_channel_count(self, rng, num_channels):
        masks = forward(_spectrogram(rng, num_channels), SMALL, _params(SMALL))
        assert masks.masks.shape == (2, 6, 9)
        assert np.all((masks.masks >= 0) & (masks.masks <= 1))

    @pytest.mark.parametrize('mode, tolerance', [('float32', 1e-5), ('float64', 1e-10)])
    @pytest.mark.parametrize('num_channels', [2, 3, 5, 8])
    def test_permutation_invariance(self, mode, tolerance, num_channels):
        with precision(mode):
            net = SpatioTemporalNet(SMALL, _params(SMALL))
            for seed in range(20):
                rng = np.random.default_rng(seed)
                spec = _spectrogram(rng, num_channels)
                reference = net.masks(spec).masks
                for perm in (rng.permutation(num_channels), np.arange(num_channels)[::-1]):
                    permuted = ComplexSpectrogram(spec.bins[perm], SMALL_STFT)
                    assert np.max(np.abs(net.masks(permuted).masks - reference)) < tolerance

    def test_stacked_topology_invariance(self, rng, float64):
        cfg = SMALL.model_copy(update={'topology': 'stacked'})
        net = build_network(cfg, _params(cfg))
        spec = _spectrogram(rng, 3)
        permuted = ComplexSpectrogram(spec.bins[[1, 2, 0]], SMALL_STFT)
        assert np.max(np.abs(net.masks(spec).masks - net.masks(permuted).masks)) < 1e-10

    def test_input_is_the_magnitude_spectrum(self, rng, float64):
        spec = _spectrogram(rng, 3)
        g = OpGraph()
        SpatioTemporalNet(SMALL, _params(SMALL)).build(g, spec)
        np.testing.assert_array_equal(_first_layer_norm_input(g), np.abs(spec.bins))

    def test_deterministic(self, rng):
        net = SpatioTemporalNet(SMALL, _params(SMALL))
        spec = _spectrogram(rng, 1)
        assert np.array_equal(net.masks(spec).masks, net.masks(spec).masks)

    def test_rejects_wrong_params(self):
        other = SMALL.model_copy(update={'hidden_size': 4})
        with pytest.raises(ConfigError):
            SpatioTemporalNet(SMALL, _params(other))

    def test_gradients_of_selected_parameters(self, rng, float64):
        params = _params(SMALL)
        net = SpatioTemporalNet(SMALL, params)
        spec = _spectrogram(rng, 3)
        weights = rng.standard_normal((2, 6, 9))
        names = ['input_norm.gain', 'block0.attn.head1.WK', 'block1.rnn.bwd.W_hh', 'fusion.attn.ffn.b', 'head0.W']
        worst = grad_check(_weighted_mask_sum(net, spec, weights), {k: params[k] for k in names})
        assert worst < 1e-4

    @pytest.mark.slow
    def test_full_gradient_check(self, rng, float64):
        params = _params(SMALL)
        net = SpatioTemporalNet(SMALL, params)
        spec = _spectrogram(rng, 3)
        weights = rng.standard_normal((2, 6, 9))
        assert grad_check(_weighted_mask_sum(net, spec, weights), params) < 1e-4


class TestSingleChannelNet:

    CFG = SMALL.model_copy(update={'architecture': 'single_channel', 'single_channel_layers': 2})

    def test_masks(self, rng):
        masks = single_channel_forward(_spectrogram(rng, 1), self.CFG, _params(self.CFG))
        assert masks.masks.shape == (2, 6, 9)
        assert np.all((masks.masks >= 0) & (masks.masks <= 1))

    def test_rejects_multichannel(self, rng):
        with pytest.raises(ShapeError):
            SingleChannelNet(self.CFG, _params(self.CFG)).masks(_spectrogram(rng, 2))

    def test_input_is_the_power_spectrum(self, rng, float64):
        spec = _spectrogram(rng, 1)
        g = OpGraph()
        SingleChannelNet(self.CFG, _params(self.CFG)).build(g, spec)
        np.testing.assert_array_equal(_first_layer_norm_input(g), np.abs(spec.bins) ** 2)

    def test_per_channel_masks(self, rng):
        net = SingleChannelNet(self.CFG, _params(self.CFG))
        spec = _spectrogram(rng, 3)
        stacked = net.per_channel_masks(spec)
        assert stacked.shape == (3, 2, 6, 9)
        np.testing.assert_array_equal(stacked[1], net.masks(spec.select([1])).masks)

    def test_relational_input(self, rng):
        cfg = self.CFG.model_copy(update={'input_feature': 'magnitude+relational'})
        net = SingleChannelNet(cfg, _params(cfg))
        with pytest.raises(ValueError, match="relational"):
            net.masks(_spectrogram(rng, 1))
        assert net.per_channel_masks(_spectrogram(rng, 2)).shape == (2, 2, 6, 9)

    def test_gradient_check(self, rng, float64):
        params = _params(self.CFG)
        net = SingleChannelNet(self.CFG, params)
        spec = _spectrogram(rng, 1)
        weights = rng.standard_normal((2, 6, 9))
        names = ['input_norm.bias', 'rnn0.fwd.W_ih', 'rnn1.proj.W', 'head1.b']
        assert grad_check(_weighted_mask_sum(net, spec, weights), {k: params[k] for k in names}) < 1e-4


class TestMaskSet:

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            MaskSet(np.full((2, 3, 4), 1.5))

    def test_rejects_wrong_source_count(self):
        with pytest.raises(ShapeError):
            MaskSet(np.zeros((3, 3, 4)))

    def test_swapped(self, rng):
        masks = MaskSet(rng.uniform(size=(2, 3, 4)))
        np.testing.assert_array_equal(masks.swapped().masks[0], masks.masks[1])


class TestCheckpoint:

    def test_round_trip(self, tmp_path, rng):
        params = _params(SMALL)
        path = save_checkpoint(tmp_path / 'nested' / 'model.ckpt', params, {'epoch': 3})
        arrays, metadata = load_checkpoint(path)
        assert metadata == {'epoch': 3}
        assert set(arrays) == set(params)
        for name, tensor in params.items():
            np.testing.assert_array_equal(arrays[name], tensor.data.astype(np.float32))

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / 'junk.ckpt'
        path.write_bytes(b'not a checkpoint at all')
        with pytest.raises(DataError, match="magic"):
            load_checkpoint(path)

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / 'absent.ckpt')

    def test_load_network_rebuilds_same_masks(self, tmp_path, rng):
        params = _params(SMALL)
        path = save_checkpoint(tmp_path / 'm.ckpt', params, network_metadata(SMALL, SMALL_STFT))
        net, stft_cfg, metadata = load_network(path)
        assert stft_cfg == SMALL_STFT
        assert net.cfg == SMALL
        spec = _spectrogram(rng, 3)
        expected = SpatioTemporalNet(SMALL, params_from_arrays({k: v.data for k, v in params.items()}, SMALL))
        np.testing.assert_allclose(net.masks(spec).masks, expected.masks(spec).masks, atol=1e-6)

    def test_load_network_without_metadata(self, tmp_path):
        path = save_checkpoint(tmp_path / 'm.ckpt', _params(SMALL))
        with pytest.raises(DataError, match="metadata"):
            load_network(path)

    def test_non_finite_parameters_are_a_data_error(self):
        arrays = {k: v.data.astype(np.float64) for k, v in _params(SMALL).items()}
        arrays['head0.b'][0] = np.nan
        with pytest.raises(DataError, match="head0.b"):
            params_from_arrays(arrays, SMALL)
