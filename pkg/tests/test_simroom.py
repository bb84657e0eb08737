"""
Room simulation, mixture rendering and corpus generation
"""
import json
import math

import numpy as np
import pytest

from config.settings import SAMPLE_RATE, SPEED_OF_SOUND, WALL_MARGIN
from src.dsp.wavio import read_wav
from src.simroom.dataset import MANIFEST_NAME, build_dataset, load_examples, read_manifest, spans_to_activity
from src.simroom.mixture import peak_normalize, power, render_components, render_mixture, source_offsets
from src.simroom.rir import RirSet, compute_rirs, direct_path_delay, fractional_delay_kernel, image_method_rir
from src.simroom.scenario import RoomScenario, SimulationRanges, check_scenario, sample_scenario
from src.simroom.sources import NoisePool, SourcePool, fit_length, synthetic_utterance
from src.utils.errors import DataError


def _shoebox(beta=0.5, room=(5.0, 4.0, 3.0)):
    room = np.array(room)
    return RoomScenario(room, beta, np.array([1.0, 1.0, 0.75]), np.array([1.0, 1.0, 0.15]),
                        np.zeros((0, 3)), np.zeros((0, 3)))


def _brute_force_rir(room, beta, mic, source, max_order, length):
    """Direct enumeration of image indices with an explicit windowed-sinc tap loop"""
    response = np.zeros(length)
    reach = range(-max_order, max_order + 1)
    for nx in reach:
        for ny in reach:
            for nz in reach:
                for qx in (0, 1):
                    for qy in (0, 1):
                        for qz in (0, 1):
                            n, q = (nx, ny, nz), (qx, qy, qz)
                            order = sum(abs(n[i] - q[i]) + abs(n[i]) for i in range(3))
                            if order > max_order:
                                continue
                            image = [(1 - 2 * q[i]) * source[i] + 2 * n[i] * room[i] for i in range(3)]
                            distance = math.dist(image, mic)
                            delay = distance / SPEED_OF_SOUND * SAMPLE_RATE
                            amplitude = beta ** order / (4 * math.pi * distance)
                            for tap in range(int(math.floor(delay)) - 4, int(math.floor(delay)) + 6):
                                offset = tap - delay
                                if 0 <= tap < length and abs(offset) < 4:
                                    window = 0.5 * (1 + math.cos(math.pi * offset / 4))
                                    response[tap] += amplitude * window * np.sinc(offset)
    return response


class TestScenario:

    def test_seeded(self):
        a = sample_scenario(np.random.default_rng(11))
        b = sample_scenario(np.random.default_rng(11))
        assert np.array_equal(a.room, b.room) and a.beta == b.beta
        assert np.array_equal(a.mics, b.mics) and np.array_equal(a.sources, b.sources)

    def test_invariants_hold_over_many_draws(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            scenario = sample_scenario(rng)
            check_scenario(scenario, margin=WALL_MARGIN - 1e-9)
            assert scenario.mics.shape == (10, 3) and scenario.sources.shape == (10, 3)

    def test_infeasible_ranges(self):
        ranges = SimulationRanges(room_x=(4.0, 5.0), table_x=(5.0, 6.0))
        with pytest.raises(ValueError, match="Infeasible"):
            sample_scenario(np.random.default_rng(0), ranges)

    def test_degenerate_ranges(self):
        # room exactly the table plus clearance on both sides
        ranges = SimulationRanges(room_x=(3.8, 3.8), table_x=(3.0, 3.0))
        try:
            scenario = sample_scenario(np.random.default_rng(0), ranges)
        except ValueError as e:
            assert "Infeasible" in str(e)
        else:
            check_scenario(scenario, margin=WALL_MARGIN - 1e-6)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            SimulationRanges(beta=(0.8, 0.2))

    def test_check_flags_source_on_table(self):
        scenario = sample_scenario(np.random.default_rng(3))
        scenario.sources[0, :2] = scenario.table_origin[:2] + scenario.table_size[:2] / 2
        with pytest.raises(ValueError, match="source 0"):
            check_scenario(scenario)


class TestRir:

    def test_direct_path_integer_delay(self):
        mic, source = np.array([1.0, 2.0, 1.5]), np.array([2.715, 2.0, 1.5])
        response = image_method_rir(_shoebox(), mic, source, max_order=0, length=200)
        assert int(np.argmax(np.abs(response))) == 80
        assert response[80] == pytest.approx(1 / (4 * np.pi * 1.715), rel=1e-9)
        others = np.delete(response, 80)
        assert np.max(np.abs(others)) < 1e-12
        assert direct_path_delay(mic, source) == pytest.approx(80.0)

    def test_zero_beta_equals_direct_path(self):
        mic, source = np.array([1.2, 0.7, 1.1]), np.array([3.3, 2.9, 1.4])
        np.testing.assert_array_equal(
            image_method_rir(_shoebox(beta=0.0), mic, source, max_order=3, length=800),
            image_method_rir(_shoebox(beta=0.0), mic, source, max_order=0, length=800),
        )

    @pytest.mark.parametrize('max_order', [0, 1, 2])
    def test_matches_brute_force_enumeration(self, max_order):
        room = (3.1, 2.7, 2.4)
        mic, source = np.array([0.9, 1.3, 1.0]), np.array([2.2, 0.6, 1.7])
        fast = image_method_rir(_shoebox(beta=0.7, room=room), mic, source, max_order, length=600)
        oracle = _brute_force_rir(room, 0.7, mic, source, max_order, 600)
        np.testing.assert_allclose(fast, oracle, atol=1e-10)

    def test_zero_distance(self):
        point = np.array([1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="zero distance"):
            image_method_rir(_shoebox(), point, point, max_order=1, length=100)

    def test_outside_room(self):
        with pytest.raises(ValueError, match="inside the room"):
            image_method_rir(_shoebox(), np.array([6.0, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]), 1, 100)

    def test_direct_path_onset_within_one_sample(self):
        scenario = sample_scenario(np.random.default_rng(5))
        rirs = compute_rirs(scenario, scenario.mics[:3], scenario.sources[:2], max_order=2, length=2000)
        assert rirs.responses.shape == (3, 2, 2000)
        for m in range(3):
            for k in range(2):
                delay = direct_path_delay(scenario.mics[m], scenario.sources[k])
                response = rirs.responses[m, k]
                onset = int(np.argmax(np.abs(response) > 1e-3 * np.max(np.abs(response))))
                assert abs(int(np.argmax(np.abs(response[:int(delay) + 4]))) - delay) <= 1.0
                assert onset <= delay + 1

    def test_energy_decays_after_direct_path(self):
        scenario = sample_scenario(np.random.default_rng(8))
        scenario.beta = 0.6
        response = image_method_rir(scenario, scenario.mics[0], scenario.sources[0], max_order=8, length=8000)
        window = int(0.05 * SAMPLE_RATE)
        start = int(direct_path_delay(scenario.mics[0], scenario.sources[0])) + 8
        energies = [np.sum(response[t:t + window] ** 2) for t in range(start, 8000 - window, window)]
        half = len(energies) // 2
        assert energies[-1] < energies[0]
        assert np.mean(energies[half:]) < np.mean(energies[:half])

    def test_kernel_is_exact_at_integer_delay(self):
        idx, taps = fractional_delay_kernel(12.0)
        assert taps[idx == 12][0] == pytest.approx(1.0)
        np.testing.assert_allclose(taps[idx != 12], 0.0, atol=1e-12)

    def test_rirset_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            RirSet(np.zeros((2, 10)))


class TestSources:

    def test_synthetic_utterance(self, rng):
        wave = synthetic_utterance(rng, 0.5, 16000)
        assert wave.shape == (8000,)
        assert np.sqrt(np.mean(wave ** 2)) == pytest.approx(1.0)

    def test_fit_length(self, rng):
        assert len(fit_length(np.ones(10), 4, rng)) == 4
        padded = fit_length(np.ones(3), 5, rng)
        np.testing.assert_array_equal(padded, [1, 1, 1, 0, 0])

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            SourcePool(tmp_path / 'nope')

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DataError, match="No .wav"):
            SourcePool(tmp_path)

    def test_white_noise_default(self, rng):
        assert NoisePool().draw_length(rng, 123).shape == (123,)


class TestMixture:

    @staticmethod
    def _rirs(rng, mics=3, taps=32):
        responses = rng.standard_normal((mics, 2, taps)) * np.exp(-np.arange(taps) / 6.0)
        return RirSet(responses)

    def test_zero_overlap_concatenates(self, rng):
        utterances = [rng.standard_normal(400), rng.standard_normal(300)]
        example = render_mixture(utterances, self._rirs(rng), 0.0)
        assert source_offsets([400, 300], 0.0) == [0, 400]
        assert not np.any(example.activity[0] & example.activity[1])
        assert example.mixture.length == 700 + 31

    def test_full_overlap(self, rng):
        utterances = [rng.standard_normal(500), rng.standard_normal(500)]
        example = render_mixture(utterances, self._rirs(rng), 1.0)
        assert example.mixture.length == 500 + 31
        assert np.all(example.activity[:, :500])

    def test_overlap_span(self):
        offsets = source_offsets([1000, 600], 0.25)
        assert offsets == [0, 850]
        assert 1000 - offsets[1] == 150

    def test_overlap_out_of_range(self, rng):
        with pytest.raises(ValueError):
            render_mixture([np.ones(10), np.ones(10)], self._rirs(rng), 1.5)

    def test_snr(self, rng):
        utterances = [rng.standard_normal(800), rng.standard_normal(800)]
        noise_rir = rng.standard_normal((3, 32)) * np.exp(-np.arange(32) / 6.0)
        parts = render_components(utterances, self._rirs(rng), 0.4, rng.standard_normal(2000), noise_rir, 15.0)
        measured = 10 * np.log10(power(parts.speech) / power(parts.noise))
        assert measured == pytest.approx(15.0, abs=0.01)

    def test_references_are_channel0_images(self, rng):
        rirs = self._rirs(rng)
        utterances = [rng.standard_normal(300), rng.standard_normal(300)]
        example = render_mixture(utterances, rirs, 0.5)
        np.testing.assert_allclose(example.references.sum(axis=0), example.mixture.samples[0], atol=1e-12)
        np.testing.assert_allclose(example.references[0, :331], np.convolve(utterances[0], rirs.responses[0, 0]))

    def test_linear_in_each_source(self, rng):
        rirs = self._rirs(rng)
        a, b, c = rng.standard_normal((3, 400))
        mixed = render_mixture([2.0 * a - c, b], rirs, 0.3).mixture.samples
        expected = (2.0 * render_mixture([a, b], rirs, 0.3).mixture.samples
                    - render_mixture([c, b], rirs, 0.3).mixture.samples)
        np.testing.assert_allclose(mixed, expected, atol=1e-10)

    def test_white_noise_needs_rng(self, rng):
        with pytest.raises(ValueError, match="rng"):
            render_mixture([np.ones(10), np.ones(10)], self._rirs(rng), 0.5, snr_db=10.0)

    def test_peak_normalize(self, tiny_example):
        loud, _ = peak_normalize(tiny_example, 1e6)
        assert loud is tiny_example
        scaled, gain = peak_normalize(tiny_example, 0.01)
        assert np.max(np.abs(scaled.mixture.samples)) == pytest.approx(0.01)
        np.testing.assert_allclose(scaled.references, tiny_example.references * gain)


class TestDataset:

    KW = dict(num_channels=3, max_order=1, utterance_seconds=0.2, rir_seconds=0.05)

    def test_manifest_and_wavs(self, tmp_path):
        manifest = build_dataset(2, tmp_path / 'corpus', seed=7, **self.KW)
        assert manifest.name == MANIFEST_NAME
        records = read_manifest(manifest)
        assert [r['id'] for r in records] == ['ex00000', 'ex00001']
        record = records[0]
        assert len(record['channels']) == 3 and len(record['references']) == 2
        assert record['seed'] == [7, 0]
        for field in ('room', 'beta', 'mics', 'sources', 'noise_source'):
            assert field in record['scenario']
        for rel in record['channels']:
            samples, rate = read_wav(manifest.parent / rel)
            assert rate == SAMPLE_RATE
            assert np.max(np.abs(samples)) <= 1.0

    def test_deterministic(self, tmp_path):
        a = build_dataset(1, tmp_path / 'a', seed=3, **self.KW)
        b = build_dataset(1, tmp_path / 'b', seed=3, **self.KW)
        assert a.read_text() == b.read_text()
        for rel in read_manifest(a)[0]['channels']:
            assert (a.parent / rel).read_bytes() == (b.parent / rel).read_bytes()

    def test_worker_count_does_not_change_output(self, tmp_path):
        serial = build_dataset(2, tmp_path / 's', seed=4, jobs=1, **self.KW)
        pooled = build_dataset(2, tmp_path / 'p', seed=4, jobs=2, **self.KW)
        assert serial.read_text() == pooled.read_text()

    def test_channel_bounds(self, tmp_path):
        kw = dict(self.KW, num_channels=10)
        assert len(read_manifest(build_dataset(1, tmp_path / 'ten', **kw))[0]['channels']) == 10
        with pytest.raises(ValueError, match="num_channels"):
            build_dataset(1, tmp_path / 'eleven', **dict(self.KW, num_channels=11))

    def test_load_examples(self, tmp_path):
        manifest = build_dataset(2, tmp_path, seed=1, **self.KW)
        examples = load_examples(manifest, limit=1)
        assert len(examples) == 1
        example = examples[0]
        assert example.mixture.num_channels == 3
        assert example.references.shape == (2, example.mixture.length)
        assert example.activity.shape == example.references.shape
        assert example.metadata['overlap_ratio'] == read_manifest(manifest)[0]['overlap_ratio']

    def test_malformed_line_is_reported(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        good = json.dumps({'id': 'a', 'channels': ['x.wav'], 'references': ['r.wav']})
        path.write_text(good + '\n' + '{"id": "b", "channels": [\n')
        with pytest.raises(DataError, match=r":2: malformed manifest line"):
            read_manifest(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text(json.dumps({'id': 'a', 'channels': []}) + '\n')
        with pytest.raises(DataError, match="missing references"):
            read_manifest(path)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text('\n')
        with pytest.raises(DataError, match="no records"):
            read_manifest(path)

    def test_missing_wav_names_line(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text(json.dumps({'id': 'a', 'channels': ['gone.wav'], 'references': ['r.wav']}) + '\n')
        with pytest.raises(DataError, match=":1:"):
            load_examples(path)

    def test_spans_to_activity(self):
        flags = spans_to_activity([[0, 3], [2, 5]], 6)
        np.testing.assert_array_equal(flags.sum(axis=1), [3, 3])
        assert flags[0, 2] and flags[1, 2] and not flags[0, 3]
