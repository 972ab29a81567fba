import numpy as np
import numpy.testing as npt
import pytest

from s2i.config import SynthConfig
from s2i.data import load_manifest
from s2i.errors import InputError
from s2i.synth import (BLANK_INTENT, CARRIERS, KEYWORDS, LETTERS, N_INTENTS,
                       OTHERS_INTENT, TWINS, CorpusSizes, add_noise,
                       generate_corpus, intent_of_text, letter_hz,
                       render_at_level, render_utterance, twin_word,
                       utterance_family, word_family)


class TestLexicon:
    def test_letter_frequencies_ordered_and_bounded(self):
        freqs = [letter_hz(c) for c in LETTERS]
        assert freqs[0] == pytest.approx(500.0)
        assert freqs[-1] == pytest.approx(3500.0)
        assert all(a < b for a, b in zip(freqs, freqs[1:]))
        # family b adds a second harmonic; even the top letter keeps it
        # under the 8 kHz Nyquist ceiling
        assert 2 * freqs[-1] < 8000.0

    def test_families_split_the_alphabet(self):
        assert word_family("alarm") == "a"
        assert word_family("light") == "a"
        assert word_family("mute") == "b"
        assert word_family("zoom") == "b"

    def test_utterance_family(self):
        assert utterance_family("hey alarm") == "a"
        assert utterance_family("mute now") == "b"
        assert utterance_family("alarm now") == "mixed"
        assert utterance_family("") == ""

    def test_twins_keep_family_and_shift_one_letter(self):
        for kw, tw in zip(KEYWORDS, TWINS):
            assert word_family(tw) == word_family(kw)
            assert len(tw) == len(kw)
            diffs = [(a, b) for a, b in zip(kw, tw) if a != b]
            assert len(diffs) == 1
            a, b = diffs[0]
            assert abs(LETTERS.index(a) - LETTERS.index(b)) == 1

    def test_no_twin_is_a_keyword(self):
        assert not set(TWINS) & set(KEYWORDS)
        assert not set(CARRIERS) & set(KEYWORDS)

    def test_twin_word_examples(self):
        assert twin_word("dim") == "djm"
        assert twin_word("stop") == "stpp"


class TestIntentOfText:
    def test_keyword_maps_to_its_index(self):
        assert intent_of_text("alarm") == 0
        assert intent_of_text("zoom please") == 25
        assert intent_of_text("hey call") == 2

    def test_first_keyword_wins(self):
        assert intent_of_text("stop alarm") == KEYWORDS.index("stop")

    def test_catch_all_and_blank(self):
        assert intent_of_text("please") == OTHERS_INTENT
        assert intent_of_text(twin_word("alarm")) == OTHERS_INTENT
        assert intent_of_text("") == BLANK_INTENT


class TestRendering:
    def setup_method(self):
        self.cfg = SynthConfig()

    def test_deterministic_with_seed(self):
        a = render_at_level("alarm now", 2, self.cfg, seed=7)
        b = render_at_level("alarm now", 2, self.cfg, seed=7)
        npt.assert_array_equal(a.samples, b.samples)

    def test_seed_changes_the_take(self):
        a = render_at_level("alarm now", 0, self.cfg, seed=7)
        b = render_at_level("alarm now", 0, self.cfg, seed=8)
        # rate jitter alone almost surely changes the length
        assert len(a.samples) != len(b.samples) or not np.array_equal(
            a.samples, b.samples)

    def test_empty_text_is_margins_only(self):
        buf = render_at_level("", 0, self.cfg, seed=1)
        expected = 2 * int(16000 * self.cfg.margin_ms / 1000)
        assert len(buf.samples) == expected
        assert np.abs(buf.samples).max() < 10 * self.cfg.noise_floor

    def test_level_out_of_range(self):
        with pytest.raises(InputError):
            render_at_level("alarm", 9, self.cfg, seed=0)
        with pytest.raises(InputError):
            render_at_level("alarm", -1, self.cfg, seed=0)

    def test_add_noise_hits_requested_snr(self):
        rng = np.random.default_rng(2)
        buf = render_utterance("kettle wake", self.cfg, rng)
        noisy = add_noise(buf, 6.0, rng)
        noise = noisy.samples - buf.samples
        snr = 10 * np.log10(np.mean(buf.samples ** 2) / np.mean(noise ** 2))
        assert snr == pytest.approx(6.0, abs=0.3)

    def test_add_noise_none_is_identity(self):
        rng = np.random.default_rng(3)
        buf = render_utterance("go", self.cfg, rng)
        assert add_noise(buf, None, rng) is buf

    def test_tone_lands_on_letter_frequency(self):
        cfg = SynthConfig(rate_jitter=0.0, pitch_jitter_mel=0.0,
                          letter_jitter_mel=0.0, noise_floor=0.0)
        rng = np.random.default_rng(4)
        buf = render_utterance("a", cfg, rng)
        spec = np.abs(np.fft.rfft(buf.samples))
        peak_hz = np.argmax(spec) * 16000 / len(buf.samples)
        assert peak_hz == pytest.approx(letter_hz("a"), abs=20.0)


class TestCorpus:
    def test_manifest_fields_consistent(self, tmp_path):
        sizes = CorpusSizes()   # the small default corpus
        generate_corpus(tmp_path, SynthConfig(), sizes, seed=3)
        records = load_manifest(tmp_path)
        ids = [r.utt_id for r in records]
        assert len(ids) == len(set(ids))
        for r in records:
            assert (tmp_path / r.wav).exists()
            assert r.duration_s > 0
            assert r.family == utterance_family(r.text)
            if r.split == "asr_train":
                assert r.intent is None
            else:
                assert r.intent == intent_of_text(r.text)

    def test_regeneration_is_bitwise_identical(self, tmp_path):
        sizes = CorpusSizes(asr_per_keyword=1, asr_others=2,
                            asr_random_words=2, asr_blank=1, v1_per_intent=1,
                            v2_per_intent=1, pool_size=5, test_per_intent=1)
        generate_corpus(tmp_path / "a", SynthConfig(), sizes, seed=9)
        generate_corpus(tmp_path / "b", SynthConfig(), sizes, seed=9)
        ma = (tmp_path / "a" / "manifest.jsonl").read_text()
        mb = (tmp_path / "b" / "manifest.jsonl").read_text()
        assert ma == mb
        for rec in load_manifest(tmp_path / "a")[:5]:
            assert ((tmp_path / "a" / rec.wav).read_bytes()
                    == (tmp_path / "b" / rec.wav).read_bytes())

    def test_balanced_sizes_even_out_intents(self, tmp_path):
        n = 2800
        generate_corpus(tmp_path, SynthConfig(),
                        CorpusSizes.balanced(n), seed=5)
        records = load_manifest(tmp_path)
        counts = {c: 0 for c in range(N_INTENTS)}
        for r in records:
            counts[intent_of_text(r.text)] += 1
        target = len(records) / N_INTENTS
        for c, got in counts.items():
            assert 0.8 * target <= got <= 1.2 * target, (c, got, target)

    def test_blank_records_have_empty_text_and_audio(self, tmp_path):
        sizes = CorpusSizes(asr_per_keyword=1, asr_others=1,
                            asr_random_words=1, asr_blank=2, v1_per_intent=1,
                            v2_per_intent=1, pool_size=3, test_per_intent=1)
        generate_corpus(tmp_path, SynthConfig(), sizes, seed=1)
        records = load_manifest(tmp_path)
        blanks = [r for r in records if r.intent == BLANK_INTENT]
        assert blanks
        for r in blanks:
            assert r.text == ""
