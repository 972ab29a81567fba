import numpy as np
import numpy.testing as npt
import pytest

from s2i.errors import CheckpointError, InputError
from s2i.textintent import TextIntentModel, TfidfVocab, tokenize

TEXTS = ["alarm please", "please alarm now", "stop", "stop now",
         "hey stop", "alarm"]
LABELS = [0, 0, 1, 1, 1, 0]


class TestTfidf:
    def test_idf_formula(self):
        v = TfidfVocab.fit(["a b", "a c"])
        # "a" in both docs, "b"/"c" in one
        npt.assert_allclose(v.idf[v.index["a"]], np.log(3.0 / 3.0) + 1.0)
        npt.assert_allclose(v.idf[v.index["b"]], np.log(3.0 / 2.0) + 1.0)

    def test_vectors_unit_norm(self):
        v = TfidfVocab.fit(TEXTS)
        for t in TEXTS:
            npt.assert_allclose(np.linalg.norm(v.vector(t)), 1.0, atol=1e-12)

    def test_unseen_tokens_dropped(self):
        v = TfidfVocab.fit(["a b"])
        npt.assert_array_equal(v.vector("z z z"), np.zeros(v.size))

    def test_empty_text_zero_vector(self):
        v = TfidfVocab.fit(["a b"])
        npt.assert_array_equal(v.vector(""), np.zeros(v.size))

    def test_tokenize_lowercases(self):
        assert tokenize("Hey STOP") == ["hey", "stop"]

    def test_repeated_token_counts(self):
        v = TfidfVocab.fit(["a b", "b c"])
        one = v.vector("b")
        two = v.vector("b b")
        # direction identical after normalization
        npt.assert_allclose(one, two, atol=1e-12)


class TestTextIntentModel:
    def fitted(self, seed=0):
        vocab = TfidfVocab.fit(TEXTS)
        model = TextIntentModel(vocab, n_intents=3, blank_intent=2,
                                rng=np.random.default_rng(seed))
        losses = model.fit(TEXTS, LABELS, epochs=200)
        return model, losses

    def test_separable_data_fits(self):
        model, losses = self.fitted()
        assert losses[-1] < losses[0]
        for text, label in zip(TEXTS, LABELS):
            intent, conf = model.classify(text)
            assert intent == label
            assert 0.0 < conf <= 1.0

    def test_empty_text_short_circuits_to_blank(self):
        model, _ = self.fitted()
        assert model.classify("") == (2, 1.0)
        assert model.classify("   ") == (2, 1.0)

    def test_unseen_words_still_classify(self):
        model, _ = self.fitted()
        intent, conf = model.classify("gibberish words")
        assert 0 <= intent < 3

    def test_fit_rejects_mismatched_lengths(self):
        vocab = TfidfVocab.fit(TEXTS)
        model = TextIntentModel(vocab, 3, 2)
        with pytest.raises(InputError):
            model.fit(TEXTS, LABELS[:-1])

    def test_checkpoint_round_trip(self, tmp_path):
        model, _ = self.fitted()
        p = tmp_path / "text.ckpt"
        model.save(p)
        back = TextIntentModel.load(p)
        for text in TEXTS + ["alarm stop", ""]:
            assert back.classify(text) == model.classify(text)

    def test_load_rejects_other_kinds(self, tmp_path):
        from s2i.models import save_checkpoint

        p = tmp_path / "other.ckpt"
        save_checkpoint(p, "mystery", {}, [])
        with pytest.raises(CheckpointError):
            TextIntentModel.load(p)
