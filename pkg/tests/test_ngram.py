import math

import numpy as np
import numpy.testing as npt
import pytest

from s2i import instrumentation as instr
from s2i.errors import InputError
from s2i.ngram import BOS, EOS, NgramLm, lm_score, train_ngram


def toy_corpus(seed=0, vocab_size=6, n_seqs=40):
    rng = np.random.default_rng(seed)
    # skewed unigram draw so some grams never occur
    p = rng.dirichlet(np.full(vocab_size, 0.4))
    return [[int(rng.choice(vocab_size, p=p))
             for _ in range(int(rng.integers(1, 6)))]
            for _ in range(n_seqs)]


def conditional_mass(lm, context):
    with_eos = lm.score_vocab()
    return sum(math.exp(lm.cond_log_prob(w, context)) for w in with_eos)


class TestNormalization:
    def test_every_context_sums_to_one(self):
        lm = train_ngram(toy_corpus(), vocab_size=6, order=3)
        rng = np.random.default_rng(1)
        contexts = [(), (BOS, BOS)]
        for _ in range(100):
            n = int(rng.integers(1, 3))
            ctx = tuple(int(t) for t in rng.integers(0, 6, size=n))
            contexts.append(ctx)
        for ctx in contexts:
            npt.assert_allclose(conditional_mass(lm, ctx), 1.0, atol=1e-9)

    def test_single_token_vocab(self):
        lm = train_ngram([[0], [0, 0]], vocab_size=1, order=2)
        npt.assert_allclose(conditional_mass(lm, ()), 1.0, atol=1e-12)
        npt.assert_allclose(conditional_mass(lm, (0,)), 1.0, atol=1e-12)
        assert np.isfinite(lm.sequence_log_prob([0, 0, 0]))

    def test_unseen_context_backs_off_finite(self):
        lm = train_ngram([[0, 1], [1, 2]], vocab_size=4, order=3)
        # (3, 3) never occurs, nor does token 3 at all
        lp = lm.cond_log_prob(3, (3, 3))
        assert np.isfinite(lp) and lp < 0


class TestMleLimit:
    def test_deterministic_bigram_approaches_certainty(self):
        # "a b a b": with a vanishing discount, b always follows a
        lm = train_ngram([[0, 1, 0, 1]], vocab_size=2, order=2,
                         discount=1e-9)
        npt.assert_allclose(lm.cond_log_prob(1, (0,)), 0.0, atol=1e-7)

    def test_discount_splits_mass(self):
        lm = train_ngram([[0, 1, 0, 1]], vocab_size=2, order=2, discount=0.5)
        # seen continuation keeps most of the mass but not all of it
        p_seen = math.exp(lm.cond_log_prob(1, (0,)))
        assert 0.7 < p_seen < 1.0
        assert math.exp(lm.cond_log_prob(0, (0,))) > 0.0


class TestScoring:
    def setup_method(self):
        self.lm = train_ngram(toy_corpus(2), vocab_size=6, order=3)

    def test_empty_sequence_is_eos_after_bos(self):
        expect = self.lm.cond_log_prob(EOS, (BOS, BOS))
        npt.assert_allclose(self.lm.sequence_log_prob([]), expect, atol=1e-12)

    def test_sequence_is_chain_of_conditionals(self):
        ids = [2, 0, 5]
        total = (self.lm.cond_log_prob(2, (BOS, BOS))
                 + self.lm.cond_log_prob(0, (BOS, 2))
                 + self.lm.cond_log_prob(5, (2, 0))
                 + self.lm.cond_log_prob(EOS, (0, 5)))
        npt.assert_allclose(self.lm.sequence_log_prob(ids), total, atol=1e-12)

    def test_prefix_log_prob_monotone_nonincreasing(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            ids = [int(t) for t in rng.integers(0, 6, size=6)]
            scores = [self.lm.prefix_log_prob(ids[:k]) for k in range(7)]
            assert all(b <= a + 1e-12 for a, b in zip(scores, scores[1:]))

    def test_prefix_excludes_end_symbol(self):
        ids = [1, 4]
        seq = self.lm.sequence_log_prob(ids)
        pre = self.lm.prefix_log_prob(ids)
        hist = (BOS, 1) if self.lm.order == 3 else (1,)
        npt.assert_allclose(seq - pre,
                            self.lm.cond_log_prob(EOS, (1, 4)), atol=1e-12)

    def test_out_of_vocab_ids_rejected(self):
        with pytest.raises(InputError):
            self.lm.sequence_log_prob([0, 6])
        with pytest.raises(InputError):
            self.lm.prefix_log_prob([-1])
        with pytest.raises(InputError):
            self.lm.cond_log_prob(17, ())

    def test_query_counter(self):
        instr.reset()
        self.lm.sequence_log_prob([0, 1, 2])
        assert instr.value(instr.LM_QUERIES) == 4
        instr.reset()
        self.lm.prefix_log_prob([0, 1, 2])
        assert instr.value(instr.LM_QUERIES) == 3

    def test_lm_score_is_sequence_log_prob(self):
        ids = [3, 3, 1]
        assert lm_score(self.lm, ids) == self.lm.sequence_log_prob(ids)


class TestPerplexity:
    def test_training_set_no_harder_than_held_out(self):
        train = toy_corpus(seed=4, n_seqs=60)
        held = toy_corpus(seed=5, n_seqs=60)
        lm = train_ngram(train, vocab_size=6, order=3)

        def ppl(seqs):
            lp = sum(lm.sequence_log_prob(s) for s in seqs)
            n = sum(len(s) + 1 for s in seqs)
            return math.exp(-lp / n)

        assert ppl(train) <= ppl(held)


class TestArpaRoundTrip:
    def test_tables_and_scores_survive(self, tmp_path):
        lm = train_ngram(toy_corpus(6), vocab_size=6, order=3)
        p = tmp_path / "lm.arpa"
        lm.save_arpa(p)
        back = NgramLm.load_arpa(p)
        assert back.order == lm.order and back.vocab_size == lm.vocab_size
        assert set(back.probs) == set(lm.probs)
        for g, lp in lm.probs.items():
            npt.assert_allclose(back.probs[g], lp, atol=1e-15)
        assert set(back.backoffs) == set(lm.backoffs)
        rng = np.random.default_rng(7)
        for _ in range(10):
            ids = [int(t) for t in rng.integers(0, 6, size=4)]
            npt.assert_allclose(back.sequence_log_prob(ids),
                                lm.sequence_log_prob(ids), atol=1e-12)

    def test_rejects_foreign_files(self, tmp_path):
        p = tmp_path / "junk.arpa"
        p.write_text("\\data\\\nngram 1=0\n")
        with pytest.raises(InputError):
            NgramLm.load_arpa(p)


class TestTrainingValidation:
    def test_empty_corpus(self):
        with pytest.raises(InputError):
            train_ngram([], vocab_size=3)

    def test_bad_discount(self):
        with pytest.raises(InputError):
            train_ngram([[0]], vocab_size=1, discount=0.0)
        with pytest.raises(InputError):
            train_ngram([[0]], vocab_size=1, discount=1.0)

    def test_out_of_vocab_corpus(self):
        with pytest.raises(InputError):
            train_ngram([[0, 4]], vocab_size=3)
