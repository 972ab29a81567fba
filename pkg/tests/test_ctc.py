import itertools

import numpy as np
import numpy.testing as npt
import pytest

from s2i import instrumentation as instr
from s2i.ctc import (Hypothesis, collapse, ctc_forward_backward, ctc_loss,
                     greedy_decode, min_frames, prefix_beam_search, rerank)
from s2i.errors import InputError, TargetTooLongError
from s2i.nn import tensor as tt

NEG_INF = -np.inf


def normalized_logprobs(t_len, n_classes, seed):
    rng = np.random.default_rng(seed)
    return tt.log_softmax_np(rng.standard_normal((t_len, n_classes)))


def path_sum_log_prob(logprobs, targets, blank):
    """Sum P(path) over every frame path that collapses to targets."""
    t_len, k = logprobs.shape
    total = NEG_INF
    for path in itertools.product(range(k), repeat=t_len):
        if collapse(list(path), blank) == list(targets):
            total = np.logaddexp(total, sum(logprobs[t, c]
                                            for t, c in enumerate(path)))
    return total


def collapsed_distribution(logprobs, blank):
    """Exhaustive map collapsed sequence -> total log probability."""
    t_len, k = logprobs.shape
    dist = {}
    for path in itertools.product(range(k), repeat=t_len):
        key = tuple(collapse(list(path), blank))
        score = sum(logprobs[t, c] for t, c in enumerate(path))
        dist[key] = np.logaddexp(dist.get(key, NEG_INF), score)
    return dist


class TestCollapse:
    def test_merges_then_drops_blanks(self):
        assert collapse([1, 1, 0, 1, 2, 2], blank=0) == [1, 1, 2]
        assert collapse([0, 0, 0], blank=0) == []
        assert collapse([], blank=0) == []

    def test_min_frames_counts_repeats(self):
        assert min_frames([]) == 0
        assert min_frames([1, 2, 3]) == 3
        assert min_frames([1, 1]) == 3
        assert min_frames([2, 2, 2]) == 5


class TestCtcLoss:
    def test_matches_path_enumeration(self):
        lp = normalized_logprobs(4, 3, seed=0)
        blank = 0
        for n in range(5):
            for tgt in itertools.product([1, 2], repeat=n):
                if min_frames(list(tgt)) > 4:
                    continue
                loss, _ = ctc_forward_backward(lp, list(tgt), blank)
                npt.assert_allclose(loss, -path_sum_log_prob(lp, list(tgt), blank),
                                    atol=1e-9)

    def test_uniform_two_frame_closed_form(self):
        # 2 frames, 2 classes, every cell probability 1/2: paths (1,1),
        # (0,1), (1,0) all collapse to [1], so P = 3/4
        lp = np.full((2, 2), np.log(0.5))
        loss, _ = ctc_forward_backward(lp, [1], blank=0)
        npt.assert_allclose(loss, -np.log(0.75), atol=1e-12)

    def test_uniform_single_frame_empty_target(self):
        lp = np.full((1, 2), np.log(0.5))
        loss, _ = ctc_forward_backward(lp, [], blank=0)
        npt.assert_allclose(loss, np.log(2.0), atol=1e-12)

    def test_empty_target_sums_blank_row(self):
        lp = normalized_logprobs(6, 4, seed=1)
        loss, _ = ctc_forward_backward(lp, [], blank=2)
        npt.assert_allclose(loss, -lp[:, 2].sum(), atol=1e-12)

    def test_best_single_path_bounds_loss(self):
        lp = normalized_logprobs(5, 4, seed=2)
        ids = greedy_decode(lp, blank=0)
        loss, _ = ctc_forward_backward(lp, ids, blank=0)
        # the argmax path is one summand of P(greedy sequence)
        assert loss <= -lp.max(axis=1).sum() + 1e-12

    def test_target_too_long(self):
        lp = normalized_logprobs(2, 3, seed=3)
        with pytest.raises(TargetTooLongError):
            ctc_forward_backward(lp, [1, 2, 1], blank=0)
        # a repeat needs a separating blank frame
        with pytest.raises(TargetTooLongError):
            ctc_forward_backward(lp, [1, 1], blank=0)

    def test_rejects_blank_and_out_of_range_targets(self):
        lp = normalized_logprobs(4, 3, seed=4)
        with pytest.raises(InputError):
            ctc_forward_backward(lp, [0], blank=0)
        with pytest.raises(InputError):
            ctc_forward_backward(lp, [3], blank=0)

    def test_grad_finite_difference_unnormalized(self):
        # the gradient formula holds for raw score rows as well
        rng = np.random.default_rng(5)
        scores = rng.standard_normal((5, 4))
        _, grad = ctc_forward_backward(scores, [1, 2, 2], blank=0)
        eps = 1e-6
        for t in range(5):
            for k in range(4):
                orig = scores[t, k]
                scores[t, k] = orig + eps
                up, _ = ctc_forward_backward(scores, [1, 2, 2], blank=0)
                scores[t, k] = orig - eps
                down, _ = ctc_forward_backward(scores, [1, 2, 2], blank=0)
                scores[t, k] = orig
                npt.assert_allclose(grad[t, k], (up - down) / (2 * eps),
                                    atol=1e-7)

    def test_tensor_wrapper_scales_upstream(self):
        scores = tt.Tensor(normalized_logprobs(4, 3, seed=6),
                           requires_grad=True)
        loss = tt.mul(ctc_loss(scores, [1, 2], blank=0), 2.0)
        loss.backward()
        _, grad = ctc_forward_backward(scores.value, [1, 2], blank=0)
        npt.assert_allclose(scores.grad, 2.0 * grad, atol=1e-12)


class TestPrefixBeamSearch:
    def test_zero_frames_single_empty_hypothesis(self):
        hyps = prefix_beam_search(np.zeros((0, 3)), blank=0, beam_width=4)
        assert len(hyps) == 1
        assert hyps[0].ids == () and hyps[0].acoustic == 0.0

    def test_saturating_beam_matches_enumeration(self):
        for seed in range(4):
            lp = normalized_logprobs(3, 3, seed=seed)
            dist = collapsed_distribution(lp, blank=0)
            hyps = prefix_beam_search(lp, blank=0, beam_width=len(dist) + 8)
            got = {h.ids: h.acoustic for h in hyps}
            assert set(got) == set(dist)
            for ids, score in dist.items():
                npt.assert_allclose(got[ids], score, atol=1e-9)

    def test_wider_beam_never_hurts(self):
        lp = normalized_logprobs(6, 5, seed=7)
        best = [prefix_beam_search(lp, blank=0, beam_width=w)[0].acoustic
                for w in (1, 2, 4, 8, 16, 64)]
        assert all(b >= a - 1e-12 for a, b in zip(best, best[1:]))

    def test_peaked_scores_recover_greedy(self):
        rng = np.random.default_rng(8)
        hot = rng.integers(0, 4, size=10)
        scores = np.full((10, 4), -12.0)
        scores[np.arange(10), hot] = 0.0
        lp = tt.log_softmax_np(scores)
        hyps = prefix_beam_search(lp, blank=0, beam_width=8)
        assert list(hyps[0].ids) == greedy_decode(lp, blank=0)

    def test_exact_ties_order_short_then_lexicographic(self):
        # a uniform single frame ties every symbol extension
        lp = np.full((1, 3), np.log(1.0 / 3.0))
        hyps = prefix_beam_search(lp, blank=0, beam_width=8)
        assert [h.ids for h in hyps] == [(), (1,), (2,)]
        scores = [h.acoustic for h in hyps]
        npt.assert_allclose(scores, np.log(1.0 / 3.0), atol=1e-12)

    def test_expansion_counter_counts_considered_symbols(self):
        instr.reset()
        lp = normalized_logprobs(1, 5, seed=9)
        prefix_beam_search(lp, blank=0, beam_width=4)
        # one frame, one live prefix, four non-blank symbols
        assert instr.value(instr.BEAM_EXPANSIONS) == 4

    def test_prune_top_k_limits_expansions(self):
        lp = normalized_logprobs(8, 6, seed=10)
        instr.reset()
        prefix_beam_search(lp, blank=0, beam_width=4)
        full = instr.value(instr.BEAM_EXPANSIONS)
        instr.reset()
        prefix_beam_search(lp, blank=0, beam_width=4, prune_top_k=2)
        pruned = instr.value(instr.BEAM_EXPANSIONS)
        assert 0 < pruned < full

    def test_input_validation(self):
        with pytest.raises(InputError):
            prefix_beam_search(np.zeros(4), blank=0, beam_width=2)
        with pytest.raises(InputError):
            prefix_beam_search(np.zeros((2, 3)), blank=5, beam_width=2)
        with pytest.raises(InputError):
            prefix_beam_search(np.zeros((2, 3)), blank=0, beam_width=0)


class FakeLm:
    """Fixed table standing in for an n-gram model during rerank tests."""

    def __init__(self, table):
        self.table = table

    def sequence_log_prob(self, ids):
        return self.table[tuple(ids)]


class TestRerank:
    def hyps(self):
        return [Hypothesis((1,), -1.0), Hypothesis((2, 2), -1.5)]

    def test_zero_lm_weight_keeps_acoustic_ranking(self):
        out = rerank(self.hyps(), lm=None, lm_weight=0.0)
        assert [h.ids for h in out] == [(1,), (2, 2)]
        assert all(h.combined == h.acoustic for h in out)

    def test_strong_lm_overturns_acoustics(self):
        lm = FakeLm({(1,): -10.0, (2, 2): -0.1})
        out = rerank(self.hyps(), lm=lm, lm_weight=1.0)
        assert out[0].ids == (2, 2)
        npt.assert_allclose(out[0].combined, -1.5 + -0.1, atol=1e-12)
        npt.assert_allclose(out[0].lm, -0.1, atol=1e-12)

    def test_length_reward_prefers_longer(self):
        out = rerank(self.hyps(), lm=None, lm_weight=0.0, length_weight=1.0)
        assert out[0].ids == (2, 2)

    def test_combined_tie_breaks_to_shorter(self):
        tied = [Hypothesis((3, 1), -2.0), Hypothesis((2,), -2.0)]
        out = rerank(tied, lm=None, lm_weight=0.0)
        assert [h.ids for h in out] == [(2,), (3, 1)]

    def test_default_combined_equals_acoustic(self):
        h = Hypothesis((1, 2), -3.5)
        assert h.combined == -3.5
