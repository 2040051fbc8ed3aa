import numpy as np
import pytest

from siscorrect.observations import (
    FeedFormatError,
    ObservationFeed,
    feed_from_truth,
    load_feed,
    validate_feed_file,
    write_feed,
)


def small_feed():
    # T=4 scalar series: x1 revealed at step 2, x3 at step 3, x4 at step 4,
    # x2 never
    values = np.array([[1.5], [0.0], [-0.25], [2.0]])
    reveal = np.array([[2], [0], [3], [4]])
    return ObservationFeed(values, reveal)


class TestConstruction:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(FeedFormatError):
            ObservationFeed(np.zeros((3, 1)), np.zeros((4, 1), dtype=int))

    def test_one_dimensional_input_rejected(self):
        with pytest.raises(FeedFormatError):
            ObservationFeed(np.zeros(3), np.zeros(3, dtype=int))

    def test_reveal_before_birth_rejected(self):
        reveal = np.array([[1], [1], [0]])  # x2 cannot be known at step 1
        with pytest.raises(FeedFormatError, match="before it exists"):
            ObservationFeed(np.zeros((3, 1)), reveal)

    def test_revealed_values_must_be_finite(self):
        values = np.array([[np.nan], [0.0]])
        with pytest.raises(FeedFormatError, match="finite"):
            ObservationFeed(values, np.array([[1], [0]]))

    def test_unrevealed_values_may_be_anything(self):
        values = np.array([[0.0], [np.inf]])
        feed = ObservationFeed(values, np.array([[1], [0]]))
        assert feed.steps == 2 and feed.n_coords == 1

    def test_empty_feed_rejected(self):
        with pytest.raises(FeedFormatError):
            ObservationFeed(np.zeros((0, 1)), np.zeros((0, 1), dtype=int))


class TestMasks:
    def test_known_at_grows_monotonically(self):
        feed = small_feed()
        assert feed.known_at(1).tolist() == [[False]]
        assert feed.known_at(2).tolist() == [[True], [False]]
        assert feed.known_at(3).tolist() == [[True], [False], [True]]
        assert feed.known_at(4).tolist() == [[True], [False], [True], [True]]

    def test_newly_known_is_the_step_increment(self):
        feed = small_feed()
        assert feed.newly_known_at(3).tolist() == [[False], [False], [True]]
        prev = np.zeros((0, 1), dtype=bool)
        for t in range(1, feed.steps + 1):
            cur = feed.known_at(t)
            grew = cur.copy()
            grew[: t - 1] &= ~prev
            assert np.array_equal(feed.newly_known_at(t), grew)
            prev = cur

    def test_known_row_is_rows_own_step_view(self):
        feed = small_feed()
        # x1 reveals at step 2, strictly after its own step
        assert feed.known_row(1).tolist() == [False]
        assert feed.known_row(3).tolist() == [True]

    def test_matrix_at_pairs_values_and_mask(self):
        feed = small_feed()
        vals, known = feed.matrix_at(3)
        assert np.array_equal(vals, feed.values[:3])
        assert np.array_equal(known, feed.known_at(3))

    def test_final_known_covers_the_horizon(self):
        feed = small_feed()
        assert np.array_equal(feed.final_known(), feed.known_at(4))


class TestFileRoundTrip:
    def test_ar1_round_trip(self, tmp_path):
        feed = small_feed()
        path = tmp_path / "series.feed"
        write_feed(path, feed, "ar1")
        back = load_feed(path, "ar1")
        known = feed.final_known()
        assert np.array_equal(back.reveal_step, feed.reveal_step)
        assert np.allclose(back.values[known], feed.values[known])

    def test_invasion_round_trip(self, tmp_path):
        values = np.array(
            [
                [0, 0, 1, 0, 0],
                [0, 0, 1, 1, 0],
                [0, 1, 1, 1, 0],
            ],
            dtype=float,
        )
        reveal = np.where(values > 0, np.arange(1, 4)[:, None], 0)
        feed = ObservationFeed(values, reveal)
        path = tmp_path / "lattice.feed"
        write_feed(path, feed, "invasion")
        back = load_feed(path, "invasion")
        assert np.array_equal(back.values, values)
        assert np.array_equal(back.reveal_step, reveal)

    def test_write_rejects_wide_ar1(self, tmp_path):
        feed = ObservationFeed(np.zeros((2, 3)), np.zeros((2, 3), dtype=int))
        with pytest.raises(FeedFormatError):
            write_feed(tmp_path / "bad.feed", feed, "ar1")

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(FeedFormatError):
            write_feed(tmp_path / "bad.feed", small_feed(), "laplace")


def _check(tmp_path, text, kind):
    path = tmp_path / "feed.txt"
    path.write_text(text)
    return validate_feed_file(path, kind)


class TestValidation:
    def test_clean_scalar_file(self, tmp_path):
        text = "3 1\n-\n0.5 -\n0.5 - 1.25\n"
        violations, shape = _check(tmp_path, text, "ar1")
        assert violations == [] and shape == (3, 1)

    def test_value_change_is_flagged(self, tmp_path):
        text = "2 1\n0.5\n0.6 -\n"
        violations, _ = _check(tmp_path, text, "ar1")
        assert any("changed value" in v for v in violations)

    def test_disappearing_reveal_is_flagged(self, tmp_path):
        text = "2 1\n0.5\n- -\n"
        violations, _ = _check(tmp_path, text, "ar1")
        assert any("missing now" in v for v in violations)

    def test_token_count_must_match_step(self, tmp_path):
        text = "2 1\n-\n- - -\n"
        violations, _ = _check(tmp_path, text, "ar1")
        assert any("expected 2 tokens" in v for v in violations)

    def test_bad_header(self, tmp_path):
        violations, shape = _check(tmp_path, "3\n-\n- -\n- - -\n", "ar1")
        assert violations and shape is None

    def test_line_count_mismatch(self, tmp_path):
        violations, _ = _check(tmp_path, "3 1\n-\n- -\n", "ar1")
        assert any("3 data lines" in v for v in violations)

    def test_lattice_clean(self, tmp_path):
        text = "3 4\n- 1 - -\n- 1 1 -\n1 1 1 -\n"
        violations, shape = _check(tmp_path, text, "invasion")
        assert violations == [] and shape == (3, 4)

    def test_lattice_multi_origin(self, tmp_path):
        text = "2 4\n1 - 1 -\n1 1 1 -\n"
        violations, _ = _check(tmp_path, text, "invasion")
        assert any("origin" in v for v in violations)

    def test_lattice_gap_is_flagged(self, tmp_path):
        text = "2 4\n- 1 - -\n- 1 - 1\n"
        violations, _ = _check(tmp_path, text, "invasion")
        assert any("not contiguous" in v for v in violations)

    def test_lattice_losing_a_cell_is_flagged(self, tmp_path):
        text = "2 4\n- 1 - -\n1 - - -\n"
        violations, _ = _check(tmp_path, text, "invasion")
        assert any("disappeared" in v for v in violations)

    def test_lattice_rejects_numeric_tokens(self, tmp_path):
        text = "1 3\n- 0.5 -\n"
        violations, _ = _check(tmp_path, text, "invasion")
        assert any("presence-only" in v for v in violations)

    def test_load_raises_on_first_violation(self, tmp_path):
        path = tmp_path / "feed.txt"
        path.write_text("2 1\n0.5\n0.6 -\n")
        with pytest.raises(FeedFormatError, match="changed value"):
            load_feed(path, "ar1")


def test_feed_from_truth_is_plain_construction():
    values = np.array([[1.0], [2.0]])
    reveal = np.array([[0], [2]])
    feed = feed_from_truth(values, reveal)
    assert np.array_equal(feed.values, values)
    assert np.array_equal(feed.reveal_step, reveal)
