"""Chunker: segmentation oracle, partition maths, rebalance properties."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import PUNCTUATION, random_text, reference_segments
from voxhub.chunker import (
    Chunk,
    ChunkingConfig,
    _partition_sizes,
    chunk_response,
    rebalance,
    reconstruct_text,
    segment,
    token_count,
)
from voxhub.errors import ConfigError


@st.composite
def texts(draw, max_words=40):
    density = draw(st.floats(0.0, 0.3))
    n_words = draw(st.integers(1, max_words))
    words = []
    for _ in range(n_words):
        word = draw(st.text(alphabet="abcdefghij", min_size=1, max_size=8))
        if not word:
            word = "a"
        if draw(st.floats(0.0, 1.0)) < density:
            word += draw(st.sampled_from(PUNCTUATION))
        words.append(word)
    return " ".join(words)


class TestTokenCount:
    def test_counts_whitespace_runs(self):
        assert token_count("hi, there.") == 2
        assert token_count("  spaced   out  ") == 2
        assert token_count("") == 0
        assert token_count("one") == 1
        assert token_count("a\tb\nc") == 3


class TestSegment:
    def test_splits_after_terminators(self):
        chunks = segment("Hello. How are you? Fine.")
        assert [c.text for c in chunks] == ["Hello.", "How are you?", "Fine."]

    def test_terminator_runs_stay_together(self):
        chunks = segment("Wait... okay. Sure?!")
        assert [c.text for c in chunks] == ["Wait...", "okay.", "Sure?!"]

    def test_trailing_text_without_terminator(self):
        chunks = segment("First part. and then a tail")
        assert [c.text for c in chunks] == ["First part.", "and then a tail"]

    def test_commas_do_not_split(self):
        chunks = segment("one, two, three")
        assert [c.text for c in chunks] == ["one, two, three"]

    def test_empty_and_whitespace(self):
        assert segment("") == []
        assert segment("   \n\t ") == []

    def test_colon_and_semicolon_terminate(self):
        chunks = segment("First: second; third")
        assert [c.text for c in chunks] == ["First:", "second;", "third"]

    @settings(max_examples=300)
    @given(texts())
    def test_matches_reference_splitter(self, text):
        assert [c.text for c in segment(text)] == reference_segments(text)

    def test_reference_splitter_against_seeded_corpus(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(500):
            text = random_text(rng)
            assert [c.text for c in segment(text)] == reference_segments(text)


class TestPartitionSizes:
    def test_examples(self):
        assert _partition_sizes(25, 12) == [9, 8, 8]
        assert _partition_sizes(24, 12) == [12, 12]
        assert _partition_sizes(13, 12) == [7, 6]
        assert _partition_sizes(12, 12) == [12]
        assert _partition_sizes(1, 12) == [1]

    def test_exhaustive_small_grid(self):
        for max_tokens in range(1, 16):
            for total in range(1, 61):
                sizes = _partition_sizes(total, max_tokens)
                k = -(-total // max_tokens)  # minimal piece count
                assert len(sizes) == k
                assert sum(sizes) == total
                assert max(sizes) - min(sizes) <= 1
                assert max(sizes) <= max_tokens
                assert sizes == sorted(sizes, reverse=True)


class TestRebalance:
    def test_splits_overlong_sentence_and_marks_insertion(self):
        text = "Before we continue, do you still have the symptom you reported at triage?"
        chunks = chunk_response(text)
        assert [c.text for c in chunks] == [
            "Before we continue, do you still have,",
            "the symptom you reported at triage?",
        ]
        assert chunks[0].inserted_break_count == 1
        assert chunks[0].inserted_token_indices == (6,)
        assert chunks[1].inserted_break_count == 0

    def test_no_mark_when_piece_ends_in_break(self):
        # Last token of the first 7-token piece already carries a comma.
        text = "one two three four five six seven, eight nine ten eleven twelve thirteen"
        chunks = chunk_response(text)
        assert [c.token_count for c in chunks] == [7, 6]
        assert chunks[0].inserted_break_count == 0
        assert chunks[0].text.endswith("seven,")

    def test_merges_short_leading_chunk_forward(self):
        text = "Thank you. Your triage code is red. A clinician will see you shortly."
        chunks = chunk_response(text)
        assert [c.text for c in chunks] == [
            "Thank you. Your triage code is red.",
            "A clinician will see you shortly.",
        ]

    def test_merges_short_final_chunk_backward(self):
        text = "That is everything I need from you. Bye."
        chunks = chunk_response(text)
        assert [c.text for c in chunks] == ["That is everything I need from you. Bye."]

    def test_merge_chain(self):
        text = (
            "Thank you. Symptom still present, yes. Allergies, penicillin. "
            "Medications, ibuprofen. Prior conditions, asthma. "
            "A doctor will review your history shortly."
        )
        chunks = chunk_response(text)
        assert [c.token_count for c in chunks] == [6, 4, 3, 7]

    def test_merge_respects_cap(self):
        # A 2-token chunk between 12-token sentences cannot merge anywhere.
        big = " ".join(f"w{i}" for i in range(12))
        text = f"{big}. So short. {big}."
        chunks = chunk_response(text)
        assert [c.token_count for c in chunks] == [12, 2, 12]

    def test_merge_disabled(self):
        cfg = ChunkingConfig(merge_short=False)
        text = "Thank you. Your triage code is red."
        chunks = chunk_response(text, cfg)
        assert [c.token_count for c in chunks] == [2, 5]

    def test_single_word(self):
        chunks = chunk_response("hello")
        assert [c.text for c in chunks] == ["hello"]

    def test_empty_reply(self):
        assert chunk_response("") == []


@settings(max_examples=300)
@given(texts())
def test_property_reconstruction(text):
    chunks = chunk_response(text)
    assert reconstruct_text(chunks) == " ".join(text.split())


@settings(max_examples=300)
@given(texts(max_words=60))
def test_property_token_cap(text):
    for chunk in chunk_response(text):
        assert chunk.token_count <= 12
        assert chunk.token_count == token_count(chunk.text)


@settings(max_examples=300)
@given(texts(max_words=60))
def test_property_split_groups_balanced(text):
    """Without merging, each oversized segment splits into pieces whose
    token counts differ by at most one, largest first."""
    cfg = ChunkingConfig(merge_short=False)
    segments = segment(text, cfg)
    rebalanced = rebalance(segments, cfg)
    pos = 0
    for seg in segments:
        k = -(-seg.token_count // cfg.max_tokens)
        group = rebalanced[pos : pos + k]
        pos += k
        counts = [c.token_count for c in group]
        assert sum(counts) == seg.token_count
        assert max(counts) - min(counts) <= 1
        assert counts == sorted(counts, reverse=True)
    assert pos == len(rebalanced)


@settings(max_examples=300)
@given(texts(max_words=60))
def test_property_idempotent(text):
    chunks = chunk_response(text)
    again = rebalance(chunks)
    assert [c.text for c in again] == [c.text for c in chunks]
    rejoined = chunk_response(" ".join(c.text for c in chunks))
    assert [c.text for c in rejoined] == [c.text for c in chunks]


@settings(max_examples=200)
@given(texts())
def test_property_deterministic(text):
    first = chunk_response(text)
    second = chunk_response(text)
    assert first == second


class TestConfigValidation:
    def test_max_below_min(self):
        with pytest.raises(ConfigError):
            ChunkingConfig(max_tokens=2, min_tokens=3)

    def test_zero_max(self):
        with pytest.raises(ConfigError):
            ChunkingConfig(max_tokens=0, min_tokens=0)

    def test_overlapping_break_sets(self):
        with pytest.raises(ConfigError):
            ChunkingConfig(terminators=frozenset(".,"), soft_breaks=frozenset(","))

    def test_multichar_insert_mark(self):
        with pytest.raises(ConfigError):
            ChunkingConfig(insert_mark=", ")

    def test_blank_chunk_rejected(self):
        with pytest.raises(ConfigError):
            Chunk.from_text("   ")
