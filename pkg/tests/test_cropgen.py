import json
import pytest

from sid_harness.annotation import WordAlignment
from sid_harness.audio import read_wav
from sid_harness.cropgen import (ClipLabel, CropConfig, CropError, export_clips,
                                 generate_clips, shifted_break)
from sid_harness.manifest import load_manifest



def word_span(words):
    """CTM-style alignments with 0.25 s words, 0.05 s gaps."""
    rows, t = [], 0.0
    for w in words:
        rows.append(WordAlignment(word=w, start_s=round(t, 4), end_s=round(t + 0.25, 4),
                                  utterance_id="u"))
        t += 0.30
    return rows


@pytest.fixture
def break_instance(make_instance_dir):
    # break at 2.0 s; one-word shift lands on the next word start
    path = make_instance_dir([{"id": "u", "category": "InterruptMiddle",
                               "break_time_s": 2.1, "duration_s": 8.0}])
    return load_manifest(path)[0]


@pytest.fixture
def alignments():
    # word starts at 0.0, 0.3, ..., 2.1, 2.4, ...
    return word_span([f"w{i}" for i in range(12)])


def test_shifted_break_is_next_word_start(break_instance, alignments):
    assert shifted_break(2.1, alignments) == pytest.approx(2.4)


def test_generate_clips_example(break_instance, alignments):
    config = CropConfig(n_clips_per_utt=6, seed=42)
    clips = generate_clips(break_instance, alignments, config)
    assert len(clips) == 6
    b_shift = 2.4
    delta = config.boundary_window_s
    assert all(c.start_s == 0.0 for c in clips)
    assert all(config.min_clip_s <= c.end_s <= 8.0 for c in clips)
    assert len({c.end_s for c in clips}) == 6
    assert any(b_shift - delta <= c.end_s <= b_shift for c in clips)
    assert any(b_shift < c.end_s <= b_shift + delta for c in clips)
    for c in clips:
        assert (c.label is ClipLabel.Y) == (c.end_s > b_shift)


def test_break_free_all_negative(make_instance_dir):
    path = make_instance_dir([{"id": "n", "duration_s": 6.0}])
    inst = load_manifest(path)[0]
    for seed in range(10):
        clips = generate_clips(inst, None, CropConfig(seed=seed))
        assert all(c.label is ClipLabel.N for c in clips)


def test_determinism(break_instance, alignments):
    config = CropConfig(seed=7)
    assert generate_clips(break_instance, alignments, config) == \
           generate_clips(break_instance, alignments, config)


def test_boundary_guarantee_over_seeds(break_instance, alignments):
    b_shift = 2.4
    delta = 0.5
    for seed in range(1000):
        clips = generate_clips(break_instance, alignments, CropConfig(seed=seed))
        assert any(b_shift - delta <= c.end_s <= b_shift for c in clips), seed
        assert any(b_shift < c.end_s <= b_shift + delta for c in clips), seed


def test_shift_region_labeled_negative(break_instance, alignments):
    # every endpoint in (B, B'] must be N: the intent-confirmation delay region
    b, b_shift = 2.1, 2.4
    for seed in range(200):
        for c in generate_clips(break_instance, alignments, CropConfig(seed=seed)):
            if b < c.end_s <= b_shift:
                assert c.label is ClipLabel.N


def test_infeasible_pre_slot_places_both_post(make_instance_dir):
    # break so early that B' <= min_clip_s
    path = make_instance_dir([{"id": "e", "category": "InterruptBeginning",
                               "break_time_s": 0.05, "duration_s": 6.0}])
    inst = load_manifest(path)[0]
    rows = [WordAlignment("a", 0.05, 0.2, utterance_id="e"),
            WordAlignment("b", 0.3, 0.5, utterance_id="e")]
    b_shift = 0.3
    assert b_shift <= 0.5  # below default min_clip_s
    for seed in range(50):
        clips = generate_clips(inst, rows, CropConfig(seed=seed))
        post = [c for c in clips if b_shift < c.end_s <= b_shift + 0.5]
        assert len(post) >= 2, seed


def test_too_short_clip_rejected(make_instance_dir):
    path = make_instance_dir([{"id": "s", "duration_s": 0.3}])
    inst = load_manifest(path)[0]
    with pytest.raises(CropError, match="below min clip"):
        generate_clips(inst, None, CropConfig())


def test_export_manifest_only(tmp_path, break_instance, alignments):
    clips = generate_clips(break_instance, alignments, CropConfig(seed=1))
    out = export_clips(clips[:2], tmp_path / "out", emit_audio=False)
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 2
    rec = json.loads(lines[0])
    assert set(rec) == {"source_id", "start_s", "end_s", "label"}
    assert rec["label"] in ("Y", "N")
    assert not list((tmp_path / "out").glob("*.wav"))


def test_export_audio_sample_exact(tmp_path, make_instance_dir):
    path = make_instance_dir([{"id": "a", "duration_s": 2.0}])
    inst = load_manifest(path)[0]
    from sid_harness.cropgen import ClipSample
    clip = ClipSample(source_id="a", start_s=0.0, end_s=1.0, label=ClipLabel.N)
    export_clips([clip], tmp_path / "out", sources={"a": inst}, emit_audio=True)
    [wav] = list((tmp_path / "out").glob("*.wav"))
    samples, rate = read_wav(wav)
    assert len(samples) == 16000


def test_export_clip_beyond_source_rejected(tmp_path, make_instance_dir):
    path = make_instance_dir([{"id": "a", "duration_s": 1.0}])
    inst = load_manifest(path)[0]
    from sid_harness.cropgen import ClipSample
    clip = ClipSample(source_id="a", start_s=0.0, end_s=2.0, label=ClipLabel.N)
    with pytest.raises(CropError, match="outside source bounds"):
        export_clips([clip], tmp_path / "out", sources={"a": inst}, emit_audio=True)
