"""Break-point annotation fusion.

Merges a `<break>`-tagged transcript with word-level forced-alignment
timestamps (CTM) to recover the ground-truth break time, and applies the
one-word intent-confirmation shift used when labeling training clips.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

BREAK_TAG = "<break>"

# Leading/trailing punctuation is stripped; intra-word hyphens and
# apostrophes are kept ("uh-huh", "don't").
_EDGE_PUNCT = re.compile(r"^[^\w'-]+|[^\w'-]+$", flags=re.UNICODE)
_CJK = re.compile(r"[㐀-鿿豈-﫿]")


class AnnotationError(Exception):
    pass


@dataclass(frozen=True)
class WordAlignment:
    word: str
    start_s: float
    end_s: float
    channel: str = "1"
    utterance_id: str = ""


@dataclass(frozen=True)
class TaggedTranscript:
    tokens: tuple[str, ...]
    break_index: int | None


@dataclass(frozen=True)
class FusionResult:
    break_time_s: float
    matched_word: str
    alignment_cost: int


def normalize_token(token: str) -> str:
    return _EDGE_PUNCT.sub("", token.casefold())


def _split_cjk(token: str) -> list[str]:
    out, buf = [], ""
    for ch in token:
        if _CJK.match(ch):
            if buf:
                out.append(buf)
                buf = ""
            out.append(ch)
        else:
            buf += ch
    if buf:
        out.append(buf)
    return out


def parse_ctm(path: str | Path) -> list[WordAlignment]:
    """Parse a CTM file: `utterance_id channel start_s duration_s word` per line.

    Rows are grouped by utterance id and sorted by start time within each
    group; overlapping spans within one utterance are rejected.
    """
    by_utt: dict[str, list[WordAlignment]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw or raw.startswith(";;"):
                continue
            fields = raw.split()
            if len(fields) < 5:
                raise AnnotationError(f"{path}: line {line_no}: expected 5 fields, got {len(fields)}")
            utt, channel, start, dur, word = fields[:5]
            try:
                start_s, dur_s = float(start), float(dur)
            except ValueError:
                raise AnnotationError(f"{path}: line {line_no}: non-numeric timestamp") from None
            if start_s < 0:
                raise AnnotationError(f"{path}: line {line_no}: negative start time")
            if dur_s <= 0:
                raise AnnotationError(f"{path}: line {line_no}: non-positive duration")
            row = WordAlignment(word=word, start_s=start_s, end_s=start_s + dur_s,
                                channel=channel, utterance_id=utt)
            if utt not in by_utt:
                by_utt[utt] = []
                order.append(utt)
            by_utt[utt].append(row)

    result: list[WordAlignment] = []
    for utt in order:
        rows = sorted(by_utt[utt], key=lambda r: r.start_s)
        for prev, cur in zip(rows, rows[1:]):
            if cur.start_s < prev.end_s:
                raise AnnotationError(
                    f"{path}: utterance {utt!r}: overlapping words "
                    f"{prev.word!r} [{prev.start_s}, {prev.end_s}] and "
                    f"{cur.word!r} [{cur.start_s}, {cur.end_s}]")
        result.extend(rows)
    return result


def locate_break(raw_tagged_text: str, char_level: bool = False) -> TaggedTranscript:
    """Tokenize a `<break>`-tagged text and record the index of the first
    substantive word (the token immediately after the tag).

    ``char_level`` splits CJK runs into single-character tokens to match
    character-level forced alignments.
    """
    if raw_tagged_text.count(BREAK_TAG) > 1:
        raise AnnotationError("more than one <break> tag")
    tokens: list[str] = []
    break_index: int | None = None
    saw_tag = False
    for piece in raw_tagged_text.split():
        if piece == BREAK_TAG:
            saw_tag = True
            break_index = len(tokens)
            continue
        norm = normalize_token(piece)
        if not norm:
            continue
        if char_level:
            tokens.extend(_split_cjk(norm))
        else:
            tokens.append(norm)
    if saw_tag and break_index is not None and break_index >= len(tokens):
        raise AnnotationError("<break> tag has no following word")
    if not saw_tag:
        break_index = None
    return TaggedTranscript(tokens=tuple(tokens), break_index=break_index)


def align_tokens(a: list[str], b: list[str]) -> tuple[int, list[tuple[int | None, int | None]]]:
    """Minimum-edit-distance alignment (match 0, substitution 1, indel 1).

    Returns (cost, pairs) where pairs is a monotone list of
    (index into a | None, index into b | None); None marks an indel.
    Traceback prefers diagonal moves, then deletion from `a`, for a
    deterministic alignment among ties.
    """
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = dp[i - 1][j - 1] + (0 if ai == b[j - 1] else 1)
            dp[i][j] = min(sub, dp[i - 1][j] + 1, dp[i][j - 1] + 1)

    pairs: list[tuple[int | None, int | None]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (0 if a[i - 1] == b[j - 1] else 1):
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            pairs.append((i - 1, None))
            i -= 1
        else:
            pairs.append((None, j - 1))
            j -= 1
    pairs.reverse()
    return dp[n][m], pairs


def fuse(transcript: TaggedTranscript, alignments: list[WordAlignment],
         max_cost_ratio: float = 0.3) -> FusionResult:
    """Recover the break time by aligning transcript tokens to CTM words.

    The break time is the start of the CTM word matched to the token at
    ``break_index``. Fails if that token aligns to a gap or the total
    alignment cost exceeds ``max_cost_ratio`` of the token count.
    """
    if transcript.break_index is None:
        raise AnnotationError("transcript has no break index")
    if not alignments:
        raise AnnotationError("no word alignments supplied")
    utts = {w.utterance_id for w in alignments}
    if len(utts) > 1:
        raise AnnotationError(f"alignments span multiple utterances: {sorted(utts)}")

    ctm_words = [normalize_token(w.word) for w in alignments]
    cost, pairs = align_tokens(list(transcript.tokens), ctm_words)
    ceiling = max_cost_ratio * len(transcript.tokens)
    if cost > ceiling:
        raise AnnotationError(
            f"alignment cost {cost} exceeds ceiling {ceiling:.1f} "
            f"({max_cost_ratio:.0%} of {len(transcript.tokens)} tokens)")

    matched_ctm: int | None = None
    for tok_idx, ctm_idx in pairs:
        if tok_idx == transcript.break_index:
            matched_ctm = ctm_idx
            break
    if matched_ctm is None:
        raise AnnotationError("break token was deleted in the alignment (fusion failure)")
    row = alignments[matched_ctm]
    return FusionResult(break_time_s=row.start_s, matched_word=row.word, alignment_cost=cost)


def apply_intent_delay(break_time_s: float, alignments: list[WordAlignment],
                       tolerance_s: float = 1e-3) -> float:
    """One-word shift: move the break time to the start of the next word
    (or the current word's end when it is the last one)."""
    rows = sorted(alignments, key=lambda r: r.start_s)
    for idx, row in enumerate(rows):
        if abs(row.start_s - break_time_s) <= tolerance_s:
            if idx + 1 < len(rows):
                return rows[idx + 1].start_s
            return row.end_s
    raise AnnotationError(
        f"break time {break_time_s} does not match any word start (tolerance {tolerance_s}s)")
