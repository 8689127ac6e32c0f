"""Transcript-derived features.

Three groups: 17 features common to every response, 3 reading-error rates
for read responses (aligned against the prompt) and 10 lexical/sentiment
features for spontaneous speech.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyReference, EmptyTranscript, MissingPrompt

POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "OTHER")
PAUSE_THRESHOLD_S = 0.15
DEFAULT_FILLERS = frozenset({"uh", "um", "er", "ah", "hmm", "like"})

COMMON_NAMES = tuple(f"ling.pos_{t.lower()}" for t in POS_TAGS) + (
    "ling.speech_rate",
    "ling.articulation_rate",
    "ling.mean_syllable_dur",
    "ling.std_syllable_dur",
    "ling.filler_ratio",
    "ling.repetition_ratio",
    "ling.mean_word_dur",
    "ling.pause_ratio",
    "ling.mean_pause_dur",
    "ling.pauses_per_min",
    "ling.type_token_ratio",
)
READ_NAMES = ("ling.insertion_rate", "ling.deletion_rate", "ling.substitution_rate")
SPONTANEOUS_NAMES = (
    "ling.popularity_p10",
    "ling.popularity_p25",
    "ling.popularity_p50",
    "ling.popularity_p75",
    "ling.popularity_p90",
    "ling.popularity_mean",
    "ling.depression_term_ratio",
    "ling.depression_term_types",
    "ling.sentiment_pos",
    "ling.sentiment_neg",
)
assert len(COMMON_NAMES) == 17 and len(READ_NAMES) == 3 and len(SPONTANEOUS_NAMES) == 10

# Closed-class fallback tagger used when the transcript carries no POS tags.
_PRONOUNS = frozenset(
    "i me my mine myself you your yours yourself yourselves he him his himself she her hers herself "
    "it its itself we us our ours ourselves they them their theirs themselves this that these those "
    "who whom whose which what someone somebody something anyone anybody anything everyone everybody "
    "everything nobody nothing one".split()
)
_VERBS = frozenset(
    "be am is are was were been being have has had having do does did done doing go goes went gone "
    "get gets got make makes made say says said know knows knew think thinks thought feel feels felt "
    "see saw seen want wants wanted come came take took can could will would shall should may might must "
    "sleep slept work worked need needs try tried".split()
)
_ADVERBS = frozenset(
    "very really just not never always often sometimes also too so quite still already again then now "
    "here there maybe perhaps almost only even usually rarely well actually probably".split()
)


def normalize_word(text: str) -> str:
    return re.sub(r"[^\w']+", "", text.lower()).strip("'")


def tokenize(text: str) -> list[str]:
    return [w for w in (normalize_word(t) for t in text.split()) if w]


@dataclass(frozen=True)
class Token:
    text: str
    start_s: float
    end_s: float
    pos: str | None = None


@dataclass(frozen=True)
class Transcript:
    tokens: tuple[Token, ...]
    prompt_text: str | None = None

    def __post_init__(self):
        prev = 0.0
        for tok in self.tokens:
            if tok.start_s < 0 or tok.end_s < tok.start_s or tok.start_s < prev:
                raise ValueError(f"bad token timing for {tok.text!r}")
            if tok.pos is not None and tok.pos not in POS_TAGS:
                raise ValueError(f"unknown POS tag {tok.pos!r}")
            prev = tok.start_s

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        tokens = tuple(
            Token(normalize_word(t["text"]), float(t["start_s"]), float(t["end_s"]), t.get("pos"))
            for t in d.get("tokens", [])
        )
        return cls(tuple(t for t in tokens if t.text), d.get("prompt_text"))

    def to_dict(self) -> dict:
        out: dict = {
            "tokens": [
                {"text": t.text, "start_s": t.start_s, "end_s": t.end_s, **({"pos": t.pos} if t.pos else {})}
                for t in self.tokens
            ]
        }
        if self.prompt_text is not None:
            out["prompt_text"] = self.prompt_text
        return out


def load_transcript(path: str | Path) -> Transcript:
    with open(path, encoding="utf-8") as fh:
        return Transcript.from_dict(json.load(fh))


def save_transcript(t: Transcript, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(t.to_dict(), fh, indent=1)


@dataclass(frozen=True)
class LexiconSet:
    word_frequency: dict[str, int]
    depression_terms: frozenset[str] = frozenset()
    positive_valence: frozenset[str] = frozenset()
    negative_valence: frozenset[str] = frozenset()
    fillers: frozenset[str] = DEFAULT_FILLERS
    _ranks: tuple[np.ndarray, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = np.sort(np.fromiter(self.word_frequency.values(), dtype=np.float64, count=len(self.word_frequency)))
        object.__setattr__(self, "_ranks", (counts, len(counts)))

    def popularity(self, word: str) -> float:
        """Fraction of the vocabulary whose corpus count is <= this word's; OOV -> 0."""
        count = self.word_frequency.get(word.lower())
        counts, n = self._ranks
        if count is None or n == 0:
            return 0.0
        return float(np.searchsorted(counts, count, side="right")) / n


def _read_terms(path: str | Path) -> frozenset[str]:
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                terms.add(" ".join(tokenize(line)))
    terms.discard("")
    return frozenset(terms)


def read_frequency_table(path: str | Path) -> dict[str, int]:
    table: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                word, count = line.split("\t")
                table[normalize_word(word)] = int(count)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>count'") from exc
    return table


def load_lexicons(
    frequency: str | Path,
    depression: str | Path,
    positive: str | Path,
    negative: str | Path,
    fillers: str | Path | None = None,
) -> LexiconSet:
    return LexiconSet(
        word_frequency=read_frequency_table(frequency),
        depression_terms=_read_terms(depression),
        positive_valence=_read_terms(positive),
        negative_valence=_read_terms(negative),
        fillers=_read_terms(fillers) if fillers else DEFAULT_FILLERS,
    )


LEXICON_FILES = {
    "frequency": "word_frequency.tsv",
    "depression": "depression_terms.txt",
    "positive": "positive.txt",
    "negative": "negative.txt",
    "fillers": "fillers.txt",
}


def load_lexicon_dir(directory: str | Path) -> LexiconSet:
    d = Path(directory)
    fillers = d / LEXICON_FILES["fillers"]
    return load_lexicons(
        d / LEXICON_FILES["frequency"],
        d / LEXICON_FILES["depression"],
        d / LEXICON_FILES["positive"],
        d / LEXICON_FILES["negative"],
        fillers if fillers.exists() else None,
    )


# --------------------------------------------------------------------------
# alignment


@dataclass(frozen=True)
class AlignmentCounts:
    insertions: int
    deletions: int
    substitutions: int
    hits: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.insertions + self.deletions + self.substitutions


def align(ref_tokens: list[str], hyp_tokens: list[str]) -> AlignmentCounts:
    """Minimum edit-distance word alignment with unit costs.

    Among minimal alignments the one with the fewest insertions plus
    deletions wins, i.e. a substitution beats an insert+delete pair. Cost is
    the pair (edits, indels) compared lexicographically, so the resulting
    counts are unique and swap insertions/deletions when arguments swap.
    """
    ref, hyp = list(ref_tokens), list(hyp_tokens)
    if not ref:
        raise EmptyReference("reference must contain at least one word")
    n, m = len(ref), len(hyp)
    # cost[i][j] = (edits, indels) for ref[:i] vs hyp[:j]
    cost = [[(0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = (i, i)
    for j in range(1, m + 1):
        cost[0][j] = (j, j)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            e, g = cost[i - 1][j - 1]
            diag = (e + (ref[i - 1] != hyp[j - 1]), g)
            e, g = cost[i - 1][j]
            up = (e + 1, g + 1)
            e, g = cost[i][j - 1]
            left = (e + 1, g + 1)
            cost[i][j] = min(diag, up, left)

    ins = dele = sub = hit = 0
    i, j = n, m
    while i > 0 or j > 0:
        here = cost[i][j]
        if i > 0 and j > 0:
            e, g = cost[i - 1][j - 1]
            miss = ref[i - 1] != hyp[j - 1]
            if here == (e + miss, g):
                sub += miss
                hit += not miss
                i, j = i - 1, j - 1
                continue
        if i > 0 and here == (cost[i - 1][j][0] + 1, cost[i - 1][j][1] + 1):
            dele += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return AlignmentCounts(ins, dele, sub, hit, n)


# --------------------------------------------------------------------------
# features


def count_syllables(word: str) -> int:
    """Vowel-group count (a, e, i, o, u, y), at least 1."""
    return max(1, len(re.findall(r"[aeiouy]+", word.lower())))


def fallback_pos(word: str) -> str:
    if word in _PRONOUNS:
        return "PRON"
    if word in _VERBS:
        return "VERB"
    if word in _ADVERBS:
        return "ADV"
    return "OTHER"


def _speech_time(tokens) -> float:
    total = 0.0
    cur_start = cur_end = None
    for t in tokens:
        if cur_end is None or t.start_s > cur_end:
            if cur_end is not None:
                total += cur_end - cur_start
            cur_start, cur_end = t.start_s, t.end_s
        else:
            cur_end = max(cur_end, t.end_s)
    if cur_end is not None:
        total += cur_end - cur_start
    return total


def common_features(t: Transcript, audio_duration_s: float, lex: LexiconSet) -> np.ndarray:
    if not t.tokens:
        raise EmptyTranscript("no tokens")
    if audio_duration_s <= 0:
        raise ValueError("audio duration must be positive")
    words = t.words
    n = len(words)

    tags = [tok.pos or fallback_pos(tok.text) for tok in t.tokens]
    pos_ratio = [tags.count(tag) / n for tag in POS_TAGS]

    spans = np.array([tok.end_s - tok.start_s for tok in t.tokens])
    span_total = spans.sum()
    speech_rate = n / audio_duration_s
    articulation_rate = n / span_total if span_total > 0 else 0.0
    syl_dur = spans / np.array([count_syllables(w) for w in words])

    fillers = {f.lower() for f in lex.fillers}
    filler_ratio = sum(w in fillers for w in words) / n
    repetition_ratio = sum(a == b for a, b in zip(words[1:], words[:-1])) / n

    gaps = np.array([b.start_s - a.end_s for a, b in zip(t.tokens[:-1], t.tokens[1:])])
    pauses = gaps[gaps > PAUSE_THRESHOLD_S] if gaps.size else gaps
    speech = _speech_time(t.tokens)
    pause_ratio = min(max((audio_duration_s - speech) / audio_duration_s, 0.0), 1.0)
    mean_pause = float(pauses.mean()) if pauses.size else 0.0
    pauses_per_min = pauses.size / (audio_duration_s / 60.0)

    ttr = len(set(words)) / n
    return np.array(
        pos_ratio
        + [
            speech_rate,
            articulation_rate,
            float(syl_dur.mean()),
            float(syl_dur.std()),
            filler_ratio,
            repetition_ratio,
            float(spans.mean()),
            pause_ratio,
            mean_pause,
            pauses_per_min,
            ttr,
        ]
    )


def read_features(t: Transcript, lex: LexiconSet | None = None) -> np.ndarray:
    if t.prompt_text is None:
        raise MissingPrompt("read responses need prompt_text")
    counts = align(tokenize(t.prompt_text), t.words)
    return np.array([counts.insertions, counts.deletions, counts.substitutions], dtype=np.float64) / counts.ref_len


def spontaneous_features(t: Transcript, lex: LexiconSet) -> np.ndarray:
    if not t.tokens:
        raise EmptyTranscript("no tokens")
    if not lex.word_frequency:
        raise ValueError("word frequency table is empty")
    words = t.words
    n = len(words)
    popularity = np.array([lex.popularity(w) for w in words])
    pct = np.percentile(popularity, [10, 25, 50, 75, 90])

    dep = {w.lower() for w in lex.depression_terms}
    matched = [w for w in words if w in dep]
    pos = {w.lower() for w in lex.positive_valence}
    neg = {w.lower() for w in lex.negative_valence}
    return np.concatenate(
        [
            pct,
            [
                popularity.mean(),
                len(matched) / n,
                len(set(matched)) / len(set(words)),
                sum(w in pos for w in words) / n,
                sum(w in neg for w in words) / n,
            ],
        ]
    )
