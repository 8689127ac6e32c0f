"""Session manifests and a seeded synthetic corpus with planted trait signals."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import IoFailure, MalformedManifest
from .features import KINDS, QUESTION_IDS, QUESTION_KINDS
from .linguistic import LEXICON_FILES, Token, Transcript, save_transcript, tokenize
from .signal_io import SAMPLE_RATE, write_wav

SCORE_FIELDS = ("stai", "gad7", "psqi", "panas")
SCORE_RANGES = {"stai": (20, 80), "gad7": (0, 21), "psqi": (0, 21), "panas": (10, 50)}
MEASUREMENT_OF = {"stai": "STAI", "gad7": "GAD7", "psqi": "PSQI", "panas": "PANAS"}
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Scores:
    stai: int
    gad7: int
    psqi: int
    panas: int

    def __post_init__(self):
        for name in SCORE_FIELDS:
            lo, hi = SCORE_RANGES[name]
            if not lo <= getattr(self, name) <= hi:
                raise ValueError(f"{name} out of range [{lo},{hi}]")

    def by_measurement(self) -> dict[str, int]:
        return {MEASUREMENT_OF[f]: getattr(self, f) for f in SCORE_FIELDS}

    def to_dict(self) -> dict[str, int]:
        return {f: getattr(self, f) for f in SCORE_FIELDS}


@dataclass(frozen=True)
class ResponseRef:
    audio: Path
    transcript: Path
    kind: str


@dataclass(frozen=True)
class Session:
    subject_id: str
    session_index: int
    responses: dict[str, ResponseRef]
    scores: Scores

    @property
    def key(self) -> tuple[str, int]:
        return (self.subject_id, self.session_index)


@dataclass(frozen=True)
class Exclusion:
    subject_id: str
    session_index: int
    reason: str


# --------------------------------------------------------------------------
# manifest


def _session_problem(raw: dict) -> str | None:
    scores = raw.get("scores")
    if not isinstance(scores, dict):
        return "missing scores"
    for name in SCORE_FIELDS:
        v = scores.get(name)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v != int(v):
            return f"missing or non-integer {name}"
        lo, hi = SCORE_RANGES[name]
        if not lo <= v <= hi:
            return f"{name} out of range [{lo},{hi}]"
    responses = raw.get("responses")
    if not isinstance(responses, dict) or any(q not in responses for q in QUESTION_IDS):
        return "incomplete"
    for q in QUESTION_IDS:
        r = responses[q]
        if not isinstance(r, dict) or not r.get("audio") or not r.get("transcript"):
            return "incomplete"
        if r.get("kind") != QUESTION_KINDS[q]:
            return f"{q} kind {r.get('kind')!r} does not match protocol ({QUESTION_KINDS[q]})"
    return None


def load_manifest(path: str | Path) -> tuple[list[Session], list[Exclusion]]:
    """Retained sessions in manifest order plus one Exclusion per dropped session."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("subjects"), list):
        raise MalformedManifest(f"{path}: expected an object with a 'subjects' list")
    base = path.parent
    sessions: list[Session] = []
    excluded: list[Exclusion] = []
    seen: set[tuple[str, int]] = set()
    for subj in doc["subjects"]:
        if not isinstance(subj, dict) or not isinstance(subj.get("subject_id"), str):
            raise MalformedManifest(f"{path}: subject entry without a string subject_id")
        if not isinstance(subj.get("sessions"), list):
            raise MalformedManifest(f"{path}: subject {subj['subject_id']} has no sessions list")
        sid = subj["subject_id"]
        for raw in subj["sessions"]:
            idx = raw.get("session_index") if isinstance(raw, dict) else None
            if isinstance(idx, bool) or not isinstance(idx, int) or idx < 1:
                raise MalformedManifest(f"{path}: subject {sid} has a session without a positive session_index")
            if (sid, idx) in seen:
                raise MalformedManifest(f"{path}: duplicate session {sid}/{idx}")
            seen.add((sid, idx))
            problem = _session_problem(raw)
            if problem:
                excluded.append(Exclusion(sid, idx, problem))
                continue
            responses = {
                q: ResponseRef(
                    base / raw["responses"][q]["audio"],
                    base / raw["responses"][q]["transcript"],
                    raw["responses"][q]["kind"],
                )
                for q in QUESTION_IDS
            }
            scores = Scores(*(int(raw["scores"][f]) for f in SCORE_FIELDS))
            sessions.append(Session(sid, idx, responses, scores))
    return sessions, excluded


def scores_by_key(sessions) -> dict[tuple[str, int], dict[str, int]]:
    return {s.key: s.scores.by_measurement() for s in sessions}


# --------------------------------------------------------------------------
# synthetic corpus

# Score = round(clip(center + spread * (trait + noise_level * eps))).
SCORE_CENTER = {"stai": 50.0, "gad7": 10.5, "psqi": 10.5, "panas": 30.0}
SCORE_SPREAD = {"stai": 9.0, "gad7": 3.2, "psqi": 3.2, "panas": 6.0}
TRAIT_LIMIT = 2.5  # keeps noise-free scores inside every range
SESSION_WOBBLE = 0.5  # share of trait variance that changes between sessions

GENERAL_WORDS = (
    "the a and to of in it that was for on with as at by from this have not but "
    "we they day time home people work school food walk house friend family morning night week "
    "year city road car train book phone music movie water coffee dinner lunch weather rain "
    "garden park dog cat street shop market office window door table chair room kitchen "
    "went go got made took came saw said told asked called played watched cooked cleaned "
    "read wrote talked visited bought finished started tried stayed moved opened "
    "big small new old long short early late little next last other same few many "
    "some any every each much more most really very just also then there here now "
    "about after before during through over under again still usually often sometimes"
).split()
FILLER_WORDS = ("uh", "um", "er", "hmm")
DEPRESSION_WORDS = (
    "tired hopeless lonely worthless empty exhausted depressed alone guilty numb "
    "sad crying insomnia miserable useless"
).split()
POSITIVE_WORDS = "happy good great fun enjoy nice glad excited calm relaxed proud lucky".split()
NEGATIVE_WORDS = "bad angry awful hate upset terrible annoyed nervous afraid worried stressed".split()

SENTENCE_PROMPTS = {
    "Q2": "The morning train left the station on time today",
    "Q3": "She put the blue cup next to the window",
    "Q4": "We walked along the river after a long dinner",
    "Q5": "Please close the door before the rain comes in",
}
PARAGRAPH_PROMPTS = {
    "Q6": (
        "Every spring the small town by the lake holds a market in the old square. Farmers bring "
        "baskets of fresh bread, cheese, honey and early vegetables, and children run between the "
        "stalls while music plays near the fountain. Most people arrive before noon, when the light "
        "is soft and the air still smells of rain. The baker at the corner sells out of rolls by ten, "
        "so regular visitors line up at his table first. Later in the day the square grows quiet, "
        "the stall owners pack their wooden crates onto carts, and a few neighbours stay behind to "
        "talk on the benches. When the sun sets over the water the lamps along the pier are lit one "
        "by one, and the town slowly returns to its usual calm rhythm for another week."
    ),
    "Q7": (
        "Our building has a shared garden on the roof where residents grow herbs, tomatoes and a few "
        "flowers in wide wooden boxes. On weekend mornings someone usually waters the plants and checks "
        "the small weather station that a student installed last year. The station records wind, "
        "temperature and rainfall, and a screen in the lobby shows the numbers for the whole week. "
        "In summer the roof becomes a place to read, to eat dinner outside, or simply to watch the "
        "planes crossing the sky toward the airport. During winter the boxes rest under heavy covers "
        "and only the pigeons visit. Each year in early spring the residents meet to decide what to "
        "plant, who will take care of the seedlings, and how to share the harvest fairly among the "
        "families living on every floor of the building."
    ),
}
PROMPTS = {**SENTENCE_PROMPTS, **PARAGRAPH_PROMPTS}

# Response length targets (mean, std, lo, hi) in seconds.
DURATIONS = {
    "spontaneous": (64.0, 10.0, 45.0, 85.0),
    "sentence": (5.4, 1.5, 3.0, 8.0),
    "paragraph": (49.0, 8.0, 35.0, 65.0),
}


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 30
    sessions_per_subject: int = 5
    seed: int = 0
    noise_level: float = 0.2

    def __post_init__(self):
        if self.n_subjects < 5:
            raise ValueError("n_subjects must be at least 5 (one subject per fold)")
        if self.sessions_per_subject < 1:
            raise ValueError("sessions_per_subject must be at least 1")
        if not 0.0 <= self.noise_level <= 1.0:
            raise ValueError("noise_level must lie in [0, 1]")


@dataclass(frozen=True)
class SessionPlan:
    subject_id: str
    session_index: int
    traits: tuple[float, float, float, float]
    voice: tuple[float, float]  # subject formant offsets, trait-free nuisance
    seed: tuple[int, ...]
    scores: Scores = field(compare=False)


def _clip_trait(x):
    return np.clip(x, -TRAIT_LIMIT, TRAIT_LIMIT)


def scores_from_traits(traits, noise, noise_level: float) -> Scores:
    vals = []
    for name, t, e in zip(SCORE_FIELDS, traits, noise):
        lo, hi = SCORE_RANGES[name]
        raw = SCORE_CENTER[name] + SCORE_SPREAD[name] * (t + noise_level * e)
        vals.append(int(np.clip(np.round(raw), lo, hi)))
    return Scores(*vals)


def plan_sessions(spec: SynthSpec) -> list[SessionPlan]:
    """All random draws that tie sessions together, made up front from the root seed."""
    root = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    plans = []
    for s in range(spec.n_subjects):
        subject_traits = _clip_trait(root.standard_normal(4))
        voice = tuple(float(v) for v in root.uniform(-1.0, 1.0, 2))
        for k in range(1, spec.sessions_per_subject + 1):
            wobble = root.standard_normal(4)
            traits = _clip_trait(math.sqrt(1 - SESSION_WOBBLE**2) * subject_traits + SESSION_WOBBLE * wobble)
            noise = root.standard_normal(4)
            plans.append(
                SessionPlan(
                    f"S{s + 1:03d}",
                    k,
                    tuple(float(t) for t in traits),
                    voice,
                    (spec.seed, 1, s, k),
                    scores_from_traits(traits, noise, spec.noise_level),
                )
            )
    return plans


# --- audio ---------------------------------------------------------------

_TABLE_SIZE = 2048
_N_HARMONICS = 12


def _glottal_table() -> np.ndarray:
    """One period of a harmonic source with a -6 dB/octave roll-off."""
    phase = np.arange(_TABLE_SIZE) / _TABLE_SIZE
    k = np.arange(1, _N_HARMONICS + 1)[:, None]
    table = (np.sin(2 * np.pi * k * phase) / k).sum(axis=0)
    return table / np.abs(table).max()


def _resonator(freq_hz: float, bandwidth_hz: float):
    r = math.exp(-math.pi * bandwidth_hz / SAMPLE_RATE)
    theta = 2 * math.pi * freq_hz / SAMPLE_RATE
    a = [1.0, -2 * r * math.cos(theta), r * r]
    return [sum(a)], a  # unity gain at DC


def _smooth_contour(n: int, rng: np.random.Generator, rate: float = 1.0) -> np.ndarray:
    """Zero-mean, unit-std intonation curve from a few slow sinusoids around ``rate`` Hz."""
    step = SAMPLE_RATE // 100  # 100 Hz control rate, linearly interpolated
    t = np.arange(n // step + 2) / 100.0
    c = np.zeros(len(t))
    for freq in rate * rng.uniform(0.8, 1.6, 4):
        c += np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    c = np.interp(np.arange(n) / SAMPLE_RATE, t, c)
    c -= c.mean()
    sd = c.std()
    return c / sd if sd > 0 else c


@dataclass
class _Word:
    text: str
    start: float
    end: float


def _syllables(word: str) -> int:
    groups = 0
    prev = False
    for ch in word:
        v = ch in "aeiouy"
        groups += v and not prev
        prev = v
    return max(groups, 1)


def _word_length_s(word: str, pace: float, rng: np.random.Generator) -> float:
    return _syllables(word) * pace * rng.uniform(0.85, 1.15) + 0.06


def _schedule(words, traits, rng, duration: float | None):
    """Lay words on a timeline; pause frequency and length follow the affect trait."""
    t3 = traits[3]
    pace = 0.17 * math.exp(0.08 * t3)
    pause_prob = float(np.clip(0.18 + 0.07 * t3, 0.03, 0.5))
    pause_len = 0.45 * math.exp(0.3 * t3)
    lengths = [_word_length_s(w, pace, rng) for w in words]
    gaps = []
    for _ in words[1:]:
        if rng.random() < pause_prob:
            gaps.append(pause_len * rng.uniform(0.7, 1.3))
        else:
            gaps.append(rng.uniform(0.03, 0.09))
    lead = rng.uniform(0.2, 0.4)
    tail = rng.uniform(0.2, 0.4)
    if duration is not None:
        # stretch words to hit the target length, pauses keep their size when possible
        fixed = lead + tail + sum(gaps)
        stretch = (duration - fixed) / sum(lengths)
        if stretch < 0.5:
            scale = (duration * 0.5) / fixed
            lead, tail, gaps = lead * scale, tail * scale, [g * scale for g in gaps]
            stretch = (duration - lead - tail - sum(gaps)) / sum(lengths)
        lengths = [x * stretch for x in lengths]
    out, t = [], lead
    for i, (w, L) in enumerate(zip(words, lengths)):
        out.append(_Word(w, t, t + L))
        t += L + (gaps[i] if i < len(gaps) else 0.0)
    return out, t + tail


def _render(words: list[_Word], total_s: float, traits, voice, rng) -> np.ndarray:
    """Harmonic-plus-noise rendering of a word schedule."""
    n = int(round(total_s * SAMPLE_RATE))
    f0_mean = 140.0 + 25.0 * traits[0]
    # the anxiety trait widens and quickens intonation and adds breathiness
    f0_dev = 22.0 * math.exp(0.3 * traits[1])
    f0 = np.clip(f0_mean + f0_dev * _smooth_contour(n, rng, math.exp(0.25 * traits[1])), 65.0, 380.0)
    aspiration = 0.05 * math.exp(0.45 * traits[1])
    phase = np.cumsum(f0) / SAMPLE_RATE
    table = _glottal_table()
    source = np.interp((phase % 1.0) * _TABLE_SIZE, np.arange(_TABLE_SIZE + 1), np.append(table, table[0]))

    envelope = np.zeros(n)
    burst = np.zeros(n)
    for w in words:
        a = int(w.start * SAMPLE_RATE)
        b = min(int(w.end * SAMPLE_RATE), n)
        if b - a < 8:
            continue
        seg = np.arange(b - a) / (b - a)
        syl = _syllables(w.text)
        ramp = np.minimum(1.0, np.minimum(seg, 1 - seg) * (b - a) / (0.015 * SAMPLE_RATE))
        envelope[a:b] = ramp * (0.55 + 0.45 * np.sin(np.pi * (seg * syl % 1.0)))
        c = min(a + int(0.03 * SAMPLE_RATE), b)
        burst[a:c] = 1.0

    voiced = source * envelope + aspiration * rng.standard_normal(n) * envelope
    f1 = 600.0 + 120.0 * voice[0]
    f2 = 1600.0 + 300.0 * voice[1]
    for freq, bw in ((f1, 90.0), (f2, 140.0)):
        b_coef, a_coef = _resonator(freq, bw)
        voiced = lfilter(b_coef, a_coef, voiced)
    hiss = lfilter([1.0, -0.9], [1.0], rng.standard_normal(n)) * burst * 0.3

    active = envelope > 0
    rms = math.sqrt(float(np.mean(voiced[active] ** 2))) if active.any() else 1.0
    level = 10.0 ** ((-26.0 + 4.0 * traits[2]) / 20.0)
    signal = (voiced + hiss * np.std(voiced[active])) * (level / rms)
    floor = 10.0 ** (-62.0 / 20.0) * rng.standard_normal(n)
    return np.clip(signal + floor, -0.99, 0.99)


# --- transcripts -----------------------------------------------------------

_ZIPF = 1.0 / np.arange(1, len(GENERAL_WORDS) + 1)


def _spontaneous_words(traits, rng, n_words: int) -> list[str]:
    t3 = traits[3]
    p_filler = float(np.clip(0.04 + 0.025 * t3, 0.0, 0.15))
    p_dep = float(np.clip(0.03 + 0.02 * t3, 0.0, 0.12))
    p_pos = float(np.clip(0.05 - 0.02 * t3, 0.0, 0.12))
    p_neg = float(np.clip(0.03 + 0.02 * t3, 0.0, 0.12))
    probs = np.array([p_filler, p_dep, p_pos, p_neg])
    weights = _ZIPF / _ZIPF.sum()
    words = []
    for _ in range(n_words):
        u = rng.random()
        edges = np.cumsum(probs)
        if u < edges[0]:
            words.append(FILLER_WORDS[rng.integers(len(FILLER_WORDS))])
        elif u < edges[1]:
            words.append(DEPRESSION_WORDS[rng.integers(len(DEPRESSION_WORDS))])
        elif u < edges[2]:
            words.append(POSITIVE_WORDS[rng.integers(len(POSITIVE_WORDS))])
        elif u < edges[3]:
            words.append(NEGATIVE_WORDS[rng.integers(len(NEGATIVE_WORDS))])
        else:
            words.append(GENERAL_WORDS[rng.choice(len(GENERAL_WORDS), p=weights)])
    return words


def _read_aloud(prompt: str, traits, rng) -> list[str]:
    """Prompt words with trait-dependent slips: skips, swaps and inserted fillers."""
    t3 = traits[3]
    p_skip = float(np.clip(0.02 + 0.012 * t3, 0.0, 0.1))
    p_swap = float(np.clip(0.02 + 0.012 * t3, 0.0, 0.1))
    p_fill = float(np.clip(0.03 + 0.02 * t3, 0.0, 0.12))
    out = []
    for w in tokenize(prompt):
        u = rng.random()
        if u < p_skip:
            continue
        if u < p_skip + p_swap:
            out.append(GENERAL_WORDS[rng.integers(len(GENERAL_WORDS))])
        else:
            out.append(w)
        if rng.random() < p_fill:
            out.append(FILLER_WORDS[rng.integers(len(FILLER_WORDS))])
    return out or tokenize(prompt)[:1]


def _duration(kind: str, rng) -> float:
    mean, sd, lo, hi = DURATIONS[kind]
    return float(np.clip(rng.normal(mean, sd), lo, hi))


def synthesize_response(plan: SessionPlan, question_id: str) -> tuple[np.ndarray, Transcript]:
    kind = QUESTION_KINDS[question_id]
    rng = np.random.default_rng(np.random.SeedSequence(list(plan.seed) + [QUESTION_IDS.index(question_id)]))
    target = _duration(kind, rng)
    if kind == "spontaneous":
        # draw generously, then keep the words that fit the target length
        words, total = _schedule(_spontaneous_words(plan.traits, rng, 400), plan.traits, rng, None)
        cut = [w for w in words if w.end <= target - 0.25] or words[:1]
        schedule, total = cut, target
        prompt = None
    else:
        prompt = PROMPTS[question_id]
        schedule, total = _schedule(_read_aloud(prompt, plan.traits, rng), plan.traits, rng, target)
    audio = _render(schedule, total, plan.traits, plan.voice, rng)
    tokens = tuple(Token(w.text, round(w.start, 4), round(w.end, 4)) for w in schedule)
    return audio, Transcript(tokens, prompt)


# --- writing -----------------------------------------------------------------


def _write_session(args) -> dict:
    plan, root = args
    rel = Path(plan.subject_id) / f"session{plan.session_index}"
    (root / rel).mkdir(parents=True, exist_ok=True)
    responses = {}
    for q in QUESTION_IDS:
        audio, transcript = synthesize_response(plan, q)
        write_wav(root / rel / f"{q}.wav", audio)
        save_transcript(transcript, root / rel / f"{q}.json")
        responses[q] = {"audio": f"{rel.as_posix()}/{q}.wav", "transcript": f"{rel.as_posix()}/{q}.json", "kind": QUESTION_KINDS[q]}
    return {"session_index": plan.session_index, "scores": plan.scores.to_dict(), "responses": responses}


def write_lexicons(directory: str | Path) -> Path:
    """Frequency table and term lists matching the synthetic vocabulary."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    vocab = list(GENERAL_WORDS) + list(FILLER_WORDS) + DEPRESSION_WORDS + POSITIVE_WORDS + NEGATIVE_WORDS
    for text in PROMPTS.values():
        vocab += tokenize(text)
    counts: dict[str, int] = {}
    for rank, w in enumerate(dict.fromkeys(vocab), 1):
        counts[w] = max(1, int(1_000_000 / rank))
    with open(d / LEXICON_FILES["frequency"], "w", encoding="utf-8") as fh:
        fh.writelines(f"{w}\t{c}\n" for w, c in counts.items())
    for key, words in (
        ("depression", DEPRESSION_WORDS),
        ("positive", POSITIVE_WORDS),
        ("negative", NEGATIVE_WORDS),
        ("fillers", FILLER_WORDS),
    ):
        (d / LEXICON_FILES[key]).write_text("".join(f"{w}\n" for w in words), encoding="utf-8")
    return d


def generate_synthetic(spec: SynthSpec, out_dir: str | Path, workers: int | None = None) -> Path:
    """Write WAVs, transcripts, lexicons, planted traits and the manifest; returns the manifest path."""
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
        plans = plan_sessions(spec)
        jobs = [(p, root) for p in plans]
        workers = workers or 1
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                entries = list(pool.map(_write_session, jobs))
        else:
            entries = [_write_session(j) for j in jobs]
        subjects: dict[str, list] = {}
        for p, entry in zip(plans, entries):
            subjects.setdefault(p.subject_id, []).append(entry)
        manifest = {"subjects": [{"subject_id": s, "sessions": v} for s, v in subjects.items()]}
        write_lexicons(root / "lexicons")
        traits = [
            {"subject_id": p.subject_id, "session_index": p.session_index, "traits": list(p.traits)} for p in plans
        ]
        (root / "traits.json").write_text(json.dumps(traits, indent=1) + "\n", encoding="utf-8")
        path = root / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def load_traits(corpus_dir: str | Path) -> dict[tuple[str, int], np.ndarray]:
    rows = json.loads((Path(corpus_dir) / "traits.json").read_text(encoding="utf-8"))
    return {(r["subject_id"], r["session_index"]): np.array(r["traits"]) for r in rows}


def worker_count() -> int:
    """Worker processes from VOICEWELL_WORKERS, defaulting to the CPUs available to this process."""
    env = os.environ.get("VOICEWELL_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"VOICEWELL_WORKERS must be an integer, got {env!r}") from None
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


assert set(KINDS) == set(DURATIONS)
