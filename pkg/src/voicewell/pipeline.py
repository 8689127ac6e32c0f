"""Corpus-level feature extraction with per-session caching."""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Session
from .errors import VoicewellError
from .features import (
    CONCATENATED_NAMES,
    FEATURE_FORMAT_VERSION,
    KINDS,
    QUESTION_IDS,
    QUESTION_KINDS,
    FeatureTable,
    concatenate,
    extract_response,
    read_table,
    response_names,
    write_binary,
    write_csv,
)
from .linguistic import LexiconSet, load_transcript
from .signal_io import decode_wav

CONCATENATED = "concatenated"
SESSION_CACHE_DIR = "sessions"


def cache_name(kind: str, fmt: str = "csv") -> str:
    return f"features_{kind}.{fmt}"


def lexicon_fingerprint(lex: LexiconSet) -> str:
    h = hashlib.sha256()
    for w, c in sorted(lex.word_frequency.items()):
        h.update(f"{w}\t{c}\n".encode())
    for terms in (lex.depression_terms, lex.positive_valence, lex.negative_valence, lex.fillers):
        h.update(("|".join(sorted(terms)) + "\n").encode())
    return h.hexdigest()


def session_fingerprint(session: Session, lex_fp: str) -> str:
    h = hashlib.sha256(f"v{FEATURE_FORMAT_VERSION}:{lex_fp}".encode())
    for q in QUESTION_IDS:
        ref = session.responses[q]
        h.update(q.encode())
        h.update(Path(ref.audio).read_bytes())
        h.update(Path(ref.transcript).read_bytes())
    return h.hexdigest()


def extract_session(session: Session, lex: LexiconSet) -> np.ndarray:
    """Concatenated Q1..Q7 vector of one session."""
    responses = []
    for q in QUESTION_IDS:
        ref = session.responses[q]
        try:
            audio = decode_wav(ref.audio)
            transcript = load_transcript(ref.transcript)
            responses.append(extract_response(audio, transcript, ref.kind, lex, q))
        except (VoicewellError, ValueError, OSError, KeyError) as exc:
            raise VoicewellError(f"{q}: {type(exc).__name__}: {exc}") from exc
    return concatenate(responses).concatenated.values


@dataclass
class ExtractReport:
    extracted: int = 0
    cached: int = 0
    errors: dict[tuple[str, int], str] = field(default_factory=dict)

    def summary(self) -> str:
        return f"{self.extracted} extracted, {self.cached} cached" + (
            f", {len(self.errors)} failed" if self.errors else ""
        )


def _session_cache_path(out_dir: Path, s: Session) -> Path:
    return out_dir / SESSION_CACHE_DIR / f"{s.subject_id}__{s.session_index}.npz"


def _read_session_cache(path: Path, fingerprint: str) -> np.ndarray | None:
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as z:
            if str(z["fingerprint"]) != fingerprint or z["values"].shape != (len(CONCATENATED_NAMES),):
                return None
            return z["values"].copy()
    except (OSError, ValueError, KeyError):
        return None


def _job(args):
    session, lex, fingerprint, path = args
    try:
        values = extract_session(session, lex)
    except VoicewellError as exc:
        return None, str(exc)
    with open(path, "wb") as fh:
        np.savez(fh, fingerprint=np.array(fingerprint), values=values)
    return values, None


def split_concatenated(values: np.ndarray) -> dict[str, np.ndarray]:
    """Per-question slices of a concatenated vector."""
    out, start = {}, 0
    for q in QUESTION_IDS:
        n = len(response_names(QUESTION_KINDS[q]))
        out[q] = values[start : start + n]
        start += n
    return out


def extract_corpus(
    sessions: list[Session],
    lex: LexiconSet,
    out_dir: str | Path,
    force: bool = False,
    workers: int = 1,
    fmt: str = "csv",
) -> ExtractReport:
    """Extract (or reuse) every session, then rewrite the per-kind and concatenated caches.

    Rows are ordered by (subject_id, session_index, question) whatever the worker scheduling.
    """
    out = Path(out_dir)
    (out / SESSION_CACHE_DIR).mkdir(parents=True, exist_ok=True)
    lex_fp = lexicon_fingerprint(lex)
    ordered = sorted(sessions, key=lambda s: s.key)
    report = ExtractReport()
    results: dict[tuple[str, int], np.ndarray] = {}
    todo = []
    for s in ordered:
        try:
            fp = session_fingerprint(s, lex_fp)
        except OSError as exc:
            report.errors[s.key] = f"unreadable input: {exc}"
            continue
        path = _session_cache_path(out, s)
        cached = None if force else _read_session_cache(path, fp)
        if cached is not None:
            results[s.key] = cached
            report.cached += 1
        else:
            todo.append((s, lex, fp, path))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(min(workers, len(todo))) as pool:
            done = list(pool.map(_job, todo))
    else:
        done = [_job(j) for j in todo]
    for (s, *_), (values, err) in zip(todo, done):
        if err is None:
            results[s.key] = values
            report.extracted += 1
        else:
            report.errors[s.key] = err

    keys = [s.key for s in ordered if s.key in results]
    write_caches(keys, results, out, fmt)
    return report


def write_caches(keys, results, out: Path, fmt: str = "csv") -> None:
    writer = write_binary if fmt == "npz" else write_csv
    per_kind: dict[str, list] = {k: [] for k in KINDS}
    for key in keys:
        parts = split_concatenated(results[key])
        for q in QUESTION_IDS:
            per_kind[QUESTION_KINDS[q]].append((key, q, parts[q]))
    for kind in KINDS:
        rows = per_kind[kind]
        table = FeatureTable(
            response_names(kind),
            np.array([r[2] for r in rows]).reshape(len(rows), len(response_names(kind))),
            [r[0][0] for r in rows],
            [r[0][1] for r in rows],
            [r[1] for r in rows],
        )
        writer(table, out / cache_name(kind, fmt))
    concat = FeatureTable(
        CONCATENATED_NAMES,
        np.array([results[k] for k in keys]).reshape(len(keys), len(CONCATENATED_NAMES)),
        [k[0] for k in keys],
        [k[1] for k in keys],
        ["ALL"] * len(keys),
    )
    writer(concat, out / cache_name(CONCATENATED, fmt))


def find_cache(feature_dir: str | Path, kind: str) -> Path:
    """The newer of the CSV and npz caches for ``kind``."""
    d = Path(feature_dir)
    found = [p for p in (d / cache_name(kind, "csv"), d / cache_name(kind, "npz")) if p.exists()]
    if not found:
        raise FileNotFoundError(f"no {kind} feature cache in {d}; run 'extract' first")
    return max(found, key=lambda p: p.stat().st_mtime_ns)


def load_source(feature_dir: str | Path, source: str) -> FeatureTable:
    """Feature rows for one question (Q1..Q7) or the concatenated vector."""
    if source == CONCATENATED:
        return read_table(find_cache(feature_dir, CONCATENATED))
    if source not in QUESTION_KINDS:
        raise ValueError(f"unknown source {source!r}")
    return read_table(find_cache(feature_dir, QUESTION_KINDS[source])).for_question(source)
