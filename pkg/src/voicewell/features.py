"""Response- and session-level feature vectors and their on-disk caches."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acoustic, functionals, linguistic
from .errors import IncompleteSession
from .linguistic import LexiconSet, Transcript
from .signal_io import Waveform

FEATURE_FORMAT_VERSION = 1
QUESTION_IDS = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7")
QUESTION_KINDS = {
    "Q1": "spontaneous",
    "Q2": "sentence",
    "Q3": "sentence",
    "Q4": "sentence",
    "Q5": "sentence",
    "Q6": "paragraph",
    "Q7": "paragraph",
}
KINDS = ("spontaneous", "sentence", "paragraph")
ACOUSTIC_NAMES = functionals.functional_names(acoustic.FRAME_FEATURE_NAMES)
READ_RESPONSE_NAMES = ACOUSTIC_NAMES + linguistic.COMMON_NAMES + linguistic.READ_NAMES
SPONTANEOUS_RESPONSE_NAMES = ACOUSTIC_NAMES + linguistic.COMMON_NAMES + linguistic.SPONTANEOUS_NAMES
READ_DIM = len(READ_RESPONSE_NAMES)
SPONTANEOUS_DIM = len(SPONTANEOUS_RESPONSE_NAMES)
CONCATENATED_NAMES = tuple(
    f"{q}.{name}"
    for q in QUESTION_IDS
    for name in (SPONTANEOUS_RESPONSE_NAMES if QUESTION_KINDS[q] == "spontaneous" else READ_RESPONSE_NAMES)
)
CONCATENATED_DIM = len(CONCATENATED_NAMES)
assert (READ_DIM, SPONTANEOUS_DIM, CONCATENATED_DIM) == (2357, 2364, 16506)

META_COLUMNS = ("subject_id", "session_index", "question_id")


def response_names(kind: str) -> tuple[str, ...]:
    if kind not in KINDS:
        raise ValueError(f"unknown response kind {kind!r}")
    return SPONTANEOUS_RESPONSE_NAMES if kind == "spontaneous" else READ_RESPONSE_NAMES


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ValueError("names and values differ in length")

    def __len__(self) -> int:
        return len(self.names)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True)
class ResponseFeatures:
    question_id: str
    kind: str
    vector: FeatureVector

    def __post_init__(self):
        expected = SPONTANEOUS_DIM if self.kind == "spontaneous" else READ_DIM
        if len(self.vector) != expected:
            raise ValueError(f"{self.kind} response has {len(self.vector)} dims, expected {expected}")
        if not np.all(np.isfinite(self.vector.values)):
            raise ValueError("non-finite feature value")


@dataclass(frozen=True)
class SessionFeatures:
    per_question: dict[str, ResponseFeatures]
    concatenated: FeatureVector


def extract_response(
    audio: Waveform, transcript: Transcript, kind: str, lex: LexiconSet, question_id: str = ""
) -> ResponseFeatures:
    """Acoustic functionals, then common, then kind-specific linguistic features."""
    names = response_names(kind)
    _, acoustic_values = functionals.apply_functionals(acoustic.frame_features(audio))
    common = linguistic.common_features(transcript, audio.duration_s, lex)
    if kind == "spontaneous":
        specific = linguistic.spontaneous_features(transcript, lex)
    else:
        specific = linguistic.read_features(transcript, lex)
    values = np.concatenate([acoustic_values, common, specific])
    return ResponseFeatures(question_id, kind, FeatureVector(names, values))


def concatenate(responses) -> SessionFeatures:
    """Join Q1..Q7 in order; any missing or mis-typed response is an IncompleteSession."""
    by_q = {}
    for r in responses:
        if r.question_id in by_q:
            raise IncompleteSession(f"duplicate response {r.question_id}")
        by_q[r.question_id] = r
    missing = [q for q in QUESTION_IDS if q not in by_q]
    if missing or len(by_q) != len(QUESTION_IDS):
        raise IncompleteSession(f"missing responses: {', '.join(missing) or 'unexpected question ids'}")
    for q in QUESTION_IDS:
        if by_q[q].kind != QUESTION_KINDS[q]:
            raise IncompleteSession(f"{q} is {by_q[q].kind}, protocol requires {QUESTION_KINDS[q]}")
    values = np.concatenate([by_q[q].vector.values for q in QUESTION_IDS])
    return SessionFeatures(by_q, FeatureVector(CONCATENATED_NAMES, values))


# --------------------------------------------------------------------------
# caches


@dataclass
class FeatureTable:
    """Rows of feature vectors keyed by (subject, session, question)."""

    names: tuple[str, ...]
    values: np.ndarray
    subject_ids: list[str]
    session_indices: list[int]
    question_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.subject_ids), len(self.names))
        if not (len(self.subject_ids) == len(self.session_indices) == len(self.question_ids)):
            raise ValueError("row metadata lengths differ")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def keys(self) -> list[tuple[str, int]]:
        return list(zip(self.subject_ids, self.session_indices))

    def select_rows(self, mask) -> "FeatureTable":
        idx = np.flatnonzero(np.asarray(mask))
        return FeatureTable(
            self.names,
            self.values[idx],
            [self.subject_ids[i] for i in idx],
            [self.session_indices[i] for i in idx],
            [self.question_ids[i] for i in idx],
        )

    def for_question(self, question_id: str) -> "FeatureTable":
        return self.select_rows([q == question_id for q in self.question_ids])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def write_csv(table: FeatureTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(META_COLUMNS + tuple(table.names))
        for i in range(table.n_rows):
            w.writerow(
                [table.subject_ids[i], table.session_indices[i], table.question_ids[i]]
                + [repr(float(v)) for v in table.values[i]]
            )


def read_csv(path: str | Path) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header[:3]) != META_COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        subjects, sessions, questions, rows = [], [], [], []
        for row in r:
            subjects.append(row[0])
            sessions.append(int(row[1]))
            questions.append(row[2])
            rows.append([float(v) for v in row[3:]])
    names = tuple(header[3:])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureTable(names, values, subjects, sessions, questions)


def write_binary(table: FeatureTable, path: str | Path) -> None:
    """Compact ``.npz`` cache with the name table embedded."""
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh,
            format_version=np.array(FEATURE_FORMAT_VERSION),
            names=np.array(table.names, dtype=str),
            values=table.values,
            subject_ids=np.array(table.subject_ids, dtype=str),
            session_indices=np.array(table.session_indices, dtype=np.int64),
            question_ids=np.array(table.question_ids, dtype=str),
        )


def read_binary(path: str | Path) -> FeatureTable:
    with np.load(path, allow_pickle=False) as z:
        if int(z["format_version"]) != FEATURE_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported feature cache version {int(z['format_version'])}")
        return FeatureTable(
            tuple(z["names"].tolist()),
            z["values"],
            z["subject_ids"].tolist(),
            [int(v) for v in z["session_indices"]],
            z["question_ids"].tolist(),
        )


def read_table(path: str | Path) -> FeatureTable:
    return read_binary(path) if str(path).endswith(".npz") else read_csv(path)
