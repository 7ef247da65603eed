"""Enrollment, run-time detection, and phrase-set persistence.

Each enrolled rendition becomes a template (embedding, label, threshold).
The threshold is alpha times the largest DTW distance from that template
to its same-label peers, so at least two renditions per phrase are
required. At run time a query is scored against every template; the
argmin template names the phrase and the thresholds decide whether it is
a detection or an out-of-set rejection. alpha = inf disables rejection
entirely (pure closed-set classification).
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .dtw import METRICS, STEP_PATTERNS, DtwConfig, dtw_distance, dtw_one_to_many
from .errors import (
    BackendMismatchError,
    BadMagicError,
    CorruptFileError,
    DimensionMismatchError,
    EmptyEmbeddingError,
    EmptyPhraseSetError,
    InsufficientTemplatesError,
    TruncatedFileError,
    VersionMismatchError,
)
from .network import SPECTRAL_FINGERPRINT, EmbeddingSequence

LPMS_MAGIC = b"LPMS"
LPMS_VERSION = 1

RULES = ("literal", "strict")


@dataclass(frozen=True)
class PhraseTemplate:
    """One enrolled rendition: trimmed embedding, label, threshold."""

    embedding: np.ndarray = field(repr=False)
    label: str
    threshold_tau: float


@dataclass(frozen=True)
class PhraseSet:
    """All enrolled templates plus the matching configuration."""

    templates: tuple[PhraseTemplate, ...]
    alpha: float
    dtw_config: DtwConfig
    backend_id: str
    backend_fingerprint: bytes

    def labels(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.templates:
            seen.setdefault(t.label)
        return list(seen)


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    label: str | None
    best_score: float
    best_template_index: int
    per_template_scores: list[float]


def enroll(utterances, alpha: float = 1.25, cfg: DtwConfig = DtwConfig(),
           backend=None) -> PhraseSet:
    """Build a phrase set from (label, EmbeddingSequence) pairs.

    Every label must appear at least twice; template i's threshold is
    alpha * max DTW distance to its same-label peers. backend is any
    object with backend_id / fingerprint attributes (defaults to the
    spectral backend's identity).
    """
    if not (alpha > 0.0):
        raise ValueError("alpha must be positive (inf disables rejection)")
    utterances = list(utterances)
    embeddings = []
    for label, seq in utterances:
        frames = np.asarray(seq.frames, dtype=np.float64)
        if frames.shape[0] == 0:
            raise EmptyEmbeddingError(f"label {label!r}: empty embedding")
        embeddings.append(frames)
    dims = {e.shape[1] for e in embeddings}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mixed feature dims {sorted(dims)}")

    by_label: dict[str, list[int]] = {}
    for i, (label, _) in enumerate(utterances):
        by_label.setdefault(label, []).append(i)
    for label, idxs in by_label.items():
        if len(idxs) < 2:
            raise InsufficientTemplatesError(
                f"phrase {label!r} has {len(idxs)} rendition(s); need at least 2")

    pair_dist: dict[tuple[int, int], float] = {}
    for idxs in by_label.values():
        for a_pos, i in enumerate(idxs):
            for j in idxs[a_pos + 1:]:
                d = dtw_distance(embeddings[i], embeddings[j], cfg)
                pair_dist[(i, j)] = pair_dist[(j, i)] = d

    templates = []
    for i, (label, _) in enumerate(utterances):
        if math.isinf(alpha):
            tau = math.inf
        else:
            tau = alpha * max(pair_dist[(i, j)]
                              for j in by_label[label] if j != i)
        templates.append(PhraseTemplate(embedding=embeddings[i], label=label,
                                        threshold_tau=tau))
    backend_id = backend.backend_id if backend is not None else "spectral"
    fingerprint = backend.fingerprint if backend is not None else SPECTRAL_FINGERPRINT
    return PhraseSet(templates=tuple(templates), alpha=float(alpha),
                     dtw_config=cfg, backend_id=backend_id,
                     backend_fingerprint=fingerprint)


def detect(pset: PhraseSet, query: EmbeddingSequence,
           rule: str = "literal") -> DetectionResult:
    """Score a query against every template and apply the decision rule.

    literal: detected iff any score beats that template's threshold; the
    reported label always comes from the overall argmin template.
    strict: the argmin template itself must beat its own threshold.
    """
    if rule not in RULES:
        raise ValueError(f"unknown decision rule {rule!r}")
    if not pset.templates:
        raise EmptyPhraseSetError("phrase set has no templates")
    scores = dtw_one_to_many(np.asarray(query.frames, dtype=np.float64),
                             [t.embedding for t in pset.templates],
                             pset.dtw_config)
    best = int(np.argmin(scores))
    if rule == "strict":
        hit = scores[best] < pset.templates[best].threshold_tau
    else:
        hit = any(s < t.threshold_tau for s, t in zip(scores, pset.templates))
    return DetectionResult(
        detected=hit,
        label=pset.templates[best].label if hit else None,
        best_score=float(scores[best]),
        best_template_index=best,
        per_template_scores=scores,
    )


def with_alpha(pset: PhraseSet, alpha: float) -> PhraseSet:
    """Rescale every threshold to a new alpha without re-running DTW."""
    if not (alpha > 0.0):
        raise ValueError("alpha must be positive")
    templates = []
    for t in pset.templates:
        if math.isinf(alpha):
            tau = math.inf
        elif math.isinf(pset.alpha):
            raise ValueError("cannot recover finite thresholds from alpha=inf")
        else:
            tau = t.threshold_tau / pset.alpha * alpha
        templates.append(replace(t, threshold_tau=tau))
    return replace(pset, templates=tuple(templates), alpha=float(alpha))


_METRIC_CODE = {m: i for i, m in enumerate(METRICS)}
_STEP_CODE = {s: i for i, s in enumerate(STEP_PATTERNS)}


def save_phrase_set(pset: PhraseSet, path) -> None:
    if len(pset.backend_fingerprint) != 32:
        raise ValueError("backend fingerprint must be 32 bytes")
    parts = [LPMS_MAGIC, struct.pack("<I", LPMS_VERSION),
             struct.pack("<d", pset.alpha),
             struct.pack("<BBBq",
                         _METRIC_CODE[pset.dtw_config.local_metric],
                         _STEP_CODE[pset.dtw_config.step_pattern],
                         int(pset.dtw_config.normalize_by_path_length),
                         -1 if pset.dtw_config.band_radius is None
                         else pset.dtw_config.band_radius),
             pset.backend_fingerprint,
             struct.pack("<I", len(pset.templates))]
    for t in pset.templates:
        label = t.label.encode("utf-8")
        emb = np.ascontiguousarray(t.embedding, dtype="<f4")
        parts.append(struct.pack("<H", len(label)))
        parts.append(label)
        parts.append(struct.pack("<dII", t.threshold_tau, *emb.shape))
        parts.append(emb.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body)))


def load_phrase_set(path, backend=None) -> PhraseSet:
    """Read an LPMS file; refuses sets built under a different backend.

    backend, when given, is any object with a 32-byte fingerprint
    attribute (the loaded weights or the spectral backend).
    """
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4 or buf[:4] != LPMS_MAGIC:
        raise BadMagicError(f"{path}: not an LPMS file")
    if len(buf) < 8:
        raise TruncatedFileError(f"{path}: header cut short")
    if zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CorruptFileError(f"{path}: CRC32 mismatch")
    body = memoryview(buf[:-4])
    pos = 4
    (version,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if version != LPMS_VERSION:
        raise VersionMismatchError(
            f"{path}: version {version}, reader supports {LPMS_VERSION}")
    (alpha,) = struct.unpack_from("<d", body, pos)
    pos += 8
    if math.isnan(alpha) or alpha <= 0.0:
        raise CorruptFileError(f"{path}: bad alpha {alpha}")
    metric_code, step_code, norm, band = struct.unpack_from("<BBBq", body, pos)
    pos += 11
    try:
        cfg = DtwConfig(local_metric=METRICS[metric_code],
                        step_pattern=STEP_PATTERNS[step_code],
                        normalize_by_path_length=bool(norm),
                        band_radius=None if band < 0 else int(band))
    except (IndexError, ValueError) as e:
        raise CorruptFileError(f"{path}: bad DTW config ({e})") from e
    fingerprint = bytes(body[pos:pos + 32])
    if len(fingerprint) != 32:
        raise TruncatedFileError(f"{path}: fingerprint cut short")
    pos += 32
    if backend is not None and backend.fingerprint != fingerprint:
        raise BackendMismatchError(
            f"{path}: phrase set was built with a different backend")
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    templates = []
    try:
        for _ in range(count):
            (label_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            label = bytes(body[pos:pos + label_len]).decode("utf-8")
            pos += label_len
            tau, t, f_dim = struct.unpack_from("<dII", body, pos)
            pos += 16
            n = 4 * t * f_dim
            if pos + n > len(body):
                raise TruncatedFileError(f"{path}: embedding payload cut short")
            emb = np.frombuffer(body, dtype="<f4", count=t * f_dim,
                                offset=pos).reshape(t, f_dim).astype(np.float64)
            pos += n
            templates.append(PhraseTemplate(embedding=emb, label=label,
                                            threshold_tau=tau))
    except struct.error as e:
        raise TruncatedFileError(f"{path}: {e}") from e
    if pos != len(body):
        raise CorruptFileError(f"{path}: {len(body) - pos} trailing bytes")
    backend_id = ("spectral" if fingerprint == SPECTRAL_FINGERPRINT
                  else f"kws:{fingerprint.hex()[:16]}")
    return PhraseSet(templates=tuple(templates), alpha=alpha, dtw_config=cfg,
                     backend_id=backend_id, backend_fingerprint=fingerprint)
