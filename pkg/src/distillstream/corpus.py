"""Multimodal record model, JSON-Lines corpus ingestion, and the admission filter.

A corpus file holds one record per line:

    {"id": str, "text": str, "is_retweet": bool, "created_at": int,
     "images": [{"image_id": str, "embedding": [float, ...]}]}

Image embeddings may instead live in a sidecar binary blob (see
:func:`write_embedding_sidecar`), in which case the JSON image entry is
``{"image_id": str, "embedding_ref": true}``.
"""

from __future__ import annotations

import json
import string
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

SIDECAR_MAGIC = b"EMB1"

# Built-in English stopwords backing the default language heuristic.
STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can't cannot could
couldn't did didn't do does doesn't doing don't down during each few for from
further had hadn't has hasn't have haven't having he he'd he'll he's her here
here's hers herself him himself his how how's i i'd i'll i'm i've if in into
is isn't it it's its itself let's me more most mustn't my myself no nor not
of off on once only or other ought our ours ourselves out over own same
shan't she she'd she'll she's should shouldn't so some such than that that's
the their theirs them themselves then there there's these they they'd they'll
they're they've this those through to too under until up very was wasn't we
we'd we'll we're we've were weren't what what's when when's where where's
which while who who's whom why why's with won't would wouldn't you you'd
you'll you're you've your yours yourself yourselves
""".split())


class CorpusError(Exception):
    """Base class for corpus ingestion failures."""


class MalformedRecordError(CorpusError):
    """A line failed to parse or violated the record schema."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DimensionMismatchError(CorpusError):
    """An embedding's dimension disagrees with the corpus-declared one."""

    def __init__(self, line_no: int, image_id: str, got: int, expected: int):
        super().__init__(
            f"line {line_no}: image {image_id!r} has embedding dimension "
            f"{got}, expected {expected}"
        )
        self.line_no = line_no
        self.image_id = image_id


@dataclass(frozen=True)
class ImageItem:
    """One image reference: an id plus its dense float32 feature vector."""

    image_id: str
    embedding: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float32)
        if emb.ndim != 1:
            raise ValueError(f"embedding must be 1-D, got shape {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise ValueError(f"image {self.image_id!r}: non-finite embedding component")
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True)
class MultimodalRecord:
    """One post: text, retweet flag, timestamp, and zero or more images."""

    id: str
    text: str
    is_retweet: bool
    created_at: int
    images: tuple[ImageItem, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        object.__setattr__(self, "images", tuple(self.images))


@dataclass(frozen=True)
class FilterPolicy:
    """Admission rules for the raw record stream.

    ``english_detector`` swaps in a stronger language check; when unset the
    built-in stopword-ratio heuristic is used.
    """

    min_words: int = 5
    require_image: bool = True
    reject_retweets: bool = True
    english_stopword_ratio_min: float = 0.12
    english_detector: Callable[[str], bool] | None = None

    def __post_init__(self):
        # min_words = 0 is allowed so a fully neutral policy admits everything.
        if self.min_words < 0:
            raise ValueError("min_words must be >= 0")
        if not 0.0 <= self.english_stopword_ratio_min <= 1.0:
            raise ValueError("english_stopword_ratio_min must be in [0, 1]")


def word_tokens(text: str) -> list[str]:
    """Maximal non-whitespace runs; the word count used everywhere."""
    return text.split()


def normalized_tokens(text: str) -> list[str]:
    """Lowercased tokens with leading/trailing punctuation stripped."""
    out = []
    for tok in text.split():
        tok = tok.strip(string.punctuation).lower()
        if tok:
            out.append(tok)
    return out


def stopword_ratio(text: str) -> float:
    """Fraction of words that are built-in English stopwords (0.0 if no words)."""
    tokens = word_tokens(text)
    if not tokens:
        return 0.0
    hits = sum(1 for tok in tokens if tok.strip(string.punctuation).lower() in STOPWORDS)
    return hits / len(tokens)


def admit(record: MultimodalRecord, policy: FilterPolicy) -> bool:
    """Admission predicate: long-enough English text, image present, not a retweet.

    Total and side-effect free; every clause is individually switchable
    through the policy.
    """
    if len(word_tokens(record.text)) < policy.min_words:
        return False
    if policy.english_detector is not None:
        if not policy.english_detector(record.text):
            return False
    elif stopword_ratio(record.text) < policy.english_stopword_ratio_min:
        return False
    if policy.require_image and not record.images:
        return False
    if policy.reject_retweets and record.is_retweet:
        return False
    return True


def explode_pairs(record: MultimodalRecord) -> list[tuple[str, ImageItem]]:
    """One (text, image) pair per image, in image order."""
    return [(record.text, item) for item in record.images]


@dataclass
class IngestStats:
    """Counters filled in while a corpus stream is consumed."""

    lines: int = 0
    records: int = 0
    skipped: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


class SidecarReader:
    """Random-access reader for the binary embedding sidecar.

    Layout: magic ``EMB1``, uint32 count, uint32 dim (little-endian), then
    count * dim float32 values. The companion index maps image_id to the byte
    offset of that image's float data.
    """

    HEADER = struct.Struct("<4sII")

    def __init__(self, blob_path: str | Path, index_path: str | Path):
        self._fh = open(blob_path, "rb")
        magic, count, dim = self.HEADER.unpack(self._fh.read(self.HEADER.size))
        if magic != SIDECAR_MAGIC:
            raise CorpusError(f"{blob_path}: bad sidecar magic {magic!r}")
        self.count = count
        self.dim = dim
        with open(index_path, "r", encoding="utf-8") as fh:
            self._index: dict[str, int] = json.load(fh)

    def fetch(self, image_id: str) -> np.ndarray:
        offset = self._index.get(image_id)
        if offset is None:
            raise CorpusError(f"sidecar index has no entry for image {image_id!r}")
        self._fh.seek(offset)
        data = self._fh.read(self.dim * 4)
        return np.frombuffer(data, dtype="<f4").copy()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_embedding_sidecar(
    blob_path: str | Path,
    index_path: str | Path,
    items: Iterable[tuple[str, np.ndarray]],
) -> None:
    """Write embeddings to a binary sidecar plus its image_id -> offset index."""
    items = list(items)
    if not items:
        raise ValueError("sidecar needs at least one embedding")
    dim = len(items[0][1])
    index: dict[str, int] = {}
    with open(blob_path, "wb") as fh:
        fh.write(SidecarReader.HEADER.pack(SIDECAR_MAGIC, len(items), dim))
        for image_id, emb in items:
            emb = np.asarray(emb, dtype="<f4")
            if emb.shape != (dim,):
                raise ValueError(f"sidecar embeddings must share dimension {dim}")
            index[image_id] = fh.tell()
            fh.write(emb.tobytes())
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump(index, fh, sort_keys=True)


def _parse_record(
    obj: dict, line_no: int, expected_dim: int, sidecar: SidecarReader | None
) -> MultimodalRecord:
    if not isinstance(obj, dict):
        raise MalformedRecordError(line_no, "record is not a JSON object")
    try:
        rec_id = obj["id"]
        text = obj["text"]
        is_retweet = obj["is_retweet"]
        created_at = obj["created_at"]
        images = obj["images"]
    except KeyError as exc:
        raise MalformedRecordError(line_no, f"missing field {exc.args[0]!r}") from None
    if not isinstance(rec_id, str) or not rec_id:
        raise MalformedRecordError(line_no, "id must be a non-empty string")
    if not isinstance(text, str):
        raise MalformedRecordError(line_no, "text must be a string")
    if not isinstance(is_retweet, bool):
        raise MalformedRecordError(line_no, "is_retweet must be a boolean")
    if not isinstance(created_at, int) or isinstance(created_at, bool):
        raise MalformedRecordError(line_no, "created_at must be an integer")
    if not isinstance(images, list):
        raise MalformedRecordError(line_no, "images must be a list")

    parsed = []
    for entry in images:
        if not isinstance(entry, dict) or "image_id" not in entry:
            raise MalformedRecordError(line_no, "image entry missing image_id")
        image_id = entry["image_id"]
        if entry.get("embedding_ref"):
            if sidecar is None:
                raise MalformedRecordError(
                    line_no, f"image {image_id!r} references a sidecar but none was given"
                )
            emb = sidecar.fetch(image_id)
        else:
            emb = entry.get("embedding")
            if not isinstance(emb, list):
                raise MalformedRecordError(line_no, f"image {image_id!r} has no embedding")
            emb = np.asarray(emb, dtype=np.float32)
        if emb.shape != (expected_dim,):
            raise DimensionMismatchError(line_no, image_id, emb.shape[0], expected_dim)
        try:
            parsed.append(ImageItem(image_id=image_id, embedding=emb))
        except ValueError as exc:
            raise MalformedRecordError(line_no, str(exc)) from None
    try:
        return MultimodalRecord(
            id=rec_id, text=text, is_retweet=is_retweet,
            created_at=created_at, images=tuple(parsed),
        )
    except ValueError as exc:
        raise MalformedRecordError(line_no, str(exc)) from None


def load_corpus(
    path: str | Path,
    expected_dim: int,
    *,
    on_malformed: str = "skip",
    stats: IngestStats | None = None,
    embeddings_path: str | Path | None = None,
    index_path: str | Path | None = None,
) -> Iterator[MultimodalRecord]:
    """Stream records from a JSON-Lines corpus file, in file order.

    Malformed lines are skipped and counted by default (``on_malformed="skip"``,
    tallies land in ``stats``); pass ``"abort"`` to raise instead. Embedding
    dimension mismatches always abort. Duplicate record ids are treated as
    malformed lines.
    """
    if expected_dim <= 0:
        raise ValueError("expected_dim must be positive")
    if on_malformed not in ("skip", "abort"):
        raise ValueError(f"unknown on_malformed mode {on_malformed!r}")
    path = Path(path)
    sidecar = None
    if embeddings_path is not None:
        if index_path is None:
            index_path = Path(str(embeddings_path) + ".idx.json")
        sidecar = SidecarReader(embeddings_path, index_path)
    seen_ids: set[str] = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                if stats is not None:
                    stats.lines += 1
                try:
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise MalformedRecordError(line_no, f"invalid JSON ({exc.msg})") from None
                    record = _parse_record(obj, line_no, expected_dim, sidecar)
                    if record.id in seen_ids:
                        raise MalformedRecordError(line_no, f"duplicate record id {record.id!r}")
                except DimensionMismatchError:
                    raise
                except MalformedRecordError as exc:
                    if on_malformed == "abort":
                        raise
                    if stats is not None:
                        stats.skipped += 1
                        stats.errors.append((exc.line_no, exc.reason))
                    continue
                seen_ids.add(record.id)
                if stats is not None:
                    stats.records += 1
                yield record
    finally:
        if sidecar is not None:
            sidecar.close()


def record_to_json_dict(record: MultimodalRecord) -> dict:
    """Serialize a record back to the corpus line schema."""
    return {
        "id": record.id,
        "text": record.text,
        "is_retweet": record.is_retweet,
        "created_at": record.created_at,
        "images": [
            {"image_id": item.image_id,
             "embedding": [float(v) for v in item.embedding]}
            for item in record.images
        ],
    }


def write_corpus(path: str | Path, records: Iterable[MultimodalRecord]) -> int:
    """Write records as JSON-Lines; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json_dict(record), sort_keys=True))
            fh.write("\n")
            n += 1
    return n
