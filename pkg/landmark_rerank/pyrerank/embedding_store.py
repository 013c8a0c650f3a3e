"""Loading, validation and persistence of embedding sets and label tables.

Binary embedding files are the canonical interchange and round-trip bit for
bit. Layout (little-endian)::

    b"EMB1" | u32 n | u32 d | n x (u16 byte length + UTF-8 id) | n*d float32

CSV embedding files hold ``id,f1,...,fd`` per row and are parsed as decimal
text, so they are not bit-exact. Label files are header-free
``image_id,landmark_id`` rows.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import struct
import tempfile
from enum import StrEnum
from pathlib import Path

import numpy as np

from .exceptions import RerankFormatError, RerankIOError, RerankValidationError
from .models import EmbeddingSet, LabelTable, Role

LOG = logging.getLogger(__name__)

EMB_MAGIC = b"EMB1"
HEADER = struct.Struct("<4sII")
ID_LENGTH = struct.Struct("<H")
FLOAT32_LE = np.dtype("<f4")
MAX_ID_BYTES = 0xFFFF


class EmbeddingFormat(StrEnum):
    """On-disk embedding file formats."""

    BINARY = "binary"
    CSV = "csv"


def _infer_format(path: Path) -> EmbeddingFormat:
    """Guess the format from the file extension."""
    if path.suffix.lower() == ".csv":
        return EmbeddingFormat.CSV
    return EmbeddingFormat.BINARY


def read_bytes(path: str | os.PathLike) -> bytes:
    """Read a file, wrapping OS errors."""
    try:
        return Path(path).read_bytes()
    except OSError as err:
        raise RerankIOError(f"Cannot read {path}: {err}") from err


def read_text(path: str | os.PathLike) -> str:
    """Read a UTF-8 text file, wrapping OS and decoding errors."""
    data = read_bytes(path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as err:
        raise RerankFormatError(
            f"File is not valid UTF-8 at byte {err.start}", path=str(path)
        ) from err


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file so readers never see a partial file."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp_name, target)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as err:
        raise RerankIOError(f"Cannot write {target}: {err}") from err


def load_embeddings(
    path: str | os.PathLike,
    format: EmbeddingFormat | str | None = None,
    role: Role | None = None,
) -> EmbeddingSet:
    """Load and validate an embedding file.

    The format is taken from the extension when not given (``.csv`` is CSV,
    anything else binary). Error locations count data rows from 0; CSV
    field 0 is the id and fields 1..d the values, binary fields are columns.
    """
    path = Path(path)
    fmt = EmbeddingFormat(format) if format is not None else _infer_format(path)
    if fmt is EmbeddingFormat.BINARY:
        embeddings = _load_binary(path, role)
    else:
        embeddings = _load_csv(path, role)
    LOG.debug(
        f"Loaded {fmt} embeddings from {path}: "
        f"n={len(embeddings)}, d={embeddings.dim}"
    )
    return embeddings


def _load_binary(path: Path, role: Role | None) -> EmbeddingSet:
    """Parse the EMB1 container."""
    data = read_bytes(path)
    where = str(path)

    if len(data) < HEADER.size:
        raise RerankFormatError("Truncated header", path=where, field="header")
    magic, n, d = HEADER.unpack_from(data, 0)
    if magic != EMB_MAGIC:
        raise RerankFormatError(
            f"Bad magic {magic!r}, expected {EMB_MAGIC!r}", path=where, field="magic"
        )
    if d < 1:
        raise RerankFormatError(
            "Embedding dimension must be at least 1", path=where, field="d"
        )

    offset = HEADER.size
    ids: list[str] = []
    seen: dict[str, int] = {}
    for row in range(n):
        if offset + ID_LENGTH.size > len(data):
            raise RerankFormatError("Truncated id table", path=where, row=row, field="id")
        (length,) = ID_LENGTH.unpack_from(data, offset)
        offset += ID_LENGTH.size
        if offset + length > len(data):
            raise RerankFormatError("Truncated id", path=where, row=row, field="id")
        try:
            image_id = data[offset : offset + length].decode("utf-8")
        except UnicodeDecodeError as err:
            raise RerankFormatError(
                "Image id is not valid UTF-8", path=where, row=row, field="id"
            ) from err
        offset += length
        if image_id in seen:
            raise RerankFormatError(
                f"Duplicate image id {image_id!r} (first at row {seen[image_id]})",
                path=where,
                row=row,
                field="id",
            )
        seen[image_id] = row
        ids.append(image_id)

    expected = n * d * FLOAT32_LE.itemsize
    remaining = len(data) - offset
    if remaining != expected:
        raise RerankFormatError(
            f"Payload holds {remaining} bytes, expected {expected} for n={n}, d={d}",
            path=where,
            field="payload",
        )

    vectors = np.frombuffer(data, dtype=FLOAT32_LE, count=n * d, offset=offset)
    vectors = vectors.reshape(n, d)
    _check_finite(vectors, where)
    return EmbeddingSet(ids=tuple(ids), vectors=vectors.astype(np.float32), role=role)


def _check_finite(vectors: np.ndarray, where: str) -> None:
    """Raise a located error for the first non-finite value."""
    finite = np.isfinite(vectors)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise RerankFormatError(
            "Non-finite embedding value", path=where, row=int(row), field=int(col)
        )


def _load_csv(path: Path, role: Role | None) -> EmbeddingSet:
    """Parse ``id,f1,...,fd`` rows."""
    text = read_text(path)
    where = str(path)

    ids: list[str] = []
    rows: list[list[float]] = []
    seen: dict[str, int] = {}
    dim: int | None = None

    for record in csv.reader(io.StringIO(text)):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        row = len(ids)
        image_id = record[0].strip()
        values = record[1:]
        if not image_id:
            raise RerankFormatError("Empty image id", path=where, row=row, field=0)
        if not values:
            raise RerankFormatError(
                "Row has no embedding values", path=where, row=row, field=1
            )
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise RerankFormatError(
                f"Dimension mismatch: expected {dim} values, got {len(values)}",
                path=where,
                row=row,
            )
        if image_id in seen:
            raise RerankFormatError(
                f"Duplicate image id {image_id!r} (first at row {seen[image_id]})",
                path=where,
                row=row,
                field=0,
            )

        parsed: list[float] = []
        for field_no, raw in enumerate(values, start=1):
            try:
                value = float(raw)
            except ValueError as err:
                raise RerankFormatError(
                    f"Not a number: {raw!r}", path=where, row=row, field=field_no
                ) from err
            if not math.isfinite(value):
                raise RerankFormatError(
                    "Non-finite embedding value",
                    path=where,
                    row=row,
                    field=field_no,
                )
            parsed.append(value)

        seen[image_id] = row
        ids.append(image_id)
        rows.append(parsed)

    if dim is None:
        raise RerankFormatError("CSV embedding file has no rows", path=where)

    vectors = np.array(rows, dtype=np.float64).astype(np.float32)
    # decimal values beyond float32 range overflow to inf on the cast
    _check_finite(vectors, where)
    return EmbeddingSet(ids=tuple(ids), vectors=vectors, role=role)


def encode_embeddings(embeddings: EmbeddingSet) -> bytes:
    """Serialize an embedding set to the EMB1 container."""
    parts = [HEADER.pack(EMB_MAGIC, len(embeddings), embeddings.dim)]
    for row, image_id in enumerate(embeddings.ids):
        raw = image_id.encode("utf-8")
        if len(raw) > MAX_ID_BYTES:
            raise RerankValidationError(
                f"Image id at row {row} is {len(raw)} bytes, limit {MAX_ID_BYTES}"
            )
        parts.append(ID_LENGTH.pack(len(raw)))
        parts.append(raw)
    parts.append(embeddings.vectors.astype(FLOAT32_LE, copy=False).tobytes(order="C"))
    return b"".join(parts)


def save_embeddings(embeddings: EmbeddingSet, path: str | os.PathLike) -> None:
    """Write an embedding set in the binary format."""
    atomic_write(path, encode_embeddings(embeddings))
    LOG.debug(
        f"Saved embeddings to {path}: n={len(embeddings)}, d={embeddings.dim}"
    )


def load_labels(path: str | os.PathLike) -> LabelTable:
    """Load header-free ``image_id,landmark_id`` rows.

    Error locations count data rows from 0, skipping blank lines.
    """
    text = read_text(path)
    where = str(path)

    entries: dict[str, int] = {}
    first_row: dict[str, int] = {}
    for record in csv.reader(io.StringIO(text)):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        row = len(entries)
        if len(record) != 2:
            raise RerankFormatError(
                f"Expected 2 fields, got {len(record)}", path=where, row=row
            )
        image_id, raw = record[0].strip(), record[1].strip()
        if not image_id:
            raise RerankFormatError("Empty image id", path=where, row=row, field=0)
        if image_id in entries:
            raise RerankFormatError(
                f"Duplicate image id {image_id!r} (first at row {first_row[image_id]})",
                path=where,
                row=row,
                field=0,
            )
        try:
            landmark_id = int(raw)
        except ValueError as err:
            raise RerankFormatError(
                f"Landmark id is not an integer: {raw!r}",
                path=where,
                row=row,
                field=1,
            ) from err
        if landmark_id < 0:
            raise RerankFormatError(
                f"Landmark id is negative: {landmark_id}",
                path=where,
                row=row,
                field=1,
            )
        entries[image_id] = landmark_id
        first_row[image_id] = row

    LOG.debug(f"Loaded {len(entries)} labels from {where}")
    return LabelTable(entries)


def save_labels(labels: LabelTable, path: str | os.PathLike) -> None:
    """Write a label table as header-free CSV."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for image_id, landmark_id in labels.entries.items():
        writer.writerow([image_id, landmark_id])
    atomic_write(path, buffer.getvalue().encode("utf-8"))


def filter_train_to_test_classes(
    train: EmbeddingSet, train_labels: LabelTable, test_gt: LabelTable
) -> tuple[EmbeddingSet, LabelTable]:
    """Keep the train images whose landmark appears in the test ground truth.

    Surviving rows keep their order and values; applying the filter twice is
    the same as applying it once.
    """
    labels = train_labels.lookup(train.ids)
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        row = int(missing[0])
        raise RerankValidationError(
            f"Train image {train.ids[row]!r} at row {row} has no label"
        )

    wanted = np.array(sorted(test_gt.landmark_ids()), dtype=np.int64)
    keep = np.flatnonzero(np.isin(labels, wanted))
    filtered = train.subset(keep)
    filtered_labels = LabelTable(
        {train.ids[i]: int(labels[i]) for i in keep}
    )
    LOG.debug(
        f"Filtered train set to {len(wanted)} test classes: "
        f"{len(filtered)} of {len(train)} rows kept"
    )
    return filtered, filtered_labels
