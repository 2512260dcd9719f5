"""GPC1 cloud files, dataset manifests, and text conversion"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import (
    dataclass,
    field,
)
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Iterator,
)

import numpy as np

from geocnn.settings import KeyValueFile

from .cloud import PointCloud
from .exception import CloudFormatError

if TYPE_CHECKING:
    import os

__all__ = [
    'DatasetManifest',
    'GPC1_MAGIC',
    'convert_text',
    'iter_dataset',
    'load_cloud',
    'load_dataset',
    'load_manifest',
    'save_cloud',
    'save_manifest',
]

lgr = logging.getLogger('geocnn.pointcloud')

GPC1_MAGIC = b'GPC1'
# magic, n, c, label
_HEADER = struct.Struct('<4sIIi')
_PAYLOAD_DTYPE = np.dtype('<f4')

CLASSES_FILENAME = 'classes.txt'
PROVENANCE_FILENAME = 'dataset.cfg'
MANIFEST_FILENAME = 'manifest.csv'


def save_cloud(cloud: PointCloud, path: str | os.PathLike) -> None:
    """Write a cloud in GPC1 format

    The payload is the cloud's float32 matrix in row-major order, so that
    :func:`load_cloud` reproduces it bit for bit.
    """
    header = _HEADER.pack(
        GPC1_MAGIC,
        cloud.n,
        cloud.channels,
        -1 if cloud.label is None else cloud.label,
    )
    payload = np.ascontiguousarray(cloud.data, dtype=_PAYLOAD_DTYPE).tobytes()
    with Path(path).open('wb') as f:
        f.write(header)
        f.write(payload)


def load_cloud(path: str | os.PathLike) -> PointCloud:
    """Read a GPC1 file

    Raises
    ------
    CloudFormatError
      On a bad magic, an unsupported channel count, a truncated or
      overlong payload, or non-finite values. The error names the byte
      offset of the offense.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CloudFormatError(path, 'truncated header', offset=len(raw))
    magic, n, c, label = _HEADER.unpack_from(raw, 0)
    if magic != GPC1_MAGIC:
        raise CloudFormatError(path, f'bad magic {magic!r}', offset=0)
    if c not in (3, 6):
        raise CloudFormatError(path, f'unsupported channel count {c}', offset=8)
    if n < 1:
        raise CloudFormatError(path, 'empty point cloud', offset=4)
    expected = _HEADER.size + n * c * _PAYLOAD_DTYPE.itemsize
    if len(raw) < expected:
        raise CloudFormatError(
            path,
            f'truncated payload, expected {expected} bytes, got {len(raw)}',
            offset=len(raw),
        )
    if len(raw) > expected:
        msg = 'trailing bytes after payload'
        raise CloudFormatError(path, msg, offset=expected)
    data = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE, offset=_HEADER.size)
    data = data.reshape(n, c)
    finite = np.isfinite(data)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.ravel())[0])
        raise CloudFormatError(
            path,
            'non-finite value',
            offset=_HEADER.size + bad * _PAYLOAD_DTYPE.itemsize,
        )
    try:
        return PointCloud(data, label=None if label < 0 else label)
    except ValueError as e:
        raise CloudFormatError(path, str(e), offset=_HEADER.size) from e


@dataclass(frozen=True)
class DatasetManifest:
    """Labeled list of cloud files

    Paths are stored as given in the manifest; relative paths are resolved
    against ``root`` (the manifest's directory) by :meth:`resolve`.
    """

    entries: tuple[tuple[Path, int], ...]
    class_names: tuple[str, ...]
    seed: int = 0
    root: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        n_classes = len(self.class_names)
        for p, label in self.entries:
            if not 0 <= label < n_classes:
                msg = (
                    f'class id {label} of {str(p)!r} outside '
                    f'[0, {n_classes})'
                )
                raise ValueError(msg)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.root / path

    def subset(self, indices: list[int] | np.ndarray) -> DatasetManifest:
        return DatasetManifest(
            entries=tuple(self.entries[int(i)] for i in indices),
            class_names=self.class_names,
            seed=self.seed,
            root=self.root,
        )


def save_manifest(
    manifest: DatasetManifest,
    path: str | os.PathLike,
) -> None:
    """Write ``path`` (CSV) and the ``classes.txt`` sidecar next to it"""
    path = Path(path)
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('path', 'label'))
        for p, label in manifest.entries:
            writer.writerow((p.as_posix(), label))
    (path.parent / CLASSES_FILENAME).write_text(
        ''.join(f'{name}\n' for name in manifest.class_names),
        encoding='utf-8',
    )


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Read a manifest CSV and its ``classes.txt`` sidecar

    If a ``dataset.cfg`` provenance file (``key=value``, as written by
    ``geocnn gen-data``) is present, its ``seed`` is reported.

    Raises
    ------
    CloudFormatError
      On a bad header, malformed rows, class ids outside the class list,
      or entries whose file does not exist. Offsets are line numbers.
    """
    path = Path(path)
    root = path.parent
    classes_path = root / CLASSES_FILENAME
    if not classes_path.exists():
        raise CloudFormatError(classes_path, 'class list not found')
    class_names = tuple(
        line.strip()
        for line in classes_path.read_text(encoding='utf-8').splitlines()
        if line.strip()
    )
    entries = []
    with path.open(encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ['path', 'label']:
            raise CloudFormatError(
                path,
                f'expected header "path,label", got {header!r}',
                offset=1,
                unit='line',
            )
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != 2:  # noqa: PLR2004
                raise CloudFormatError(
                    path, f'expected 2 columns, got {len(row)}', lineno, 'line'
                )
            try:
                label = int(row[1])
            except ValueError:
                raise CloudFormatError(
                    path, f'invalid label {row[1]!r}', lineno, 'line'
                ) from None
            if not 0 <= label < len(class_names):
                raise CloudFormatError(
                    path,
                    f'class id {label} outside [0, {len(class_names)})',
                    lineno,
                    'line',
                )
            entry = Path(row[0].strip())
            resolved = entry if entry.is_absolute() else root / entry
            if not resolved.exists():
                raise CloudFormatError(
                    path, f'missing cloud file {str(resolved)!r}', lineno, 'line'
                )
            entries.append((entry, label))
    seed = 0
    provenance = root / PROVENANCE_FILENAME
    if provenance.exists():
        seed = int(KeyValueFile(provenance).get('seed', 0).value)
    return DatasetManifest(
        entries=tuple(entries),
        class_names=class_names,
        seed=seed,
        root=root,
    )


def iter_dataset(manifest: DatasetManifest) -> Iterator[PointCloud]:
    """Yield the clouds of a manifest, labeled as the manifest says"""
    for p, label in manifest.entries:
        path = manifest.resolve(p)
        cloud = load_cloud(path)
        if cloud.label is not None and cloud.label != label:
            lgr.warning(
                'Label %i stored in %s differs from manifest label %i',
                cloud.label,
                path,
                label,
            )
        yield cloud.relabel(label)


def load_dataset(manifest: DatasetManifest) -> list[PointCloud]:
    """Load all clouds of a manifest"""
    return list(iter_dataset(manifest))


def convert_text(
    src: str | os.PathLike,
    dst: str | os.PathLike,
    label: int | None = None,
    *,
    normal_tolerance: float = 0.1,
) -> PointCloud:
    """Convert a plain-text XYZ or XYZ+normal file to GPC1

    Each non-empty line that does not start with ``#`` holds 3 or 6 numbers,
    separated by whitespace and/or commas. All rows must have the same width.
    Normals whose length is within ``normal_tolerance`` of 1 are rescaled to
    unit length, others are rejected.

    Returns the written cloud.
    """
    rows = []
    width = None
    lines = Path(src).read_text(encoding='utf-8').splitlines()
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        fields = stripped.replace(',', ' ').split()
        if width is None:
            width = len(fields)
            if width not in (3, 6):
                raise CloudFormatError(
                    src, f'unsupported channel count {width}', lineno, 'line'
                )
        if len(fields) != width:
            raise CloudFormatError(
                src, f'expected {width} values, got {len(fields)}', lineno, 'line'
            )
        try:
            values = [float(v) for v in fields]
        except ValueError as e:
            raise CloudFormatError(src, str(e), lineno, 'line') from None
        if not np.all(np.isfinite(values)):
            raise CloudFormatError(src, 'non-finite value', lineno, 'line')
        if width == 6:  # noqa: PLR2004
            nrm = np.asarray(values[3:])
            length = float(np.linalg.norm(nrm))
            if abs(length - 1.0) > normal_tolerance:
                raise CloudFormatError(
                    src, f'normal has length {length:.6g}', lineno, 'line'
                )
            values[3:] = (nrm / length).tolist()
        rows.append(values)
    if not rows:
        raise CloudFormatError(src, 'no points found')
    cloud = PointCloud(np.asarray(rows), label=label)
    save_cloud(cloud, dst)
    lgr.info(
        'Converted %s (%i points, %i channels) to %s',
        src,
        cloud.n,
        cloud.channels,
        dst,
    )
    return cloud
