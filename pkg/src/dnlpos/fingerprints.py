"""Fingerprint records, CSV loading, the WAP (MAC) index and dataset splits.

Randomness for splits comes from numpy's ``PCG64`` bit generator seeded
through ``numpy.random.SeedSequence(seed)``.  That pairing is part of the
on-disk contract: changing it changes every ``split.json``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

FINGERPRINT_HEADER = ["fp_id", "floor", "x", "y"]
OBSERVATION_HEADER = ["fp_id", "mac", "rss_dbm"]


class DatasetError(ValueError):
    """Base class for problems with fingerprint data."""


class LoadError(DatasetError):
    """A CSV row could not be parsed."""

    def __init__(self, path, line: int, reason: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class DuplicateObservationError(DatasetError):
    pass


class OrphanObservationError(DatasetError):
    pass


class EmptyFingerprintError(DatasetError):
    pass


class TooFewFingerprintsError(DatasetError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    """One labeled RSS scan.

    ``observations`` maps MAC address to RSS in dBm.  ``position`` is in
    meters in the floor-local frame.
    """

    fp_id: int
    floor: int
    position: tuple[float, float]
    observations: Mapping[str, float] = field(hash=False)

    def __post_init__(self):
        if self.fp_id < 0:
            raise DatasetError(f"fp_id must be non-negative, got {self.fp_id}")
        if not self.observations:
            raise EmptyFingerprintError(f"fingerprint {self.fp_id} has no observations")
        if not all(math.isfinite(v) for v in self.position):
            raise DatasetError(f"fingerprint {self.fp_id} has a non-finite position")
        if not all(math.isfinite(v) for v in self.observations.values()):
            raise DatasetError(f"fingerprint {self.fp_id} has a non-finite RSS value")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "observations", dict(self.observations))

    def with_position(self, position) -> "Fingerprint":
        return Fingerprint(self.fp_id, self.floor, tuple(position), self.observations)


@dataclass(frozen=True)
class WapIndex:
    """MAC address -> integer index.  Index 0 is the unknown-MAC bucket."""

    mac_to_idx: Mapping[str, int]

    @property
    def size(self) -> int:
        return len(self.mac_to_idx)

    def get(self, mac: str) -> int:
        return self.mac_to_idx.get(mac, 0)

    def __contains__(self, mac) -> bool:
        return mac in self.mac_to_idx

    def to_dict(self) -> dict:
        return {"macs": sorted(self.mac_to_idx, key=self.mac_to_idx.__getitem__)}

    @classmethod
    def from_dict(cls, d: dict) -> "WapIndex":
        macs = list(d["macs"])
        if macs != sorted(macs) or len(set(macs)) != len(macs):
            raise DatasetError("WAP index MACs must be unique and sorted")
        return cls({m: i + 1 for i, m in enumerate(macs)})


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train": list(self.train),
                "validation": list(self.validation),
                "test": list(self.test),
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetSplit":
        d = json.loads(text)
        return cls(tuple(d["train"]), tuple(d["validation"]), tuple(d["test"]), int(d["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DatasetSplit":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def select(self, fps: Sequence[Fingerprint]):
        """Return the (train, validation, test) fingerprint lists."""
        by_id = {fp.fp_id: fp for fp in fps}
        try:
            return tuple([by_id[i] for i in ids] for ids in (self.train, self.validation, self.test))
        except KeyError as e:
            raise DatasetError(f"split references unknown fp_id {e.args[0]}") from None


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise LoadError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise LoadError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def read_observations(path) -> dict[int, dict[str, float]]:
    """Parse an ``fp_id,mac,rss_dbm`` file into ``{fp_id: {mac: rss}}``."""
    obs: dict[int, dict[str, float]] = {}
    for line, (fid, mac, rss) in _read_rows(path, OBSERVATION_HEADER):
        try:
            fid_i = int(fid)
            value = float(rss)
        except ValueError:
            raise LoadError(path, line, "unparsable number") from None
        if not mac:
            raise LoadError(path, line, "empty MAC")
        if not math.isfinite(value):
            raise LoadError(path, line, "non-finite RSS")
        per_fp = obs.setdefault(fid_i, {})
        if mac in per_fp:
            raise DuplicateObservationError(f"{path}:{line}: duplicate observation (fp_id={fid_i}, mac={mac!r})")
        per_fp[mac] = value
    return obs


def load_dataset(fingerprints_path, observations_path) -> list[Fingerprint]:
    """Join the fingerprint and observation CSVs into ``Fingerprint`` records.

    Fingerprints keep the row order of ``fingerprints_path``.
    """
    rows = []
    seen = set()
    for line, (fid, floor, x, y) in _read_rows(fingerprints_path, FINGERPRINT_HEADER):
        try:
            rec = (int(fid), int(floor), float(x), float(y))
        except ValueError:
            raise LoadError(fingerprints_path, line, "unparsable number") from None
        if rec[0] in seen:
            raise LoadError(fingerprints_path, line, f"duplicate fp_id {rec[0]}")
        if not (math.isfinite(rec[2]) and math.isfinite(rec[3])):
            raise LoadError(fingerprints_path, line, "non-finite position")
        seen.add(rec[0])
        rows.append(rec)

    obs = read_observations(observations_path)
    orphans = sorted(set(obs) - seen)
    if orphans:
        raise OrphanObservationError(f"{observations_path}: fp_id {orphans[0]} has no fingerprint row")

    fps = []
    for fid, floor, x, y in rows:
        if fid not in obs:
            raise EmptyFingerprintError(f"fingerprint {fid} has no observations")
        fps.append(Fingerprint(fid, floor, (x, y), obs[fid]))
    return fps


def load_dataset_dir(directory) -> list[Fingerprint]:
    d = Path(directory)
    return load_dataset(d / "fingerprints.csv", d / "observations.csv")


def write_dataset(fps: Iterable[Fingerprint], directory) -> None:
    """Write the two-file CSV pair.  Observations are emitted in sorted MAC order."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    fps = list(fps)
    with (d / "fingerprints.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FINGERPRINT_HEADER)
        for fp in fps:
            w.writerow([fp.fp_id, fp.floor, repr(fp.position[0]), repr(fp.position[1])])
    write_observations(fps, d / "observations.csv")


def write_observations(fps: Iterable[Fingerprint], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVATION_HEADER)
        for fp in fps:
            for mac in sorted(fp.observations):
                w.writerow([fp.fp_id, mac, repr(fp.observations[mac])])


def build_wap_index(fps: Sequence[Fingerprint]) -> WapIndex:
    if not fps:
        raise DatasetError("cannot build a WAP index from zero fingerprints")
    macs = sorted({mac for fp in fps for mac in fp.observations})
    return WapIndex({m: i + 1 for i, m in enumerate(macs)})


def rss_vector(fp: Fingerprint, index: WapIndex) -> np.ndarray:
    """Dense RSS vector of length ``index.size``; unobserved WAPs are 0.

    MACs that are not in the index are dropped.
    """
    v = np.zeros(index.size)
    for mac, rss in fp.observations.items():
        j = index.mac_to_idx.get(mac)
        if j is not None:
            v[j - 1] = rss
    return v


def rss_matrix(fps: Sequence[Fingerprint], index: WapIndex) -> np.ndarray:
    return np.array([rss_vector(fp, index) for fp in fps]).reshape(len(fps), index.size)


def split_dataset(fps: Sequence[Fingerprint], seed: int) -> DatasetSplit:
    """Random 6:2:2 partition of fingerprint ids.

    Ids are sorted, permuted with ``PCG64(SeedSequence(seed))`` and cut at
    ``floor(0.6 n)`` and ``floor(0.6 n) + floor(0.2 n)``; the test slice is
    the next ``floor(0.2 n)`` ids and whatever is left at the tail is
    appended to train.
    """
    n = len(fps)
    if n < 5:
        raise TooFewFingerprintsError(f"need at least 5 fingerprints to split, got {n}")
    ids = np.array(sorted(fp.fp_id for fp in fps), dtype=np.int64)
    if len(np.unique(ids)) != n:
        raise DatasetError("fp_ids must be unique")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = [int(i) for i in ids[rng.permutation(n)]]
    a = (6 * n) // 10
    b = a + (2 * n) // 10
    c = b + (2 * n) // 10
    return DatasetSplit(
        train=tuple(order[:a] + order[c:]),
        validation=tuple(order[a:b]),
        test=tuple(order[b:c]),
        seed=int(seed),
    )
