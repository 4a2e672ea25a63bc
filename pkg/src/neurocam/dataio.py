"""Session manifest, connectivity-matrix, and atlas ingestion.

File formats are documented byte-exactly in docs/formats.md. The CDR
labeling rule: CDR 0 -> HC, CDR in {0.5, 1, 2} -> AD; a subject whose
sessions carry both labels is flagged mixed-class (the statistics
pipeline later drops such subjects).
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .nifti import read_nifti

HC, AD = "HC", "AD"
VALID_CDR = (0.0, 0.5, 1.0, 2.0)
SYM_TOL = 1e-9

MANIFEST_COLUMNS = ["subject_id", "session_id", "cdr", "volume_path", "matrix_path"]


@dataclass(frozen=True)
class SessionRecord:
    subject_id: str
    session_id: str
    cdr: float
    label: str  # HC | AD
    volume_path: str | None = None
    matrix_path: str | None = None


@dataclass
class Cohort:
    sessions: list
    subject_index: dict = field(default_factory=dict)   # subject -> [session ids]
    mixed_class_subjects: set = field(default_factory=set)

    def __post_init__(self):
        self._by_id = {s.session_id: s for s in self.sessions}

    def by_id(self, session_id):
        return self._by_id[session_id]

    def class_counts(self):
        hc = sum(1 for s in self.sessions if s.label == HC)
        return {HC: hc, AD: len(self.sessions) - hc}

    def subject_label(self, subject_id):
        """Majority class of a subject's sessions (ties go to AD)."""
        labels = [self._by_id[sid].label for sid in self.subject_index[subject_id]]
        n_ad = sum(1 for l in labels if l == AD)
        return AD if n_ad * 2 >= len(labels) else HC

    def subjects(self):
        return list(self.subject_index)


def label_for_cdr(cdr):
    if cdr not in VALID_CDR:
        raise DataError(f"CDR {cdr} outside {{0, 0.5, 1, 2}}")
    return HC if cdr == 0 else AD


def make_cohort(sessions):
    """Assemble a Cohort, building the subject index and mixed-class flags."""
    index = {}
    seen = set()
    for s in sessions:
        if s.session_id in seen:
            raise DataError(f"duplicate session_id {s.session_id!r}")
        seen.add(s.session_id)
        index.setdefault(s.subject_id, []).append(s.session_id)
    by_id = {s.session_id: s for s in sessions}
    mixed = {subj for subj, sids in index.items()
             if len({by_id[sid].label for sid in sids}) > 1}
    return Cohort(sessions=list(sessions), subject_index=index,
                  mixed_class_subjects=mixed)


def read_manifest(path):
    """Parse manifest.csv into a Cohort (schema in docs/formats.md)."""
    sessions = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise DataError(f"{path}: header {reader.fieldnames} != {MANIFEST_COLUMNS}")
        for lineno, row in enumerate(reader, start=2):
            if any(row.get(c) is None for c in MANIFEST_COLUMNS):
                raise DataError(f"{path}:{lineno}: malformed row {row}")
            try:
                cdr = float(row["cdr"])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad CDR {row['cdr']!r}") from exc
            sessions.append(SessionRecord(
                subject_id=row["subject_id"],
                session_id=row["session_id"],
                cdr=cdr,
                label=label_for_cdr(cdr),
                volume_path=row["volume_path"] or None,
                matrix_path=row["matrix_path"] or None,
            ))
    return make_cohort(sessions)


def write_manifest(path, cohort):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for s in cohort.sessions:
            writer.writerow([s.subject_id, s.session_id, f"{s.cdr:g}",
                             s.volume_path or "", s.matrix_path or ""])


@dataclass
class ConnectivityMatrix:
    values: np.ndarray
    session_id: str = ""


def validate_connectivity(values, origin="matrix"):
    """Enforce square / symmetric (<=1e-9) / non-negative / zero diagonal;
    returns the symmetrized array."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DataError(f"{origin}: expected a square matrix, got {values.shape}")
    asym = np.abs(values - values.T).max() if values.size else 0.0
    if asym > SYM_TOL:
        raise DataError(f"{origin}: asymmetry {asym:.3g} exceeds {SYM_TOL}")
    if values.min() < 0:
        raise DataError(f"{origin}: negative entry {values.min():.3g}")
    diag = np.abs(np.diag(values)).max() if values.size else 0.0
    if diag > SYM_TOL:
        raise DataError(f"{origin}: nonzero diagonal entry {diag:.3g}")
    out = (values + values.T) / 2.0
    np.fill_diagonal(out, 0.0)
    return out


def read_conn_csv(path, n_nodes=132):
    """Read an n x n comma-separated connectivity matrix."""
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: unparseable matrix ({exc})") from exc
    if values.shape != (n_nodes, n_nodes):
        raise DataError(f"{path}: expected {n_nodes}x{n_nodes}, got {values.shape}")
    return ConnectivityMatrix(values=validate_connectivity(values, origin=str(path)),
                              session_id=Path(path).stem)


def write_conn_csv(path, values):
    np.savetxt(path, np.asarray(values), delimiter=",", fmt="%.17g")


@dataclass
class AtlasParcellation:
    labels: np.ndarray            # integer volume, 0 = background
    names: list                   # parcel index i -> names[i-1]
    lobes: dict                   # acronym -> lobe tag

    @property
    def n_parcels(self):
        return len(self.names)

    def index_of(self, acronym):
        return self.names.index(acronym) + 1

    def mask(self, parcel):
        return self.labels == parcel


def read_names_tsv(path):
    names, lobes = [], {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected index<TAB>acronym<TAB>lobe")
            idx, acronym, lobe = parts
            if int(idx) != len(names) + 1:
                raise DataError(f"{path}:{lineno}: index {idx}, expected {len(names) + 1}")
            names.append(acronym)
            lobes[acronym] = lobe
    return names, lobes


def read_atlas(label_nii_path, names_tsv_path, expected_parcels=None):
    """Load the parcel label volume plus the acronym table."""
    names, lobes = read_names_tsv(names_tsv_path)
    if expected_parcels is not None and len(names) != expected_parcels:
        raise DataError(f"{names_tsv_path}: {len(names)} names, "
                        f"expected {expected_parcels}")
    vol, _ = read_nifti(label_nii_path)
    labels = np.rint(vol).astype(np.int64)
    if np.abs(vol - labels).max() > 1e-6:
        raise DataError(f"{label_nii_path}: label volume is not integer-valued")
    top = labels.max()
    if labels.min() < 0 or top > len(names):
        raise DataError(f"{label_nii_path}: labels outside 0..{len(names)} "
                        f"(found {labels.min()}..{top})")
    present = set(np.unique(labels)) - {0}
    missing = set(range(1, len(names) + 1)) - present
    if missing:
        raise DataError(f"{label_nii_path}: empty parcels {sorted(missing)[:8]}...")
    return AtlasParcellation(labels=labels, names=names, lobes=lobes)
