"""Synthetic cohorts with planted class signal.

Connectivity: HC matrices are a smooth base graph plus symmetric
half-normal noise; AD matrices additionally shift every edge incident to
a planted parcel by +/- delta. Volumes: HC are smooth noise around a
base intensity; AD attenuate intensity by delta inside planted parcels.
Both generators emit the same on-disk formats data-io reads and are
deterministic under their seed.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlasdef import default_names_path
from .dataio import (AD, HC, SessionRecord, make_cohort, read_names_tsv,
                     write_conn_csv, write_manifest)
from .interp import resize_linear
from .nifti import write_nifti

AD_CDR_VALUES = (0.5, 1.0, 2.0)
AD_CDR_PROBS = (0.7, 0.2, 0.1)


@dataclass
class SignalSpec:
    n_parcels: int = 132
    planted: tuple = (10, 40, 80, 120)
    effect: float = 1.0          # delta
    noise_sigma: float = 0.2
    sign: int = 1                # +1 raises planted edges in AD, -1 lowers
    n_hc_subjects: int = 50
    n_ad_subjects: int = 50
    session_probs: tuple = (1.0,)  # P(1 session), P(2), ... per subject
    mixed_fraction: float = 0.0276

    def __post_init__(self):
        if self.effect < 0 or not self.planted:
            raise ValueError("effect must be >= 0 and planted non-empty")
        if any(not 1 <= p <= self.n_parcels for p in self.planted):
            raise ValueError(f"planted parcels outside 1..{self.n_parcels}")


def _make_sessions(spec, rng):
    """Subject/session bookkeeping shared by both generators."""
    records = []
    n_mixed = round(spec.mixed_fraction * (spec.n_hc_subjects + spec.n_ad_subjects))
    probs = np.asarray(spec.session_probs) / sum(spec.session_probs)

    def draw_cdr(label):
        if label == HC:
            return 0.0
        return float(rng.choice(AD_CDR_VALUES, p=AD_CDR_PROBS))

    subject_no = 0
    for label, count in ((HC, spec.n_hc_subjects), (AD, spec.n_ad_subjects)):
        for _ in range(count):
            subject_no += 1
            subject = f"sub{subject_no:04d}"
            n_sessions = 1 + int(rng.choice(len(probs), p=probs))
            for k in range(n_sessions):
                cdr = draw_cdr(label)
                records.append(SessionRecord(subject, f"{subject}_s{k + 1}",
                                             cdr, label))
    for _ in range(n_mixed):
        subject_no += 1
        subject = f"sub{subject_no:04d}"
        records.append(SessionRecord(subject, f"{subject}_s1", 0.0, HC))
        records.append(SessionRecord(subject, f"{subject}_s2", draw_cdr(AD), AD))
    return records


def _base_graph(n):
    idx = np.arange(n)
    base = 0.5 * np.exp(-((idx[:, None] - idx[None, :]) / (n / 8.0)) ** 2)
    np.fill_diagonal(base, 0.0)
    return base


def _noise_matrix(rng, n, sigma):
    noise = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    noise[iu] = np.abs(rng.normal(0.0, sigma, size=len(iu[0])))
    return noise + noise.T


def gen_connectivity(spec, seed=0):
    """Returns (cohort, {session_id: matrix})."""
    rng = np.random.default_rng(seed)
    records = _make_sessions(spec, rng)
    base = _base_graph(spec.n_parcels)
    planted = np.zeros(spec.n_parcels, dtype=bool)
    planted[[p - 1 for p in spec.planted]] = True
    incident = planted[:, None] | planted[None, :]
    np.fill_diagonal(incident, False)
    matrices = {}
    for rec in records:
        mat = base + _noise_matrix(rng, spec.n_parcels, spec.noise_sigma)
        if rec.label == AD:
            mat = mat + spec.sign * spec.effect * incident
        mat = np.maximum(mat, 0.0)
        np.fill_diagonal(mat, 0.0)
        matrices[rec.session_id] = mat
    return make_cohort(records), matrices


def _near_cube_factors(n):
    """3-way factorization of n with the smallest spread."""
    best = None
    for a in range(1, int(round(n ** (1 / 3))) + 2):
        if n % a:
            continue
        rest = n // a
        for b in range(a, int(math.isqrt(rest)) + 1):
            if rest % b:
                continue
            c = rest // b
            spread = c - a
            if best is None or spread < best[0]:
                best = (spread, (a, b, c))
    if best is None:
        best = (n - 1, (1, 1, n))
    return best[1]


def toy_atlas_labels(shape, n_parcels):
    """Partition a grid into n_parcels contiguous blocks, labels 1..n."""
    factors = sorted(_near_cube_factors(n_parcels), reverse=True)
    order = np.argsort(shape)[::-1]  # largest axis gets most splits
    splits = [1, 1, 1]
    for f, axis in zip(factors, order):
        splits[axis] = f
    if any(s > d for s, d in zip(splits, shape)):
        raise ValueError(f"cannot split {shape} into {splits} blocks")
    bounds = [np.linspace(0, d, s + 1).astype(int) for d, s in zip(shape, splits)]
    labels = np.zeros(shape, dtype=np.int64)
    parcel = 0
    for i in range(splits[0]):
        for j in range(splits[1]):
            for k in range(splits[2]):
                parcel += 1
                labels[bounds[0][i]:bounds[0][i + 1],
                       bounds[1][j]:bounds[1][j + 1],
                       bounds[2][k]:bounds[2][k + 1]] = parcel
    return labels


def toy_atlas_names(n_parcels):
    if n_parcels == 132:
        return read_names_tsv(default_names_path())
    names = [f"P{i:03d}" for i in range(1, n_parcels + 1)]
    return names, {n: "Syn" for n in names}


def gen_volumes(spec, seed=0, shape=(32, 32, 32)):
    """Returns (cohort, {session_id: volume}, labels volume)."""
    rng = np.random.default_rng(seed)
    records = _make_sessions(spec, rng)
    labels = toy_atlas_labels(shape, spec.n_parcels)
    planted_mask = np.isin(labels, list(spec.planted))
    low_shape = tuple(max(d // 4, 2) for d in shape)
    volumes = {}
    for rec in records:
        smooth = resize_linear(rng.normal(0.0, spec.noise_sigma, low_shape), shape)
        vol = 1.0 + smooth
        if rec.label == AD:
            vol = vol - spec.effect * planted_mask
        volumes[rec.session_id] = vol
    return make_cohort(records), volumes, labels


def write_connectivity_dataset(out_dir, cohort, matrices):
    """Manifest + per-session matrix CSVs under out_dir (paths relative)."""
    out_dir = Path(out_dir)
    (out_dir / "conn").mkdir(parents=True, exist_ok=True)
    sessions = []
    for rec in cohort.sessions:
        rel = f"conn/{rec.session_id}.csv"
        write_conn_csv(out_dir / rel, matrices[rec.session_id])
        sessions.append(SessionRecord(rec.subject_id, rec.session_id, rec.cdr,
                                      rec.label, None, rel))
    cohort = make_cohort(sessions)
    write_manifest(out_dir / "manifest.csv", cohort)
    return cohort


def write_volume_dataset(out_dir, cohort, volumes, labels, n_parcels):
    """Manifest + per-session volumes + toy atlas under out_dir."""
    out_dir = Path(out_dir)
    (out_dir / "vols").mkdir(parents=True, exist_ok=True)
    sessions = []
    for rec in cohort.sessions:
        rel = f"vols/{rec.session_id}.nii"
        write_nifti(out_dir / rel, volumes[rec.session_id])
        sessions.append(SessionRecord(rec.subject_id, rec.session_id, rec.cdr,
                                      rec.label, rel, None))
    write_nifti(out_dir / "atlas_labels.nii", labels.astype(np.float64), dtype="i4")
    names, lobes = toy_atlas_names(n_parcels)
    with open(out_dir / "atlas_names.tsv", "w") as f:
        for i, name in enumerate(names, start=1):
            f.write(f"{i}\t{name}\t{lobes[name]}\n")
    cohort = make_cohort(sessions)
    write_manifest(out_dir / "manifest.csv", cohort)
    return cohort
