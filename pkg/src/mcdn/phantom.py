"""Synthetic anterior-segment phantoms with analytically known geometry.

A phantom is a 2-D cross-section of one chamber angle in canonical (left)
orientation: the angle apex sits in the left part of the image, the bright
corneal arc rises to the right across the top, the iris ridge leaves the
apex under it, and the anterior lens surface climbs toward the right edge.
The apex is an analytic construction input, so every sample carries exact
ground truth for the angle location, and the label is a pure threshold on
the configured angle.
"""

import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ContractError
from .pgm import read_pgm, write_pgm

GENERATOR_VERSION = "phantom-1"

# Layout fractions and rendering levels; shared by the geometry derivation
# and the renderer so the analytic curves and the raster always agree.
APEX_X_FRAC = 0.17
APEX_Y_FRAC = 0.48
APEX_X_JITTER_FRAC = 0.02
APEX_Y_JITTER_FRAC = 0.03
CORNEA_TILT_DEG = 30.0
CORNEA_CREST_FRAC = 0.9        # crest position along the cornea span
IRIS_SPAN_FRAC = 0.75          # of the cornea span
IRIS_END_DROP_FRAC = 0.10      # of image height, below apex height
IRIS_THICKNESS_PX = 6
LENS_THICKNESS_PX = 5
MIN_SEPARATION_PX = 3          # dark clearance kept between structures
BACKGROUND_LEVEL = 25
CORNEA_LEVEL = 210
IRIS_LEVEL = 190
LENS_LEVEL = 170


@dataclass(frozen=True)
class PhantomSpec:
    irisAngleDeg: float
    imageWidth: int = 400
    imageHeight: int = 200
    corneaThickness: float = 6.0
    lensVaultPx: float = 25.0
    irisBowPx: float = 0.0
    noiseSigma: float = 0.0
    closureThresholdDeg: float = 12.0
    rngSeed: int = 0

    def validate(self):
        if not (0.0 < self.irisAngleDeg < 90.0):
            raise ContractError(f"irisAngleDeg must lie in (0, 90), got {self.irisAngleDeg}")
        if self.imageWidth < 160 or self.imageHeight < 160:
            raise ContractError(
                f"imageWidth/imageHeight must be >= 160 so a 120x120 crop fits, "
                f"got {self.imageWidth}x{self.imageHeight}")
        if self.corneaThickness <= 0:
            raise ContractError(f"corneaThickness must be positive, got {self.corneaThickness}")
        if self.noiseSigma < 0:
            raise ContractError(f"noiseSigma must be >= 0, got {self.noiseSigma}")
        if self.irisBowPx < 0:
            raise ContractError(f"irisBowPx must be >= 0, got {self.irisBowPx}")
        if self.closureThresholdDeg <= 0:
            raise ContractError(f"closureThresholdDeg must be positive, got {self.closureThresholdDeg}")
        if not (0 <= self.rngSeed < 2 ** 64):
            raise ContractError(f"rngSeed must be a 64-bit unsigned integer, got {self.rngSeed}")

    @property
    def label(self):
        return 1 if self.irisAngleDeg < self.closureThresholdDeg else 0


@dataclass(frozen=True)
class PhantomGeometry:
    """Analytic curves of one phantom, all in pixel coordinates (y grows down)."""

    width: int
    height: int
    apex_x: float
    apex_y: float
    cornea_slope: float            # magnitude of the rise at the apex
    cornea_quad: float
    cornea_thickness: float
    iris_span: float
    iris_start_slope: float        # Hermite start slope (bow already folded in)
    iris_b2: float
    iris_b3: float
    iris_bow: float
    lens_peak_y: float
    lens_quad: float

    def cornea_y(self, x):
        dx = np.asarray(x, dtype=np.float64) - self.apex_x
        return self.apex_y - self.cornea_slope * dx + self.cornea_quad * dx ** 2

    def iris_y(self, x):
        """Upper iris surface; only meaningful for apex_x <= x <= apex_x + iris_span."""
        dx = np.asarray(x, dtype=np.float64) - self.apex_x
        t = dx / self.iris_span
        bump = 4.0 * self.iris_bow * t * (1.0 - t)
        return (self.apex_y + self.iris_start_slope * dx
                + self.iris_b2 * dx ** 2 + self.iris_b3 * dx ** 3 - bump)

    def lens_y(self, x):
        dxr = np.asarray(x, dtype=np.float64) - (self.width - 1)
        return self.lens_peak_y + self.lens_quad * dxr ** 2


@dataclass
class PhantomSample:
    image: np.ndarray              # uint8 (H, W)
    label: int
    subject_id: str
    eye_side: str                  # "left" | "right"
    aca_truth: tuple               # (x, y) in pixels
    spec: Optional[PhantomSpec] = None


def flat_iris_angle_deg(width=400, height=200):
    """Angle at which the rendered iris is an exactly straight ridge (zero bow)."""
    ax = APEX_X_FRAC * width
    span_c = (width - 1) - ax
    span_i = IRIS_SPAN_FRAC * span_c
    drop = IRIS_END_DROP_FRAC * height
    return CORNEA_TILT_DEG + math.degrees(math.atan2(drop, span_i))


def derive_geometry(spec: PhantomSpec, rng=None):
    """Analytic curves for a spec; apex jitter comes from the spec seed."""
    spec.validate()
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(spec.rngSeed))
    w, h = spec.imageWidth, spec.imageHeight
    ax = (APEX_X_FRAC + rng.uniform(-1, 1) * APEX_X_JITTER_FRAC) * w
    ay = (APEX_Y_FRAC + rng.uniform(-1, 1) * APEX_Y_JITTER_FRAC) * h

    tilt = math.tan(math.radians(CORNEA_TILT_DEG))
    span_c = (w - 1) - ax
    q_c = tilt / (2.0 * CORNEA_CREST_FRAC * span_c)

    span_i = IRIS_SPAN_FRAC * span_c
    drop = IRIS_END_DROP_FRAC * h
    end_slope = drop / span_i
    # Tangent at the apex makes exactly irisAngleDeg with the cornea tangent.
    s_apex = math.tan(math.radians(spec.irisAngleDeg - CORNEA_TILT_DEG))
    s0 = s_apex + 4.0 * spec.irisBowPx / span_i    # cancels the bow bump's slope at 0
    b2 = 3.0 * drop / span_i ** 2 - (2.0 * s0 + end_slope) / span_i
    b3 = -2.0 * drop / span_i ** 3 + (s0 + end_slope) / span_i ** 2

    lens_quad = 5.6 * h / (w * w)
    return PhantomGeometry(
        width=w, height=h, apex_x=ax, apex_y=ay,
        cornea_slope=tilt, cornea_quad=q_c, cornea_thickness=spec.corneaThickness,
        iris_span=span_i, iris_start_slope=s0, iris_b2=b2, iris_b3=b3,
        iris_bow=spec.irisBowPx,
        lens_peak_y=ay - spec.lensVaultPx, lens_quad=lens_quad,
    )


def _render(geom: PhantomGeometry, spec: PhantomSpec, rng):
    w, h = geom.width, geom.height
    img = np.full((h, w), BACKGROUND_LEVEL, dtype=np.float64)
    xs = np.arange(w)

    cy = geom.cornea_y(xs)
    c_top = np.ceil(cy - geom.cornea_thickness).astype(int)
    c_bot = np.floor(cy).astype(int)

    ax_col = int(round(geom.apex_x))
    iris_end = int(round(geom.apex_x + geom.iris_span))
    iris_top = np.full(w, -1, dtype=int)
    iris_cols = (xs >= ax_col) & (xs <= iris_end)
    iy = np.rint(geom.iris_y(xs)).astype(int)
    iris_top[iris_cols] = np.maximum(iy[iris_cols], c_bot[iris_cols] + 1 + MIN_SEPARATION_PX)

    lens_top = np.full(w, -1, dtype=int)
    ly = np.rint(geom.lens_y(xs)).astype(int)
    lens_cols = xs >= ax_col
    lens_top[lens_cols] = np.maximum(ly[lens_cols], c_bot[lens_cols] + 1 + MIN_SEPARATION_PX)
    has_iris = iris_top >= 0
    lens_top[has_iris] = np.maximum(
        lens_top[has_iris],
        iris_top[has_iris] + IRIS_THICKNESS_PX + MIN_SEPARATION_PX)

    rows = np.arange(h)[:, None]
    img[(rows >= c_top[None, :]) & (rows <= c_bot[None, :])] = CORNEA_LEVEL
    iris_band = (has_iris[None, :] & (rows >= iris_top[None, :])
                 & (rows < iris_top[None, :] + IRIS_THICKNESS_PX))
    img[iris_band] = IRIS_LEVEL
    lens_band = ((lens_top >= 0)[None, :] & (rows >= lens_top[None, :])
                 & (rows < lens_top[None, :] + LENS_THICKNESS_PX))
    img[lens_band] = LENS_LEVEL

    if spec.noiseSigma > 0:
        # Box-Muller from the sample generator.
        n = h * w
        u1 = rng.random(n)
        u2 = rng.random(n)
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        img += spec.noiseSigma * z.reshape(h, w)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_phantom(spec: PhantomSpec, subject_id="subject-0", eye_side="left"):
    """Render one phantom; deterministic in spec.rngSeed."""
    spec.validate()
    if eye_side not in ("left", "right"):
        raise ContractError(f"eye_side must be 'left' or 'right', got {eye_side!r}")
    rng = np.random.Generator(np.random.PCG64(spec.rngSeed))
    geom = derive_geometry(spec, rng)
    image = _render(geom, spec, rng)
    return PhantomSample(
        image=image,
        label=spec.label,
        subject_id=subject_id,
        eye_side=eye_side,
        aca_truth=(geom.apex_x, geom.apex_y),
        spec=spec,
    )


@dataclass(frozen=True)
class SpecRanges:
    """Uniform sampling ranges for dataset generation (lo == hi pins a value)."""

    open_angle_deg: tuple = (15.0, 45.0)
    closed_angle_deg: tuple = (3.0, 11.0)
    cornea_thickness_px: tuple = (5.0, 8.0)
    lens_vault_px: tuple = (15.0, 35.0)
    iris_bow_px: tuple = (0.0, 4.0)
    noise_sigma: tuple = (8.0, 8.0)
    image_width: int = 400
    image_height: int = 200
    closure_threshold_deg: float = 12.0

    def validate(self):
        if not self.open_angle_deg[0] >= self.closure_threshold_deg:
            raise ContractError("open angle range must lie above the closure threshold")
        if not self.closed_angle_deg[1] < self.closure_threshold_deg:
            raise ContractError("closed angle range must lie below the closure threshold")


@dataclass
class ManifestRecord:
    image_path: str
    subject_id: str
    eye_side: str
    label: int
    aca_truth_x: float
    aca_truth_y: float
    iris_angle_deg: float
    split: str = "unassigned"


@dataclass
class DatasetManifest:
    samples: list
    split_seed: Optional[int] = None
    generator_version: str = GENERATOR_VERSION

    def subjects(self):
        seen = []
        for rec in self.samples:
            if rec.subject_id not in seen:
                seen.append(rec.subject_id)
        return seen

    def records_for(self, split):
        return [rec for rec in self.samples if rec.split == split]

    def check_split_invariant(self):
        by_subject = {}
        for rec in self.samples:
            by_subject.setdefault(rec.subject_id, set()).add(rec.split)
        for subject, splits in by_subject.items():
            if {"train", "test"} <= splits:
                raise ContractError(f"subject {subject} appears in both train and test")


def _sample_seed(base_seed, index):
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1, np.uint64)[0])


def generate_dataset(count, subject_count, closure_fraction, base_seed,
                     spec_ranges: SpecRanges = SpecRanges()):
    """Generate count phantoms over subject_count subjects (a left/right pair each).

    Angles are drawn uniformly from the disjoint open/closed ranges; the
    number of closure samples is round(closure_fraction * count).  Sample
    content depends only on (base_seed, sample index), so parallel and
    serial generation agree.
    """
    spec_ranges.validate()
    if count < 2 or subject_count < 2:
        raise ContractError("count and subject_count must both be >= 2")
    if count % 2 != 0:
        raise ContractError(f"count must be even (left/right pairing), got {count}")
    if count < 2 * subject_count:
        raise ContractError(
            f"count={count} cannot give each of {subject_count} subjects a left/right pair")
    n_closure = int(math.floor(closure_fraction * count + 0.5))
    if not (1 <= n_closure <= count - 1):
        raise ContractError(
            f"closure_fraction {closure_fraction} leaves {n_closure} closure samples in {count}")

    class_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((base_seed, 0xC1A55))))
    closure_idx = set(class_rng.permutation(count)[:n_closure].tolist())

    id_width = max(3, len(str(subject_count - 1)))
    samples, records = [], []
    for i in range(count):
        pair, side_idx = divmod(i, 2)
        subject = f"subject-{pair % subject_count:0{id_width}d}"
        side = "left" if side_idx == 0 else "right"
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((base_seed, i))))
        lo, hi = (spec_ranges.closed_angle_deg if i in closure_idx
                  else spec_ranges.open_angle_deg)
        spec = PhantomSpec(
            irisAngleDeg=float(rng.uniform(lo, hi)),
            imageWidth=spec_ranges.image_width,
            imageHeight=spec_ranges.image_height,
            corneaThickness=float(rng.uniform(*spec_ranges.cornea_thickness_px)),
            lensVaultPx=float(rng.uniform(*spec_ranges.lens_vault_px)),
            irisBowPx=float(rng.uniform(*spec_ranges.iris_bow_px)),
            noiseSigma=float(rng.uniform(*spec_ranges.noise_sigma)),
            closureThresholdDeg=spec_ranges.closure_threshold_deg,
            rngSeed=_sample_seed(base_seed, i),
        )
        sample = generate_phantom(spec, subject_id=subject, eye_side=side)
        samples.append(sample)
        records.append(ManifestRecord(
            image_path=f"img_{i:05d}.pgm",
            subject_id=subject,
            eye_side=side,
            label=sample.label,
            aca_truth_x=float(sample.aca_truth[0]),
            aca_truth_y=float(sample.aca_truth[1]),
            iris_angle_deg=spec.irisAngleDeg,
        ))
    return samples, DatasetManifest(samples=records)


def split_by_subject(manifest: DatasetManifest, train_fraction, seed):
    """Assign whole subjects to train/test; round-half-up on the train count."""
    if any(rec.split != "unassigned" for rec in manifest.samples):
        raise ContractError("manifest already carries split assignments")
    if not (0.0 < train_fraction < 1.0):
        raise ContractError(f"train_fraction must lie in (0,1), got {train_fraction}")
    subjects = sorted(set(rec.subject_id for rec in manifest.samples))
    if len(subjects) < 2:
        raise ContractError("need at least 2 subjects to split")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    n_train = int(math.floor(train_fraction * len(subjects) + 0.5))
    n_train = min(max(n_train, 1), len(subjects) - 1)
    train_set = set(order[:n_train])
    for rec in manifest.samples:
        rec.split = "train" if rec.subject_id in train_set else "test"
    manifest.split_seed = int(seed)
    manifest.check_split_invariant()
    return manifest


def save_dataset(samples, manifest: DatasetManifest, directory):
    if len(samples) != len(manifest.samples):
        raise ContractError(
            f"sample count {len(samples)} does not match manifest ({len(manifest.samples)})")
    os.makedirs(directory, exist_ok=True)
    for sample, rec in zip(samples, manifest.samples):
        write_pgm(os.path.join(directory, rec.image_path), sample.image)
    doc = {
        "samples": [
            {
                "imagePath": rec.image_path,
                "subjectId": rec.subject_id,
                "eyeSide": rec.eye_side,
                "label": rec.label,
                "acaTruthX": rec.aca_truth_x,
                "acaTruthY": rec.aca_truth_y,
                "irisAngleDeg": rec.iris_angle_deg,
                "split": rec.split,
            }
            for rec in manifest.samples
        ],
        "splitSeed": manifest.split_seed,
        "generatorVersion": manifest.generator_version,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


_RECORD_KEYS = {"imagePath", "subjectId", "eyeSide", "label",
                "acaTruthX", "acaTruthY", "irisAngleDeg", "split"}


def load_dataset(directory):
    """Load a saved dataset; raises ValueError naming the offending file."""
    manifest_path = os.path.join(directory, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValueError(f"{manifest_path}: manifest not found")
    except json.JSONDecodeError as exc:
        raise ValueError(f"{manifest_path}: invalid JSON ({exc})")
    if not isinstance(doc, dict) or "samples" not in doc:
        raise ValueError(f"{manifest_path}: missing 'samples' key")
    records, samples = [], []
    for i, entry in enumerate(doc["samples"]):
        missing = _RECORD_KEYS - set(entry)
        if missing:
            raise ValueError(f"{manifest_path}: record {i} missing keys {sorted(missing)}")
        if entry["label"] not in (0, 1):
            raise ValueError(f"{manifest_path}: record {i} label must be 0 or 1")
        if entry["split"] not in ("train", "test", "unassigned"):
            raise ValueError(f"{manifest_path}: record {i} has unknown split {entry['split']!r}")
        rec = ManifestRecord(
            image_path=entry["imagePath"],
            subject_id=entry["subjectId"],
            eye_side=entry["eyeSide"],
            label=int(entry["label"]),
            aca_truth_x=float(entry["acaTruthX"]),
            aca_truth_y=float(entry["acaTruthY"]),
            iris_angle_deg=float(entry["irisAngleDeg"]),
            split=entry["split"],
        )
        records.append(rec)
        image = read_pgm(os.path.join(directory, rec.image_path))
        samples.append(PhantomSample(
            image=image,
            label=rec.label,
            subject_id=rec.subject_id,
            eye_side=rec.eye_side,
            aca_truth=(rec.aca_truth_x, rec.aca_truth_y),
        ))
    manifest = DatasetManifest(
        samples=records,
        split_seed=doc.get("splitSeed"),
        generator_version=doc.get("generatorVersion", "unknown"),
    )
    manifest.check_split_invariant()
    return samples, manifest
