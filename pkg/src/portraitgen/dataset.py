"""Paired photo/portrait datasets.

Two responsibilities: manifest-driven loading of photo-attribute-portrait
triples, and a procedural toy generator whose labels are verifiable from
pixels alone (hair and background by region luminance, mouth by the sign
of the fitted arc curvature).  The toy photos are flat-shaded renders; the
paired portraits share the exact geometry but use a shifted painterly
palette with a brush-stroke texture.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .schema import AttributeSchema, AttributeTypeSpec, UnknownAttributeError, save_schema

LUMA = np.array([0.299, 0.587, 0.114])

# photo palette
PHOTO_COLORS = {
    "skin": (0.87, 0.68, 0.55),
    "Blond": (0.95, 0.83, 0.40),
    "Black": (0.10, 0.09, 0.09),
    "Bright": (0.93, 0.90, 0.82),
    "Dark": (0.16, 0.15, 0.19),
    "eyes": (0.10, 0.08, 0.08),
    "mouth": (0.62, 0.15, 0.18),
}

# painterly palette for the paired portraits; stays inside the label bands
PORTRAIT_COLORS = {
    "skin": (0.90, 0.72, 0.52),
    "Blond": (0.91, 0.78, 0.34),
    "Black": (0.18, 0.13, 0.15),
    "Bright": (0.84, 0.84, 0.70),
    "Dark": (0.23, 0.18, 0.26),
    "eyes": (0.15, 0.10, 0.12),
    "mouth": (0.55, 0.10, 0.14),
}

# label bands readable off the rendered pixels
HAIR_BLOND_MIN = 0.6
HAIR_BLACK_MAX = 0.3
BG_BRIGHT_MIN = 0.6
BG_DARK_MAX = 0.4


class ManifestError(ValueError):
    """Missing files or invalid records in a dataset manifest."""


@dataclass
class PairedSample:
    photo_path: str
    portrait_path: str
    attributes: dict[str, str]
    geometry: dict[str, float] | None = None


@dataclass
class ToyDatasetSpec:
    count: int = 2000
    image_size: int = 64
    seed: int = 0
    bright_given_smile: float = 0.5  # P(Background=Bright | Mouth=Smile)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 0.0 <= self.bright_given_smile <= 1.0:
            raise ValueError(
                f"bright_given_smile must lie in [0, 1], got {self.bright_given_smile}"
            )

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "image_size": self.image_size,
            "seed": self.seed,
            "bright_given_smile": self.bright_given_smile,
        }


def toy_schema() -> AttributeSchema:
    return AttributeSchema([
        AttributeTypeSpec("HairColor", ("Blond", "Black")),
        AttributeTypeSpec("Background", ("Bright", "Dark")),
        AttributeTypeSpec("Mouth", ("Smile", "Frown")),
    ])


def luminance(img: np.ndarray) -> np.ndarray:
    return img @ LUMA


# -- toy geometry ------------------------------------------------------------

def sample_geometry(rng: np.random.Generator) -> dict[str, float]:
    """Per-sample face layout, in fractions of the image side."""
    return {
        "cx": 0.50 + rng.uniform(-0.03, 0.03),
        "cy": 0.55 + rng.uniform(-0.03, 0.03),
        "rx": 0.24 + rng.uniform(-0.02, 0.02),
        "ry": 0.32 + rng.uniform(-0.02, 0.02),
        "mouth_width": 0.45 + rng.uniform(-0.08, 0.08),   # fraction of rx
        "mouth_depth": 0.16 + rng.uniform(-0.04, 0.04),   # fraction of ry
        "texture_angle": rng.uniform(0.0, np.pi),
    }


def _grids(size: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx + 0.5) / size, (yy + 0.5) / size


def face_mask(geom: Mapping[str, float], size: int) -> np.ndarray:
    x, y = _grids(size)
    return ((x - geom["cx"]) / geom["rx"]) ** 2 \
        + ((y - geom["cy"]) / geom["ry"]) ** 2 <= 1.0


def hair_mask(geom: Mapping[str, float], size: int) -> np.ndarray:
    x, y = _grids(size)
    outer = ((x - geom["cx"]) / (geom["rx"] * 1.35)) ** 2 \
        + ((y - (geom["cy"] - 0.10 * geom["ry"])) / (geom["ry"] * 1.20)) ** 2 <= 1.0
    return outer & (y < geom["cy"] - 0.35 * geom["ry"])


def background_mask(geom: Mapping[str, float], size: int) -> np.ndarray:
    return ~(face_mask(geom, size) | hair_mask(geom, size))


def _mouth_params(geom: Mapping[str, float]) -> tuple[float, float, float, float]:
    mx = geom["cx"]
    my = geom["cy"] + 0.45 * geom["ry"]
    half_width = geom["mouth_width"] * geom["rx"]
    depth = geom["mouth_depth"] * geom["ry"]
    return mx, my, half_width, depth


def _arc_mask(
    geom: Mapping[str, float], size: int, smile: bool, thickness: float
) -> np.ndarray:
    mx, my, half_width, depth = _mouth_params(geom)
    curv = -depth if smile else depth  # smile: corners above the center row
    x, y = _grids(size)
    t = (x - mx) / half_width
    arc_row = my + curv * t ** 2
    return (np.abs(t) <= 1.0) & (np.abs(y - arc_row) < thickness)


def _eye_masks(geom: Mapping[str, float], size: int) -> np.ndarray:
    x, y = _grids(size)
    r = 0.09 * min(geom["rx"], geom["ry"])
    ey = geom["cy"] - 0.18 * geom["ry"]
    left = (x - (geom["cx"] - 0.38 * geom["rx"])) ** 2 + (y - ey) ** 2 <= r ** 2
    right = (x - (geom["cx"] + 0.38 * geom["rx"])) ** 2 + (y - ey) ** 2 <= r ** 2
    return left | right


def render_pair(
    attrs: Mapping[str, str],
    geom: Mapping[str, float],
    size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Render (photo, portrait), float arrays of shape (size, size, 3) in [0, 1]."""
    smile = attrs["Mouth"] == "Smile"
    hair = hair_mask(geom, size)
    face = face_mask(geom, size) & ~hair
    eyes = _eye_masks(geom, size) & face

    def paint(colors: Mapping[str, tuple], arc_thickness: float) -> np.ndarray:
        img = np.empty((size, size, 3))
        img[:] = colors[attrs["Background"]]
        img[face] = colors["skin"]
        img[hair] = colors[attrs["HairColor"]]
        img[eyes] = colors["eyes"]
        arc = _arc_mask(geom, size, smile, arc_thickness) & face
        img[arc] = colors["mouth"]
        return img

    photo = paint(PHOTO_COLORS, 1.2 / size)
    photo = photo + rng.normal(0.0, 0.02, photo.shape)

    portrait = paint(PORTRAIT_COLORS, 1.8 / size)
    x, y = _grids(size)
    theta = geom["texture_angle"]
    stroke = 0.035 * np.sin(
        2.0 * np.pi * (x * np.cos(theta) + y * np.sin(theta)) * size / 6.0
    )
    portrait = portrait + stroke[..., None] + rng.normal(0.0, 0.015, portrait.shape)

    return np.clip(photo, 0.0, 1.0), np.clip(portrait, 0.0, 1.0)


# -- pixel oracles -----------------------------------------------------------

def hair_region_luminance(img: np.ndarray, geom: Mapping[str, float]) -> float:
    mask = hair_mask(geom, img.shape[0])
    return float(luminance(img)[mask].mean())


def background_region_luminance(img: np.ndarray, geom: Mapping[str, float]) -> float:
    mask = background_mask(geom, img.shape[0])
    return float(luminance(img)[mask].mean())


def read_hair_label(img: np.ndarray, geom: Mapping[str, float]) -> str:
    """Midpoint rule between the Blond (>0.6) and Black (<0.3) bands."""
    return "Blond" if hair_region_luminance(img, geom) > 0.45 else "Black"


def read_background_label(img: np.ndarray, geom: Mapping[str, float]) -> str:
    return "Bright" if background_region_luminance(img, geom) > 0.5 else "Dark"


def mouth_arc_curvature(img: np.ndarray, geom: Mapping[str, float]) -> float:
    """Least-squares quadratic coefficient fitted to the reddish arc pixels."""
    size = img.shape[0]
    mx, my, half_width, _ = _mouth_params(geom)
    x, y = _grids(size)
    box = (np.abs(x - mx) <= half_width * 1.2) & (np.abs(y - my) <= 0.30 * geom["ry"])
    # lips sit near redness 0.44, skin near 0.26: threshold between them
    redness = img[..., 0] - 0.5 * (img[..., 1] + img[..., 2])
    arc = box & (redness > 0.35)
    if arc.sum() < 6:
        raise ValueError("no detectable mouth arc pixels")
    t = ((x - mx) / half_width)[arc]
    rows = y[arc]
    coeffs = np.polyfit(t, rows, deg=2)
    return float(coeffs[0])


def read_mouth_label(img: np.ndarray, geom: Mapping[str, float]) -> str:
    return "Smile" if mouth_arc_curvature(img, geom) < 0.0 else "Frown"


def estimate_face_centroid(img: np.ndarray, skin_color: Sequence[float]) -> np.ndarray:
    """Centroid (row, col) in pixels of the pixels nearest the skin color."""
    dist = np.linalg.norm(img - np.asarray(skin_color), axis=-1)
    mask = dist < 0.12
    if not mask.any():
        raise ValueError("no skin-colored pixels found")
    rows, cols = np.nonzero(mask)
    return np.array([rows.mean(), cols.mean()])


# -- synthesis and manifests ---------------------------------------------------

def sample_attributes(
    rng: np.random.Generator, bright_given_smile: float
) -> dict[str, str]:
    smile = rng.random() < 0.5
    blond = rng.random() < 0.5
    p_bright = bright_given_smile if smile else 1.0 - bright_given_smile
    bright = rng.random() < p_bright
    return {
        "HairColor": "Blond" if blond else "Black",
        "Background": "Bright" if bright else "Dark",
        "Mouth": "Smile" if smile else "Frown",
    }


def save_png(img: np.ndarray, path: str) -> None:
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_png(path: str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def synthesize_dataset(spec: ToyDatasetSpec, out_dir: str) -> str:
    """Write photos/, portraits/, schema.yaml and manifest.jsonl; returns
    the manifest path.  Byte-identical for identical (spec, seed)."""
    photos_dir = os.path.join(out_dir, "photos")
    portraits_dir = os.path.join(out_dir, "portraits")
    os.makedirs(photos_dir, exist_ok=True)
    os.makedirs(portraits_dir, exist_ok=True)

    schema = toy_schema()
    save_schema(schema, os.path.join(out_dir, "schema.yaml"))
    with open(os.path.join(out_dir, "toy_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)

    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as manifest:
        for i in range(spec.count):
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, i]))
            attrs = sample_attributes(rng, spec.bright_given_smile)
            geom = sample_geometry(rng)
            photo, portrait = render_pair(attrs, geom, spec.image_size, rng)
            photo_rel = os.path.join("photos", f"sample_{i:05d}.png")
            portrait_rel = os.path.join("portraits", f"sample_{i:05d}.png")
            save_png(photo, os.path.join(out_dir, photo_rel))
            save_png(portrait, os.path.join(out_dir, portrait_rel))
            record = {
                "photo": photo_rel,
                "portrait": portrait_rel,
                "attributes": attrs,
                "geometry": {k: round(float(v), 8) for k, v in geom.items()},
            }
            manifest.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path


def load_manifest(
    path: str, schema: AttributeSchema | None = None
) -> list[PairedSample]:
    """Read and validate a line-delimited manifest; order preserved.

    The schema defaults to ``schema.yaml`` next to the manifest.
    """
    base = os.path.dirname(os.path.abspath(path))
    if schema is None:
        schema_path = os.path.join(base, "schema.yaml")
        if not os.path.exists(schema_path):
            raise ManifestError(f"no schema given and {schema_path} does not exist")
        from .schema import load_schema
        schema = load_schema(schema_path)

    samples: list[PairedSample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"record {i}: invalid JSON: {exc}") from exc
            try:
                photo = os.path.join(base, record["photo"])
                portrait = os.path.join(base, record["portrait"])
                attrs = dict(record["attributes"])
            except (KeyError, TypeError) as exc:
                raise ManifestError(f"record {i}: missing field {exc}") from exc
            try:
                schema.validate_assignments(attrs)
            except UnknownAttributeError as exc:
                raise ManifestError(f"record {i}: {exc}") from exc
            for p in (photo, portrait):
                if not os.path.exists(p):
                    raise ManifestError(f"record {i}: image file not found: {p}")
            samples.append(PairedSample(
                photo_path=photo,
                portrait_path=portrait,
                attributes=attrs,
                geometry=record.get("geometry"),
            ))
    return samples


def write_manifest(path: str, samples: Sequence[PairedSample]) -> None:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            record = {
                "photo": os.path.relpath(sample.photo_path, base),
                "portrait": os.path.relpath(sample.portrait_path, base),
                "attributes": sample.attributes,
            }
            if sample.geometry is not None:
                record["geometry"] = sample.geometry
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def preprocess(source: str | np.ndarray, size: int) -> np.ndarray:
    """Decode, bilinear-resize to size x size, and scale to [0, 1]."""
    if isinstance(source, np.ndarray):
        img = Image.fromarray(
            np.clip(np.rint(source * 255.0), 0, 255).astype(np.uint8), mode="RGB"
        )
    else:
        try:
            img = Image.open(source).convert("RGB")
        except Exception as exc:
            raise ValueError(f"cannot decode image {source!r}: {exc}") from exc
    if img.size != (size, size):
        img = img.resize((size, size), Image.BILINEAR)
    return np.asarray(img, dtype=np.float32) / 255.0


def train_test_split(
    samples: Sequence[PairedSample], test_fraction: float = 0.06, seed: int = 0
) -> tuple[list[PairedSample], list[PairedSample]]:
    """Seeded shuffle split; the default fraction mirrors a ~94/6 ratio."""
    order = np.random.default_rng(seed).permutation(len(samples))
    n_test = max(1, int(round(len(samples) * test_fraction)))
    test_idx = set(order[:n_test].tolist())
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test
