"""Synthetic labeled corpora: composite impurities onto clean base tiles.

Stands in for real scraped data at desk scale, so every downstream stage
can be exercised against known ground truth. Renderers are deliberately
salient rather than photo-realistic.
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

from .labels import ImpurityCategory, ImpurityLabelSet, N_CATEGORIES
from .manifest import ManifestEntry, emit_labels, emit_manifest

# Table-style default prevalences, one per category in channel order.
DEFAULT_RATES = (0.1976, 0.3596, 0.2636, 0.1114, 0.0634, 0.1413, 0.3189, 0.0788)

MIN_DIM = 64


class SyntheticError(Exception):
    pass


class UnsupportedCategory(SyntheticError):
    pass


class MixedDimensions(SyntheticError):
    pass


class EmptyBaseSet(SyntheticError):
    pass


def _image_rng(seed: int, index: int) -> np.random.Generator:
    # per-image stream: parallel and serial generation give identical bytes
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def generate_base_tiles(out_dir: str | Path, n: int, size: int = 192, seed: int = 0) -> list[Path]:
    """Write n procedurally textured tiles that mimic stained tissue.

    Pink/purple blotches over a light background; no external data needed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n):
        rng = _image_rng(seed, i)
        # low-frequency noise, upsampled, mapped onto an eosin/hematoxylin palette
        coarse = rng.random((size // 16, size // 16))
        field = np.asarray(
            Image.fromarray((coarse * 255).astype(np.uint8)).resize((size, size), Image.BICUBIC),
            dtype=float,
        ) / 255.0
        noise = rng.random((size, size)) * 0.15
        t = np.clip(field + noise, 0.0, 1.0)
        r = 235 - t * 90 + rng.integers(-10, 10)
        g = 205 - t * 120 + rng.integers(-10, 10)
        b = 225 - t * 60 + rng.integers(-10, 10)
        arr = np.clip(np.stack([r, g, b], axis=-1), 0, 255).astype(np.uint8)
        # scatter dark nuclei
        draw_img = Image.fromarray(arr)
        draw = ImageDraw.Draw(draw_img)
        for _ in range(int(rng.integers(40, 120))):
            cx, cy = rng.integers(0, size, size=2)
            rad = int(rng.integers(1, 4))
            draw.ellipse([cx - rad, cy - rad, cx + rad, cy + rad], fill=(90, 50, 120))
        path = out_dir / f"tile_{i:05d}.png"
        draw_img.save(path)
        paths.append(path)
    return paths


def _font(size: int):
    try:
        return ImageFont.load_default(size=size)
    except TypeError:  # older Pillow
        return ImageFont.load_default()


def _render_narrator(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    """Photo-like inset in a corner: skin-tone gradient with a head silhouette."""
    w, h = img.size
    iw = int(min(w, h) * rng.uniform(0.28, 0.42))
    ih = int(iw * rng.uniform(0.9, 1.2))
    x0, y0 = _corner_origin(w, h, iw, ih, rng)
    grad = np.linspace(0.75, 1.0, ih)[:, None] * np.ones((ih, iw))
    skin = np.stack([grad * 225, grad * 180, grad * 150], axis=-1).astype(np.uint8)
    inset = Image.fromarray(skin)
    d = ImageDraw.Draw(inset)
    # head + shoulders silhouette
    cx = iw // 2
    d.ellipse([cx - iw // 5, ih // 8, cx + iw // 5, ih // 2], fill=(120, 85, 70))
    d.rectangle([cx - iw // 3, int(ih * 0.55), cx + iw // 3, ih], fill=(60, 60, 90))
    img = img.copy()
    img.paste(inset, (x0, y0))
    mask = np.zeros((h, w), dtype=bool)
    mask[y0 : y0 + ih, x0 : x0 + iw] = True
    return img, mask


def _render_desktop_chrome(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    """Window title bar across the top plus a frame border."""
    w, h = img.size
    bar_h = max(10, int(h * rng.uniform(0.06, 0.10)))
    border = max(2, int(min(w, h) * 0.015))
    img = img.copy()
    d = ImageDraw.Draw(img)
    tone = int(rng.integers(190, 235))
    d.rectangle([0, 0, w - 1, bar_h - 1], fill=(tone, tone, tone))
    # traffic-light buttons
    r = bar_h // 4
    for i, color in enumerate([(237, 106, 94), (245, 191, 79), (98, 197, 84)]):
        cx = bar_h // 2 + i * (2 * r + 4)
        d.ellipse([cx - r, bar_h // 2 - r, cx + r, bar_h // 2 + r], fill=color)
    d.rectangle([0, 0, w - 1, h - 1], outline=(tone - 60, tone - 60, tone - 60), width=border)
    mask = np.zeros((h, w), dtype=bool)
    mask[:bar_h, :] = True
    mask[:border, :] = mask[-border:, :] = True
    mask[:, :border] = mask[:, -border:] = True
    return img, mask


def _render_text_logo(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    w, h = img.size
    n_chars = int(rng.integers(6, 13))
    text = "".join(chr(ord("A") + int(c)) for c in rng.integers(0, 26, size=n_chars))
    size = max(12, int(h * rng.uniform(0.10, 0.16)))
    font = _font(size)
    tmp = Image.new("L", (w, h), 0)
    d = ImageDraw.Draw(tmp)
    x0 = int(rng.integers(0, max(1, w // 3)))
    y0 = int(rng.integers(0, max(1, h - size - 2)))
    d.text((x0, y0), text, fill=255, font=font)
    color = tuple(int(c) for c in rng.integers(0, 256, size=3))
    overlay = Image.new("RGB", (w, h), color)
    img = img.copy()
    img.paste(overlay, (0, 0), tmp)
    mask = np.asarray(tmp) > 0
    return img, mask


def _render_arrow(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    w, h = img.size
    x1, y1 = int(rng.integers(0, w)), int(rng.integers(0, h))
    x2, y2 = int(rng.integers(0, w)), int(rng.integers(0, h))
    while abs(x2 - x1) + abs(y2 - y1) < min(w, h) // 3:
        x2, y2 = int(rng.integers(0, w)), int(rng.integers(0, h))
    width = max(3, min(w, h) // 40)
    color = [(255, 0, 0), (0, 0, 0), (255, 255, 0)][int(rng.integers(0, 3))]
    layer = Image.new("L", (w, h), 0)
    d = ImageDraw.Draw(layer)
    d.line([x1, y1, x2, y2], fill=255, width=width)
    # arrowhead at (x2, y2)
    v = np.array([x2 - x1, y2 - y1], dtype=float)
    v /= np.linalg.norm(v)
    p = np.array([-v[1], v[0]])
    tip = np.array([x2, y2], dtype=float)
    head = max(8, min(w, h) // 12)
    a = tip - v * head + p * head * 0.5
    b = tip - v * head - p * head * 0.5
    d.polygon([tuple(tip), tuple(a), tuple(b)], fill=255)
    overlay = Image.new("RGB", (w, h), color)
    img = img.copy()
    img.paste(overlay, (0, 0), layer)
    mask = np.asarray(layer) > 0
    return img, mask


def _render_low_quality(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    """Blur plus harsh JPEG requantization; dimensions unchanged."""
    w, h = img.size
    small = img.resize((max(1, w // 4), max(1, h // 4)), Image.BILINEAR)
    degraded = small.resize((w, h), Image.BILINEAR).filter(ImageFilter.GaussianBlur(radius=1.5))
    buf = io.BytesIO()
    degraded.save(buf, format="JPEG", quality=int(rng.integers(5, 15)))
    buf.seek(0)
    out = Image.open(buf).convert("RGB")
    return out, np.ones((h, w), dtype=bool)


def _render_slide_overview(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    """Small slide thumbnail inset with a red viewport rectangle."""
    w, h = img.size
    tw = int(min(w, h) * rng.uniform(0.22, 0.32))
    th = int(tw * 0.75)
    thumb = img.resize((tw - 4, th - 4), Image.BILINEAR)
    inset = Image.new("RGB", (tw, th), (255, 255, 255))
    inset.paste(thumb, (2, 2))
    d = ImageDraw.Draw(inset)
    vx = int(rng.integers(2, max(3, tw // 2)))
    vy = int(rng.integers(2, max(3, th // 2)))
    d.rectangle([vx, vy, vx + tw // 3, vy + th // 3], outline=(255, 0, 0), width=2)
    d.rectangle([0, 0, tw - 1, th - 1], outline=(40, 40, 40), width=1)
    x0, y0 = _corner_origin(w, h, tw, th, rng)
    img = img.copy()
    img.paste(inset, (x0, y0))
    mask = np.zeros((h, w), dtype=bool)
    mask[y0 : y0 + th, x0 : x0 + tw] = True
    return img, mask


def _render_control_elements(img: Image.Image, rng) -> tuple[Image.Image, np.ndarray]:
    """Button-row strip along one edge."""
    w, h = img.size
    strip_h = max(12, int(h * rng.uniform(0.08, 0.12)))
    at_top = bool(rng.integers(0, 2))
    y0 = 0 if at_top else h - strip_h
    img = img.copy()
    d = ImageDraw.Draw(img)
    d.rectangle([0, y0, w - 1, y0 + strip_h - 1], fill=(70, 70, 75))
    n_buttons = int(rng.integers(4, 8))
    bw = w // (n_buttons + 1)
    for i in range(n_buttons):
        bx = 4 + i * (bw + 4)
        d.rounded_rectangle(
            [bx, y0 + 3, bx + bw, y0 + strip_h - 4],
            radius=3,
            fill=(160, 160, 170),
            outline=(210, 210, 220),
        )
    mask = np.zeros((h, w), dtype=bool)
    mask[y0 : y0 + strip_h, :] = True
    return img, mask


def _corner_origin(w, h, iw, ih, rng) -> tuple[int, int]:
    corner = int(rng.integers(0, 4))
    pad = 2
    x0 = pad if corner in (0, 2) else w - iw - pad
    y0 = pad if corner in (0, 1) else h - ih - pad
    return x0, y0


_RENDERERS = {
    ImpurityCategory.NARRATOR: _render_narrator,
    ImpurityCategory.DESKTOP_CHROME: _render_desktop_chrome,
    ImpurityCategory.TEXT_LOGO: _render_text_logo,
    ImpurityCategory.ARROW_ANNOTATION: _render_arrow,
    ImpurityCategory.LOW_QUALITY: _render_low_quality,
    ImpurityCategory.SLIDE_OVERVIEW: _render_slide_overview,
    ImpurityCategory.CONTROL_ELEMENTS: _render_control_elements,
}

# categories whose effect is confined to a sub-region of the image
OVERLAY_CATEGORIES = tuple(c for c in _RENDERERS if c != ImpurityCategory.LOW_QUALITY)


def apply_impurity(
    image: Image.Image, category: ImpurityCategory, rng: np.random.Generator
) -> tuple[Image.Image, ImpurityLabelSet]:
    """Render one impurity onto a copy of the image.

    Returns the modified image and a label delta with exactly that
    category set. MULTI_PANEL goes through compose_multipanel instead.
    """
    if category == ImpurityCategory.MULTI_PANEL:
        raise UnsupportedCategory("MULTI_PANEL is composed, not overlaid; use compose_multipanel")
    if min(image.size) < MIN_DIM:
        raise SyntheticError(f"image {image.size} smaller than {MIN_DIM}x{MIN_DIM}")
    out, _ = _RENDERERS[category](image.convert("RGB"), rng)
    return out, ImpurityLabelSet.single(category)


def apply_impurity_with_mask(
    image: Image.Image, category: ImpurityCategory, rng: np.random.Generator
) -> tuple[Image.Image, np.ndarray]:
    """Like apply_impurity but also returns the affected-pixel mask."""
    if category == ImpurityCategory.MULTI_PANEL:
        raise UnsupportedCategory("MULTI_PANEL is composed, not overlaid")
    return _RENDERERS[category](image.convert("RGB"), rng)


def compose_multipanel(
    tiles: list[Image.Image],
    rng: np.random.Generator,
    tile_labels: list[ImpurityLabelSet] | None = None,
    gutter: int = 4,
) -> tuple[Image.Image, ImpurityLabelSet]:
    """Grid-composite 2-4 same-size tiles; label is the OR of tile labels
    with MULTI_PANEL forced true."""
    if not 2 <= len(tiles) <= 4:
        raise SyntheticError(f"need 2-4 tiles, got {len(tiles)}")
    sizes = {t.size for t in tiles}
    if len(sizes) != 1:
        raise MixedDimensions(f"tiles differ in size: {sorted(sizes)}")
    w, h = tiles[0].size
    if len(tiles) == 4:
        cols, rows = 2, 2
    else:
        cols, rows = len(tiles), 1
    out = Image.new("RGB", (cols * w + (cols - 1) * gutter, rows * h + (rows - 1) * gutter), (255, 255, 255))
    for i, tile in enumerate(tiles):
        cx, cy = i % cols, i // cols
        out.paste(tile.convert("RGB"), (cx * (w + gutter), cy * (h + gutter)))
    label = ImpurityLabelSet.single(ImpurityCategory.MULTI_PANEL)
    if tile_labels is not None:
        for tl in tile_labels:
            label = label.union(tl)
    return out, label


def generate_corpus(
    base_images: str | Path,
    out_dir: str | Path,
    n: int,
    rates: tuple[float, ...] = DEFAULT_RATES,
    seed: int = 0,
) -> tuple[list[ManifestEntry], dict[str, ImpurityLabelSet]]:
    """Generate n labeled images; each category lands independently with its rate.

    Writes images, manifest.jsonl, and labels.jsonl under out_dir. Pure
    function of (base set, rates, n, seed).
    """
    if len(rates) != N_CATEGORIES:
        raise ValueError(f"need {N_CATEGORIES} rates, got {len(rates)}")
    base_paths = sorted(p for p in Path(base_images).iterdir() if p.is_file())
    if not base_paths:
        raise EmptyBaseSet(f"no base images under {base_images}")
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    labels: dict[str, ImpurityLabelSet] = {}
    for i in range(n):
        rng = _image_rng(seed, i)
        base = Image.open(base_paths[int(rng.integers(0, len(base_paths)))]).convert("RGB")
        flags = [bool(rng.random() < rates[int(c)]) for c in ImpurityCategory]
        img = base
        for cat in ImpurityCategory:
            if cat == ImpurityCategory.MULTI_PANEL or not flags[int(cat)]:
                continue
            img, _ = apply_impurity(img, cat, rng)
        if flags[int(ImpurityCategory.MULTI_PANEL)]:
            k = int(rng.integers(2, 5))
            extra_ids = rng.integers(0, len(base_paths), size=k - 1)
            others = [
                Image.open(base_paths[int(j)]).convert("RGB").resize(img.size, Image.BILINEAR)
                for j in extra_ids
            ]
            tiles = [img] + others
            order = rng.permutation(k)
            img, _ = compose_multipanel([tiles[int(j)] for j in order], rng)
        image_id = f"syn-{i:06d}"
        rel = f"images/{image_id}.png"
        img.save(out_dir / rel)
        entries.append(
            ManifestEntry(
                image_id=image_id,
                image_path=str(out_dir / rel),
                captions=[f"a histopathology image, synthetic tile {i}"],
                source="synthetic",
                width_px=img.size[0],
                height_px=img.size[1],
            )
        )
        labels[image_id] = ImpurityLabelSet(tuple(flags))

    emit_manifest(entries, out_dir / "manifest.jsonl")
    emit_labels(labels, out_dir / "labels.jsonl")
    with open(out_dir / "generation.json", "w", encoding="utf-8") as f:
        json.dump({"n": n, "seed": seed, "rates": list(rates), "base_count": len(base_paths)}, f, indent=2)
    return entries, labels
