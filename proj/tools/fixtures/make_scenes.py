#!/usr/bin/env python3
# Copyright (C) 2026 aor contributors
# SPDX-License-Identifier: Apache-2.0
"""Renders the fixture scenes under fixtures/scenes.

Both scenes are ray-cast from axis-aligned boxes and planes, so depth and
ground-truth boxes are exact. World and camera frames share the convention
x right, y down, z forward. Photographic textures come from the public-domain
sample images bundled with scikit-image.
"""

import argparse
import json
import pathlib

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from skimage import data

WIDTH, HEIGHT = 640, 480
FX = FY = 525.0
CX, CY = 319.5, 239.5
FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf"


def look_at(eye, target):
    eye = np.asarray(eye, float)
    f = np.asarray(target, float) - eye
    f /= np.linalg.norm(f)
    r = np.cross([0.0, 1.0, 0.0], f)
    r /= np.linalg.norm(r)
    d = np.cross(f, r)
    return np.column_stack([r, d, f]), eye


def pixel_rays():
    u, v = np.meshgrid(np.arange(WIDTH, dtype=float), np.arange(HEIGHT, dtype=float))
    return np.stack([(u - CX) / FX, (v - CY) / FY, np.ones_like(u)], axis=-1)


class Box:
    def __init__(self, name, label, center, size, color, texture=None, confidence=0.9):
        self.name, self.label = name, label
        self.lo = np.asarray(center, float) - np.asarray(size, float) / 2
        self.hi = np.asarray(center, float) + np.asarray(size, float) / 2
        self.color = np.asarray(color, float)
        self.texture = texture
        self.confidence = confidence

    def intersect(self, origin, dirs):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.lo - origin) * inv
            t2 = (self.hi - origin) * inv
        tmin = np.nanmax(np.minimum(t1, t2), axis=-1)
        tmax = np.nanmin(np.maximum(t1, t2), axis=-1)
        hit = (tmax >= tmin) & (tmin > 0)
        return np.where(hit, tmin, np.inf)

    def shade(self, points, t_hit, mask):
        out = np.zeros(points.shape, float)
        p = points[mask]
        eps = 1e-6
        front = np.abs(p[:, 2] - self.lo[2]) < 1e-4 + eps
        side = ~front & ((np.abs(p[:, 0] - self.lo[0]) < 1e-4) | (np.abs(p[:, 0] - self.hi[0]) < 1e-4))
        col = np.tile(self.color, (len(p), 1))
        if self.texture is not None:
            tex = self.texture
            s = np.clip((p[:, 0] - self.lo[0]) / (self.hi[0] - self.lo[0]), 0, 1)
            r = np.clip((p[:, 1] - self.lo[1]) / (self.hi[1] - self.lo[1]), 0, 1)
            tx = np.minimum((s * tex.shape[1]).astype(int), tex.shape[1] - 1)
            ty = np.minimum((r * tex.shape[0]).astype(int), tex.shape[0] - 1)
            col = np.where(front[:, None], tex[ty, tx], col)
        factor = np.where(front, 1.0, np.where(side, 0.7, 0.85))
        out[mask] = col * factor[:, None]
        return out


class Plane:
    """Axis-aligned plane `axis` = `value`, colored by a function of the hit point."""

    def __init__(self, axis, value, colorize):
        self.axis, self.value, self.colorize = axis, value, colorize

    def intersect(self, origin, dirs):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.value - origin[self.axis]) / dirs[..., self.axis]
        return np.where(np.isfinite(t) & (t > 0), t, np.inf)

    def shade(self, points, t_hit, mask):
        out = np.zeros(points.shape, float)
        out[mask] = self.colorize(points[mask])
        return out


def render(objects, rotation, eye):
    rays_cam = pixel_rays()
    dirs = rays_cam @ rotation.T
    best = np.full((HEIGHT, WIDTH), np.inf)
    owner = np.full((HEIGHT, WIDTH), -1)
    for i, obj in enumerate(objects):
        t = obj.intersect(eye, dirs)
        closer = t < best
        best[closer] = t[closer]
        owner[closer] = i
    points = eye + dirs * best[..., None]
    color = np.zeros((HEIGHT, WIDTH, 3))
    for i, obj in enumerate(objects):
        mask = owner == i
        if mask.any():
            color += obj.shade(points, best, mask)
    depth_mm = np.where(np.isfinite(best), np.round(best * 1000.0), 0).astype(np.uint16)
    return np.clip(color, 0, 255).astype(np.uint8), depth_mm, owner


def label_texture(text, base, ink, size=(160, 320), image=None):
    img = Image.new("RGB", size, tuple(int(c) for c in base))
    if image is not None:
        patch = Image.fromarray(image).resize((size[0] - 20, size[1] // 2))
        img.paste(patch, (10, size[1] // 3))
    draw = ImageDraw.Draw(img)
    font = ImageFont.truetype(FONT, max(14, size[0] // 6))
    box = draw.textbbox((0, 0), text, font=font)
    draw.text(((size[0] - (box[2] - box[0])) / 2, size[1] // 10), text, fill=tuple(ink), font=font)
    return np.asarray(img, float)


def write_scene(root, name, objects, poses, detect_ids, holes_rng=None, hole_fraction=0.0):
    scene = root / name
    (scene / "frames").mkdir(parents=True, exist_ok=True)
    (scene / "depth").mkdir(parents=True, exist_ok=True)
    pose_lines, det_lines = [], []
    for index, (rotation, eye) in enumerate(poses):
        color, depth, owner = render(objects, rotation, eye)
        if holes_rng is not None and hole_fraction > 0:
            holes = holes_rng.random(depth.shape) < hole_fraction
            depth[holes] = 0
        Image.fromarray(color).save(scene / "frames" / f"{index:06d}.png", optimize=True)
        Image.fromarray(depth).save(scene / "depth" / f"{index:06d}.png")
        matrix = np.column_stack([rotation, eye])
        pose_lines.append(json.dumps([round(float(x), 12) for x in matrix.reshape(-1)]))
        for obj_index in detect_ids:
            ys, xs = np.nonzero(owner == obj_index)
            if len(xs) < 50:
                continue
            obj = objects[obj_index]
            x0, y0 = int(xs.min()), int(ys.min())
            bbox = [x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1]
            det_lines.append(json.dumps(
                {"frame": index, "label": obj.label, "bbox": bbox, "confidence": obj.confidence}))
    manifest = {
        "name": name,
        "frame_count": len(poses),
        "intrinsics": {"fx": FX, "fy": FY, "cx": CX, "cy": CY, "width": WIDTH, "height": HEIGHT},
        "detections": "detections.jsonl",
    }
    (scene / "scene.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (scene / "poses.jsonl").write_text("\n".join(pose_lines) + "\n")
    (scene / "detections.jsonl").write_text("\n".join(det_lines) + "\n")


def synthetic_boxes(root):
    objects = [
        Box("cup", "cup", (-0.25, 0.0, 1.5), (0.12, 0.12, 0.12), (200, 60, 50)),
        Box("bottle", "bottle", (0.25, 0.02, 1.8), (0.08, 0.25, 0.08), (40, 120, 210)),
        Plane(2, 3.0, lambda p: np.tile([180.0, 180.0, 170.0], (len(p), 1))),
    ]
    poses = [look_at((x, 0.0, 0.0), (0.0, 0.0, 1.6)) for x in (0.0, 0.05, 0.10)]
    write_scene(root, "synthetic_boxes", objects, poses, detect_ids=[0, 1])


def kitchen_counter(root):
    rng = np.random.default_rng(7)
    counter_y = 0.45

    def on_counter(x, z, w, h, d):
        return (x, counter_y - h / 2, z), (w, h, d)

    def wood(p):
        grain = 20 * np.sin(p[:, 0] * 60.0 + 3 * np.sin(p[:, 2] * 9.0))
        return np.stack([150 + grain, 110 + grain * 0.8, 70 + grain * 0.5], axis=-1)

    def tiles(p):
        grout = ((np.mod(p[:, 0], 0.15) < 0.008) | (np.mod(p[:, 1], 0.15) < 0.008))
        base = np.where(grout, 120.0, 225.0)
        return np.stack([base, base, base - 8], axis=-1)

    coffee = data.coffee()
    chelsea = data.chelsea()
    astronaut = data.astronaut()
    rocket = data.rocket()

    objects = [
        Box("milk", "bottle", *on_counter(-0.40, 1.25, 0.09, 0.24, 0.09), (245, 245, 245),
            label_texture("MILK", (245, 245, 250), (30, 80, 200)), 0.93),
        Box("oat", "bottle", *on_counter(-0.06, 1.30, 0.08, 0.22, 0.08), (225, 205, 160),
            label_texture("OAT", (230, 210, 160), (90, 60, 20)), 0.88),
        Box("smoothie", "bottle", *on_counter(0.28, 1.25, 0.08, 0.20, 0.08), (240, 170, 190),
            label_texture("YOGURT", (245, 180, 200), (120, 20, 60)), 0.86),
        Box("juice", "bottle", *on_counter(0.62, 1.35, 0.09, 0.23, 0.09), (250, 160, 40),
            label_texture("JUICE", (250, 170, 40), (40, 100, 20), image=coffee[::4, ::4]), 0.84),
        Box("soy", "bottle", *on_counter(0.12, 1.80, 0.07, 0.20, 0.07), (60, 30, 20),
            label_texture("SOY", (70, 30, 20), (240, 220, 200)), 0.71),
        Box("pasta", "book", *on_counter(-0.70, 1.75, 0.16, 0.26, 0.06), (40, 90, 170),
            label_texture("FUSILLI", (40, 90, 170), (250, 220, 60), image=rocket[::4, ::4]), 0.77),
        Box("pot", "bowl", *on_counter(-0.18, 1.90, 0.26, 0.16, 0.26), (90, 90, 95), None, 0.82),
        Box("mug", "cup", *on_counter(0.32, 0.95, 0.09, 0.10, 0.09), (230, 230, 220),
            label_texture("", (230, 230, 220), (0, 0, 0), size=(120, 120), image=chelsea[::4, ::4]), 0.9),
        Box("person", "person", (0.55, counter_y - 0.55, 2.6), (0.5, 1.1, 0.02), (200, 200, 200),
            np.asarray(Image.fromarray(astronaut).resize((250, 550)), float), 0.95),
        Box("remote", "remote", *on_counter(0.02, 0.85, 0.15, 0.02, 0.05), (25, 25, 25), None, 0.35),
        Plane(1, counter_y, wood),
        Plane(2, 2.9, tiles),
    ]
    poses = [look_at((x, 0.0, 0.0), (0.05, 0.35, 1.4)) for x in (-0.06, -0.02, 0.02, 0.06)]
    write_scene(root, "kitchen_counter", objects, poses, detect_ids=list(range(10)),
                holes_rng=rng, hole_fraction=0.02)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=pathlib.Path,
                        default=pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "scenes")
    args = parser.parse_args()
    synthetic_boxes(args.out)
    kitchen_counter(args.out)


if __name__ == "__main__":
    main()
