#!/usr/bin/env python3
"""Writes input and expected PPM pairs for the set-of-mark ring tests.

Ring membership: (r - stroke)^2 <= dx^2 + dy^2 <= r^2, clipped to the image."""
import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def write_ppm(path, img):
    h, w, _ = img.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + img.astype(np.uint8).tobytes())


def ring(img, cx, cy, radius, stroke, color):
    h, w, _ = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    mask = (d2 >= (radius - stroke) ** 2) & (d2 <= radius ** 2)
    out = img.copy()
    out[mask] = color
    return out


def gradient(w, h):
    ys, xs = np.mgrid[0:h, 0:w]
    img = np.zeros((h, w, 3), dtype=np.int64)
    img[..., 0] = (xs * 255) // max(w - 1, 1)
    img[..., 1] = (ys * 255) // max(h - 1, 1)
    img[..., 2] = ((xs + ys) * 7) % 256
    return img


cases = [
    {"name": "center_white", "size": [200, 200], "fill": "white",
     "action": "click(100,100)", "point": [100, 100], "radius": 24, "stroke": 6, "color": [255, 0, 0]},
    {"name": "corner_clip", "size": [200, 200], "fill": "white",
     "action": "click(0,0)", "point": [0, 0], "radius": 24, "stroke": 6, "color": [255, 0, 0]},
    {"name": "edge_gradient_custom", "size": [160, 90], "fill": "gradient",
     "action": "long_press(155,45)", "point": [155, 45], "radius": 12, "stroke": 3, "color": [0, 200, 40]},
]

for c in cases:
    w, h = c["size"]
    base = np.full((h, w, 3), 255, dtype=np.int64) if c["fill"] == "white" else gradient(w, h)
    marked = ring(base, c["point"][0], c["point"][1], c["radius"], c["stroke"], c["color"])
    write_ppm(HERE / f"{c['name']}.input.ppm", base)
    write_ppm(HERE / f"{c['name']}.expected.ppm", marked)

(HERE / "som_cases.json").write_text(json.dumps(cases, indent=2) + "\n")
print(f"wrote {len(cases)} cases")
