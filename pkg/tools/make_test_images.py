"""Regenerate the 128x128 natural-image fixtures in tests/data.

Uses photographs bundled with scikit-image: a centred square crop of each is
box-downsampled to 128x128 and written as 8-bit RGB PNG.
"""
import pathlib

import numpy as np
from PIL import Image
from skimage import data

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data"
SIZE = 128


def square_crop(img):
    h, w = img.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    return img[top:top + s, left:left + s]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name in ("astronaut", "coffee", "chelsea"):
        img = square_crop(getattr(data, name)())
        small = Image.fromarray(np.ascontiguousarray(img)).resize((SIZE, SIZE), Image.BOX)
        small.save(OUT / f"{name}.png")
        print("wrote", OUT / f"{name}.png")


if __name__ == "__main__":
    main()
