"""Assemble the bundled programs into .img manifests.

Run from the repository root after editing any .asm source:

    python tools/build_corpus.py
"""

import pathlib

from cabt.asm import assemble
from cabt.image import store_image

HERE = pathlib.Path(__file__).resolve().parent.parent / "src" / "cabt" / "data" / "programs"


def main():
    for src in sorted(HERE.glob("*.asm")):
        image = assemble(src.read_text())
        out = src.with_suffix(".img")
        out.write_text(store_image(image))
        words = sum(len(s.data) for s in image.exec_sections) // 4
        print(f"{src.name}: {words} instructions -> {out.name}")


if __name__ == "__main__":
    main()
