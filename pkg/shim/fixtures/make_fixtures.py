"""Regenerate the committed relevance-ordering fixtures.

Three 64x64 PNGs with unambiguous dominant colors. The embedder's
ordering test depends only on those dominant colors, so the exact
pixels are not load-bearing, but keeping generation deterministic
means a regenerated file is byte-identical.
"""

from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).parent


def block(base, accent, accent_box):
    image = Image.new("RGB", (64, 64), base)
    draw = ImageDraw.Draw(image)
    draw.rectangle(accent_box, fill=accent)
    return image


def main() -> None:
    # A red coat: red body with a darker red collar band.
    block((200, 30, 30), (140, 15, 15), (8, 0, 56, 14)).save(HERE / "red_coat.png")
    # A green field with a lighter strip of grass.
    block((30, 160, 40), (70, 200, 80), (0, 40, 64, 64)).save(HERE / "green_field.png")
    # A blue door with a darker frame.
    block((30, 60, 200), (15, 30, 120), (0, 0, 64, 10)).save(HERE / "blue_door.png")


if __name__ == "__main__":
    main()
