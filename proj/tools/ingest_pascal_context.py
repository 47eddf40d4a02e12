#!/usr/bin/env python3
"""Convert PASCAL-Context annotations into the training layout.

Input:
  --voc-root      VOCdevkit/VOC2010 (needs JPEGImages/)
  --context-root  directory with the per-image LabelMap .mat files and
                  labels.txt ("<id>: <name>" for the full label set)
Output (--out):
  images/NAME.jpg   copied from JPEGImages
  labels/NAME.png   8-bit PNG, value = index into data/classes.json;
                    labels outside the class table map to 0 (background)

--self-test builds a tiny fake tree in a temp dir and checks the conversion.
"""

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import loadmat, savemat

DEFAULT_CLASSES = Path(__file__).resolve().parent.parent / "data" / "classes.json"


def read_full_labels(path):
    names = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, name = line.partition(":")
        names[int(key)] = name.strip()
    return names


def build_lut(full_names, class_table):
    index_of = {c["name"]: c["index"] for c in class_table}
    lut = np.zeros(max(full_names) + 1, dtype=np.uint8)
    for full_id, name in full_names.items():
        lut[full_id] = index_of.get(name, 0)
    return lut


def convert(voc_root, context_root, out, classes_path=DEFAULT_CLASSES, names=None, limit=None):
    class_table = json.loads(Path(classes_path).read_text())
    lut = build_lut(read_full_labels(Path(context_root) / "labels.txt"), class_table)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)

    mats = sorted(Path(context_root).glob("*.mat"))
    if names is not None:
        wanted = set(names)
        mats = [m for m in mats if m.stem in wanted]
    if limit is not None:
        mats = mats[:limit]

    done = 0
    for mat in mats:
        jpg = Path(voc_root) / "JPEGImages" / (mat.stem + ".jpg")
        if not jpg.exists():
            print(f"skip {mat.stem}: no {jpg}", file=sys.stderr)
            continue
        full = loadmat(mat)["LabelMap"]
        if full.max() >= len(lut):
            raise ValueError(f"{mat}: label {full.max()} not in labels.txt")
        with Image.open(jpg) as im:
            if im.size != (full.shape[1], full.shape[0]):
                raise ValueError(f"{mat.stem}: image {im.size} vs labels {full.shape[::-1]}")
        shutil.copyfile(jpg, out / "images" / jpg.name)
        Image.fromarray(lut[full], mode="L").save(out / "labels" / (mat.stem + ".png"))
        done += 1
    return done


def self_test():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        voc, ctx, out = tmp / "voc", tmp / "ctx", tmp / "out"
        (voc / "JPEGImages").mkdir(parents=True)
        ctx.mkdir()
        (ctx / "labels.txt").write_text("1: accordion\n2: aeroplane\n3: sky\n4: zebra\n")
        labels = np.array([[1, 2, 3], [4, 3, 2]], dtype=np.uint16)
        savemat(ctx / "2008_000001.mat", {"LabelMap": labels})
        savemat(ctx / "2008_000002.mat", {"LabelMap": labels})  # image missing: skipped
        Image.new("RGB", (3, 2), (10, 20, 30)).save(voc / "JPEGImages" / "2008_000001.jpg")

        assert convert(voc, ctx, out) == 1
        got = np.array(Image.open(out / "labels" / "2008_000001.png"))
        table = {c["name"]: c["index"] for c in json.loads(DEFAULT_CLASSES.read_text())}
        expect = np.array([[0, table["aeroplane"], table["sky"]], [0, table["sky"], table["aeroplane"]]])
        assert (got == expect).all(), got
        assert (out / "images" / "2008_000001.jpg").exists()
    print("ingest self-test ok")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--voc-root", type=Path)
    ap.add_argument("--context-root", type=Path)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--classes", type=Path, default=DEFAULT_CLASSES)
    ap.add_argument("--split", type=Path, help="file with one image name per line")
    ap.add_argument("--limit", type=int)
    ap.add_argument("--self-test", action="store_true")
    args = ap.parse_args(argv)
    if args.self_test:
        self_test()
        return 0
    if not (args.voc_root and args.context_root and args.out):
        ap.error("--voc-root, --context-root and --out are required")
    names = args.split.read_text().split() if args.split else None
    n = convert(args.voc_root, args.context_root, args.out, args.classes, names, args.limit)
    print(f"wrote {n} pairs to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
