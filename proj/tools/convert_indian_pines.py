#!/usr/bin/env python3
"""Export the Indian Pines .mat files to the CSV layout `hsdr convert` reads.

    python3 tools/convert_indian_pines.py Indian_pines_corrected.mat Indian_pines_gt.mat csv/
    hsdr convert --input csv/spectra.csv --labels csv/labels.csv --names csv/names.txt \
                 --output data/indian_pines
"""
import argparse
import pathlib

import numpy as np
import scipy.io

CLASS_NAMES = [
    "Alfalfa", "Corn-notill", "Corn-mintill", "Corn", "Grass-pasture", "Grass-trees",
    "Grass-pasture-mowed", "Hay-windrowed", "Oats", "Soybean-notill", "Soybean-mintill",
    "Soybean-clean", "Wheat", "Woods", "Buildings-Grass-Trees-Drives", "Stone-Steel-Towers",
]


def only_array(path):
    arrays = [v for k, v in scipy.io.loadmat(path).items() if not k.startswith("__")]
    if len(arrays) != 1:
        raise SystemExit(f"{path}: expected one array, found {len(arrays)}")
    return arrays[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("cube_mat")
    ap.add_argument("labels_mat")
    ap.add_argument("output_dir", type=pathlib.Path)
    args = ap.parse_args()

    cube = only_array(args.cube_mat)  # rows x cols x bands
    labels = only_array(args.labels_mat)  # rows x cols
    if cube.shape[:2] != labels.shape:
        raise SystemExit(f"cube {cube.shape} and labels {labels.shape} disagree")

    args.output_dir.mkdir(parents=True, exist_ok=True)
    rows, cols, bands = cube.shape
    np.savetxt(args.output_dir / "spectra.csv", cube.reshape(rows * cols, bands), fmt="%.9g", delimiter=",")
    np.savetxt(args.output_dir / "labels.csv", labels.astype(np.int64), fmt="%d", delimiter=",")
    if labels.max() == len(CLASS_NAMES):
        (args.output_dir / "names.txt").write_text("\n".join(CLASS_NAMES) + "\n")
    print(f"{rows}x{cols} pixels, {bands} bands, {int(labels.max())} classes -> {args.output_dir}")


if __name__ == "__main__":
    main()
