"""Convert NOAA OISST v2 weekly means (netCDF4) into an SSTG1 grid file.

    python scripts/convert_oisst.py sst.wkmean.1981-1989.nc sst.wkmean.1990-present.nc \
        --mask lsmask.nc --out oisst.sstg --weeks 1800

The inputs are the public ``sst.wkmean.*.nc`` files and, optionally, the
``lsmask.nc`` land/sea mask from the same product page. Files are read in
the order given and concatenated in time. Rows are flipped to run south to
north, matching ``fedrom.sst.grid_coordinates``. Any point that is missing
in some week is treated as land for the whole archive, since SSTG1 requires
one mask for all frames. Needs ``h5py`` (the ``oisst`` extra).
"""

import argparse

import h5py
import numpy as np

from fedrom.sst import FILL_VALUE, SSTArchive, save_sst


def read_weeks(path):
    with h5py.File(path, "r") as f:
        var = f["sst"]
        raw = var[...].astype(np.float64)
        scale = float(np.ravel(var.attrs.get("scale_factor", [1.0]))[0])
        offset = float(np.ravel(var.attrs.get("add_offset", [0.0]))[0])
        missing = var.attrs.get("missing_value", var.attrs.get("_FillValue"))
        lat = f["lat"][...]
    bad = np.zeros(raw.shape, dtype=bool) if missing is None else raw == np.ravel(missing)[0]
    values = raw * scale + offset
    values[bad | ~np.isfinite(values)] = np.nan
    if lat[0] > lat[-1]:
        values = values[:, ::-1]
    return values


def read_mask(path):
    with h5py.File(path, "r") as f:
        mask = np.squeeze(f["mask"][...]).astype(bool)
        lat = f["lat"][...]
    return mask[::-1] if lat[0] > lat[-1] else mask


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("inputs", nargs="+")
    p.add_argument("--mask", help="lsmask.nc; 1 = ocean")
    p.add_argument("--out", required=True)
    p.add_argument("--weeks", type=int, default=0, help="keep only the first N weeks")
    args = p.parse_args()

    frames = np.concatenate([read_weeks(path) for path in args.inputs])
    if args.weeks:
        frames = frames[:args.weeks]
    ocean = ~np.isnan(frames).any(axis=0)
    if args.mask:
        ocean &= read_mask(args.mask)
    frames = np.where(ocean[None], frames, FILL_VALUE)
    save_sst(args.out, SSTArchive(frames, np.arange(len(frames)), ocean))
    T, H, W = frames.shape
    print(f"{args.out}: {T} weeks on {H}x{W}, {int(ocean.sum())} ocean points")


if __name__ == "__main__":
    main()
