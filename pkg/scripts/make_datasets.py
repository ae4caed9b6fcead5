#!/usr/bin/env python3
"""Write the bundled synthetic classification datasets to LIBSVM text files.

The banana and waveform sets used by the classification configs are
generated on the fly from fixed seeds; this script snapshots them to
``datasets/`` so they can also be consumed through ``data = libsvm``
configs or by external tooling.

The adult income set is not generated here: download ``a9a`` from the
LIBSVM binary-dataset collection
(https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary.html)
and save it as ``datasets/adult.libsvm`` to run the adult configs.
"""

import argparse
from pathlib import Path

from rffnet.data import make_banana_dataset, make_waveform_dataset, save_libsvm


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out", default="datasets", help="output directory (default: datasets)"
    )
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, dataset in (
        ("banana", make_banana_dataset()),
        ("waveform", make_waveform_dataset()),
    ):
        path = out / f"{name}.libsvm"
        save_libsvm(path, dataset)
        print(f"wrote {len(dataset.y)} rows to {path}")


if __name__ == "__main__":
    main()
