"""Download the image-classification datasets into a local data directory.

Produces the layout the loaders expect:

    <dest>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte.gz
    <dest>/fashion_mnist/...same stems...
    <dest>/cifar10/cifar-10-batches-bin/*.bin
    <dest>/cifar100/cifar-100-binary/{train,test}.bin

IDX files are kept gzip-compressed (the loaders decompress on the fly).
Every download is checksum-verified before use.  Needs network access;
point CIRCUITFORGE_DATA_DIR at <dest> afterwards.
"""
from __future__ import annotations

import argparse
import gzip
import hashlib
import os
import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

IDX_STEMS = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)

MNIST_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)
MNIST_MD5 = (
    "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "d53e105ee54ea40749a09fcbcd1e9432",
    "9fb629c4189551a2d022fa330f9573f3",
    "ec29112dd5afa0611ce80d1b7f02629c",
)
FASHION_MIRRORS = ("http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",)
FASHION_MD5 = (
    "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
    "25c81989df183df01b3e8a0aad5dffbe",
    "bef4ecab320f06d8554ea6380940ec79",
    "bb300cfdad3c16e7a12a480ee83cd310",
)
CIFAR10_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"
CIFAR10_MD5 = "c32a1d4ab5d03f1284b67883e8d87530"
CIFAR100_URL = "https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz"
CIFAR100_MD5 = "03b5dce01913d631647c71ecec9e9cb8"


def md5sum(path: Path) -> str:
    digest = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def download(urls: tuple[str, ...] | list[str], dest: Path, md5: str) -> None:
    if dest.exists() and md5sum(dest) == md5:
        print(f"  {dest.name}: already present")
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    last_error: Exception | None = None
    for url in urls:
        try:
            print(f"  {dest.name}: fetching {url}")
            with urllib.request.urlopen(url, timeout=60) as resp, \
                    tempfile.NamedTemporaryFile(dir=dest.parent, delete=False) as tmp:
                while True:
                    chunk = resp.read(1 << 20)
                    if not chunk:
                        break
                    tmp.write(chunk)
                tmp_path = Path(tmp.name)
            got = md5sum(tmp_path)
            if got != md5:
                tmp_path.unlink()
                raise IOError(f"checksum mismatch for {url}: got {got}, want {md5}")
            tmp_path.replace(dest)
            return
        except Exception as exc:  # try the next mirror
            last_error = exc
            print(f"    failed: {exc}")
    raise SystemExit(f"could not fetch {dest.name}: {last_error}")


def fetch_idx(dest: Path, mirrors: tuple[str, ...], md5s: tuple[str, ...]) -> None:
    for stem, md5 in zip(IDX_STEMS, md5s):
        download([m + stem for m in mirrors], dest / stem, md5)
        with gzip.open(dest / stem, "rb") as fh:  # quick integrity pass
            fh.read(16)


def fetch_cifar(dest: Path, url: str, md5: str) -> None:
    tarball = dest / Path(url).name
    download([url], tarball, md5)
    with tarfile.open(tarball, "r:gz") as tar:
        for member in tar.getmembers():
            name = Path(member.name).name
            if not member.isfile() or ".." in member.name:
                continue
            if name.endswith(".bin") or name.endswith(".txt"):
                subdir = dest / Path(member.name).parts[0]
                subdir.mkdir(parents=True, exist_ok=True)
                src = tar.extractfile(member)
                assert src is not None
                (subdir / name).write_bytes(src.read())
    print(f"  extracted into {dest}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", default=os.environ.get("CIRCUITFORGE_DATA_DIR", "data"),
                        help="target directory (default: $CIRCUITFORGE_DATA_DIR or ./data)")
    parser.add_argument("--only", action="append",
                        choices=["mnist", "fashion_mnist", "cifar10", "cifar100"],
                        help="fetch just these datasets (repeatable)")
    args = parser.parse_args()
    dest = Path(args.dest)
    wanted = set(args.only or ["mnist", "fashion_mnist", "cifar10", "cifar100"])

    if "mnist" in wanted:
        print("mnist:")
        fetch_idx(dest / "mnist", MNIST_MIRRORS, MNIST_MD5)
    if "fashion_mnist" in wanted:
        print("fashion_mnist:")
        fetch_idx(dest / "fashion_mnist", FASHION_MIRRORS, FASHION_MD5)
    if "cifar10" in wanted:
        print("cifar10:")
        fetch_cifar(dest / "cifar10", CIFAR10_URL, CIFAR10_MD5)
    if "cifar100" in wanted:
        print("cifar100:")
        fetch_cifar(dest / "cifar100", CIFAR100_URL, CIFAR100_MD5)
    print(f"done; export CIRCUITFORGE_DATA_DIR={dest.resolve()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
