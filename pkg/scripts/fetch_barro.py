"""Place the quantreg `barro` growth data at data/barro.csv.

The CSV export of R's quantreg::barro ships inside the `pydataset`
source distribution; this downloads that sdist with pip and extracts the
one file. Usage::

    python scripts/fetch_barro.py [destination]
"""
import io
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

MEMBER = "resources/rdata/csv/quantreg/barro.csv"


def main(dest="data/barro.csv"):
    dest = Path(dest)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "pydataset==0.2.0",
             "--no-deps", "--no-binary", ":all:", "-d", tmp, "-q"],
            check=True,
        )
        sdist = next(Path(tmp).glob("pydataset-*.tar.gz"))
        with tarfile.open(sdist) as outer:
            inner = outer.extractfile(
                next(m for m in outer.getmembers() if m.name.endswith("resources.tar.gz"))
            )
            with tarfile.open(fileobj=io.BytesIO(inner.read())) as res:
                data = res.extractfile(MEMBER).read()
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(data)
    print(f"wrote {dest} ({len(data.splitlines()) - 1} rows)")


if __name__ == "__main__":
    main(*sys.argv[1:])
