"""Print the refinement table of a results directory with observed halving factors.

    python scripts/refinement_table.py results/skt_default
"""

import csv
import sys
from pathlib import Path

import numpy as np


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__.strip(), file=sys.stderr)
        return 3
    with open(Path(argv[0]) / "refinement.csv") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        print("empty refinement table")
        return 0
    cols = [c for c in rows[0] if c not in ("level", "K", "dt", "n_seeds", "observed_order")]
    print("K".rjust(6) + "".join(c.rjust(18) for c in cols))
    prev = None
    for r in rows:
        vals = np.array([float(r[c]) for c in cols])
        print(r["K"].rjust(6) + "".join(f"{v:18.4e}" for v in vals))
        if prev is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                print(" " * 6 + "".join(f"{f:>18}" for f in (f"x{q:.2f}" for q in prev / vals)))
        prev = vals
    return 0


if __name__ == "__main__":
    sys.exit(main())
