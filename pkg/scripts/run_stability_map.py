#!/usr/bin/env python3
"""Map the stability margin over ([u2], |H2|) and the speed-space regions.

Writes stability_map.csv with the margin and the closed-form subsonic /
supersonic thresholds; the zero crossing of the margin traces the curve
a+ |H2+| + a- |H2-| = |[u2]|.
"""

import sys
import tempfile
from pathlib import Path

from cvsheet.cli import run_experiment

CONFIG = """[run]
experiment = stability-map
seed = 0

[map]
p_plus = 1.0
u2_jump_max = 3.0
u2_jump_n = 121
H2_max = 2.0
H2_n = 121
"""


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/stability_map")
    cfg = Path(tempfile.mkstemp(suffix=".ini")[1])
    cfg.write_text(CONFIG)
    return run_experiment(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
