#!/usr/bin/env python3
"""Toy-scale Nash-Moser run: one iterate report per line in iterates.jsonl.

Small compatible data, five iterations on the 64 x 64 grid; the interior
residual must decrease monotonically while the bookkeeping identities stay
at machine precision.
"""

import sys
import tempfile
from pathlib import Path

from cvsheet.cli import run_experiment

CONFIG = """[run]
experiment = nash-moser-demo
seed = 3

[grid]
n1 = 64
n2 = 64

[state]
p_plus = 0.8
u2_jump = 0.1
H2_plus = 0.7
H2_minus = 0.6

[nash-moser]
amplitude = 8e-6
T = 2.0
nt = 65
theta0 = 2.0
iterations = 5
"""


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/nash_moser")
    cfg = Path(tempfile.mkstemp(suffix=".ini")[1])
    cfg.write_text(CONFIG)
    return run_experiment(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
