#!/usr/bin/env python3
"""Drive the linearized solver on a stable sheet and dump the energy ledger.

One forced run on the default stable contact background; artifacts:
energy_ledger.csv (the I-quantities and the energy-identity residual per
step) and boundary_energy.csv (wall energy plus constraint residuals).
"""

import sys
import tempfile
from pathlib import Path

from cvsheet.cli import run_experiment

CONFIG = """[run]
experiment = evolve
seed = 0

[grid]
n1 = 64
n2 = 64

[state]
p_plus = 1.2
u2_jump = 0.5
H2_plus = 1.4
H2_minus = 1.2

[evolve]
t_final = 0.5
forcing_amplitude = 1.0
forcing_k2 = 2
write_checkpoint = true
checkpoint_count = 5
"""


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/linearized")
    cfg = Path(tempfile.mkstemp(suffix=".ini")[1])
    cfg.write_text(CONFIG)
    return run_experiment(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
