"""Writes the MRC fixtures in tests/data with the mrcfile package."""
import sys
from pathlib import Path

import mrcfile
import numpy as np

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests" / "data")
y, x = np.mgrid[0:64, 0:64]
ramp = (0.5 * x - 0.25 * y + 1.0).astype(np.float32)
with mrcfile.new(out / "ramp64_mode2.mrc", overwrite=True) as m:
    m.set_data(ramp)
    m.voxel_size = 3.1
with mrcfile.new(out / "ramp64_mode1.mrc", overwrite=True) as m:
    m.set_data((x + 64 * y).astype(np.int16))
    m.voxel_size = 3.1
