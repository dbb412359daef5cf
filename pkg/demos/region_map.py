"""Text map of where the psd-rank bound of the 3 x 3 circulant M(b, c) exceeds 2.

The psd-rank of M(b, c) is at most 2 exactly on the region
1 + b^2 + c^2 <= 2 (b + c + b c).  Points where the level-2 bound is above 2
lie outside that region, so they are certified to have psd-rank 3.  The map
marks them with ``#``, region points with ``o`` and the rest with ``.``.

The same grid can be written to CSV for plotting with
``factorank sweep --gen circulant3 --grid 0:4:0.5 --grid 0:4:0.5 --kind psd --t 2``.

Run with ``python demos/region_map.py`` (about half a minute).
"""
import warnings

import numpy as np

from factorank.hierarchies import BoundRequest, bound
from factorank.instances import gen

warnings.simplefilter("ignore")
grid = np.round(np.arange(0, 4.01, 0.5), 10)

print("rows: b from 0 to 4, columns: c from 0 to 4, step 0.5\n")
for b in grid:
    line = []
    for c in grid:
        if 1 + b * b + c * c <= 2 * (b + c + b * c):
            line.append("o")
            continue
        res = bound(BoundRequest("psd", gen("circulant3", b, c).values, 2), with_baselines=False)
        line.append("#" if res.value is not None and res.value > 2 + 1e-4 else ".")
    print(f"b={b:3.1f}  " + " ".join(line))
