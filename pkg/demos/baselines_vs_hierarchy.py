"""Compare the moment hierarchy with the cheap baselines on named instances.

For each instance the script prints the rank-based and analytic baselines
next to the hierarchy value.  The 5 x 5 circulant M(1/2) is the showcase: the
plain level-2 bound stays at 5/2, while the version localized at the cyclic
shifts of (1, -1, 1, -1, 1) / sqrt(5) certifies the full value 5.

Run with ``python demos/baselines_vs_hierarchy.py`` (about ten seconds).
"""
import math
import warnings

import numpy as np

from factorank.hierarchies import BoundRequest, bound
from factorank.instances import gen

warnings.simplefilter("ignore")


def show(title, req, with_tau=False):
    res = bound(req, with_tau=with_tau)
    base = ", ".join(f"{k} {v:.4f}" for k, v in sorted(res.baselines.items()))
    print(f"{title:<34} {req.variant_label():<14} {res.value:8.4f}   [{base}]")


print(f"{'instance':<34} {'variant':<14} {'bound':>8}   [baselines]")
M = gen("circulant5", 0.5).values
show("circulant M(1/2), cpsd t=2", BoundRequest("cpsd", M, 2))
v0 = np.array([1.0, -1.0, 1.0, -1.0, 1.0]) / math.sqrt(5)
show("circulant M(1/2), cpsd t=2", BoundRequest("cpsd", M, 2, V=[np.roll(v0, k) for k in range(5)]))

P = gen("bipartite_p", 0.3, 0.7, 2, 3).values
show("bipartite P(0.3, 0.7), cp t=2", BoundRequest("cp", P, 2, dagger=True), with_tau=True)

B = gen("nonneg_2x2", 0.5).values
show("[[1, 1], [1, 1/2]], nonneg t=2", BoundRequest("nonneg", B, 2), with_tau=True)

S = gen("slack_quadrilateral").values
show("quadrilateral slack, psd t=2", BoundRequest("psd", S, 2))
