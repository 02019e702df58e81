"""Random stream derivation.

Every random quantity comes from its own PCG64 generator seeded by
``SeedSequence(master_seed, spawn_key=(rep, role, index))``:

==========  ====  ====================================================
role        code  index
==========  ====  ====================================================
switch      0     always 0; one uniform per tick (the first picks G_1)
regressor   1     node; one uniform innovation per tick
measurement 2     node; one standard normal per tick
channel     3     position of the edge in the union edge list; one
                  standard normal per tick whether or not the edge is
                  active
==========  ====  ====================================================

Draw counts per tick are fixed, so a rep's trajectory depends only on
(master seed, rep) and never on how reps are scheduled.
"""

from __future__ import annotations

import numpy as np

SWITCH, REGRESSOR, MEASUREMENT, CHANNEL = 0, 1, 2, 3


def stream(master_seed: int, rep: int, role: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(rep), int(role), int(index)))
    return np.random.Generator(np.random.PCG64(ss))
