"""
Masking is a special case of localized noise
============================================

Fully randomizing every pixel outside an output's receptive field makes its
certificate blind to those pixels. The collective bound then matches what
one gets by explicitly masking perturbations outside each receptive field.
Everything here is exact: smoothed scores are summed over all 2^10 inputs.
"""

import itertools

import numpy as np

from locsmooth.collective import ThreatModel, build_problem, solve_collective
from locsmooth.distributions import BernoulliFlip, LocalizedScheme
from locsmooth.models import WindowMajority
from locsmooth.oracle import exact_certificates, exhaustive_attack

d_in = 10
model = WindowMajority.line(d_in, (1, 5, 8), 1)
fields = model.receptive_fields().astype(bool)
scheme = LocalizedScheme.per_output([BernoulliFlip(np.where(f, 0.15, 0.5)) for f in fields])
x = np.array([1, 1, 1, 0, 0, 0, 0, 1, 1, 1], dtype=np.int8)

_, certs = exact_certificates(model, scheme, x)
for budget in range(4):
    threat = ThreatModel(0, budget, "binary")
    collective = solve_collective(build_problem(certs, threat), "exact").value
    masked = min(
        sum(1 for n, c in enumerate(certs) if c is not None and sum(c.weights[d] for d in flips if fields[n][d]) < c.eta)
        for k in range(budget + 1)
        for flips in itertools.combinations(range(d_in), k)
    )
    truth = exhaustive_attack(model, scheme, x, threat)
    print(f"flips {budget}: collective {collective}  masked {masked}  true minimum {truth}")
