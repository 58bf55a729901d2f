"""
Why one shared perturbation matters
===================================

Two outputs look at disjoint pixels. Each can be flipped by spending the
whole budget on its own pixel, so counting them one at a time certifies
nothing. The attacker only has one budget though, and the linear program
sees that at most one of the two can fall.
"""

from locsmooth.base_certs import InterfaceCert
from locsmooth.collective import ThreatModel, build_problem, naive_count, solve_collective
from locsmooth.lp_solver import to_lp_format

left = InterfaceCert([1.0, 0.0], 1.0, 1)
right = InterfaceCert([0.0, 1.0], 1.0, 1)
threat = ThreatModel(p=1, epsilon=1.0)

print("naive count      :", naive_count([left, right], threat))
problem = build_problem([left, right], threat)
for mode in ("relaxed", "exact"):
    print(f"{mode:<17}:", solve_collective(problem, mode).value)

# The program itself, in a format external solvers read.
print()
print(to_lp_format(problem.to_program("exact"), ["budget_px0", "budget_px1", "broken_left", "broken_right"]))
