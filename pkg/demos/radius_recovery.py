"""
Certified radius of isotropic Gaussian smoothing
================================================

With the same noise level on every pixel, the interface certificate reduces
to the familiar l2 ball of radius sigma * Phi^-1(q).
"""

import numpy as np

from locsmooth.base_certs import gaussian_cert, robust_to_ball
from locsmooth.numerics import std_normal_quantile

# a 28x28 image smoothed with sigma = 0.5
sigma = 0.5
scales = np.full(28 * 28, sigma)

for q in (0.6, 0.9, 0.99, 0.999):
    cert = gaussian_cert(scales, q)
    radius = sigma * std_normal_quantile(q)
    print(f"q = {q:<6} radius = {radius:.4f}   certified at 0.99r: {robust_to_ball(cert, 0.99 * radius)}"
          f"   at r: {robust_to_ball(cert, radius)}")

# Below one half the smoothed classifier abstains.
print("q = 0.5 ->", gaussian_cert(scales, 0.5))
