"""
Using the variance of the smoothed score
========================================

A certificate built from the mean and second moment of the score can beat
the one built from the class probability alone, but not always. When the
score is a hard 0/1 vote the variance is as large as it can be, and the
quantile bound wins.
"""

import numpy as np

from locsmooth.base_certs import SmoothedStats, gaussian_cert, gaussian_variance_cert

scales = np.ones(1)
for mu, zeta in ((0.9, 0.09), (0.9, 0.01), (0.9, 0.001), (0.99, 0.0099), (0.99, 0.0005)):
    stats = SmoothedStats(mu=mu, zeta=zeta, nu=mu)
    variance = np.sqrt(gaussian_variance_cert(scales, stats).eta)
    quantile = np.sqrt(gaussian_cert(scales, mu).eta)
    better = "variance" if variance > quantile else "quantile"
    print(f"mean {mu:<5} variance {zeta:<7}  radius from variance {variance:.3f}  from quantile {quantile:.3f}  -> {better}")
