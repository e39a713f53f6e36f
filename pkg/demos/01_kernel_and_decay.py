"""Kernel identities and whole-space decay.

Walks through the analytic layer: the fundamental solution in the sheared
frame, its L^q norms against direct quadrature, the convolution oracle
against the closed-form solution, and the sup-norm decay rate over time.
"""

import math

import numpy as np

from kfplab import analytic
from kfplab.analysis import decay_fit

print("=== kernel values and norms ===")
print(f"G_1(0, 0)             = {analytic.kernel_G(1.0, 0.0, 0.0):.7f}"
      f"   (sqrt(3)/(2 pi) = {math.sqrt(3) / (2 * math.pi):.7f})")
for t in (0.5, 1.0, 2.0):
    for q in (1, 2, math.inf):
        closed = analytic.kernel_Lq_norm(t, q)
        quad = analytic.kernel_Lq_quadrature(t, q)
        qname = "inf" if q == math.inf else str(q)
        print(f"  ||G_t||_q  t={t:3.1f} q={qname:>3}: closed {closed:.8f}"
              f"  quadrature {quad:.8f}  (rel gap {abs(quad - closed) / closed:.1e})")

print("\n=== convolution oracle vs closed form ===")
rng = np.random.default_rng(1)
pts = np.column_stack([rng.uniform(-1.5, 1.5, 5), rng.uniform(-1.5, 1.5, 5)])
for t in (0.5, 1.0, 5.0):
    got = analytic.convolution_oracle(analytic.gaussian_ic, t, pts)
    want = analytic.exact_original(t, pts[:, 0], pts[:, 1])
    print(f"  t={t}: worst |oracle - exact| over 5 points = {np.abs(got - want).max():.2e}")

print("\n=== sup-norm decay (polynomial, rate -> t^-2) ===")
ts = np.geomspace(2.0, 20.0, 6)
sups = np.array([analytic.oracle_sup_norm(analytic.gaussian_ic, t) for t in ts])
for t, s in zip(ts, sups):
    bound = math.sqrt(3) / (2 * math.pi * t * t) * math.pi
    print(f"  t={t:6.2f}: sup |f| = {s:.6f}   (Young bound {bound:.6f})")
fit = decay_fit(ts, sups, kind="power")
print(f"fitted exponent over [2, 20]: {fit.exponent:.4f}")
print("(the asymptotic rate is -2; on this early window the exact dynamics "
      "fit to -1.885, approaching -2 only for t >~ 8)")
