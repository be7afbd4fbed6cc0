#!/usr/bin/env python3
"""Step-halving study for the fixed RK4 integrator on phi'' = -phi
(exact solution sin x).  Error ratios should approach 2^4 = 16.
"""

import math

import numpy as np

from vdplin import Grid, IntegratorConfig, integrate_linear
from vdplin.expr import Const


def main():
    cfg = IntegratorConfig(method="rk4")
    print(f"{'n':>6} {'h':>10} {'max error':>12} {'ratio':>7}")
    prev = None
    for n in (26, 51, 101, 201, 401, 801):
        t = integrate_linear(Const(-1.0), Grid(0.0, math.pi, n), 0.0, 1.0, cfg)
        err = float(np.max(np.abs(t.values - np.sin(t.xs))))
        ratio = f"{prev / err:7.2f}" if prev else "      -"
        print(f"{n:>6} {math.pi / (n - 1):>10.2e} {err:>12.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
