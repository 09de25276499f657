"""Smoke test for the lqg_spectrum extension.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math

import lqg_spectrum as lqg


def main():
    assert abs(lqg.weyl_constant(0.0) - 1.0 / (2.0 * math.pi)) < 1e-15
    g = 2.0 * math.sqrt(2.0 / 3.0)
    kpz = 0.5 + 2.0 / g**2 * (math.sqrt(1.0 + g**4 / 16.0) - 1.0)
    assert abs(lqg.kpz_solve(0.5, g) - kpz) < 1e-12
    assert abs(lqg.bessel_j0(2.404825557695773)) < 1e-12
    assert 0.0 < lqg.wigner_surmise_cdf(1.0) < 1.0

    # Disc Green function against its closed form.
    x, y = (0.1, 0.2), (-0.3, 0.4)
    dot = x[0] * y[0] + x[1] * y[1]
    nx, ny = x[0] ** 2 + x[1] ** 2, y[0] ** 2 + y[1] ** 2
    d2 = (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2
    closed = math.log((1 - 2 * dot + nx * ny) / d2) / (2 * math.pi)
    assert abs(lqg.green_disc(x, y) - closed) < 1e-12

    lab = lqg.Lab("disc", 24)
    assert len(lab) == len(lab.points) and lab.mesh == 2.0 / 24

    flat = lab.replica(0.0, 42, vectors=True)
    lam = flat.lambdas
    assert all(a <= b for a, b in zip(lam, lam[1:])) and lam[0] > 0
    first = 2.404825557695773 ** 2 / 2
    assert abs(lam[0] - first) / first < 0.02, lam[0]
    assert len(flat.eigfunc(1)) == len(lab)
    assert flat.counting(lam[9]) == 10

    fit = flat.weyl_fit()
    print(f"gamma 0: lambda_1 {lam[0]:.4f}, c_hat {fit['c_hat']:.4f} vs {fit['target']:.4f}")

    rough = lab.replica(1.0, 42)
    trace = rough.heat_trace([1e-3, 1e-2, 1e-1])
    assert trace[0] > trace[1] > trace[2] > 0
    print(f"gamma 1: mass {rough.total_mass:.4f}, H(1e-2) {trace[1]:.2f}")

    for bad in (lambda: lqg.Lab("triangle", 16), lambda: lab.replica(2.5, 1)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
