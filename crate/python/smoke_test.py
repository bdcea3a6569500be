"""Smoke test for the cdgarch Python module.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/cdgarch-*.whl
"""

import math
import pathlib
import sys

import cdgarch

ROOT = pathlib.Path(__file__).resolve().parent.parent


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    noise = cdgarch.NoiseSpec(lambda_l=1.0, sigma_j=1.0, seed=3)
    assert noise.kappa2 == 1.0 and noise.kappa4 == 3.0

    cogarch = cdgarch.DelayModel(1.0, 1.0, 0.25, noise)
    assert close(cogarch.stationary_mean(), 4.0 / 3.0, 1e-15)
    report = cogarch.analyze()
    assert report["roots_in_rhp"] == 0 and report["mean_stationary"] == "true"

    f_mu = cdgarch.DelayKernel.exponential(1.0, 2.0, 1.0)
    f_nu = cdgarch.DelayKernel.exponential(0.5, 1.0, 0.5)
    l1 = 1.0 * ((1 - math.exp(-2.0)) / 2.0 - math.exp(-2.0))
    assert close(f_mu.norms()[0], l1, 1e-13)

    model = cdgarch.DelayModel(1.0, 3.0, 0.5, noise, f_mu=f_mu, f_nu=f_nu)
    m = model.stationary_mean()
    # Delta(0) = c0 - ||f||_1 = eta / M
    delta0 = model.characteristic(0j)
    assert close(delta0.real, 1.0 / m, 1e-12) and delta0.imag == 0.0

    t, dde = model.mean(5.0, step=1e-3, history=2 * m)
    _, ren = model.mean(5.0, step=1e-3, solver="renewal", history=2 * m)
    assert max(abs(a - b) for a, b in zip(dde, ren)) < 1e-6
    assert t[0] == -model.r and t[-1] == 5.0

    paths = model.simulate_events(5.0, n_paths=4, seed=11, ode_step=0.01, report_dt=0.05)
    again = model.simulate_events(5.0, n_paths=4, seed=11, ode_step=0.01, report_dt=0.05)
    assert [p.x for p in paths] == [p.x for p in again]
    floor = model.positivity_floor()
    assert all(p.min_x() >= floor * (1 - 1e-9) for p in paths)
    for p in paths:
        for _, dl, pre, post in p.events:
            assert abs(post - pre * (1 + 0.5 * dl * dl)) <= 1e-13 * post

    euler = model.simulate_euler(0.01, 5.0, n_paths=2, seed=11)
    assert len(euler[0].y) == 501 and len(euler[0].returns(1.0)) == 401
    rows = cdgarch.return_autocov(paths, 1.0, [0.0, 0.5])
    assert [r[0] for r in rows] == [0.0, 0.5]

    loaded, digest = cdgarch.load_config(str(ROOT / "configs" / "reference.toml"))
    assert close(loaded.stationary_mean(), m, 1e-15) and len(digest) == 64

    try:
        cdgarch.DelayModel(1.0, -1.0, 0.25, noise)
    except ValueError:
        pass
    else:
        raise AssertionError("negative c_mu accepted")

    print(f"cdgarch smoke test passed (M = {m:.6f}, {sum(len(p.events) for p in paths)} jumps)")


if __name__ == "__main__":
    sys.exit(main())
