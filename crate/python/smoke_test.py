"""Smoke test for the sgps extension module.

Build and install first:  pip install ./crates/py   (or `maturin develop -m crates/py/Cargo.toml`)
"""

import math
import sys

import sgps


def main():
    sigmas = sgps.schedule(16, 0.02, 16.0, 7.0)
    assert len(sigmas) == 16
    assert abs(sigmas[0] - 16.0) < 1e-12 and abs(sigmas[-1] - 0.02) < 1e-12
    assert all(a > b for a, b in zip(sigmas, sigmas[1:]))

    prior = sgps.GmmPrior.toy_1d(64, 4, 1e-3, 1)
    assert prior.shape == [64] and prior.dim == 64
    x0 = prior.sample(7)
    noisy = [v + 0.1 * math.sin(37.0 * i) for i, v in enumerate(x0)]
    den = prior.denoise(noisy, 0.1)
    assert len(den) == 64
    assert sgps.psnr(den, x0) > sgps.psnr(noisy, x0)

    tr = prior.jacobian_trace(noisy, 0.1)
    assert 0.0 <= tr <= 64.0
    assert math.isfinite(sgps.sure_value(prior, noisy, 0.1, probes=2, seed=3))

    assert sgps.estimate_sigma([0.5] * 256, shape=[16, 16]) == 0.0

    op = sgps.ForwardOp.blur([64], kernel_size=5, kernel_width=1.0)
    y = op.apply(x0)
    assert len(op.adjoint(y)) == 64

    cfg = sgps.SamplerConfig()
    cfg.steps = 8
    cfg.langevin_steps = 10
    x, report = sgps.run(prior, op, y, cfg, seed=1, truth=x0)
    assert len(x) == 64
    assert report["total_nfe"] == 8 * cfg.nfe_per_step()
    assert len(report["steps"]) == 8
    assert math.isfinite(report["psnr"])

    try:
        sgps.GmmPrior([[0.0, 1.0]], -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative variance accepted")

    print(f"ok: final psnr {report['psnr']:.2f} dB, nfe {report['total_nfe']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
