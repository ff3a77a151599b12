"""Smoke test for the inertia_id extension module.

Build and run from the repository root:

    cargo build -p inertia-id-py --features extension-module --release
    cp target/release/libinertia_id.so python/inertia_id.so
    python3 python/smoke_test.py

or install with `maturin develop -m crates/py/Cargo.toml`.
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import inertia_id as ii  # noqa: E402


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok: {what}")


def main():
    model = ii.Model.builtin("three_link")
    check(model.n_links == 3 and model.nv == model.n_joints + 6, "model dimensions")
    again = ii.Model.from_toml(model.to_toml())
    check(again.hash == model.hash, "model TOML round trip keeps the hash")

    for p, name in zip(model.priors(), model.link_names):
        check(len(p) == 10 and p[0] > 0.0, f"prior of {name}")

    q = model.home_configuration()
    v = [0.1] * model.nv
    a = [0.2] * model.nv
    y = ii.regressor(model, q, v, a)
    phi = [x for p in model.priors() for x in p]
    tau = ii.inverse_dynamics(model, q, v, a)
    worst = max(abs(sum(r * x for r, x in zip(row, phi)) - t) for row, t in zip(y, tau))
    check(worst < 1e-9, "regressor times priors equals inverse dynamics")

    jc = ii.contact_jacobian(model, q, ["pivot_left", "pivot_right"])
    p, removed = ii.projector(jc)
    pjt = max(abs(sum(p[i][k] * jc[j][k] for k in range(model.nv))) for i in range(model.nv) for j in range(len(jc)))
    check(pjt < 1e-10 and removed > 0, "projector annihilates contact forces")

    point = ii.consistency([1.0, 0, 0, 0, 0, 0, 0, 0, 0, 0], [0, 0, 0], [0.1, 0.1, 0.1])
    check(not point["consistent"] and point["violations"], "point mass is flagged")

    rate = 100.0
    sine = [math.sin(2 * math.pi * 1.0 * k / rate) for k in range(400)]
    smooth = ii.filtfilt(sine, rate)
    check(max(abs(s - x) for s, x in zip(smooth[50:-50], sine[50:-50])) < 1e-3, "filter passes a 1 Hz sine")

    data = ii.simulate(model, "multisine", 4.0, 3, 0.0, ["pivot_left", "pivot_right"])
    check(len(data) == 400, "simulate sample count")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "log.csv")
        data.save(path, model)
        loaded = ii.Dataset.load(path, model)
        check(loaded.torques == data.torques, "log round trip")

    sol = ii.identify(data, model, gamma=1e-8, friction=False)
    check(sol.optimal and sol.all_consistent, f"identify: {sol!r}")
    err = sol.predict(model, data)
    check(err["rmse_all"] < 1e-5, f"noiseless fit rmse {err['rmse_all']:.2e}")
    base = ii.identify(data, model, method="svd", friction=False)
    check(base.method == "SVD", "svd baseline")

    try:
        ii.identify(data, model, gamma=-1.0)
    except ValueError as e:
        check("gamma" in str(e), "negative gamma is rejected")
    else:
        raise SystemExit("FAIL: negative gamma accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
