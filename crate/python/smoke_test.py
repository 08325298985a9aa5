"""Smoke test for the Python bindings: build with maturin, then run this."""

import sifs_py


def main():
    d = sifs_py.Dataset.synthetic(500, 100, seed=1)
    print(d)
    bmax = sifs_py.beta_max(d)
    beta = 0.3 * bmax
    a0 = sifs_py.alpha_max(d, beta)
    w0, t0 = sifs_py.closed_form(d, sifs_py.Params(a0, beta))

    alpha = 0.3 * a0
    s = sifs_py.screen(d, a0, beta, w0, t0, alpha)
    print(f"screened {len(s['features'])} features, {len(s['r']) + len(s['l'])} samples in {s['triggers']} triggers")

    prm = sifs_py.Params(alpha, beta)
    sol = sifs_py.solve(d, prm, s["features"], s["r"], s["l"], warm=t0)
    gap = sifs_py.duality_gap(d, sol["w"], sol["theta"], prm)["gap"]
    cert = sifs_py.certify(d, prm, s["features"], s["r"], s["l"])
    violations = len(cert["violations_f"]) + len(cert["violations_r"]) + len(cert["violations_l"])
    print(f"gap {gap:.2e}, nonzeros {sum(1 for v in sol['w'] if v != 0)}, violations {violations}")
    assert violations == 0

    recs = sifs_py.run_path(d, "sifs", beta_fracs=[1.0, 0.5, 0.1], alpha_fracs=[1.0, 0.3, 0.1, 0.03], threads=1)
    m = sifs_py.metrics(recs)
    print(f"{len(recs)} path points, mean scaling ratio {m['modes'][0]['mean_scaling_ratio']:.3f}")
    print("ok")


if __name__ == "__main__":
    main()
