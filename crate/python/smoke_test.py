"""Smoke test for the chirikov_py extension.

Builds the extension with cargo (unless CHIRIKOV_PY_LIB points at a built
library), loads it from a temporary directory and exercises the bindings.
Exits non-zero on the first failed check.
"""

import importlib
import math
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_library():
    given = os.environ.get("CHIRIKOV_PY_LIB")
    if given:
        return pathlib.Path(given)
    subprocess.run(
        ["cargo", "build", "-p", "chirikov-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
    for name in ("libchirikov_py.so", "libchirikov_py.dylib", "chirikov_py.dll"):
        lib = target / "debug" / name
        if lib.exists():
            return lib
    sys.exit("built library not found under " + str(target / "debug"))


def load(lib):
    tmp = tempfile.mkdtemp(prefix="chirikov_py_")
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy(lib, os.path.join(tmp, "chirikov_py" + suffix))
    sys.path.insert(0, tmp)
    return importlib.import_module("chirikov_py")


def check(name, ok, detail=""):
    print(("PASS " if ok else "FAIL ") + name + (": " + detail if detail else ""))
    if not ok:
        sys.exit(1)


def torus_dist(p, q):
    d = 0.0
    for a, b in zip(p, q):
        e = (a - b) % (2 * math.pi)
        d = max(d, min(e, 2 * math.pi - e))
    return d


def main():
    m = load(build_library())

    f = m.ShearMap(4 * math.pi)
    x, w = (1.0, 2.0), (0.3, 5.1)
    y = f.step(x, w)
    check("round trip", torus_dist(f.inverse(y, w), x) < 1e-12, str(y))
    (a, b), (c, d) = f.jacobian(x, w)
    check("unit determinant", abs(a * d - b * c - 1.0) < 1e-12)
    check("orbit length", len(f.orbit(x, [w] * 5)) == 6)
    check("repr", repr(f).startswith("ShearMap("))
    try:
        m.ShearMap(-1.0)
        check("rejects negative K", False)
    except ValueError:
        check("rejects negative K", True)

    for k in (10.0, 4 * math.pi, 100.0):
        r = m.det_xi_phi8(k)
        check(f"det 12K^4 at K={k:.3f}", r["rel_error"] < 1e-6 and r["fd_rel_error"] < 1e-5)

    ranks = m.submersion_ranks(100.0)
    check("ranks", ranks["two_point"] == 4 and ranks["projective"] == 3 and ranks["two_point_n2"] < 4, str(ranks))

    h = m.harris_constants(0.5, 1.0, 0.5, 8.0, 0.25, 0.8)
    check("harris example", abs(h["beta"] - 0.25) < 1e-12 and abs(h["alpha_bar"] - 0.9) < 1e-12)

    v = m.singular_cos_integral(0.0, 1.0, 0.25)
    check("claim integral finite", math.isfinite(v) and v > 2 * math.pi, f"{v:.6f}")

    w = m.one_point_exact((0.5, 1.0), (2.0, 3.0), 4 * math.pi)
    check("one-point exact", torus_dist(m.ShearMap(4 * math.pi).step((0.5, 1.0), w), (2.0, 3.0)) < 1e-12)

    r = m.two_point_reach((0.1, 0.2), (1.5, 2.5), (3.0, 4.0), (5.0, 0.5), 1e-2, 4 * math.pi)
    check("two-point reach", r["success"] and r["final_distance"] < 1e-2, f"{r['steps']} steps")

    c = m.contraction_estimate(100.0, samples=2000, grid=4)
    check("contraction below 1/2", c["worst_estimate"]["mean"] < 0.5)

    lam = m.lyapunov_exponent(100.0, n_steps=20000, n_orbits=4)
    check("lyapunov near log(K/2)", abs(lam["lambda1"]["mean"] / math.log(50.0) - 1) < 0.1, f"{lam['lambda1']['mean']:.4f}")

    rates = m.chirikov_headline_rates(10.0)
    check("headline rates", isinstance(rates, dict) and "p_k" in rates)

    dec = m.decay_experiment(4 * math.pi, steps=10, realizations=1, grid=64)
    norms = dec["series"][0]["norms"]
    check("decay series", len(norms) >= 2 and norms[-1] < norms[0])
    print("smoke test passed")


if __name__ == "__main__":
    main()
