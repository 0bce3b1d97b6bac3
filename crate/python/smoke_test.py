"""Smoke test for the dpoph_py extension.

Build first:  cargo build -p dpoph-python --release
Then run:     python3 python/smoke_test.py
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    built = os.environ.get("DPOPH_PY_LIB") or os.path.join(ROOT, "target", "release", "libdpoph_py.so")
    if not os.path.exists(built):
        sys.exit(f"extension not found at {built}; run cargo build -p dpoph-python --release")
    tmp = tempfile.mkdtemp()
    target = os.path.join(tmp, "dpoph_py.so")
    shutil.copy(built, target)
    spec = importlib.util.spec_from_file_location("dpoph_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    dp = load_module()

    assert [dp.discount_factor(1024, 64, f, 1, 1e-6, "oph-re") for f in (64, 128, 256, 512)] == [6, 4, 2, 1]
    assert dp.discount_factor(1024, 64, 64, 1, 0.0, "oph-rand") == 1

    pmf = dp.diff_count_pmf(1024, 64, 64, 1, "oph-fix")
    assert abs(sum(p for _, p in pmf) - 1.0) < 1e-9

    u = list(range(1, 201))
    v = list(range(101, 301))
    j = dp.jaccard(1024, u, v)
    assert abs(j - 1 / 3) < 1e-12

    h = dp.Hasher("oph-re", 1024, 64, bits=4, seed=11)
    su, sv = h.sketch(u), h.sketch(v)
    assert len(su) == 64 and all(s is not None and 0 <= s < 16 for s in su.slots)
    assert h.sketch(u).slots == su.slots
    est = dp.debias(dp.collision_estimate(su, sv), 4)
    assert abs(est - j) < 0.3, est

    p = h.privatizer(8.0, f_min=100)
    assert p.n >= 1 and 1 / 16 < p.keep_probability <= 1
    du = h.dp_sketch(u, p, noise_seed=1)
    assert du.slots == h.dp_sketch(u, p, noise_seed=1).slots
    dv = h.dp_sketch(v, p, noise_seed=2)
    dp_est = dp.debias(dp.collision_estimate(du, dv), 4, p.keep_probability)
    assert math.isfinite(dp_est)

    try:
        h.dp_sketch(list(range(1, 11)), p, noise_seed=3)
    except ValueError as e:
        assert "nonzeros" in str(e)
    else:
        raise AssertionError("sparse vector below f_min must be rejected")

    try:
        dp.collision_estimate(su, du)
    except ValueError:
        pass
    else:
        raise AssertionError("signatures of different schemes must not compare")

    r = dp.Hasher("oph-rand", 1024, 64, bits=1, seed=11)
    assert None in r.sketch([5]).slots

    w = dp.Hasher("bcws", 1024, 64, bits=2, seed=11)
    sig = w.sketch_weighted([(3, 0.5), (700, 2.0)])
    assert len(sig) == 64

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
