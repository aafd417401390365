"""Independent oracle values, computed without importing tamepairs.

Run once; the output is frozen in tests/data/oracles.json and the tests
compare the package against it.
"""

import json
import math
from fractions import Fraction
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "oracles.json"


def merge_oracle(a, b):
    tagged = sorted([(v, 0, i + 1) for i, v in enumerate(a)] + [(v, 1, i + 1) for i, v in enumerate(b)])
    gamma = [v for v, _, _ in tagged]
    t = [pos + 1 for pos, (_, s, _) in enumerate(tagged) if s == 0]
    s = [pos + 1 for pos, (_, src, _) in enumerate(tagged) if src == 1]
    return {"gamma": gamma, "t": t, "s": s}


def piszczek_oracle(logA, logB, psi, phi, m, n_max, N):
    """Plain double loop over j, k <= N."""
    best = -math.inf
    for j in range(1, N + 1):
        for k in range(1, N + 1):
            num = logB(j, m) - logA(k, psi(m))
            den = max(logB(j, p) - logA(k, phi(p)) for p in range(1, n_max + 1))
            best = max(best, num - den)
    return best


def l0(j, k):
    return -j / k


def linf(j, k):
    return k * j


def e2_search(logA, logB, psi, phi, m, n_target, depth):
    rows, i0, v0 = [], 1, 1
    for n in range(1, n_target + 1):
        found = None
        for i in range(i0, depth + 1):
            for v in range(v0, depth + 1):
                lhs = logB(v, m) - logA(i, psi(m))
                rhs = max(logB(v, q) - logA(i, phi(q)) for q in range(1, n + 1))
                if lhs >= math.log(n) + rhs:
                    found = (i, v)
                    break
            if found:
                break
        if not found:
            break
        rows.append([n, found[0], found[1]])
        i0, v0 = found[0] + 1, found[1] + 1
    return rows


def main():
    fact = [math.factorial(n) for n in range(1, 41)]
    ratios = sorted({Fraction(fact[i - 1], fact[j - 1]) for i in range(21, 41) for j in range(1, 41)})
    small = [r for r in ratios if r < 10]
    S = lambda k: k * k  # noqa: E731
    data = {
        "merge_n_n2_3": merge_oracle([1, 2, 3], [1, 4, 9]),
        "merge_n_n_3": merge_oracle([1, 2, 3], [1, 2, 3]),
        "log_stability_sup": math.log(3) / math.log(2),
        "intervals_k2": [[k * (k - 1) * (S(k + 1) - S(k)), k * (k + 1) * (S(k + 2) - S(k + 1))]
                         for k in range(1, 6)],
        "factorial_ratios_below_10": [float(r) for r in small if r >= Fraction(1, 10**6)],
        "piszczek_tame_N50": piszczek_oracle(l0, l0, lambda k: 2 * k, lambda k: k, 2, 4, 50),
        "piszczek_nontame_N60": piszczek_oracle(linf, l0, lambda k: 2 * k, lambda k: k * k, 3, 16, 60),
        "piszczek_nontame_N120": piszczek_oracle(linf, l0, lambda k: 2 * k, lambda k: k * k, 3, 16, 120),
        "e2_nontame_k2_m2": e2_search(linf, l0, lambda k: k + 1, lambda k: k * k, 2, 6, 200),
        "e2_tame_2k_m3": e2_search(l0, l0, lambda k: 2 * k, lambda k: 2 ** k, 3, 4, 400),
    }
    OUT.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
