"""Record doro_ratio over the scalar corpus; writes tests/data/doro_ratios.json."""

import json
import pathlib

from bdvarmin.spaces import SCALAR_CORPUS, corpus_field, doro_ratio

PARAMS = [(0.25, 2.0), (0.5, 2.0), (0.5, 1.5), (0.75, 2.0)]
SIZES = (16, 32, 64)


def main() -> None:
    rows = []
    for s, p in PARAMS:
        for name in SCALAR_CORPUS:
            for n in SIZES:
                r = doro_ratio(corpus_field(name, n), s, p)
                rows.append({"s": s, "p": p, "field": name, "n": n, "ratio": float(f"{r:.17g}")})
                print(f"s={s} p={p} {name:5s} n={n:3d} ratio={r:.6f}")
    ratios = [r["ratio"] for r in rows]
    print(f"range [{min(ratios):.4f}, {max(ratios):.4f}]")
    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "doro_ratios.json"
    out.write_text(json.dumps(rows, indent=1) + "\n")


if __name__ == "__main__":
    main()
