"""Smoke test for the herdtrack Python extension.

Build and install first, e.g.  cd crates/python && maturin develop --release
"""

import json
import time

import herdtrack as ht


def check(name, cond):
    print(("PASS" if cond else "FAIL"), name)
    if not cond:
        raise SystemExit(1)


def main():
    # masks and the RLE codec
    m = ht.Mask.rect(20, 10, 2, 3, 5, 4)
    check("mask area", m.area == 20)
    rle = m.to_rle()
    check("rle layout", rle["size"] == [10, 20] and sum(rle["counts"]) == 200)
    check("rle round trip", ht.Mask.from_rle(rle) == m)
    check("rle from json text", ht.Mask.from_rle(json.dumps(rle)) == m)
    check("centroid", m.centroid() == (4.0, 4.5))
    check("bbox", m.bbox() == [2.0, 3.0, 5.0, 4.0])
    rows = [[x in (0, 1, 4) for x in range(5)] for _ in range(3)]
    two = ht.Mask(5, 3, rows)
    check("components", [c.area for c in two.components()] == [6, 3])
    check("iou", abs(m.iou(ht.Mask.rect(20, 10, 2, 3, 5, 2)) - 0.5) < 1e-12)

    # metric arithmetic
    check("mota", abs(ht.mota(13, 0, 0, 1306) - 0.99) < 1e-4)
    p, r, f1 = ht.precision_recall_f1(5867, 814, 2315)
    check("prf", (round(p, 4), round(r, 4), round(f1, 4)) == (0.8782, 0.7171, 0.7895))
    check("jf", ht.jf_mean(0.83, 0.92) == 0.875)
    check("boundary f of identical masks", ht.boundary_f(m, m) == 1.0)
    mapping, total = ht.hungarian([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    check("hungarian", mapping == [1, 0, 2] and total == 5.0)

    # refinement: a far satellite is dropped
    blob = ht.Mask.rect(200, 200, 10, 10, 50, 40)
    rows = blob.to_rows()
    for y in range(150, 160):
        for x in range(150, 190):
            rows[y][x] = True
    cleaned, c = ht.refine_mask(ht.Mask(200, 200, rows), [[0, 0], [200, 0], [200, 200], [0, 200]])
    check("refine keeps main blob", cleaned == blob and c == (34.5, 29.5))

    # end to end on a small synthetic scenario
    t0 = time.time()
    out = ht.simulate_and_track({"seed": 1, "n_clips": 2, "frames_per_clip": 40})
    report = ht.evaluate(out["tracks"], out["gt"])
    check("tracking mota", report["tracking"]["MOTA"] == 1.0)
    check("tracking idsw", report["tracking"]["IDSW"] == 0)
    check("segmentation J", report["segmentation"]["J"] == 1.0)
    check("no qc flags", out["tracks"]["qc"] == [])
    print(f"end-to-end in {time.time() - t0:.2f} s")

    try:
        ht.simulate_and_track({"n_agents": 3, "bogus": 1})
    except ValueError as e:
        check("unknown spec key rejected", "bogus" in str(e))
    else:
        check("unknown spec key rejected", False)


if __name__ == "__main__":
    main()
