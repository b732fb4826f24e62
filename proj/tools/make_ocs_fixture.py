"""Writes a synthetic OCS-shaped auction table.

3036 tract auctions, 584 of them with exactly two bidders. Three of the
two-bidder auctions carry a per-acre bid above $20000; the remaining 1162
per-acre bids have mean $991.48 and sample standard deviation $1825.43.
"""

import argparse
import csv

import numpy as np

TARGET_MEAN = 991.48
TARGET_SD = 1825.43
AUCTIONS = 3036
TWO_BIDDER = 584
OUTLIERS = 3
ACREAGES = np.array([1250.0, 2500.0, 3750.0, 5000.0, 5760.0])


def tuned_bids(rng, count):
    zero = rng.random(count) < 0.35
    z = rng.random(count)

    def shaped(p):
        y = np.where(zero, 0.0, z**p)
        return y / y.mean()

    lo, hi = 0.1, 20.0
    target_cv = TARGET_SD / TARGET_MEAN
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if shaped(mid).std(ddof=1) < target_cv:
            lo = mid
        else:
            hi = mid
    y = shaped(0.5 * (lo + hi))
    return y * TARGET_MEAN


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=1985)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    two = set(rng.choice(AUCTIONS, size=TWO_BIDDER, replace=False).tolist())
    outliers = set(rng.choice(sorted(two), size=OUTLIERS, replace=False).tolist())
    retained_bids = tuned_bids(rng, 2 * (TWO_BIDDER - OUTLIERS))
    cursor = 0

    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["auction_id", "bidder_id", "bid", "acreage", "year"])
        for a in range(AUCTIONS):
            acreage = float(rng.choice(ACREAGES))
            year = int(rng.integers(1954, 1971))
            if a in two:
                if a in outliers:
                    per_acre = [float(rng.uniform(25000, 60000)), float(rng.uniform(0, 3000))]
                else:
                    per_acre = retained_bids[cursor:cursor + 2].tolist()
                    cursor += 2
            else:
                k = int(rng.choice([1, 3, 4, 5, 6, 7, 8], p=[0.35, 0.2, 0.15, 0.1, 0.1, 0.05, 0.05]))
                per_acre = rng.lognormal(5.5, 1.4, size=k).tolist()
            for i, b in enumerate(per_acre):
                writer.writerow([f"T{a + 1:04d}", f"B{int(rng.integers(1, 400)):03d}-{i}",
                                 f"{b * acreage:.6f}", f"{acreage:.0f}", year])


if __name__ == "__main__":
    main()
