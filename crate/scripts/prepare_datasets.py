#!/usr/bin/env python3
"""Build the LETTER, ADULT and YEAST csv files used by the uci-lowdim benchmark.

The UCI repository is not always reachable, so the raw files are taken from
two PyPI wheels that ship them:

  * keel-ds      -- LETTER (all 20,000 rows) and the one-vs-rest YEAST
                    derivations, from which the 10-class YEAST labelling is
                    recovered (see ``rebuild_yeast``).
  * responsibly  -- the original UCI adult.data / adult.test pair.

Usage:
    python3 scripts/prepare_datasets.py [--out data] [--wheels DIR]

If --wheels is omitted the wheels are fetched with ``pip download``.
Output: <out>/{letter,adult,yeast}_{train,test}.csv, label column "class".
"""

import argparse
import collections
import csv
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

LETTER_TEST = 4000
YEAST_TEST = 446
SPLIT_SEED = 20170228

YEAST_FEATURES = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc"]
# KEEL numbers the yeast classes in this order in its derived file names.
YEAST_CLASSES = ["MIT", "NUC", "CYT", "ME1", "ME2", "ME3", "EXC", "VAC", "POX", "ERL"]
YEAST_COUNTS = {"CYT": 463, "NUC": 429, "MIT": 244, "ME3": 163, "ME2": 51,
                "ME1": 44, "EXC": 35, "VAC": 30, "POX": 20, "ERL": 5}

ADULT_COLUMNS = ["age", "workclass", "fnlwgt", "education", "education_num",
                 "marital_status", "occupation", "relationship", "race", "sex",
                 "capital_gain", "capital_loss", "hours_per_week", "native_country"]
ADULT_CATEGORICAL = {1, 3, 5, 6, 7, 8, 9, 13}


def find_wheel(wheel_dir, name):
    hits = glob.glob(os.path.join(wheel_dir, f"{name}-*.whl"))
    if not hits:
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                               "-q", "-d", wheel_dir, name.replace("_", "-")])
        hits = glob.glob(os.path.join(wheel_dir, f"{name}-*.whl"))
    if not hits:
        sys.exit(f"could not obtain wheel for {name}")
    return zipfile.ZipFile(sorted(hits)[-1])


def keel_rows(zf, member):
    text = zf.read(member).decode()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([c.strip() for c in line.split(",")])
    return rows


def stratified_test_split(labels, n_test, seed):
    rng = np.random.RandomState(seed)
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    exact = counts * n_test / len(labels)
    take = np.floor(exact).astype(int)
    order = np.argsort(-(exact - take), kind="stable")
    for i in order[: n_test - take.sum()]:
        take[i] += 1
    test = []
    for cls, k in zip(classes, take):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        test.extend(idx[:k].tolist())
    test_mask = np.zeros(len(labels), dtype=bool)
    test_mask[test] = True
    return np.flatnonzero(~test_mask), np.flatnonzero(test_mask)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def build_letter(keel, out):
    rows = keel_rows(keel, "keel_ds/data/balanced/raw/letter.dat")
    assert len(rows) == 20000, len(rows)
    labels = [r[-1] for r in rows]
    train, test = stratified_test_split(labels, LETTER_TEST, SPLIT_SEED)
    header = [f"x{i}" for i in range(16)] + ["class"]
    write_csv(os.path.join(out, "letter_train.csv"), header, [rows[i] for i in train])
    write_csv(os.path.join(out, "letter_test.csv"), header, [rows[i] for i in test])
    print(f"letter: {len(train)} train / {len(test)} test")


def key8(vals):
    return tuple(round(float(v), 2) for v in vals)


def rebuild_yeast(keel):
    """Recover the 10-class labelling from KEEL's binary derivations.

    Every derivation is a subset of the same 1,484 rows, so each class count
    per distinct feature vector can be solved for by inclusion/exclusion.
    """
    base = "keel_ds/data/imbalanced/raw/"

    def load(name, drop_pox=False):
        pos, neg = collections.Counter(), collections.Counter()
        for r in keel_rows(keel, base + name + ".dat"):
            feats = r[:-1]
            k = key8(feats)
            if drop_pox:
                k = k[:5] + k[6:] if len(k) == 8 else k
            (pos if r[-1] == "positive" else neg)[k] += 1
        return pos, neg

    full_rows = [r for r in keel_rows(keel, base + "yeast1.dat")]
    total = collections.Counter(key8(r[:-1]) for r in full_rows)
    one_vs_rest = {"NUC": "yeast1", "ME3": "yeast3", "ME2": "yeast4", "ME1": "yeast5", "EXC": "yeast6"}
    per_class = {c: load(f)[0] for c, f in one_vs_rest.items()}
    per_class["CYT"] = load("yeast-2_vs_4")[1]
    per_class["POX"] = load("yeast-2_vs_8")[0]
    vac7 = load("yeast-1_vs_7", drop_pox=True)[0]
    erl_pool = load("yeast-1-2-8-9_vs_7")[1]

    counts = {}
    for k, n in total.items():
        c = {cls: per_class[cls][k] for cls in per_class}
        c["VAC"] = 0
        c["ERL"] = max(0, erl_pool[k] - c["NUC"] - c["CYT"] - c["POX"])
        counts[k] = c
    # VAC rows are identified on 7 features (pox dropped); resolve to 8-d keys.
    for k7, n in vac7.items():
        cands = [k for k in total if k[:5] + k[6:] == k7]
        for k in cands:
            free = total[k] - sum(counts[k].values())
            take = min(free, n)
            counts[k]["VAC"] += take
            n -= take
        assert n == 0, ("unresolved VAC rows", k7)
    for k, c in counts.items():
        c["MIT"] = total[k] - sum(c.values())
        assert c["MIT"] >= 0, (k, c)

    tally = collections.Counter()
    for c in counts.values():
        tally.update({cls: v for cls, v in c.items() if v})
    assert dict(tally) == YEAST_COUNTS, tally

    rows = []
    for k in sorted(counts):
        for cls in YEAST_CLASSES:
            rows.extend([list(k) + [cls]] * counts[k][cls])
    return rows


def build_yeast(keel, out):
    rows = rebuild_yeast(keel)
    labels = [r[-1] for r in rows]
    train, test = stratified_test_split(labels, YEAST_TEST, SPLIT_SEED)
    header = YEAST_FEATURES + ["class"]
    fmt = lambda r: [f"{v:.2f}" for v in r[:-1]] + [r[-1]]
    write_csv(os.path.join(out, "yeast_train.csv"), header, [fmt(rows[i]) for i in train])
    write_csv(os.path.join(out, "yeast_test.csv"), header, [fmt(rows[i]) for i in test])
    print(f"yeast: {len(train)} train / {len(test)} test")


def build_adult(resp, out):
    def parse(member):
        rows = []
        for line in resp.read(member).decode().splitlines():
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != 15:
                continue
            cells[-1] = cells[-1].rstrip(".")
            rows.append(cells)
        return rows

    train = parse("responsibly/dataset/adult/adult.data")
    test = parse("responsibly/dataset/adult/adult.test")
    # Nominal columns become integer codes, ordered by first appearance in
    # the training file; "?" is kept as its own category.
    codes = {j: {} for j in ADULT_CATEGORICAL}
    for r in train:
        for j in ADULT_CATEGORICAL:
            codes[j].setdefault(r[j], len(codes[j]))

    def encode(r):
        out_row = []
        for j, v in enumerate(r[:-1]):
            if j in ADULT_CATEGORICAL:
                out_row.append(str(codes[j].setdefault(v, len(codes[j]))))
            else:
                out_row.append(v)
        return out_row + [r[-1]]

    header = ADULT_COLUMNS + ["class"]
    write_csv(os.path.join(out, "adult_train.csv"), header, [encode(r) for r in train])
    write_csv(os.path.join(out, "adult_test.csv"), header, [encode(r) for r in test])
    print(f"adult: {len(train)} train / {len(test)} test")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data")
    ap.add_argument("--wheels", default=None)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    wheel_dir = args.wheels or tempfile.mkdtemp(prefix="gcforest-wheels-")
    keel = find_wheel(wheel_dir, "keel_ds")
    resp = find_wheel(wheel_dir, "responsibly")
    build_letter(keel, args.out)
    build_yeast(keel, args.out)
    build_adult(resp, args.out)


if __name__ == "__main__":
    main()
