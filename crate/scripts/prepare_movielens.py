#!/usr/bin/env python3
"""Convert MovieLens ratings into the contextnet data/schema format.

Accepted sources:
  --ml1m DIR     GroupLens ml-1m (ratings.dat, users.dat, movies.dat)
  --ml100k DIR   GroupLens ml-100k (u.data, u.user, u.item)
  --recbole PATH recbole atomic files (ml-100k.inter/.user/.item), either a
                 directory or a recbole wheel containing dataset_example/ml-100k

Ratings above 3 become label 1, ratings below 3 label 0, and ratings of
exactly 3 are dropped. Seven categorical fields are written: user_id,
movie_id, gender, age, occupation, zip, genres.
"""

import argparse
import io
import os
import sys
import zipfile

FIELDS = ["user_id", "movie_id", "gender", "age", "occupation", "zip", "genres"]

ML100K_GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def age_bucket(age):
    """ml-1m age codes."""
    for bound, code in ((18, "1"), (25, "18"), (35, "25"), (45, "35"), (50, "45"), (56, "50")):
        if age < bound:
            return code
    return "56"


def label_of(rating):
    if rating > 3:
        return "1"
    if rating < 3:
        return "0"
    return None


def read_ml1m(root):
    def lines(name):
        with open(os.path.join(root, name), encoding="latin-1") as fh:
            for line in fh:
                yield line.rstrip("\n").split("::")

    users = {u: (g, a, o, z) for u, g, a, o, z in lines("users.dat")}
    movies = {m: "|".join(sorted(g.split("|"))) for m, _, g in lines("movies.dat")}
    for u, m, r, _ in lines("ratings.dat"):
        yield u, m, float(r), users[u], movies[m]


def read_ml100k(root):
    def lines(name, sep):
        with open(os.path.join(root, name), encoding="latin-1") as fh:
            for line in fh:
                yield line.rstrip("\n").split(sep)

    users = {u: (g, age_bucket(int(a)), o, z) for u, a, g, o, z in lines("u.user", "|")}
    movies = {}
    for row in lines("u.item", "|"):
        flags = row[5:]
        movies[row[0]] = "|".join(sorted(g for g, f in zip(ML100K_GENRES, flags) if f == "1"))
    for u, m, r, _ in lines("u.data", "\t"):
        yield u, m, float(r), users[u], movies[m]


def read_recbole(path):
    if os.path.isdir(path):
        def load(ext):
            with open(os.path.join(path, "ml-100k." + ext), encoding="latin-1") as fh:
                return fh.read()
    else:
        wheel = zipfile.ZipFile(path)

        def load(ext):
            raw = wheel.read("recbole/dataset_example/ml-100k/ml-100k." + ext)
            return raw.decode("latin-1")

    def rows(ext):
        text = io.StringIO(load(ext))
        next(text)
        for line in text:
            yield line.rstrip("\n").split("\t")

    users = {u: (g, age_bucket(int(a)), o, z) for u, a, g, o, z in rows("user")}
    movies = {m: "|".join(sorted(c.split(" "))) for m, _, _, c in rows("item")}
    for u, m, r, _ in rows("inter"):
        yield u, m, float(r), users[u], movies[m]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--ml1m")
    src.add_argument("--ml100k")
    src.add_argument("--recbole")
    ap.add_argument("--out", default="data/movielens")
    args = ap.parse_args()

    if args.ml1m:
        rows = read_ml1m(args.ml1m)
    elif args.ml100k:
        rows = read_ml100k(args.ml100k)
    else:
        rows = read_recbole(args.recbole)

    os.makedirs(args.out, exist_ok=True)
    kept = positives = 0
    with open(os.path.join(args.out, "data.tsv"), "w", encoding="utf-8", newline="\n") as out:
        for user, movie, rating, (gender, age, occupation, zipcode), genres in rows:
            label = label_of(rating)
            if label is None:
                continue
            values = [user, movie, gender, age, occupation, zipcode, genres]
            out.write("\t".join([label] + [v.replace("\t", " ") for v in values]) + "\n")
            kept += 1
            positives += label == "1"
    with open(os.path.join(args.out, "schema.tsv"), "w", encoding="utf-8", newline="\n") as out:
        for name in FIELDS:
            out.write(f"{name}\tcat\n")
    print(f"wrote {kept} rows ({positives / max(kept, 1):.3f} positive) to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
