"""Generate the bundled surrogate student dataset.

The pipeline's test suite needs a dataset file with the public student
schema, but the repository does not vendor the original file. This script
builds a synthetic stand-in with the same 33-column layout whose G1/G2
grade columns reproduce the published moment statistics (mean, standard
deviation, skewness, excess kurtosis under the biased estimator) and
whose attribute columns carry a known correlation structure:

  * the audit reference features (Medu, Fedu, studytime, famrel,
    freetime, absences, age) correlate positively with G3, in that order;
  * failures carries the strongest correlation by magnitude (negative),
    so magnitude-ranked selection surfaces it first while signed ranking
    sinks it;
  * every other attribute stays near the sampling-noise floor.

Output is data/student-mat-surrogate.csv in the source format (semicolon
delimited, quoted strings). The generation is fully deterministic; rerun
the script to reproduce the identical file.
"""

from __future__ import annotations

import math
import random
import sys
from math import fsum
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from studentperf.dataset import COLUMNS, records_to_csv, parse_csv, encode  # noqa: E402
from studentperf.stats import correlation_matrix, moments, select_features  # noqa: E402

OUT_PATH = REPO / "data" / "student-mat-surrogate.csv"

N = 395

# Published grade statistics the surrogate must reproduce (biased
# estimator: population std, g1 skewness, g2 excess kurtosis).
G1_TARGET = dict(mean=10.910, std=3.3125, skew=0.240613, kurt=-0.693830)
G2_TARGET = dict(mean=10.714, std=3.760, skew=-0.431645, kurt=0.627706)

SOLVE_TOL = dict(mean=3e-3, std=4e-3, skew=1.5e-4, kurt=1.5e-4)

# Final-grade histogram: value -> count (sums to 395, mean ~10.42).
G3_COUNTS = {
    0: 38, 4: 1, 5: 7, 6: 15, 7: 9, 8: 32, 9: 28, 10: 56, 11: 47,
    12: 31, 13: 31, 14: 27, 15: 33, 16: 16, 17: 6, 18: 12, 19: 5, 20: 1,
}

# Marginal counts for the attribute columns (realistic shapes; the exact
# numbers are not contractual).
ATTR_COUNTS: dict[str, dict] = {
    "school": {"GP": 349, "MS": 46},
    "sex": {"F": 208, "M": 187},
    "age": {15: 82, 16: 104, 17: 98, 18: 82, 19: 24, 20: 3, 21: 1, 22: 1},
    "address": {"U": 307, "R": 88},
    "famsize": {"GT3": 281, "LE3": 114},
    "Pstatus": {"T": 354, "A": 41},
    "Medu": {0: 3, 1: 59, 2: 103, 3: 99, 4: 131},
    "Fedu": {0: 2, 1: 82, 2: 115, 3: 100, 4: 96},
    "Mjob": {"at_home": 59, "health": 34, "other": 141, "services": 103,
             "teacher": 58},
    "Fjob": {"at_home": 20, "health": 18, "other": 217, "services": 111,
             "teacher": 29},
    "reason": {"course": 145, "home": 109, "other": 36, "reputation": 105},
    "guardian": {"mother": 273, "father": 90, "other": 32},
    "traveltime": {1: 257, 2: 107, 3: 23, 4: 8},
    "studytime": {1: 105, 2: 198, 3: 65, 4: 27},
    "failures": {0: 312, 1: 50, 2: 17, 3: 16},
    "schoolsup": {"yes": 51, "no": 344},
    "famsup": {"yes": 242, "no": 153},
    "paid": {"yes": 181, "no": 214},
    "activities": {"yes": 201, "no": 194},
    "nursery": {"yes": 314, "no": 81},
    "higher": {"yes": 375, "no": 20},
    "internet": {"yes": 329, "no": 66},
    "romantic": {"yes": 132, "no": 263},
    "famrel": {1: 8, 2: 18, 3: 68, 4: 195, 5: 106},
    "freetime": {1: 19, 2: 64, 3: 157, 4: 115, 5: 40},
    "goout": {1: 23, 2: 103, 3: 130, 4: 86, 5: 53},
    "Dalc": {1: 276, 2: 75, 3: 26, 4: 9, 5: 9},
    "Walc": {1: 151, 2: 85, 3: 80, 4: 51, 5: 28},
    "health": {1: 47, 2: 45, 3: 91, 4: 66, 5: 146},
}

# Coupling of each column to the latent ability score. Unlisted columns
# are pure noise. Order within the audit features fixes their signed
# ranking against G3.
COUPLING = {
    "G3": 0.97, "G2": 0.90, "G1": 0.82,
    # skewed marginals attenuate rank coupling, hence the uneven values
    "Medu": 0.72, "Fedu": 0.68, "studytime": 0.66, "famrel": 0.62,
    "freetime": 0.58, "absences": 0.65, "age": 0.55,
    "failures": -0.93,
    "goout": -0.10, "Dalc": -0.08, "Walc": -0.08, "traveltime": -0.07,
    "health": -0.05,
}

AUDIT_FEATURES = ("Medu", "Fedu", "studytime", "famrel", "freetime",
                  "absences", "age")


def _sums_of(counts: dict[int, int]) -> list[float]:
    return [float(sum(c * v ** k for v, c in counts.items()))
            for k in (1, 2, 3, 4)]


def _moments_from_sums(s: list[float]) -> dict:
    # raw power sums are integers below 2^53, so this is exact until the
    # final divisions
    m1 = s[0] / N
    m2 = s[1] / N - m1 ** 2
    m3 = s[2] / N - 3.0 * m1 * s[1] / N + 2.0 * m1 ** 3
    m4 = (s[3] / N - 4.0 * m1 * s[2] / N + 6.0 * m1 ** 2 * s[1] / N
          - 3.0 * m1 ** 4)
    return dict(mean=m1, std=math.sqrt(m2), skew=m3 / m2 ** 1.5,
                kurt=m4 / m2 ** 2 - 3.0)


def hist_moments(counts: dict[int, int]) -> dict:
    return _moments_from_sums(_sums_of(counts))


def _objective(m: dict, target: dict) -> float:
    return sum(((m[k] - target[k]) / SOLVE_TOL[k]) ** 2 for k in target)


def within_tol(counts: dict[int, int], target: dict) -> bool:
    m = hist_moments(counts)
    return all(abs(m[k] - target[k]) <= SOLVE_TOL[k] for k in target)


def _move_delta(a: int, b: int) -> list[float]:
    return [float(b ** k - a ** k) for k in (1, 2, 3, 4)]


def solve_histogram(target: dict, rng: random.Random) -> dict[int, int]:
    """Fit an integer histogram over 0..20 onto the target moments.

    Phase 1 anneals with single count moves; phase 2 greedily applies the
    best pair of moves per sweep, whose near-cancelling effects reach the
    1e-4-scale skew/kurtosis tolerances single moves cannot hit.
    """
    counts = {v: 0 for v in range(21)}
    for _ in range(N):
        v = int(round(rng.gauss(target["mean"], target["std"])))
        counts[min(20, max(0, v))] += 1
    sums = _sums_of(counts)
    cur_obj = _objective(_moments_from_sums(sums), target)
    temp = 4.0
    for _ in range(60_000):
        temp = max(0.05, temp * 0.9997)
        src = rng.choice([v for v, c in counts.items() if c > 0])
        dst = src + rng.choice((-3, -2, -1, 1, 2, 3))
        if not 0 <= dst <= 20:
            continue
        delta = _move_delta(src, dst)
        trial = [s + d for s, d in zip(sums, delta)]
        obj = _objective(_moments_from_sums(trial), target)
        if obj <= cur_obj or rng.random() < math.exp((cur_obj - obj) / temp):
            counts[src] -= 1
            counts[dst] += 1
            sums, cur_obj = trial, obj

    def polish(counts, sums, cur_obj, max_sweeps=40):
        """Greedy best pair-of-moves until no pair improves."""
        for _ in range(max_sweeps):
            if within_tol(counts, target):
                return counts, sums, cur_obj
            single = [(a, b) for a in range(21) if counts[a] > 0
                      for b in range(21) if b != a]
            deltas = {mv: _move_delta(*mv) for mv in single}
            best, best_obj = None, cur_obj
            for mv1 in single:
                part = [s + d for s, d in zip(sums, deltas[mv1])]
                obj1 = _objective(_moments_from_sums(part), target)
                if obj1 < best_obj:
                    best, best_obj = (mv1,), obj1
                for mv2 in single:
                    if mv2[0] == mv1[0] and counts[mv1[0]] < 2:
                        continue
                    trial = [p + d for p, d in zip(part, deltas[mv2])]
                    obj2 = _objective(_moments_from_sums(trial), target)
                    if obj2 < best_obj:
                        best, best_obj = (mv1, mv2), obj2
            if best is None:
                break
            for a, b in best:
                counts[a] -= 1
                counts[b] += 1
                sums = [s + d for s, d in zip(sums, _move_delta(a, b))]
            cur_obj = best_obj
        return counts, sums, cur_obj

    # iterated local search: polish, then kick out of local minima
    counts, sums, cur_obj = polish(counts, sums, cur_obj)
    best_counts, best_obj = dict(counts), cur_obj
    for _ in range(120):
        if within_tol(best_counts, target):
            return best_counts
        for _ in range(3):  # kick
            src = rng.choice([v for v, c in counts.items() if c > 0])
            dst = min(20, max(0, src + rng.choice((-2, -1, 1, 2))))
            if dst == src:
                continue
            counts[src] -= 1
            counts[dst] += 1
            sums = [s + d for s, d in zip(sums, _move_delta(src, dst))]
        cur_obj = _objective(_moments_from_sums(sums), target)
        counts, sums, cur_obj = polish(counts, sums, cur_obj)
        if cur_obj < best_obj:
            best_counts, best_obj = dict(counts), cur_obj
    if within_tol(best_counts, target):
        return best_counts
    raise RuntimeError(f"histogram solve did not converge: obj={best_obj}")


def rank_assign(multiset: list, ability: list[float], coupling: float,
                rng: random.Random) -> list:
    """Assign a fixed multiset of values to students by noisy-rank
    coupling: corr(score, ability) == coupling before quantization.
    Preserves the marginal exactly."""
    noise_scale = math.sqrt(max(0.0, 1.0 - coupling * coupling))
    scores = [coupling * a + noise_scale * rng.gauss(0.0, 1.0)
              for a in ability]
    order = sorted(range(len(ability)), key=scores.__getitem__)
    values = sorted(multiset)
    out = [None] * len(ability)
    for rank, student in enumerate(order):
        out[student] = values[rank]
    return out


def expand(counts: dict) -> list:
    out = []
    for v, c in counts.items():
        out.extend([v] * c)
    return out


def draw_absences(rng: random.Random) -> list[int]:
    """Mostly-even absence counts with a long thin tail."""
    vals = []
    for _ in range(N):
        if rng.random() < 0.29:
            vals.append(0)
        else:
            v = 2 * min(int(rng.expovariate(0.28)) + 1, 28)
            if rng.random() < 0.12:
                v += 1
            vals.append(min(v, 75))
    return vals


def build_rows(seed: int = 20260809) -> list[dict]:
    rng = random.Random(seed)
    g1_counts = solve_histogram(G1_TARGET, rng)
    g2_counts = solve_histogram(G2_TARGET, rng)
    for name, counts, target in (("G1", g1_counts, G1_TARGET),
                                 ("G2", g2_counts, G2_TARGET)):
        m = hist_moments(counts)
        print(f"{name}: mean={m['mean']:.4f} std={m['std']:.4f} "
              f"skew={m['skew']:.6f} kurt={m['kurt']:.6f}")
        assert within_tol(counts, target), name

    ability = [rng.gauss(0.0, 1.0) for _ in range(N)]
    columns: dict[str, list] = {}
    columns["G1"] = rank_assign(expand(g1_counts), ability,
                                COUPLING["G1"], rng)
    columns["G2"] = rank_assign(expand(g2_counts), ability,
                                COUPLING["G2"], rng)
    columns["G3"] = rank_assign(expand(G3_COUNTS), ability,
                                COUPLING["G3"], rng)
    for col, counts in ATTR_COUNTS.items():
        multiset = expand(counts)
        coupling = COUPLING.get(col, 0.0)
        if isinstance(multiset[0], str):
            # nominal: no meaningful order, assign at random
            rng.shuffle(multiset)
            columns[col] = multiset
        else:
            columns[col] = rank_assign(multiset, ability, coupling, rng)
    columns["absences"] = rank_assign(draw_absences(rng), ability,
                                      COUPLING["absences"], rng)
    rows = []
    for i in range(N):
        rows.append({col: columns[col][i] for col in COLUMNS})
    return rows


def verify(path: Path) -> None:
    records = parse_csv(path)
    assert len(records) == N, len(records)
    matrix = encode(records)

    for col, target in (("G1", G1_TARGET), ("G2", G2_TARGET)):
        m = moments(matrix.column(col))
        assert abs(m.skewness - target["skew"]) < 5e-4, (col, m.skewness)
        assert abs(m.excess_kurtosis - target["kurt"]) < 5e-4, \
            (col, m.excess_kurtosis)
        assert abs(m.mean - target["mean"]) < 5e-3, (col, m.mean)
        assert abs(m.std - target["std"]) < 5e-3, (col, m.std)

    corr = correlation_matrix(matrix)
    ranking = select_features(corr, mode="signed_desc",
                              aggregation="single_target", k=7,
                              single_target="G3")
    top7 = set(ranking.feature_names())
    overlap = top7 & set(AUDIT_FEATURES)
    print("signed top-7 vs G3:", ranking.features)
    assert len(overlap) == 7, f"audit overlap {len(overlap)}: {sorted(top7)}"

    r_fail = corr.entry("failures", "G3")
    strongest = max(
        (abs(corr.entry(c, "G3")), c)
        for c in corr.labels if c not in ("G1", "G2", "G3"))
    assert strongest[1] == "failures" and r_fail < 0, strongest
    print(f"failures vs G3: r={r_fail:.3f} (strongest magnitude)")

    nuisance = [c for c in corr.labels
                if c not in ("G1", "G2", "G3", "failures") and
                c not in AUDIT_FEATURES]
    worst = max((abs(corr.entry(c, "G3")), c) for c in nuisance)
    audit_min = min((corr.entry(c, "G3"), c) for c in AUDIT_FEATURES)
    print(f"weakest audit feature: {audit_min}, "
          f"strongest nuisance: {worst}")
    assert audit_min[0] > worst[0] + 0.04, "ranking margin too thin"


def main() -> None:
    rows = build_rows()
    records = parse_csv(_rows_to_csv_text(rows))
    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    records_to_csv(records, OUT_PATH)
    verify(OUT_PATH)
    print(f"wrote {OUT_PATH} ({len(rows)} rows)")


def _rows_to_csv_text(rows: list[dict]) -> str:
    lines = [";".join(COLUMNS)]
    for row in rows:
        cells = []
        for col in COLUMNS:
            v = row[col]
            cells.append(f'"{v}"' if isinstance(v, str) else str(v))
        lines.append(";".join(cells))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    main()
