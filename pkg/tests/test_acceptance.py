"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from _games import (
    additive_game,
    dividend_oracle,
    dividend_table,
    glove_game,
    linear_model,
    permutation_oracle,
    random_table,
    structured_table,
    table_value,
)
from _report import verdict
from finshap import cli
from finshap.dataset import FeatureSchema, Group, LabeledDataset, SyntheticConfig, synthesize_panel
from finshap.game import Partition, TableGame, exact_shapley, kernel_shap, masking_game, partition_shapley, sampled_shapley
from finshap.metrics import roc_auc
from finshap.models import ModelKind, log_loss, logistic_objective, train_gbt, train_model, train_svm_rbf
from finshap.models.trees import ensemble_sum
from finshap.pipeline import explain_dataset

GLOVE = np.array([2 / 3, 1 / 6, 1 / 6])


# --- 1. exact oracle ---------------------------------------------------------------------------


def test_criterion_1_exact_oracle():
    fails = []
    err = np.abs(exact_shapley(glove_game()).phi - GLOVE).max()
    if err > 1e-12:
        fails.append(f"glove error {err:.2e}")
    rng = np.random.default_rng(1)
    for M in (1, 3, 6, 10, 16):
        # weights whose coalition sums are exact in binary floating point
        for w in (rng.integers(-50, 50, M).astype(float), rng.integers(-400, 400, M) / 64.0):
            if not np.array_equal(exact_shapley(additive_game(w)).phi, w):
                fails.append(f"additive M={M} not exact")
        w = rng.normal(size=M)
        if np.abs(exact_shapley(additive_game(w)).phi - w).max() > 1e-12:
            fails.append(f"additive M={M} (generic floats) beyond 1e-12")
    # small games against brute force over all M! orders
    for M in range(2, 8):
        table = random_table(M, rng)
        e = np.abs(exact_shapley(TableGame(table)).phi - permutation_oracle(table_value(table), M)).max()
        if e > 1e-12:
            fails.append(f"permutation oracle M={M} error {e:.2e}")
    # M=16: 16! orders is out of reach, so the oracle is the dividend split
    M = 16
    dividends = {(i,): rng.normal() for i in range(M)}
    for size in (2, 3, 4, 5):
        for _ in range(6):
            dividends[tuple(rng.choice(M, size, replace=False).tolist())] = rng.normal()
    game = TableGame(dividend_table(M, dividends))
    t0 = time.perf_counter()
    res = exact_shapley(game)
    elapsed = time.perf_counter() - t0
    e16 = np.abs(res.phi - dividend_oracle(M, dividends)).max()
    if elapsed >= 5.0:
        fails.append(f"M=16 took {elapsed:.2f}s")
    if e16 > 1e-12:
        fails.append(f"M=16 error {e16:.2e}")
    if res.evaluations_used != 1 << M:
        fails.append(f"M=16 used {res.evaluations_used} evaluations")
    verdict(1, fails, f"glove err {err:.1e}; M=16 in {elapsed:.2f}s, err {e16:.1e}")


# --- 2. kernel / exact equivalence -------------------------------------------------------------


def test_criterion_2_kernel_exact_equivalence():
    worst = 0.0
    for g in range(50):
        rng = np.random.default_rng(1000 + g)
        M = 2 + g % 9
        table = random_table(M, rng)
        k = kernel_shap(TableGame(table), "all", seed=g).phi
        worst = max(worst, np.abs(k - exact_shapley(TableGame(table)).phi).max())
    verdict(2, [] if worst <= 1e-8 else [f"max deviation {worst:.2e}"], f"50 games, max deviation {worst:.1e}")


# --- 3. axioms ------------------------------------------------------------------------------------


def test_criterion_3_axioms():
    fails = []
    eff = dummy_exact = dummy_kernel = sym = lin = 0.0
    for g in range(50):
        rng = np.random.default_rng(2000 + g)
        M = 2 + g % 9
        table = random_table(M, rng)
        target = table[-1] - table[0]
        eff = max(eff, abs(exact_shapley(TableGame(table)).phi.sum() - target))
        eff = max(eff, abs(kernel_shap(TableGame(table), "all", g).phi.sum() - target))
        eff = max(eff, abs(kernel_shap(TableGame(table), 2 * M + 7, g).phi.sum() - target))
        # dummy at position i: value ignores membership of i
        i = g % (M + 1)
        idx = np.arange(1 << (M + 1))
        ext = table[(idx & ((1 << i) - 1)) | ((idx >> (i + 1)) << i)]
        dummy_exact = max(dummy_exact, abs(exact_shapley(TableGame(ext)).phi[i]))
        dummy_kernel = max(dummy_kernel, abs(kernel_shap(TableGame(ext), "all", g).phi[i]))
        # symmetric pair (a, b)
        a, b = rng.choice(M, 2, replace=False)
        idx = np.arange(1 << M)
        ba, bb = (idx >> a) & 1, (idx >> b) & 1
        swapped = (idx & ~((1 << a) | (1 << b))) | (ba << b) | (bb << a)
        phi = exact_shapley(TableGame(table + table[swapped])).phi
        sym = max(sym, abs(phi[a] - phi[b]))
        # linearity
        u, w = random_table(M, rng), random_table(M, rng)
        al, be = rng.normal(size=2)
        lhs = exact_shapley(TableGame(al * u + be * w)).phi
        rhs = al * exact_shapley(TableGame(u)).phi + be * exact_shapley(TableGame(w)).phi
        lin = max(lin, np.abs(lhs - rhs).max())
    if eff > 1e-9:
        fails.append(f"efficiency {eff:.2e}")
    if dummy_exact != 0.0 or dummy_kernel > 1e-8:
        fails.append(f"dummy exact {dummy_exact:.2e} kernel {dummy_kernel:.2e}")
    if sym > 1e-12:
        fails.append(f"symmetry {sym:.2e}")
    if lin > 1e-12:
        fails.append(f"linearity {lin:.2e}")
    verdict(3, fails, f"efficiency {eff:.1e}, dummy {dummy_kernel:.1e}, symmetry {sym:.1e}, linearity {lin:.1e}")


# --- 4. sampling convergence ---------------------------------------------------------------------


def test_criterion_4_sampling_convergence():
    fails = []
    bracketed = 0
    ratios = []
    for g in range(10):
        table = structured_table(12, np.random.default_rng(3000 + g))
        exact = exact_shapley(TableGame(table)).phi
        res = sampled_shapley(TableGame(table), 20_000, seed=g)
        err = np.abs(res.phi - exact)
        ratio = err.max() / (exact.max() - exact.min())
        ratios.append(ratio)
        if ratio >= 0.01:
            fails.append(f"game {g}: error/range {ratio:.4f}")
        # players outside every synergy have zero-variance marginals; allow round-off there
        if (err <= 3 * res.stderr + 1e-12).all():
            bracketed += 1
    if bracketed < 9:
        fails.append(f"3-sigma bracket held in {bracketed}/10 games")
    verdict(4, fails, f"max error/range {max(ratios):.4f}; bracketed {bracketed}/10")


# --- 5. partition consistency -------------------------------------------------------------------


def test_criterion_5_partition_consistency():
    fails = []
    worst = 0.0
    for g in range(10):
        rng = np.random.default_rng(4000 + g)
        M = 2 + g % 9
        table = random_table(M, rng)
        got = partition_shapley(TableGame(table), Partition.singletons(M)).phi
        worst = max(worst, np.abs(got - exact_shapley(TableGame(table)).phi).max())
    rng = np.random.default_rng(5)
    w, x, bg = rng.normal(size=6) * 0.1, rng.normal(size=6), rng.normal(size=(4, 6))
    model = linear_model(w)
    a = partition_shapley(masking_game(model, x, bg, 1), Partition.singletons(6)).phi
    b = exact_shapley(masking_game(model, x, bg, 1)).phi
    worst = max(worst, np.abs(a - b).max())
    if worst > 1e-12:
        fails.append(f"singleton partition deviation {worst:.2e}")
    schema = FeatureSchema.from_groups(
        [(grp, [f"{grp.value}_{j}" for j in range(size)]) for grp, size in zip(Group, (3, 5, 4, 2))]
    )
    n = 5
    X = rng.normal(size=(n, 14))
    test = LabeledDataset(X, np.zeros(n, dtype=int), np.full(n, 2021), np.arange(n), schema)
    attr = explain_dataset(linear_model(rng.normal(size=14) * 0.1), test, rng.normal(size=(8, 14)), "partition")
    if attr.values.shape != (n, 4, 2) or (attr.evaluations != 16).any():
        fails.append(f"4-part evaluations {attr.evaluations.tolist()}")
    verdict(5, fails, f"singleton deviation {worst:.1e}; 4 groups -> 16 evaluations per instance per class")


# --- 6. metrics oracle ------------------------------------------------------------------------------


def pair_count_auc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    halves = 2 * (pos[:, None] > neg[None, :]).sum() + (pos[:, None] == neg[None, :]).sum()
    return float(halves) / (2 * len(pos) * len(neg))


def test_criterion_6_metrics_oracle():
    fails = []
    rng = np.random.default_rng(6)
    done = 0
    while done < 100:
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            continue
        # half the instances draw from a tiny grid, which forces ties
        s = rng.integers(0, 5, n) / 4.0 if done % 2 else np.round(rng.normal(size=n), 3)
        a = roc_auc(y, s)
        if a != pair_count_auc(y, s):
            fails.append(f"instance {done}: {a} vs {pair_count_auc(y, s)}")
        for f in (np.exp, lambda v: 2.0 * v + 1.0, np.arctan, lambda v: v**3):
            if roc_auc(y, f(s)) != a:
                fails.append(f"instance {done}: not invariant")
        done += 1
    verdict(6, fails[:3], "100 instances equal pair counting; invariant under 4 monotone maps")


# --- 7. model checks ------------------------------------------------------------------------------------


def kkt_violation(model, X, y, C):
    yy = np.where(y > 0, 1.0, -1.0)
    alpha = np.zeros(len(X))
    alpha[model.training_meta["support_indices"]] = np.abs(model.coef)
    m = yy * model.decision_function(X)
    worst = np.where(alpha <= 0, 1 - m, np.where(alpha >= C, m - 1, np.abs(m - 1))).max()
    return max(worst, abs(alpha @ yy))


def test_criterion_7_model_checks():
    fails = []
    rng = np.random.default_rng(7)
    # logistic gradient
    fd_err = 0.0
    for _ in range(10):
        X = rng.normal(size=(60, 4))
        y = (rng.random(60) < 0.5).astype(float)
        p = rng.normal(size=5)
        _, grad = logistic_objective(p, X, y, 0.5)
        fd = np.empty(5)
        for j in range(5):
            e = np.zeros(5)
            e[j] = 1e-6
            fd[j] = (logistic_objective(p + e, X, y, 0.5)[0] - logistic_objective(p - e, X, y, 0.5)[0]) / 2e-6
        fd_err = max(fd_err, np.linalg.norm(grad - fd) / np.linalg.norm(fd))
    if fd_err >= 1e-5:
        fails.append(f"logistic gradient error {fd_err:.2e}")
    # boosting loss per round, replayed from the stored trees
    gbt_bad = 0
    for d in range(20):
        r = np.random.default_rng(700 + d)
        X = r.normal(size=(150, 5))
        y = (X[:, 0] * X[:, 1] + r.normal(size=150) * r.uniform(0, 2) > 0).astype(int)
        m = train_gbt(X, y, {"n_rounds": 25, "seed": d, "learning_rate": r.uniform(0.05, 0.5)})
        margin = np.full(len(X), m.base_margin)
        losses = [log_loss(y.astype(float), margin)]
        for k in range(m.trees.n_trees()):
            f, thr, left, right, val = m.trees.tree(k)
            margin = margin + ensemble_sum(X, f, thr, left, right, val, np.zeros(1, dtype=np.int32))
            losses.append(log_loss(y.astype(float), margin))
        if (np.diff(losses) > 0).any():
            gbt_bad += 1
    if gbt_bad:
        fails.append(f"boosting loss rose in {gbt_bad}/20 datasets")
    # SVM KKT
    kkt = 0.0
    for d in range(10):
        r = np.random.default_rng(800 + d)
        X = r.normal(size=(60, 3))
        noise = 0.0 if d % 2 == 0 else 1.0
        y = (X[:, 0] - X[:, 1] + noise * r.normal(size=60) > 0).astype(int)
        m = train_svm_rbf(X, y, {"C": 2.0, "tol": 1e-3})
        kkt = max(kkt, kkt_violation(m, X, y, 2.0))
    if kkt > 1e-3:
        fails.append(f"SVM KKT violation {kkt:.2e}")
    # determinism
    X = rng.normal(size=(120, 6))
    y = (X[:, 0] + rng.normal(size=120) > 0).astype(int)
    for kind in ModelKind:
        hyper = {"seed": 9} if kind in (ModelKind.RANDOM_FOREST, ModelKind.GBT) else {}
        a = json.dumps(train_model(kind, X, y, hyper).to_dict())
        b = json.dumps(train_model(kind, X, y, hyper).to_dict())
        if a != b:
            fails.append(f"{kind.value} not deterministic")
    verdict(7, fails, f"gradient err {fd_err:.1e}; boosting 20/20 monotone; KKT {kkt:.1e}; 4 trainers deterministic")


# --- 8 and 9. default end-to-end run -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("default")
    t0 = time.perf_counter()
    codes = [cli.main([cmd, "--out", str(out)]) for cmd in ("train-eval", "explain", "validate")]
    return out, codes, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_8_planted_signal_recovery(default_run):
    out, codes, elapsed = default_run
    fails = []
    if codes != [0, 0, 0]:
        fails.append(f"exit codes {codes}")
    panel, truth = synthesize_panel(SyntheticConfig(), 0)
    informative = set(truth.informative_features)
    ranking = json.loads((out / "ranking.json").read_text())["ranking"]
    hits = len(informative & {e["position"] for e in ranking[:50]})
    if hits < 16:
        fails.append(f"{hits}/20 informative features in the top 50")
    acc = json.loads((out / "table2.json").read_text())["per_class"]["combined"]["accuracy"]
    if acc["top"] < acc["all"] - 0.05:
        fails.append(f"top-100 accuracy {acc['top']:.4f} vs all {acc['all']:.4f}")
    if acc["all_minus_bottom"] < acc["all"] - 0.02:
        fails.append(f"all-minus-bottom accuracy {acc['all_minus_bottom']:.4f} vs all {acc['all']:.4f}")
    if elapsed >= 1800:
        fails.append(f"runtime {elapsed:.0f}s")
    verdict(
        8,
        fails,
        f"{hits}/20 in top 50; accuracy all {acc['all']:.3f}, top-100 {acc['top']:.3f}, "
        f"minus bottom-100 {acc['all_minus_bottom']:.3f}; {elapsed / 60:.1f} min",
    )


@pytest.mark.slow
def test_criterion_9_protocol_fidelity(default_run):
    out, _, _ = default_run
    fails = []
    rows = json.loads((out / "table1.json").read_text())["rows"]
    cells = sorted((r["model"], r["features"]) for r in rows)
    want = sorted((k.value, f) for k in ModelKind for f in ("raw", "ratios"))
    if cells != want:
        fails.append(f"grid cells {cells}")
    if sorted({r["n_features"] for r in rows if r["features"] == "raw"}) != [301]:
        fails.append("raw grid rows are not 301 wide")
    t2 = json.loads((out / "table2.json").read_text())["per_class"]
    if list(t2) != ["class_0", "class_1", "combined"]:
        fails.append(f"sections {list(t2)}")
    for name, sec in t2.items():
        if sec["sizes"] != {"all": 301, "top": 100, "all_minus_bottom": 201}:
            fails.append(f"{name} sizes {sec['sizes']}")
    verdict(9, fails, f"table1 {len(rows)} rows (4 models x 2 feature sets); table2 301/100/201 for class 0, class 1, combined")


# --- 10. determinism ----------------------------------------------------------------------------------------


SMALL = {
    "seed": 5,
    "data": {"synthetic": {"n_companies": 40, "group_sizes": [4, 15, 12, 8], "n_informative": 5, "n_interactions": 1}},
    "model": {"kind": "GradientBoostedTrees", "hyper": {"n_rounds": 30}},
    "attribution": {"max_instances": 6, "background_size": 20},
    "ranking": {"k": 5, "top_n": 12, "bottom_m": 12, "group_k": 3, "n_worst": 5},
    "grid": {"hyper": {"RandomForest": {"n_trees": 20}}},
}


def test_criterion_10_determinism(tmp_path):
    fails = []
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    first, second = tmp_path / "first", tmp_path / "second"
    cmds = ("synthesize", "train-eval", "explain", "validate")
    for cmd in cmds:
        cli.main([cmd, "--config", str(cfg), "--out", str(first), "--workers", "1"])
    echoed = first / "config.json"
    for cmd in cmds:
        cli.main([cmd, "--config", str(echoed), "--out", str(second), "--workers", "4"])
    compared = 0
    for path in sorted(first.iterdir()):
        other = second / path.name
        if path.name == "config.json":
            a, b = json.loads(path.read_text()), json.loads(other.read_text())
            a.pop("output_dir"), b.pop("output_dir")
            same = a == b
        else:
            same = other.exists() and other.read_bytes() == path.read_bytes()
        compared += 1
        if not same:
            fails.append(f"{path.name} differs")
    if compared < 15:
        fails.append(f"only {compared} artifacts")
    verdict(10, fails, f"{compared} artifacts byte-identical across reruns with 1 and 4 workers")
