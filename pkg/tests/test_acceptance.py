"""Acceptance suite. Each criterion prints one PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
complete. A5 runs the full default noise sweep and dominates the runtime.
"""

import time

import numpy as np
import pytest

from robustxfer.classifier_core import (ModelParams, forward, grad_check,
                                        init_params, loss, save_checkpoint)
from robustxfer.cli import main
from robustxfer.crosslingual_eval import (AlignedPairs, language_distance,
                                          spearman_rho)
from robustxfer.embedding_space import (EmbeddedSequence, EmbeddingMatrix,
                                        SynonymSet, Vocabulary, encode)
from robustxfer.robust_training import (Dataset, PerturbationSpec,
                                        TrainingConfig, augment_dataset,
                                        inner_max_perturbation,
                                        sample_uniform_linf, train_adversarial,
                                        train_normal, train_rs_augment)
from robustxfer.seeding import derived_rng
from robustxfer.smoothed_inference import (enumerate_smoothed_predict,
                                           sample_smoothed_predict)
from robustxfer.synthetic_langs import ToyTaskSpec, noise_sweep


def report(name, ok, detail):
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def random_model(rng, d, hidden, n_classes, rows=6):
    emb = EmbeddingMatrix(rng.normal(size=(rows, d)))
    return init_params(emb, hidden, n_classes, rng)


def test_a1_gradient_fidelity():
    """A1: 100 random models, max relative error vs central differences."""
    started = time.monotonic()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 9))
        depth = int(rng.integers(0, 3))
        hidden = tuple(int(rng.integers(1, 9)) for _ in range(depth))
        n_classes = int(rng.integers(2, 5))
        params = random_model(rng, d, hidden, n_classes)
        n = int(rng.integers(1, 5))
        mask = np.ones(n, dtype=bool)
        if n > 1 and rng.random() < 0.3:
            mask[-1] = False
        seq = EmbeddedSequence(rng.normal(size=(n, d)), mask)
        label = int(rng.integers(n_classes))
        worst = max(worst, grad_check(params, seq, label, h=1e-5))
    elapsed = time.monotonic() - started
    report("A1", worst < 1e-4 and elapsed < 30.0,
           f"max_rel_err={worst:.3e} (<1e-4), runtime={elapsed:.1f}s (<30s)")


def test_a2_constraints_and_equivalences(tmp_path):
    """A2: every delta inside the ball over 1e5 trials; degenerate configs
    reproduce plain training bit for bit."""
    rng = np.random.default_rng(202)
    violations = 0
    trials = 0
    # 90k uniform-ball draws
    for _ in range(90_000):
        eps = float(rng.uniform(0, 2.0))
        delta = sample_uniform_linf(2, 3, eps, rng)
        violations += int(np.any(np.abs(delta) > eps))
        trials += 1
    # 10k inner-max perturbations on small random models
    for i in range(10_000):
        if i % 100 == 0:
            d = int(rng.integers(1, 4))
            params = random_model(rng, d, (), 2, rows=4)
        eps = float(rng.uniform(0, 1.0))
        mask = np.array([True, i % 2 == 0])
        seq = EmbeddedSequence(rng.normal(size=(2, d)), mask)
        spec = PerturbationSpec("adversarial", eps, 2)
        delta = inner_max_perturbation(params, seq, 0, spec, rng)
        violations += int(np.any(np.abs(delta) > eps))
        violations += int(np.any(delta[~mask] != 0.0))
        trials += 1

    # bit-identical degenerate equivalences
    gen = np.random.default_rng(203)
    rows = np.vstack([gen.normal(size=(8, 4)) + 2.0,
                      gen.normal(size=(8, 4)) - 2.0, np.zeros((2, 4))])
    emb = EmbeddingMatrix(rows)
    vocab = Vocabulary.with_specials([f"t{i}" for i in range(16)])
    examples = tuple((tuple(int(x) for x in gen.integers(8 * c, 8 * (c + 1), size=3)), c)
                     for c in (0, 1) for _ in range(12))
    data = Dataset(examples, 2)

    def ckpt(name, params):
        path = tmp_path / name
        save_checkpoint(path, params, vocab)
        return path.read_bytes()

    base = ckpt("normal.ckpt", train_normal(
        data, TrainingConfig(method="normal", epochs=4, seed=17), emb))
    adv = ckpt("adv.ckpt", train_adversarial(
        data, TrainingConfig(method="adv", epochs=4, seed=17,
                             perturb=PerturbationSpec("adversarial", 0.0, 3)), emb))
    aug = ckpt("aug.ckpt", train_rs_augment(
        data, TrainingConfig(method="rs_augment", epochs=4, seed=17, augment_m=0),
        emb, SynonymSet({0: (1,)})))
    identical = (base == adv) and (base == aug)
    report("A2", violations == 0 and trials == 100_000 and identical,
           f"{trials} delta trials, {violations} violations; "
           f"adv(eps=0)==normal: {base == adv}; rs_augment(m=0)==normal: {base == aug}")


def test_a3_inner_max_corner_oracle():
    """A3: single sign-gradient step from zero start equals the brute-force
    corner maximum for 50 random tiny models."""
    rng = np.random.default_rng(303)
    eps = 1e-3
    checked = 0
    worst = 0.0
    while checked < 50:
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 3))
        hidden = () if rng.random() < 0.5 else (int(rng.integers(2, 5)),)
        params = random_model(rng, d, hidden, int(rng.integers(2, 4)))
        seq = EmbeddedSequence(rng.normal(size=(n, d)), np.ones(n, dtype=bool))
        label = int(rng.integers(params.n_classes))
        from robustxfer.classifier_core import backward
        logits, trace = forward(params, seq)
        grad = backward(params, trace, label).d_input
        if np.min(np.abs(grad)) < 1e-2:  # sign-gradient optimality needs
            continue                     # coordinates bounded away from zero
        spec = PerturbationSpec("adversarial", eps, 1)
        delta = inner_max_perturbation(params, seq, label, spec,
                                       derived_rng(checked, 1), zero_start=True)

        def loss_at(dlt):
            lg, _ = forward(params, EmbeddedSequence(seq.vectors + dlt, seq.mask))
            return loss(lg, label)

        best = -np.inf
        for corner in range(2 ** (n * d)):
            signs = np.array([1.0 if corner >> b & 1 else -1.0
                              for b in range(n * d)]).reshape(n, d)
            best = max(best, loss_at(eps * signs))
        worst = max(worst, abs(loss_at(delta) - best))
        checked += 1
    report("A3", worst < 1e-9, f"50 models, max |loss gap| = {worst:.2e} (<1e-9)")


def test_a4_smoothing_oracle():
    """A4: Monte Carlo vs exact enumeration over the synonym distribution,
    plus the paper-default replacement-rate check."""
    rng = np.random.default_rng(404)
    agree_required = 0
    agree_ok = 0
    max_frac_err = 0.0
    instances = 0
    while instances < 30:
        d = int(rng.integers(2, 4))
        emb = EmbeddingMatrix(rng.normal(size=(12, d)))
        params = ModelParams(emb=emb, weights=[rng.normal(size=(2, d))],
                             biases=[np.zeros(2)])
        n_pos = int(rng.integers(1, 4))
        token_ids = tuple(int(x) for x in rng.integers(0, 4, size=n_pos))
        syn = SynonymSet({t: tuple(int(x) for x in
                                   rng.choice(np.arange(4, 12), size=rng.integers(1, 4),
                                              replace=False))
                          for t in set(token_ids)})
        p = float(rng.choice([0.1, 0.3, 0.5]))
        exact = enumerate_smoothed_predict(params, token_ids, syn, p, emb,
                                           max_variants=200)
        if exact.n_variants > 200:
            continue
        mc = sample_smoothed_predict(params, token_ids, syn, p, emb, 10_000,
                                     derived_rng(instances, 4))
        max_frac_err = max(max_frac_err,
                           float(np.max(np.abs(mc.vote_fractions() - exact.masses))))
        top2 = np.sort(exact.masses)[-2:]
        if top2[1] - top2[0] >= 0.05:
            agree_required += 1
            agree_ok += int(mc.predicted_class == exact.predicted_class)
        instances += 1

    # replacement-rate: m=10, p=0.1 over >= 1e4 replaceable positions
    n_tokens = 60
    data = Dataset(tuple((tuple(range(n_tokens)), 0) for _ in range(20)), 1)
    syn = SynonymSet({t: (t + n_tokens,) for t in range(n_tokens)})
    out = augment_dataset(data, syn, 10, 0.1, derived_rng(405, 0))
    variants = [ids for i, (ids, _) in enumerate(out.examples) if i % 11 != 0]
    replaceable = len(variants) * n_tokens
    rate = sum(tok >= n_tokens for ids in variants for tok in ids) / replaceable
    ok = (agree_required > 0 and agree_ok == agree_required
          and max_frac_err <= 0.02 and replaceable >= 10_000
          and 0.09 <= rate <= 0.11)
    report("A4", ok,
           f"argmax agreement {agree_ok}/{agree_required} (margin>=0.05), "
           f"max fraction error {max_frac_err:.4f} (<=0.02), "
           f"replacement rate {rate:.4f} in [0.09, 0.11]")


def test_a5_synthetic_transfer_trend():
    """A5: the default noise sweep reproduces the robustness-vs-distance
    trend within the runtime budget."""
    started = time.monotonic()
    rows = noise_sweep(ToyTaskSpec())
    elapsed = time.monotonic() - started

    etas = sorted({r.eta for r in rows})
    methods = sorted({r.method for r in rows})
    mean_acc = {(m, e): float(np.mean([r.accuracy for r in rows
                                       if r.method == m and r.eta == e]))
                for m in methods for e in etas}
    mean_dist = {e: float(np.mean([r.distance for r in rows
                                   if r.method == "normal" and r.eta == e]))
                 for e in etas}
    robust_methods = [m for m in methods if m != "normal"]
    top2 = etas[-2:]
    largest = etas[-1]

    # (a) every robust method >= normal at the two largest etas, by >= 2
    #     accuracy points at the largest
    ok_a = True
    details_a = []
    for m in robust_methods:
        gaps = {e: 100.0 * (mean_acc[(m, e)] - mean_acc[("normal", e)])
                for e in top2}
        details_a.append(f"{m}: " + ", ".join(f"+{gaps[e]:.2f}@eta={e:g}"
                                              for e in top2))
        ok_a &= all(gaps[e] >= 0.0 for e in top2) and gaps[largest] >= 2.0

    # (b) Spearman rho between distance and the rs_random gain is positive
    deltas = [mean_acc[("rs_random", e)] - mean_acc[("normal", e)] for e in etas]
    dists = [mean_dist[e] for e in etas]
    rho, degenerate = spearman_rho(dists, deltas)
    ok_b = rho > 0.0 and not degenerate

    # (c) all methods within 2 points of each other at eta = 0
    at_zero = [mean_acc[(m, etas[0])] for m in methods]
    spread = 100.0 * (max(at_zero) - min(at_zero))
    ok_c = spread <= 2.0

    ok_time = elapsed < 600.0
    report("A5", ok_a and ok_b and ok_c and ok_time,
           f"runtime={elapsed:.0f}s (<600s); (a) {'; '.join(details_a)}; "
           f"(b) rho={rho:.3f} (>0); (c) eta=0 spread={spread:.2f}pts (<=2)")


def test_a6_distance_analytics():
    """A6: exact identity and 3-4-5 distances; uniform-noise mean within 5%
    of a Monte Carlo estimate at 1e4 pairs."""
    rng = np.random.default_rng(606)
    emb = EmbeddingMatrix(rng.normal(size=(40, 5)))
    pairs = AlignedPairs(tuple((i, i) for i in range(40)))
    identity = language_distance(pairs, emb, emb)

    a = EmbeddingMatrix(np.array([[0.0, 0.0]]))
    b = EmbeddingMatrix(np.array([[3.0, 4.0]]))
    triangle = language_distance(AlignedPairs(((0, 0),)), a, b)

    eta, d, n = 0.3, 16, 10_000
    base = EmbeddingMatrix(rng.normal(size=(n, d)))
    noisy = EmbeddingMatrix(base.values + rng.uniform(-eta, eta, size=(n, d)))
    measured = language_distance(AlignedPairs(tuple((i, i) for i in range(n))),
                                 base, noisy)
    mc = float(np.mean(np.linalg.norm(
        np.random.default_rng(607).uniform(-eta, eta, size=(200_000, d)), axis=1)))
    rel = abs(measured - mc) / mc
    report("A6", identity == 0.0 and triangle == 5.0 and rel <= 0.05,
           f"identity={identity}, 3-4-5={triangle}, noise rel err={rel:.4f} (<=5%)")


def test_a7_cli_determinism(tmp_path):
    """A7: identical inputs and --seed give byte-identical CSVs/checkpoints."""
    toy = tmp_path / "toy"
    synth_args = ["synth", "--out", str(toy), "--classes", "2",
                  "--vocab-size", "24", "--dim", "6", "--examples-per-class", "8",
                  "--tokens-per-example", "2", "--etas", "0,0.5", "--seed", "3"]
    assert main(synth_args) == 0
    toy2 = tmp_path / "toy2"
    assert main(synth_args[:2] + [str(toy2)] + synth_args[3:]) == 0
    mismatches = []
    for name in ("embeddings.txt", "train.tsv", "dev.tsv", "test.tsv",
                 "synonyms.tsv", "emb_eta1.txt", "test_eta1.tsv", "align_eta1.tsv"):
        if (toy / name).read_bytes() != (toy2 / name).read_bytes():
            mismatches.append(f"synth:{name}")

    def pair(cmd_builder, files):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        out_a.mkdir(exist_ok=True)
        out_b.mkdir(exist_ok=True)
        assert main(cmd_builder(out_a)) == 0
        assert main(cmd_builder(out_b)) == 0
        for f in files:
            if (out_a / f).read_bytes() != (out_b / f).read_bytes():
                mismatches.append(f)

    pair(lambda o: ["train", "--data", str(toy / "train.tsv"),
                    "--emb", str(toy / "embeddings.txt"), "--method", "rs-random",
                    "--epsilon", "0.2", "--epochs", "3", "--seed", "11",
                    "--out", str(o / "model.ckpt"), "--force"], ["model.ckpt"])
    pair(lambda o: ["sweep", "--data", str(toy / "train.tsv"),
                    "--dev", str(toy / "dev.tsv"),
                    "--emb", str(toy / "embeddings.txt"), "--method", "adv",
                    "--grid", "0.01,0.1", "--epochs", "2", "--seed", "11",
                    "--out", str(o / "dev_table.csv"), "--force"], ["dev_table.csv"])
    pair(lambda o: ["augment", "--data", str(toy / "train.tsv"),
                    "--emb", str(toy / "embeddings.txt"),
                    "--synonyms", str(toy / "synonyms.tsv"), "--m", "2",
                    "--p", "0.3", "--seed", "11",
                    "--out", str(o / "aug.tsv"), "--force"], ["aug.tsv"])

    sweep_dir = tmp_path / "sweeps"
    sweep_dir.mkdir()
    header = "seed,method,epsilon,eta,distance,accuracy\n"
    body = "".join(f"{s},{m},0.1,{e},{e:.6f},{0.8 + 0.01 * s:.6f}\n"
                   for s in (0, 1) for m in ("normal", "adv") for e in (0.0, 1.0))
    (sweep_dir / "sweep.csv").write_text(header + body, encoding="utf-8")
    pair(lambda o: ["report", "--input", str(sweep_dir),
                    "--out", str(o / "rep"), "--force"],
         ["rep/trend.csv", "rep/improvement_adv.csv", "rep/trend.svg"])

    report("A7", not mismatches,
           "synth/train/sweep/augment/report reruns byte-identical"
           if not mismatches else f"mismatched: {mismatches}")
