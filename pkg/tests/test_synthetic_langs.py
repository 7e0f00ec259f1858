import numpy as np
import pytest

from robustxfer.crosslingual_eval import language_distance, zero_shot_eval
from robustxfer.robust_training import TrainingConfig, train
from robustxfer.seeding import derived_rng
from robustxfer.synthetic_langs import (GenerationError,
                                        SyntheticLanguageSpec, ToyTaskSpec,
                                        derive_language, make_toy_task,
                                        noise_sweep, read_sweep_csv,
                                        translate_corpus, write_sweep_csv)

SMALL = ToyTaskSpec(n_classes=3, vocab_size=60, dim=8, examples_per_class=20,
                    tokens_per_example=2, margin=1.0, seed=5)


def pooled(emb, ids):
    return emb.values[list(ids)].mean(axis=0)


class TestMakeToyTask:
    def test_analytic_prototype_rule_is_perfect(self):
        vocab, emb, train_d, dev_d, test_d = make_toy_task(SMALL)
        # recover prototypes as per-class token centroids
        token_class = np.array([i % SMALL.n_classes for i in range(SMALL.vocab_size)])
        protos = np.stack([emb.values[:SMALL.vocab_size][token_class == c].mean(axis=0)
                           for c in range(SMALL.n_classes)])
        for split in (train_d, dev_d, test_d):
            for ids, label in split.examples:
                dists = np.linalg.norm(protos - pooled(emb, ids), axis=1)
                assert int(np.argmin(dists)) == label

    def test_empty_spec_valid_structure(self):
        spec = ToyTaskSpec(n_classes=2, vocab_size=10, dim=4,
                           examples_per_class=0, tokens_per_example=2, seed=1)
        vocab, emb, train_d, dev_d, test_d = make_toy_task(spec)
        assert len(train_d) == len(dev_d) == len(test_d) == 0
        assert emb.rows == len(vocab)

    def test_same_seed_identical(self):
        a = make_toy_task(SMALL)
        b = make_toy_task(SMALL)
        assert np.array_equal(a[1].values, b[1].values)
        assert a[2].examples == b[2].examples
        assert a[4].examples == b[4].examples

    def test_splits_disjoint(self):
        vocab, emb, train_d, dev_d, test_d = make_toy_task(SMALL)
        seen = set()
        for split in (train_d, dev_d, test_d):
            for ids, _ in split.examples:
                assert ids not in seen
                seen.add(ids)

    def test_split_sizes(self):
        vocab, emb, train_d, dev_d, test_d = make_toy_task(SMALL)
        assert len(train_d) == SMALL.n_classes * SMALL.examples_per_class
        assert len(dev_d) == SMALL.n_classes * (SMALL.examples_per_class // 2)
        assert len(test_d) == SMALL.n_classes * SMALL.examples_per_class

    def test_jitter_within_both_bounds(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        token_class = np.array([i % SMALL.n_classes for i in range(SMALL.vocab_size)])
        protos = np.stack([emb.values[:SMALL.vocab_size][token_class == c].mean(axis=0)
                           for c in range(SMALL.n_classes)])
        # centroid estimate of the prototype is close; jitter radius margin/2
        # plus estimation slack
        for i in range(SMALL.vocab_size):
            r = float(np.linalg.norm(emb.values[i] - protos[token_class[i]]))
            assert r <= SMALL.margin / 2.0 + 0.2

    def test_infeasible_disjointness_raises(self):
        spec = ToyTaskSpec(n_classes=2, vocab_size=4, dim=4,
                           examples_per_class=50, tokens_per_example=1, seed=0)
        with pytest.raises(GenerationError):
            make_toy_task(spec)

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            ToyTaskSpec(margin=0.0)
        with pytest.raises(ValueError):
            ToyTaskSpec(n_classes=1)


class TestDeriveLanguage:
    def test_eta_zero_exact_copy(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.0, seed=3, tag="xx")
        vocab_t, emb_t, pairs = derive_language(vocab, emb, spec)
        assert np.array_equal(emb_t.values, emb.values)
        assert language_distance(pairs, emb, emb_t) == 0.0

    def test_uniform_displacement_bounded(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.25, seed=4, tag="yy")
        _, emb_t, _ = derive_language(vocab, emb, spec)
        assert np.max(np.abs(emb_t.values - emb.values)) <= 0.25

    def test_specials_unchanged(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.5, seed=5, tag="zz")
        vocab_t, emb_t, pairs = derive_language(vocab, emb, spec)
        for i in vocab.special_ids:
            assert np.array_equal(emb_t.values[i], emb.values[i])
            assert vocab_t.tokens[i] == vocab.tokens[i]
        special = set(vocab.special_ids)
        assert len(pairs) == len(vocab) - 2
        assert all(s == t and s not in special for s, t in pairs.pairs)

    def test_suffixed_tokens(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.1, seed=6, tag="l1")
        vocab_t, _, _ = derive_language(vocab, emb, spec)
        special = set(vocab.special_ids)
        for i, tok in enumerate(vocab_t.tokens):
            if i not in special:
                assert tok == vocab.tokens[i] + "@l1"

    def test_distance_matches_monte_carlo(self):
        # 10^4 tokens, d=16, eta=0.2: mean L2 of the displacement matches an
        # independent Monte Carlo estimate of E||u||_2 within 5%
        rng = np.random.default_rng(9)
        from robustxfer.embedding_space import EmbeddingMatrix, Vocabulary
        vocab = Vocabulary.with_specials([f"w{i}" for i in range(10_000)])
        emb = EmbeddingMatrix(rng.normal(size=(len(vocab), 16)))
        spec = SyntheticLanguageSpec("uniform_linf", 0.2, seed=7, tag="mc")
        _, emb_t, pairs = derive_language(vocab, emb, spec)
        measured = language_distance(pairs, emb, emb_t)
        mc = float(np.mean(np.linalg.norm(
            np.random.default_rng(11).uniform(-0.2, 0.2, size=(200_000, 16)), axis=1)))
        assert abs(measured - mc) / mc <= 0.05

    def test_gaussian_kind(self):
        vocab, emb, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("gaussian", 0.3, seed=8, tag="g")
        _, emb_t, _ = derive_language(vocab, emb, spec)
        diffs = (emb_t.values - emb.values)[:SMALL.vocab_size]
        assert abs(float(diffs.std()) - 0.3) < 0.02


class TestTranslateCorpus:
    def test_roundtrip_strip_suffix(self):
        vocab, emb, train_d, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.1, seed=10, tag="rt")
        vocab_t, _, _ = derive_language(vocab, emb, spec)
        translated = translate_corpus(train_d, vocab, vocab_t)
        back = tuple(
            (tuple(vocab.lookup(vocab_t.tokens[i].rsplit("@", 1)[0]) for i in ids), label)
            for ids, label in translated.examples)
        assert back == train_d.examples

    def test_size_and_labels_preserved(self):
        vocab, emb, train_d, *_ = make_toy_task(SMALL)
        spec = SyntheticLanguageSpec("uniform_linf", 0.1, seed=11, tag="sz")
        vocab_t, _, _ = derive_language(vocab, emb, spec)
        translated = translate_corpus(train_d, vocab, vocab_t)
        assert len(translated) == len(train_d)
        assert [l for _, l in translated.examples] == [l for _, l in train_d.examples]
        assert translated.language == "sz"

    def test_unmapped_token_error(self):
        vocab, emb, train_d, *_ = make_toy_task(SMALL)
        from robustxfer.embedding_space import Vocabulary
        bogus = Vocabulary.with_specials(["only@xx"])
        with pytest.raises(ValueError):
            translate_corpus(train_d, vocab, bogus)


class TestZeroEtaTransferIdentity:
    def test_zero_eta_accuracy_equals_in_language(self):
        vocab, emb, train_d, dev_d, test_d = make_toy_task(SMALL)
        cfg = TrainingConfig(method="normal", epochs=5, seed=2)
        params = train(train_d, cfg, emb)
        spec = SyntheticLanguageSpec("uniform_linf", 0.0, seed=12, tag="id")
        vocab_t, emb_t, _ = derive_language(vocab, params.emb, spec)
        translated = translate_corpus(test_d, vocab, vocab_t)
        assert (zero_shot_eval(params, translated, emb_t) ==
                zero_shot_eval(params, test_d, params.emb))


class TestNoiseSweep:
    def test_smoke_rows_and_determinism(self):
        task = ToyTaskSpec(n_classes=2, vocab_size=24, dim=6,
                           examples_per_class=8, tokens_per_example=2, seed=3)
        cfg = TrainingConfig(epochs=2)
        rows = noise_sweep(task, etas=[0.0, 0.5], methods=("normal", "rs_random"),
                           seeds=(0, 1), cfg_base=cfg, grid=[0.1])
        assert len(rows) == 2 * 2 * 2
        again = noise_sweep(task, etas=[0.0, 0.5], methods=("normal", "rs_random"),
                            seeds=(0, 1), cfg_base=cfg, grid=[0.1])
        assert rows == again
        by_key = {(r.seed, r.method, r.eta): r for r in rows}
        # eta=0 equals in-language accuracy and zero distance
        for (seed, method, eta), row in by_key.items():
            if eta == 0.0:
                assert row.distance == 0.0
        # distances identical across methods at the same (seed, eta)
        for seed in (0, 1):
            assert (by_key[(seed, "normal", 0.5)].distance ==
                    by_key[(seed, "rs_random", 0.5)].distance)

    def test_csv_roundtrip(self, tmp_path):
        task = ToyTaskSpec(n_classes=2, vocab_size=24, dim=6,
                           examples_per_class=6, tokens_per_example=2, seed=4)
        rows = noise_sweep(task, etas=[0.0], methods=("normal",), seeds=(0,),
                           cfg_base=TrainingConfig(epochs=1), grid=[0.1])
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, rows)
        loaded = read_sweep_csv(path)
        assert len(loaded) == len(rows)
        assert loaded[0].method == "normal"
        assert loaded[0].eta == 0.0
