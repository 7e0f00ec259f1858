"""robustxfer: robust training for text classifiers over static embedding
spaces, with zero-shot cross-lingual transfer evaluation."""

from .classifier_core import (Gradients, ModelParams, backward, forward,
                              grad_check, init_params, load_checkpoint, loss,
                              predict, save_checkpoint)
from .crosslingual_eval import (AlignedPairs, TransferResult,
                                improvement_vs_distance, language_distance,
                                load_alignments, spearman_rho, zero_shot_eval)
from .embedding_space import (EmbeddedSequence, EmbeddingMatrix, SynonymSet,
                              Vocabulary, build_synonyms_knn, encode,
                              load_embeddings, load_synonyms)
from .errors import DataMismatchError, DivergenceError, ParseError
from .robust_training import (Dataset, PerturbationSpec, TrainingConfig,
                              augment_dataset, grid_search,
                              inner_max_perturbation, project_linf,
                              sample_uniform_linf, train, train_adversarial,
                              train_normal, train_rs_augment, train_rs_random)
from .smoothed_inference import (SmoothedPrediction, enumerate_smoothed_predict,
                                 sample_smoothed_predict, smoothed_predict)
from .synthetic_langs import (SyntheticLanguageSpec, ToyTaskSpec,
                              derive_language, make_toy_task, noise_sweep,
                              translate_corpus)

__version__ = "0.1.0"
