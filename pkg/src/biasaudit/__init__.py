"""biasaudit: black-box bias audit toolkit for text valence scorers."""

__version__ = "0.1.0"

from .audit import (AuditConfig, AuditReport, ModelSpec, ScorerSpec, build_scorer,
                    default_battery, load_audit_config, probe_scorer, run_audit,
                    select_model, valence_diff)
from .corpus import (Corpus, TextSnippet, clean_corpus, clean_text, filter_language,
                     load_corpus, split_and_limit, split_corpus, write_corpus)
from .errors import BiasAuditError, ComputationError, ScorerError, ValidationError
from .lexicon import (AffectiveLexicon, VadScore, emotional_weight, load_lexicon,
                      score_text_vad, weighted_sample)
from .pruning import (MatcherConfig, Mention, MentionIndex, MentionStats, auto_confirm,
                      detect_mentions, export_review, import_review, mean_mention_valence,
                      mention_stats, prune)
from .scorer import (ConstantScorer, HashNoiseScorer, LexiconScorer, RemoteScorer,
                     ScoreRow, ScoreTable, SyntheticBiasedScorer, aggregate_scores,
                     read_score_table, rescale, score_batch, write_score_table)
from .stats import (Descriptives, DesignSpec, RatingsMatrix, RegressionResult, cohens_d,
                    descriptives, design_matrix, icc1, norm_quantile, permutation_test,
                    pooled_sd, qq_data, significance_stars, wls_fit)
from .stimuli import (Entity, Stimulus, Template, build_stimulus_matrix,
                      default_entities_path, default_templates_path, load_entities,
                      load_templates, normalize_trust, render_stimulus)
