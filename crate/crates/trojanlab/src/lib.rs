//! A desk-scale laboratory for test-time textual Trojan insertion.
//!
//! The lab studies how a backdoor can be planted in a small text classifier
//! by editing a minimal set of weights after deployment, and what that edit
//! costs in flipped memory bits:
//!
//! - [`model`]: a deterministic `embedding -> mean pool -> tanh -> linear`
//!   classifier with exact manual gradients, split into an encoder (whose
//!   output is "the representation") and a classifier head.
//! - [`data`] / [`trigger`] / [`synth`]: corpus loading, the syntactic
//!   trigger transform, and poisoned-dataset construction.
//! - [`attack`]: the insertion objective combining logit and representation
//!   alignment, gradient-based weight selection, sparse masked training,
//!   and pruning of small weight deltas.
//! - [`bitflip`]: TPN/TBN accounting under int8 or raw float32 encodings.
//! - [`defense`]: classifier factorization that hides the important weights
//!   from the attacker's ranking.
//! - [`experiment`] / [`report`]: seeded end-to-end runs, sweeps, and
//!   reproducible report tables.
//!
//! ```
//! use trojanlab::prelude::*;
//!
//! // A tiny end-to-end run on the built-in synthetic corpus.
//! let cfg = ExperimentConfig {
//!     train_samples: 200,
//!     test_samples: 60,
//!     eval_samples: 30,
//!     train_epochs: 10,
//!     attack: AttackConfig {
//!         target_class: 1,
//!         top_k: 20,
//!         epochs: 3,
//!         ..AttackConfig::default()
//!     },
//!     variants: vec![AttackMode::RliAgr],
//!     ..ExperimentConfig::default()
//! };
//! let out = run_experiment(&cfg).unwrap();
//! assert_eq!(out.reports().len(), 1);
//! assert!(out.reports()[0].tpn <= 20);
//! ```

// Indexed loops in the numeric kernels mirror the matrix subscripts they
// implement.
#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod bitflip;
pub mod data;
pub mod defense;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod ranking;
pub mod report;
pub mod synth;
pub mod train;
pub mod trigger;
pub mod vocab;
pub mod weights;

/// The names most runs need.
pub mod prelude {
    pub use crate::attack::{
        accumulate_importance, logit_loss, prune_step, rank_ngr, representation_loss, rli_loss,
        select_representative, trojan_train, AttackConfig, AttackMode, AttackSurface,
        ImportanceRule, RepresentativeSample, TargetedModel, TrojanOutcome,
    };
    pub use crate::bitflip::{
        count_flipped_bits, hamming, quantize_layer, DiffReport, QuantScheme,
    };
    pub use crate::data::{
        build_poisoned, load_corpus, CorpusFormat, LabeledText, PoisonedDataset, TriggeredText,
    };
    pub use crate::defense::{attack_factorized, factorize, FactorizedLayer, FactorizedModel};
    pub use crate::error::{Error, Result};
    pub use crate::experiment::{
        prepare, run_defense, run_experiment, sweep, CorpusSource, ExperimentConfig, SweepParam,
    };
    pub use crate::metrics::{argmax, evaluate, trigger_split};
    pub use crate::model::{backward, forward, ModelParams, TargetLayer};
    pub use crate::ranking::{rank_top_k, ImportanceMatrix, SelectionMask};
    pub use crate::report::{render_report, AttackReport};
    pub use crate::train::{train_benign, TrainConfig};
    pub use crate::trigger::{apply_trigger, ClausePrefixTrigger, TriggerTransform};
    pub use crate::vocab::{tokenize, Vocabulary};
    pub use crate::weights::{load_weights, read_weights_file, save_weights, write_weights_file};
}
