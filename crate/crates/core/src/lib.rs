//! Knowledge graph completion with tensor-factorization models.
//!
//! Three bilinear scorers share one interface: CP, ComplEx and RESCAL all
//! score a triple as `Re(conj(h) R t^T)`. Training is multiclass
//! cross-entropy over all tails with Adagrad, on reciprocal-augmented data,
//! with a per-triple penalty from [`regularizer`]: the duality-induced
//! regularizer (DURA) and the usual baselines (squared Frobenius, N3, and an
//! L1 dual-distance variant).
//!
//! Also included: filtered MRR / Hits@N evaluation ([`eval`]), λ-sparsity
//! analysis of entity embeddings ([`sparsity`]) and a checker for the
//! column-balance conditions under which DURA on a CP model meets its
//! nuclear-norm lower bound ([`duality`]).
//!
//! ```no_run
//! use kge::prelude::*;
//!
//! let data = DataBundle::load("train.tsv", "valid.tsv", "test.tsv", 0.0)?;
//! let model = ModelSpec { kind: ModelKind::ComplEx, dim: 64, init_scale: 1e-3 };
//! let cfg = TrainConfig { reg: RegularizerSpec::dura(0.1, 0.5, 1.5), ..Default::default() };
//! let fitted = fit(model, &data, &cfg)?;
//! let report = evaluate(&fitted.best, &data.test, &data.filter)?;
//! println!("{report}");
//! # Ok::<(), kge::KgeError>(())
//! ```

pub mod cli;
pub mod config;
pub mod data;
pub mod duality;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod regularizer;
pub mod sparsity;
pub mod synthetic;
pub mod train;

pub use error::{KgeError, Result};

pub mod prelude {
    pub use crate::data::{
        add_reciprocals, build_filter_index, load_triples, tail_frequency_weights, FilterIndex,
        Split, Triple, TripleStore, Vocab, WeightTable,
    };
    pub use crate::duality::{balance_report, rebalance, BalanceReport};
    pub use crate::eval::{evaluate, filtered_rank, RankingReport};
    pub use crate::model::{
        init_params, score_all_tails, score_triple, Gradients, ModelKind, ModelParams, Tables,
    };
    pub use crate::regularizer::{penalty, unweighted_dura, RegularizerKind, RegularizerSpec};
    pub use crate::sparsity::{lambda_sparsity, sparsity_mrr_sweep, SparsitySweep};
    pub use crate::train::{fit, DataBundle, FitResult, ModelSpec, TrainConfig};
    pub use crate::{KgeError, Result};
}
