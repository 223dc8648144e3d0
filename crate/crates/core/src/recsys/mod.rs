//! The component recommenders: BM25-weighted implicit-feedback ALS,
//! global popularity, and a seeded random control.

mod bm25;
mod ials;
mod rank;

pub use bm25::{bm25_weight, Bm25Params, WeightedMatrix};
pub use ials::{parse_model, train_ials, FactorModel, IalsConfig};
pub use rank::{random_rank, recommend_factors, PopBy, PopModel, RankedList};
