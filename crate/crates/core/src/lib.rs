pub mod artifact;
pub mod error;
pub mod fairness;
pub mod linalg;
pub mod matching;
pub mod matrix;
pub mod metric;
pub mod models;
pub mod pipeline;
pub mod propensity;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod tabular;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
pub use scalar::Real;

pub type MetricMatrix64 = metric::MetricMatrix<f64>;
pub type MetricMatrix32 = metric::MetricMatrix<f32>;
pub type CandidateSet64 = propensity::CandidateSet<f64>;
pub type CandidateSet32 = propensity::CandidateSet<f32>;
pub type CounterpartPairs64 = matching::CounterpartPairs<f64>;
pub type CounterpartPairs32 = matching::CounterpartPairs<f32>;
