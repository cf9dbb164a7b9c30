//! Sound output bounds and local-robustness verdicts.

mod check;
mod ibp;
mod interval;
mod kleene;
mod report;

use thiserror::Error;

pub use check::{
    bisect, check, check_problem, check_robustness, input_influence, Query, Verdict, Verification,
    VerifyConfig,
};
pub use ibp::{propagate_bounds, propagate_trace};
pub use interval::IntervalTensor;
pub use kleene::{kleene, range_of, Range, RangeBindings, Tri};
pub use report::{denormalize_bounds, render_report, PixelRange};

use crate::logic::LogicError;
use crate::netcore::NetError;
use crate::tensor::ShapeError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("interval lower bound {lower} exceeds upper bound {upper} at index {index}")]
    Inverted {
        index: usize,
        lower: f32,
        upper: f32,
    },
    #[error("ball radius {0} must be finite and non-negative")]
    Radius(f64),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Logic(#[from] LogicError),
}
