//! Pull-through identities, infrared bounds, the dressed mass flow and the
//! compactness diagnostics built on it.

mod compactness;
mod flow;
mod lipschitz;
mod pullthrough;

pub use compactness::{compactness_diagnostics, CompactnessDiagnostics, ShiftEntry};
pub use flow::{dressed_flow, nonincreasing, relative_variation, DressedFlowRecord, FlowError, FlowOptions, FlowStep};
pub use lipschitz::{lipschitz_pairs, resolvent_lipschitz, DressingShape, LipschitzOptions, LipschitzPair, LipschitzReport};
pub use pullthrough::{
    apriori_bound_check, dressed_pull_through, pull_through_residual, resolvent_approx_check, weyl_overlap, AprioriMode, AprioriReport,
    DressedPullThroughReport, PullThroughMode, PullThroughReport, ResolventApproxMode, ResolventApproxReport,
};
