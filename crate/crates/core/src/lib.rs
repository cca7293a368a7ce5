//! Randomized online service caching under dynamic regret.
//!
//! An edge server with room for `M` of `N` services decides every slot which
//! services to host. Hosting a service that was not hosted in the previous slot
//! costs an instantiation price `β`; every request for a service that is not
//! hosted is forwarded at price `α`. This crate contains:
//!
//! - [`model`]: arrival traces, the cost model and the true per-slot cost,
//!   top-`M` popularity indicators and path length.
//! - [`projection`]: exact Euclidean projection onto the capped simplex
//!   `{p ∈ [0,1]^N : Σp ≤ M}` in `O(N log N)`, plus a KKT enumeration oracle.
//! - [`gradient`]: the smoothed auxiliary cost, its gradient, the windowed
//!   online projected gradient descent and its offline synchronous twin.
//! - [`sampler`]: `K` sample paths that round fractional caching
//!   probabilities into integral decisions with bounded switching.
//! - [`policy`]: the ROSC policy loop tying the above together.
//! - [`baselines`]: RHC, CHC, the static optimum, an exact dynamic program and
//!   the pseudo-optimum used as a regret reference.
//! - [`workloads`]: synthetic trace generators and the noisy prediction oracle.
//! - [`bench`]: regret, the theoretical regret bound and the experiment runner.
//! - [`validate`]: randomized oracle suites used by `rosc validate`.
//! - [`cli`]: the command-line front end behind the `rosc` binary.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod error;
pub mod gradient;
pub mod model;
pub mod policy;
pub mod projection;
pub mod record;
pub mod sampler;
pub mod validate;
pub mod workloads;

pub use error::{Error, Result};
pub use model::{ArrivalTrace, CacheVector, CostModel, ProbVector, TopMIndicator};
pub use policy::{fractional_trace, run_rosc, GammaPolicy, RoscConfig};
pub use record::RunRecord;
pub use workloads::PredictionOracle;



