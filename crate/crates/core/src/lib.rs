//! Frugal forward-backward splitting with deviations.
//!
//! Finds a zero of `F_1 + … + F_n + B_1 + … + B_m`, where every `F_i` is
//! maximally monotone and accessed through its resolvent, and every `B_j` is
//! `1/L_j`-cocoercive and evaluated directly. One iteration evaluates each
//! resolvent and each forward operator exactly once. The lifted state has
//! `n − 1` blocks, and the caller may perturb the iteration with deviation
//! vectors kept inside a per-step norm budget.
//!
//! * [`operators`]: problem data, closed-form resolvents, cocoercive maps.
//! * [`scheme`]: coefficient matrices `(M, S, C, Q)` and their validation.
//! * [`solver`]: the iteration, stopping rules and trajectories.
//! * [`deviations`]: budget accounting and deviation policies.
//! * [`markowitz`]: the portfolio experiment.
//! * [`cli`]: the `splitdev` command.

pub mod cli;
pub mod deviations;
pub mod markowitz;
pub mod operators;
pub mod scheme;
pub mod solver;
mod vecops;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/iteration.md")]
    mod iteration {}
    #[doc = include_str!("../../../book/src/deviations.md")]
    mod deviations {}
    #[doc = include_str!("../../../book/src/portfolio.md")]
    mod portfolio {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
