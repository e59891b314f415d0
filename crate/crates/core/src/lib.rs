pub mod adequacy;
pub mod expr;
pub mod grid;
pub mod htscuc;
pub mod linearize;
pub mod milp;
mod network;
pub mod transform;

// Every chapter of the guide runs as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/simplify.md")]
    mod simplify {}
    #[doc = include_str!("../../../book/src/milp.md")]
    mod milp {}
    #[doc = include_str!("../../../book/src/linearize.md")]
    mod linearize {}
    #[doc = include_str!("../../../book/src/snapshots.md")]
    mod snapshots {}
    #[doc = include_str!("../../../book/src/adequacy.md")]
    mod adequacy {}
    #[doc = include_str!("../../../book/src/restore.md")]
    mod restore {}
    #[doc = include_str!("../../../book/src/commitment.md")]
    mod commitment {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
