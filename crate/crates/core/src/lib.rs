pub mod construct;
pub mod correspondence;
pub mod gallery;
pub mod kasteleyn;
pub mod linalg;
pub mod periodic;
pub mod planarmap;
pub mod sampler;
pub mod tgraph;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/graph-files.md")]
    pub struct GraphFiles;
    #[doc = include_str!("../../../book/src/kasteleyn.md")]
    pub struct Kasteleyn;
    #[doc = include_str!("../../../book/src/tgraphs.md")]
    pub struct TGraphs;
    #[doc = include_str!("../../../book/src/correspondence.md")]
    pub struct Correspondence;
    #[doc = include_str!("../../../book/src/construction.md")]
    pub struct Construction;
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub struct Sampling;
    #[doc = include_str!("../../../book/src/periodic.md")]
    pub struct Periodic;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
