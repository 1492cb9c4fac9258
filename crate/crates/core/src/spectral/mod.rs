//! Spectral structure of the generator: eigenvalues, the complexified `D + N`
//! form, the matrix exponential and rational relations between rotation speeds.

pub mod eigen;
pub mod embedding;
pub mod expm;
pub mod rational;
pub mod structured;

pub use eigen::{eigen_decompose, EigenCluster, EigenStructure, DEFAULT_CLUSTER_TOL};
pub use embedding::ComplexEmbedding;
pub use expm::{det_exp, flow, matrix_exp, Flow, FlowEvaluation};
pub use rational::{rationally_related, Ratio, RationalRelation, Relatedness};
pub use structured::{complexify, BlockSlot, FormSource, Half, JordanBlock, StructuredForm};
