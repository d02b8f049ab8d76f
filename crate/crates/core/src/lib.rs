//! Random walks on finite groups, convolution-operator spectra, exact integer
//! linear algebra and Monte-Carlo cokernel statistics for balanced random
//! integer matrices.

pub mod abelian;
pub mod error;
pub mod exact;
pub mod group;
pub mod harness;
pub mod intlinalg;
pub mod lab;
pub mod measure;
pub mod spectral;
pub mod walk;

pub use abelian::AbelianGroup;
pub use error::{Error, Result};
pub use group::{FiniteGroup, GroupRef, Homomorphism, PermutationGroup, Subgroup, SubgroupLattice};
pub use intlinalg::IntMatrix;
pub use lab::{BalancedMatrixModel, BlockSampler, Partition};
pub use measure::{SignedMeasure, SubspaceProjection};
pub use walk::{BoundReport, QuotientChain, WalkInstance};
