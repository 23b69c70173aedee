//! Architectural layer: the lutmm_1k instruction, slice-interleaving
//! address hash, tile-to-array mapping, simulated memory, and the cluster
//! executor that ties them to the bit-plane arrays.

pub mod cluster;
pub mod hasher;
pub mod isa;
pub mod mapping;
pub mod memory;

pub use cluster::{CSramCluster, ClusterConfig, ExecOutcome};
pub use hasher::{hash_address, HasherConfig};
pub use isa::{tile_columns, LutmmInstruction, QL_LEVELS, TILE_N};
pub use mapping::{map_tile, MappingMode, TileAssignment};
pub use memory::SimMemory;
