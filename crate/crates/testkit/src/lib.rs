//! Slow, direct reference implementations and random data generators used to
//! check the library in tests.

pub mod bvh_gen;
pub mod oracles;
pub mod synth;
pub mod systems;
