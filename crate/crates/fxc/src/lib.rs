//! Fault-complex toolkit for foliated CSS codes: exact GF(2) chain-complex
//! algebra, product (fault) complexes with their detector matrices, windowed
//! BP+OSD decoding, phenomenological and GKP noise sampling, Monte Carlo
//! memory/stability experiments, and threshold fitting.

pub mod chain;
pub mod codes;
pub mod decoder;
pub mod experiment;
pub mod foliation;
pub mod fit;
pub mod gf2;
pub mod noise;
