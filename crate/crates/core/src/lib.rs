//! Error-rate analysis of dual-hop amplify-and-forward MIMO relaying with
//! transmit antenna selection over Rayleigh fading, for hexagonal,
//! rectangular and cross QAM constellations.

pub mod specfun;
pub mod quad;
pub mod constellation;
pub mod analytic;
pub mod montecarlo;
