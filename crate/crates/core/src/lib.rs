//! Deterministic O-RAN split 7.2 fronthaul simulator.

pub mod delay_profile;
pub mod du_engine;
pub mod iq_compress;
pub mod low_phy;
pub mod ofh_codec;
pub mod report;
pub mod ru_engine;
pub mod scenario;
pub mod sim_transport;
pub mod timing;
