pub mod concolic;
pub mod corpus;
pub mod engine;
pub mod fingerprint;
pub mod generator;
pub mod ir;
pub mod learner;
pub mod selector;
pub mod slicer;
pub mod symcore;
