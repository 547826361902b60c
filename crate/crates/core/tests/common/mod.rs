#![allow(dead_code)]

use std::path::PathBuf;

use qite_core::ham_io::ProblemDocument;
use qite_core::{OperatorPool, PauliSum, StateVector};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub struct Fixture {
    pub doc: ProblemDocument,
    pub h: PauliSum,
    pub pool: OperatorPool,
    pub reference: StateVector,
}

pub fn fixture(name: &str) -> Fixture {
    let doc = ProblemDocument::load(fixture_path(name)).unwrap();
    let h = doc.hamiltonian().unwrap();
    let pool = doc.pool().unwrap().expect("fixture ships a pool");
    let reference = doc.reference().unwrap();
    Fixture {
        doc,
        h,
        pool,
        reference,
    }
}

pub const ALL_FIXTURES: [&str; 17] = [
    "h2_0.74", "h4_1.00", "h4_2.00", "lih_0.8", "lih_1.0", "lih_1.2", "lih_1.4", "lih_1.6",
    "lih_1.8", "lih_2.0", "lih_2.2", "lih_2.4", "lih_2.6", "lih_2.8", "lih_3.0", "beh2_1.3",
    "beh2_3.0",
];
