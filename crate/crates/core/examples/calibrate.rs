//! Re-runs the calibration procedure and prints the resulting TOML.
//!
//! cargo run --release --example calibrate > calibration/mcf-2018.toml

use mcf_qkd::calibration::{calibrate, CalibrationAnchors};

fn main() {
    let cal = calibrate(&CalibrationAnchors::default()).expect("calibration converges");
    println!("# Fitted by `cargo run --release --example calibrate`; see src/calibration.rs for the procedure.");
    print!("{}", cal.to_toml());
}
