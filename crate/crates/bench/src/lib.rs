//! Fixture sequences shared by the benchmarks.

use signum_core::config::parse_spec;
use signum_core::SequenceSpec;

fn parse(text: &str) -> SequenceSpec {
    parse_spec(text).expect("fixture spec parses")
}

pub fn harmonic() -> SequenceSpec {
    parse("family = power-decay\ncoeffs = 1\nexponents = 1\n")
}

pub fn interleaved_harmonic() -> SequenceSpec {
    parse(
        "family = interleaved\nparts = 2\n\
         part.0.family = power-decay\npart.0.coeffs = 1, 0\npart.0.exponents = 1\n\
         part.1.family = power-decay\npart.1.coeffs = 0, 1\npart.1.exponents = 1\n\
         levy_directions = 1, 0; 0, 1\n",
    )
}

pub fn log_decay() -> SequenceSpec {
    parse("family = random-directions\nseed = 7\n")
}

pub fn triadic() -> SequenceSpec {
    parse("family = geometric\nratio = 1/3\n")
}
