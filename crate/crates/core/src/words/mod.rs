//! Words, construction sequences and their structure.

mod readability;
mod sequence;
mod symbols;
mod window;

pub use readability::{check_unique_readability, find_all, verify_witness, ReadabilityReport, ReadabilityWitness};
pub use sequence::{
    circular_op, reverse_closed_form, reverse_word, Block, ConstructionSequence, Kind, SequenceDoc, StepCoord,
    WordRef, DEFAULT_CAP,
};
pub use symbols::{format_word, is_spacer, parse_word, Alphabet, Sym, B, E};
pub use window::{
    classify_boundary, classify_boundary_window, dbar, dbar_on, maturity, parse, parse_anchored, principal_blocks,
    principal_blocks_anchored, rotation_coordinate, subsections, to_usize, BoundaryReport, Maturity, Occurrence,
    ParseResult, Principal, PrincipalData, SampleWindow, Scale,
};

/// Symbols as the `u64` keys used by the readability scanner.
pub fn as_keys(word: &[Sym]) -> Vec<u64> {
    word.iter().map(|&s| s as u64).collect()
}
