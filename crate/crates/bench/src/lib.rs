//! Shared benchmark inputs.

pub fn molecule_corpus(n: usize) -> Vec<String> {
    chemval_core::synth::molecule_pool(n)
}

pub fn document_corpus(n: usize) -> Vec<String> {
    molecule_corpus(n)
        .into_iter()
        .map(|m| chemval_core::synth::compliant_document(&m))
        .collect()
}
