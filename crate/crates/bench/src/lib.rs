//! Shared fixtures for the criterion benchmarks.

use manimask_core::{build_clique_array, build_secants, knn_graph, synth_dataset, CliqueSecantArray, DataMatrix, SecantMatrix, SynthKind, SynthOptions};

pub fn blob_dataset(n: usize, grid: usize, seed: u64) -> DataMatrix {
    synth_dataset(SynthKind::TranslatingBlob, n, seed, SynthOptions { grid, radius: grid as f64 / 8.0 })
        .expect("valid blob options")
}

pub fn secant_fixtures(x: &DataMatrix, k: usize) -> (SecantMatrix, CliqueSecantArray) {
    let g = knn_graph(x, k).expect("k < n");
    (
        build_secants(x, &g).expect("distinct points"),
        build_clique_array(x, &g).expect("distinct points"),
    )
}
