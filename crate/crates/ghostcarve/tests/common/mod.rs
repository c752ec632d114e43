#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ghostcarve::load_scene;
use ghostcarve_core::SceneImage;

pub const CORPUS_16: [&str; 5] = ["digit0", "digit1", "digit7", "smiley", "sad"];
pub const CORPUS_8: [&str; 2] = ["seven8", "tee8"];

pub fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.txt"))
}

pub fn corpus(name: &str) -> SceneImage {
    load_scene(&corpus_path(name)).unwrap()
}

fn lit(row: usize, col: usize) -> bool {
    (row & col).count_ones() % 2 == 0
}

fn rank(rows: &[usize], cols: &[usize]) -> usize {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| if lit(r, c) { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut r = 0;
    for c in 0..cols.len() {
        let Some(p) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[p][c].abs() < 1e-9 {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..m.len() {
            let f = m[i][c] / m[r][c];
            for j in c..cols.len() {
                m[i][j] -= f * m[r][j];
            }
        }
        r += 1;
    }
    r
}

/// Patterns an adaptive run projects on a stripe whose object is known.
pub fn oracle_count(object: &[u8]) -> usize {
    let n = object.len();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut done = BTreeSet::new();
    while let Some(c) = cols.iter().copied().find(|c| !done.contains(c)) {
        done.insert(c);
        let lit_rows: Vec<usize> = rows.iter().copied().filter(|&r| lit(r, c)).collect();
        if lit_rows.iter().any(|&r| object[r] == 1) {
            continue;
        }
        if lit_rows.len() == rows.len() {
            break;
        }
        rows.retain(|&r| !lit(r, c));
        let mut keep: Vec<usize> = Vec::new();
        for &cand in &cols {
            let mut trial = keep.clone();
            trial.push(cand);
            if rank(&rows, &trial) > keep.len() {
                keep.push(cand);
            }
        }
        cols = keep;
    }
    done.len()
}

/// Oracle count for a whole scene scanned one column at a time.
pub fn oracle_scene_count(scene: &SceneImage) -> usize {
    (0..scene.width)
        .map(|x| {
            let stripe: Vec<u8> = (0..scene.height).map(|y| u8::from(scene.get(x, y) >= 0.5)).collect();
            oracle_count(&stripe)
        })
        .sum()
}
