//! Helpers for the comma-separated trajectory exports. Values are written in
//! scientific notation with 17 significant digits.

use crate::linalg::Matrix;
use std::fmt::Write as _;

pub fn push_entries(out: &mut String, values: impl Iterator<Item = f64>) {
    for v in values {
        let _ = write!(out, ",{v:.16e}");
    }
}

pub fn push_blanks(out: &mut String, count: usize) {
    for _ in 0..count {
        out.push(',');
    }
}

pub fn row_major(m: &Matrix) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

pub fn vector_header(out: &mut String, name: &str, len: usize) {
    for i in 0..len {
        let _ = write!(out, ",{name}[{i}]");
    }
}

pub fn matrix_header(out: &mut String, name: &str, rows: usize, cols: usize) {
    for i in 0..rows {
        for j in 0..cols {
            let _ = write!(out, ",{name}[{i},{j}]");
        }
    }
}
