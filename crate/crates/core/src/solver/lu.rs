use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

static SEQUENTIAL: Once = Once::new();

/// Single solves stay single-threaded so results do not depend on the
/// worker count.
pub(crate) fn init_parallelism() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Sparse LU factors of a square matrix.
pub(crate) struct SparseLu {
    lu: Lu<usize, C64>,
    n: usize,
}

impl SparseLu {
    pub(crate) fn new(m: &CsrMatrix) -> Result<Self> {
        init_parallelism();
        let lu = m.to_faer().sp_lu().map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { lu, n: m.nrows() })
    }

    pub(crate) fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut x);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub(crate) fn norm_inf(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.norm()))
}

pub(crate) fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}
