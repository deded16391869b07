/// Dense rank-3 tensor over an `n`-dimensional index set, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Tensor3 { n: self.n, data: self.data.iter().map(|x| x * c).collect() }
    }

    /// Average over all six index permutations.
    pub fn symmetrized(&self) -> Self {
        let n = self.n;
        let mut out = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = self.get(i, j, k)
                        + self.get(i, k, j)
                        + self.get(j, i, k)
                        + self.get(j, k, i)
                        + self.get(k, i, j)
                        + self.get(k, j, i);
                    out.set(i, j, k, s / 6.0);
                }
            }
        }
        out
    }

    /// Largest deviation from full permutation symmetry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [self.get(i, k, j), self.get(j, i, k), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl<const N: usize> From<&[[[f64; N]; N]; N]> for Tensor3 {
    fn from(a: &[[[f64; N]; N]; N]) -> Self {
        let mut t = Tensor3::zeros(N);
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    t.set(i, j, k, a[i][j][k]);
                }
            }
        }
        t
    }
}
