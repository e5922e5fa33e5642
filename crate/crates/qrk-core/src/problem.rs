//! Synthetic corrupted linear systems.
//!
//! A system bundles a row-normalized matrix A, planted solution x*, the
//! consistent right-hand side b = A x*, a sparse corruption c with
//! floor(beta*m) entries, and the observed b_hat = b + c.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{row_normalize, DenseMatrix, IndexSet, RowNormalizedMatrix};
use crate::rng::SeedRng;

/// How the planted solution is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum XStarPolicy {
    /// x* = 0, so b = 0 and b_hat = c.
    Zero,
    /// i.i.d. standard normal entries scaled to unit norm.
    GaussianUnit,
    Given(Vec<f64>),
}

/// Generation parameters for a Gaussian corrupted system.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub beta: f64,
    pub corruption_magnitude: f64,
    /// When set, corrupted entries get a uniformly random sign.
    pub signed_corruption: bool,
    pub x_star_policy: XStarPolicy,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m <= self.n {
            return Err(Error::InvalidSpec(format!(
                "need m > n >= 1, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidSpec(format!("beta must be in [0,1), got {}", self.beta)));
        }
        if let XStarPolicy::Given(x) = &self.x_star_policy {
            if x.len() != self.n {
                return Err(Error::InvalidSpec(format!(
                    "given x* has length {}, expected {}",
                    x.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Number of corrupted entries, floor(beta * m).
    pub fn corruption_count(&self) -> usize {
        (self.beta * self.m as f64).floor() as usize
    }
}

/// An overdetermined consistent system plus sparse corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSystem {
    pub a: RowNormalizedMatrix,
    pub x_star: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub corrupt_support: IndexSet,
    pub beta: f64,
    pub seed: u64,
}

impl CorruptedSystem {
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn is_corrupted(&self, i: usize) -> bool {
        self.corrupt_support.contains(i)
    }

    pub fn corruption_count(&self) -> usize {
        self.corrupt_support.len()
    }
}

/// Sparse corruption of length `m`: floor(beta*m) entries set to
/// `magnitude` at uniformly random positions.
pub fn corrupt(
    m: usize,
    beta: f64,
    magnitude: f64,
    signed: bool,
    rng: &mut SeedRng,
) -> Result<(Vec<f64>, IndexSet)> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidSpec(format!("beta must be in [0,1), got {beta}")));
    }
    let count = (beta * m as f64).floor() as usize;
    let mut c = vec![0.0; m];
    if count == 0 {
        return Ok((c, IndexSet::empty()));
    }
    let support = crate::linalg::sample_without_replacement(m, count, rng)?;
    for i in support.iter() {
        let sign = if signed && rng.gen_unit() < 0.5 { -1.0 } else { 1.0 };
        c[i] = sign * magnitude;
    }
    Ok((c, support))
}

/// Generate the standard synthetic instance: A with i.i.d. N(0,1) entries
/// then row-normalized, x* per policy, b = A x*, and sparse corruption.
/// Fully deterministic given the seed.
pub fn gen_gaussian_system(spec: &GenSpec) -> Result<CorruptedSystem> {
    spec.validate()?;
    let rng = SeedRng::new(spec.seed);
    // Dedicated child streams so changing one stage never shifts another.
    let mut mat_rng = rng.split(0);
    let mut x_rng = rng.split(1);
    let mut corrupt_rng = rng.split(2);

    let raw = DenseMatrix::from_fn(spec.m, spec.n, |_, _| mat_rng.gen_gaussian());
    let a = row_normalize(&raw)?;

    let x_star = match &spec.x_star_policy {
        XStarPolicy::Zero => vec![0.0; spec.n],
        XStarPolicy::GaussianUnit => {
            let mut x: Vec<f64> = (0..spec.n).map(|_| x_rng.gen_gaussian()).collect();
            let nrm = crate::linalg::norm(&x).max(f64::MIN_POSITIVE);
            x.iter_mut().for_each(|v| *v /= nrm);
            x
        }
        XStarPolicy::Given(x) => x.clone(),
    };

    let b = a.inner().mul_vec(&x_star);
    let (c, corrupt_support) = corrupt(
        spec.m,
        spec.beta,
        spec.corruption_magnitude,
        spec.signed_corruption,
        &mut corrupt_rng,
    )?;
    let b_hat: Vec<f64> = b.iter().zip(&c).map(|(bi, ci)| bi + ci).collect();

    Ok(CorruptedSystem {
        a,
        x_star,
        b,
        c,
        b_hat,
        corrupt_support,
        beta: spec.beta,
        seed: spec.seed,
    })
}

// ---------------------------------------------------------------------------
// Serialization.
//
// Binary container layout (all integers and floats little-endian):
//   magic   "QRKS"            4 bytes
//   version u32               currently 1
//   m, n    u64, u64
//   beta    f64
//   seed    u64
//   A       m*n f64, row-major
//   x_star  n f64
//   b       m f64
//   support u64 count, then that many u64 indices
//   c_vals  one f64 per support index (same order)
// b_hat is reconstructed as b + c on load.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"QRKS";
const VERSION: u32 = 1;

impl CorruptedSystem {
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.m() as u64).to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&self.beta.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        write_f64s(&mut w, self.a.inner().data())?;
        write_f64s(&mut w, &self.x_star)?;
        write_f64s(&mut w, &self.b)?;
        w.write_all(&(self.corrupt_support.len() as u64).to_le_bytes())?;
        for i in self.corrupt_support.iter() {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
        for i in self.corrupt_support.iter() {
            w.write_all(&self.c[i].to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::MalformedFile("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::MalformedFile(format!("unsupported version {version}")));
        }
        let m = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let beta = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let a_data = read_f64s(&mut r, m * n)?;
        let x_star = read_f64s(&mut r, n)?;
        let b = read_f64s(&mut r, m)?;
        let count = read_u64(&mut r)? as usize;
        let mut support = Vec::with_capacity(count);
        for _ in 0..count {
            support.push(read_u64(&mut r)? as usize);
        }
        let mut c = vec![0.0; m];
        for &i in &support {
            if i >= m {
                return Err(Error::MalformedFile(format!("support index {i} >= m")));
            }
            c[i] = read_f64(&mut r)?;
        }
        let a = RowNormalizedMatrix::try_new(DenseMatrix::new(m, n, a_data)?)
            .map_err(|e| Error::MalformedFile(e.to_string()))?;
        let corrupt_support = IndexSet::new(support, m)
            .map_err(|e| Error::MalformedFile(e.to_string()))?;
        let b_hat: Vec<f64> = b.iter().zip(&c).map(|(bi, ci)| bi + ci).collect();
        Ok(CorruptedSystem {
            a,
            x_star,
            b,
            c,
            b_hat,
            corrupt_support,
            beta,
            seed,
        })
    }

    /// Plain-text dump for cross-checking: a header line, then one CSV row
    /// per equation with the matrix row, b, c, and b_hat.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# m={} n={} beta={} seed={}", self.m(), self.n(), self.beta, self.seed)?;
        let header: Vec<String> = (0..self.n()).map(|j| format!("a{j}")).collect();
        writeln!(w, "{},b,c,b_hat", header.join(","))?;
        for i in 0..self.m() {
            let row: Vec<String> = self.a.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e}",
                row.join(","),
                self.b[i],
                self.c[i],
                self.b_hat[i]
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write_f64s<W: Write>(w: &mut W, vals: &[f64]) -> Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::residual;

    fn spec(m: usize, n: usize, beta: f64) -> GenSpec {
        GenSpec {
            m,
            n,
            beta,
            corruption_magnitude: 10.0,
            signed_corruption: false,
            x_star_policy: XStarPolicy::GaussianUnit,
            seed: 42,
        }
    }

    #[test]
    fn corruption_counts_follow_floor() {
        // floor(1e-4 * 50000) = 5, floor(1e-5 * 50000) = 0; checked at the
        // same ratios on a smaller m to keep the test quick.
        let mut rng = SeedRng::new(1);
        let (c, s) = corrupt(50_000, 1e-4, 10.0, false, &mut rng).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(c.iter().filter(|&&v| v != 0.0).count(), 5);
        assert!(s.iter().all(|i| c[i] == 10.0));

        let (_, s) = corrupt(50_000, 1e-5, 10.0, false, &mut rng).unwrap();
        assert_eq!(s.len(), 0);

        let (c, _) = corrupt(10, 0.3, 10.0, false, &mut rng).unwrap();
        assert_eq!(c.iter().filter(|&&v| v == 10.0).count(), 3);

        let (c, _) = corrupt(4, 0.5 - 1e-9, 10.0, false, &mut rng).unwrap();
        assert_eq!(c.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn corruption_positions_uniform() {
        let mut rng = SeedRng::new(7);
        let mut counts = [0usize; 20];
        let draws = 10_000;
        for _ in 0..draws {
            let (_, s) = corrupt(20, 0.1, 10.0, false, &mut rng).unwrap();
            for i in s.iter() {
                counts[i] += 1;
            }
        }
        // Each index corrupted with probability 2/20 = 0.1 per draw.
        let p = 0.1;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for &cnt in &counts {
            assert!(
                (cnt as f64 - draws as f64 * p).abs() < 3.0 * sigma,
                "count {cnt}"
            );
        }
    }

    #[test]
    fn beta_zero_is_uncorrupted() {
        let sys = gen_gaussian_system(&spec(50, 5, 0.0)).unwrap();
        assert_eq!(sys.corruption_count(), 0);
        assert_eq!(sys.b, sys.b_hat);
        assert!(sys.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn system_invariants_hold() {
        let sys = gen_gaussian_system(&spec(100, 8, 0.05)).unwrap();
        assert_eq!(sys.corruption_count(), 5);
        // b = A x* and residual(A, x*, b_hat, i) = -c_i.
        for i in 0..sys.m() {
            let r = residual(&sys.a, &sys.x_star, &sys.b_hat, i).unwrap();
            assert!((r + sys.c[i]).abs() < 1e-10);
            assert_eq!(sys.c[i] != 0.0, sys.is_corrupted(i));
        }
    }

    #[test]
    fn zero_policy_gives_b_hat_equal_c() {
        let mut s = spec(60, 4, 0.1);
        s.x_star_policy = XStarPolicy::Zero;
        let sys = gen_gaussian_system(&s).unwrap();
        assert!(sys.b.iter().all(|&v| v == 0.0));
        assert_eq!(sys.b_hat, sys.c);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = gen_gaussian_system(&spec(40, 6, 0.1)).unwrap();
        let b = gen_gaussian_system(&spec(40, 6, 0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binary_roundtrip() {
        let sys = gen_gaussian_system(&spec(30, 4, 0.1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.qrks");
        sys.write_binary(&path).unwrap();
        let back = CorruptedSystem::read_binary(&path).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(gen_gaussian_system(&spec(5, 5, 0.0)).is_err());
        assert!(gen_gaussian_system(&spec(10, 2, 1.0)).is_err());
        let mut s = spec(10, 2, 0.0);
        s.x_star_policy = XStarPolicy::Given(vec![1.0; 3]);
        assert!(gen_gaussian_system(&s).is_err());
    }
}
