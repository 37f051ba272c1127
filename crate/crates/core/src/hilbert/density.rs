use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::FieldMoments;

pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

const CHECKPOINT_MAGIC: &[u8; 8] = b"OSQRHO\0\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Density matrix on a truncated Fock space. `dims` lists the factor
/// dimensions (one entry for a field-only state).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub dims: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(dims: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::param("matrix", format!("expected {n}x{n}")));
        }
        Ok(DensityOperator { dims, matrix })
    }

    /// Field-only density of a pure state with the given Fock amplitudes.
    pub fn pure(amplitudes: &[Complex64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        let m = &v * v.adjoint();
        DensityOperator {
            dims: vec![amplitudes.len()],
            matrix: m,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                e = e.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Hermiticity, unit trace and (spot-checked) positivity.
    pub fn check_invariants(&self, check_positivity: bool) -> Result<()> {
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOLERANCE {
            return Err(Error::Invariant(format!("density operator not Hermitian (error {h:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::Invariant(format!("density operator trace {tr}")));
        }
        if check_positivity {
            let ev = self.min_eigenvalue();
            if ev < -POSITIVITY_TOLERANCE {
                return Err(Error::Invariant(format!("density operator eigenvalue {ev:e}")));
            }
        }
        Ok(())
    }

    /// Moments of the annihilation operator of the first factor. Only defined
    /// for field-only operators.
    pub fn field_moments(&self) -> Result<FieldMoments> {
        if self.dims.len() != 1 {
            return Err(Error::param("dims", "field moments need a field-only density operator"));
        }
        let n = self.dim();
        let r = &self.matrix;
        let mut m = FieldMoments::default();
        for j in 0..n {
            m.mean_n += j as f64 * r[(j, j)].re;
            if j >= 1 {
                m.mean_a += r[(j, j - 1)] * (j as f64).sqrt();
            }
            if j >= 2 {
                m.mean_a2 += r[(j, j - 2)] * ((j * (j - 1)) as f64).sqrt();
            }
        }
        Ok(m)
    }

    /// Versioned little-endian snapshot: magic, `u32` version, `u64` factor
    /// count, `u64` per factor, then the matrix row-major as `(re, im)` `f64` pairs.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for &d in &self.dims {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Config("not a density-operator checkpoint".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {version}")));
        }
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let nfac = u64::from_le_bytes(b8) as usize;
        if nfac == 0 || nfac > 8 {
            return Err(Error::Config(format!("implausible factor count {nfac}")));
        }
        let mut dims = Vec::with_capacity(nfac);
        for _ in 0..nfac {
            input.read_exact(&mut b8)?;
            dims.push(u64::from_le_bytes(b8) as usize);
        }
        let n: usize = dims.iter().product();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                input.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                input.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                matrix[(i, j)] = Complex64::new(re, im);
            }
        }
        DensityOperator::new(dims, matrix)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}
