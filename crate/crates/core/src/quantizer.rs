//! A common face for the two quantizations so that measurements and
//! studies can run on either.

use crate::bargmann::{FockSpace, InteriorBlock, MarginPolicy};
use crate::error::Result;
use crate::hermitian::{ComplexMatrix, HermitianOp};
use crate::sphere::SphereSpace;
use crate::symbols::{Domain, Symbol};

pub trait Quantizer: Sync {
    fn hbar(&self) -> f64;
    fn domain(&self) -> Domain;
    fn quantize(&self, f: &Symbol) -> Result<HermitianOp>;
    /// The block on which matrix identities are trusted (everything on the
    /// sphere, the interior block on a truncated Fock space).
    fn trusted(&self, m: &ComplexMatrix) -> Result<ComplexMatrix>;
    fn describe(&self) -> String;
}

impl Quantizer for SphereSpace {
    fn hbar(&self) -> f64 {
        SphereSpace::hbar(self)
    }

    fn domain(&self) -> Domain {
        Domain::Sphere
    }

    fn quantize(&self, f: &Symbol) -> Result<HermitianOp> {
        self.toeplitz(f)
    }

    fn trusted(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(m.clone())
    }

    fn describe(&self) -> String {
        format!("sphere k={} dim={}", self.k(), self.dim())
    }
}

impl Quantizer for FockSpace {
    fn hbar(&self) -> f64 {
        FockSpace::hbar(self)
    }

    fn domain(&self) -> Domain {
        Domain::Plane
    }

    fn quantize(&self, f: &Symbol) -> Result<HermitianOp> {
        self.toeplitz_general(f)
    }

    fn trusted(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(InteriorBlock::new(self, MarginPolicy::Smooth)?.restrict(m))
    }

    fn describe(&self) -> String {
        format!("fock hbar={} D={}", FockSpace::hbar(self), self.dim())
    }
}
