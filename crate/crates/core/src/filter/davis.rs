use alloc::vec::Vec;

use crate::diffop::{DiffOp, Order};
use crate::error::{Error, Result};
use crate::estalg::{a_h, FilteringSystem, IDENTITY_TOLERANCE};

/// Operators of the robust equation
/// `∂u/∂t = L0 u + Σ Yⁱ B_i u + ½ Σ YⁱYʲ C_ij u`.
#[derive(Clone, Debug)]
pub struct DavisCoefficients {
    pub l0: DiffOp,
    /// `B_i = [L0, hⁱ·]`.
    pub b: Vec<DiffOp>,
    /// `C_ij = [[L0, hⁱ·], hʲ·]`, a multiplication operator.
    pub c: Vec<Vec<DiffOp>>,
}

pub fn davis_coefficients(sys: &FilteringSystem) -> Result<DavisCoefficients> {
    let m = sys.observations().len();
    let l0 = sys.l0().clone();
    let ls: Vec<DiffOp> = (0..m).map(|i| sys.l_i(i)).collect::<Result<_>>()?;
    let b: Vec<DiffOp> = ls.iter().map(|li| l0.commutator(li)).collect::<Result<_>>()?;
    if let Some(bad) = b.iter().find(|op| op.order() > Order::Finite(1)) {
        return Err(Error::InvalidArgument(alloc::format!(
            "first bracket has order {}, expected at most 1",
            bad.order()
        )));
    }
    let mut c = Vec::with_capacity(m);
    for (i, bi) in b.iter().enumerate() {
        let mut row = Vec::with_capacity(m);
        for (j, lj) in ls.iter().enumerate() {
            let cij = bi.commutator(lj)?;
            let pairing = a_h(&sys.observations()[i], &sys.observations()[j], sys.metric());
            let residual = cij.residual(&DiffOp::mult(sys.chart().clone(), pairing))?;
            if !(residual <= IDENTITY_TOLERANCE) {
                return Err(Error::IdentityViolation { residual });
            }
            row.push(cij);
        }
        c.push(row);
    }
    Ok(DavisCoefficients { l0, b, c })
}
