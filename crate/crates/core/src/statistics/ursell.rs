//! Ursell functions (joint cumulants of click indicators).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::MarginalTable;
use crate::samplers::SampleSet;

/// Largest table order accepted by [`ursell`]. The subset recursion costs
/// `3^k` operations.
pub const MAX_URSELL_ORDER: usize = 16;
/// Largest order accepted by the finite-difference route.
pub const MAX_MGF_ORDER: usize = 5;
pub const MGF_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrsellValue {
    pub modes: Vec<usize>,
    pub order: usize,
    pub value: f64,
}

/// Joint cumulants of every sub-pattern of the table, indexed like
/// [`MarginalTable::ones_moments`]. Entry 0 is unused and set to zero.
///
/// Uses `m(S) = sum_{T ⊆ S, T ∋ s0} κ(T) m(S \ T)` with `s0` the lowest bit of
/// `S`, which regroups the sum over set partitions of `S` by the block that
/// contains `s0`.
pub fn joint_cumulants(table: &MarginalTable) -> Result<Vec<f64>> {
    let k = table.order();
    if k > MAX_URSELL_ORDER {
        return Err(Error::Budget(format!("Ursell order {k} exceeds {MAX_URSELL_ORDER}")));
    }
    let m = table.ones_moments();
    let mut kappa = vec![0.0; m.len()];
    for mask in 1..m.len() {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut value = m[mask];
        // Proper submasks of `rest`, each joined with `low`.
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            value -= kappa[low | sub] * m[rest ^ sub];
        }
        kappa[mask] = value;
    }
    Ok(kappa)
}

fn report(table: &MarginalTable, unshifted: f64) -> UrsellValue {
    let order = table.order();
    UrsellValue {
        modes: table.modes().to_vec(),
        order,
        value: if order == 1 { unshifted - 0.5 } else { unshifted },
    }
}

/// Order-k Ursell function of the table's modes. Order one is reported as the
/// deviation of the click probability from 1/2.
pub fn ursell(table: &MarginalTable) -> Result<UrsellValue> {
    if table.order() == 0 {
        return Err(Error::Domain("Ursell function of an empty mode set".into()));
    }
    let kappa = joint_cumulants(table)?;
    Ok(report(table, *kappa.last().unwrap()))
}

/// Mixed derivative `∂^k log E[exp(sum r_i z_i)]` at `r = 0`, by central
/// differences with one Richardson step. Order one is returned unshifted.
pub fn ursell_mgf(table: &MarginalTable) -> Result<UrsellValue> {
    let k = table.order();
    if k == 0 || k > MAX_MGF_ORDER {
        return Err(Error::Budget(format!("finite-difference Ursell order {k} outside 1..={MAX_MGF_ORDER}")));
    }
    let moments = table.ones_moments();
    // log E[exp(r·z)] = log(1 + sum_{A≠∅} m_A prod_{i∈A} expm1(r_i)).
    let log_mgf = |r: &[f64]| {
        let e: Vec<f64> = r.iter().map(|x| x.exp_m1()).collect();
        let u: f64 = (1..moments.len())
            .map(|mask| {
                moments[mask]
                    * (0..k)
                        .filter(|&pos| mask >> (k - 1 - pos) & 1 == 1)
                        .map(|pos| e[pos])
                        .product::<f64>()
            })
            .sum();
        u.ln_1p()
    };
    let central = |h: f64| {
        let mut acc = 0.0;
        let mut r = vec![0.0; k];
        for signs in 0..1usize << k {
            let mut parity = 1.0;
            for (i, x) in r.iter_mut().enumerate() {
                if signs >> i & 1 == 1 {
                    *x = -h;
                    parity = -parity;
                } else {
                    *x = h;
                }
            }
            acc += parity * log_mgf(&r);
        }
        acc / (2.0 * h).powi(k as i32)
    };
    let value = (4.0 * central(MGF_STEP) - central(2.0 * MGF_STEP)) / 3.0;
    Ok(UrsellValue {
        modes: table.modes().to_vec(),
        order: k,
        value,
    })
}

/// Ursell function of the empirical table of `modes` in `samples`.
pub fn ursell_empirical(samples: &SampleSet, modes: &[usize]) -> Result<UrsellValue> {
    ursell(&empirical_table(samples, modes)?)
}

pub fn empirical_table(samples: &SampleSet, modes: &[usize]) -> Result<MarginalTable> {
    crate::gaussian_state::validate_modes(modes, samples.n_modes())?;
    MarginalTable::from_counts(modes.to_vec(), &samples.counts(modes))
}
