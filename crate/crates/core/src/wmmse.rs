//! Rate-MSE surrogate: receive scalars, MSE weights and the coefficients of
//! the concave minorant `E_l(u, w, p)` of each wireless link's rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Complex, Instance, PrecoderState};

/// Imaginary residue of `1 / (1 - (hp)* u)`, relative to `|w|^2`, tolerated
/// before it is an error. Rounding in the denominator grows like `|w|^2`.
const WEIGHT_IMAG_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverState {
    pub u: Vec<Complex>,
    pub w: Vec<f64>,
}

/// Surrogate coefficients of one link; `c3[j]` pairs with `interference_set(l)[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub c1: f64,
    pub c2: Complex,
    pub c3: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseCoefficients(pub Vec<LinkCoefficients>);

fn total_received(inst: &Instance, p: &[Complex], l: usize) -> Result<f64> {
    let set = inst.interference_set(l)?;
    Ok(set
        .iter()
        .map(|it| it.gain_sq * p[it.link].norm_sqr())
        .sum::<f64>()
        + inst.noise_of_link(l))
}

/// MMSE receive scalar `u_l = h p / (sum over I(l) of |h|^2 |p|^2 + sigma^2)`.
pub fn update_u(inst: &Instance, precoders: &PrecoderState, l: usize) -> Result<Complex> {
    inst.check_precoder_dims(precoders)?;
    let denom = total_received(inst, &precoders.0, l)?;
    Ok(inst.direct_gain(l) * precoders.0[l] / denom)
}

/// MSE weight `w_l = 1 / (1 - (h p)* u_l)`.
pub fn update_w(inst: &Instance, precoders: &PrecoderState, u: Complex, l: usize) -> Result<f64> {
    inst.check_precoder_dims(precoders)?;
    if l >= inst.num_wireless() {
        return Err(crate::error::ModelError::UnknownLink(l).into());
    }
    let hp = inst.direct_gain(l) * precoders.0[l];
    let denom = Complex::new(1.0, 0.0) - hp.conj() * u;
    if denom.norm() == 0.0 || !denom.is_finite() {
        return Err(Error::SingularWeight(l));
    }
    let w = denom.inv();
    if w.im.abs() > WEIGHT_IMAG_TOL * w.norm_sqr().max(1.0) {
        return Err(Error::ComplexWeight {
            link: l,
            residue: w.im,
        });
    }
    Ok(w.re)
}

pub fn mse_coefficients(inst: &Instance, u: Complex, w: f64, l: usize) -> Result<LinkCoefficients> {
    if w.is_nan() || w <= 0.0 {
        return Err(Error::NonPositiveWeight(w));
    }
    let set = inst.interference_set(l)?;
    let u2 = u.norm_sqr();
    let c1 = 1.0 + w.ln() - w * (1.0 + inst.noise_of_link(l) * u2);
    let c2 = 2.0 * w * u.conj() * inst.direct_gain(l);
    let c3 = set.iter().map(|it| w * u2 * it.gain_sq).collect();
    Ok(LinkCoefficients { c1, c2, c3 })
}

/// `E_l = c1 + Re{c2 p_l} - sum_j c3[j] |p_j|^2`.
pub fn surrogate_rate(
    inst: &Instance,
    coeffs: &LinkCoefficients,
    precoders: &PrecoderState,
    l: usize,
) -> Result<f64> {
    inst.check_precoder_dims(precoders)?;
    let set = inst.interference_set(l)?;
    let p = &precoders.0;
    let quad: f64 = set
        .iter()
        .zip(&coeffs.c3)
        .map(|(it, c)| c * p[it.link].norm_sqr())
        .sum();
    Ok(coeffs.c1 + (coeffs.c2 * p[l]).re - quad)
}

/// Weighted MSE `w e(u, p) - ln w`; `1 - E_l` equals this by construction.
pub fn weighted_mse(
    inst: &Instance,
    precoders: &PrecoderState,
    u: Complex,
    w: f64,
    l: usize,
) -> Result<f64> {
    let total = total_received(inst, &precoders.0, l)?;
    let hp = inst.direct_gain(l) * precoders.0[l];
    let e = 1.0 - 2.0 * (u.conj() * hp).re + u.norm_sqr() * total;
    Ok(w * e - w.ln())
}

/// Closed-form receivers for every wireless link.
pub fn update_receivers(inst: &Instance, precoders: &PrecoderState) -> Result<ReceiverState> {
    let pairs: Vec<(Complex, f64)> = (0..inst.num_wireless())
        .into_par_iter()
        .map(|l| {
            let u = update_u(inst, precoders, l)?;
            let w = update_w(inst, precoders, u, l)?;
            Ok((u, w))
        })
        .collect::<Result<_>>()?;
    let (u, w) = pairs.into_iter().unzip();
    Ok(ReceiverState { u, w })
}

pub fn all_coefficients(inst: &Instance, rx: &ReceiverState) -> Result<MseCoefficients> {
    (0..inst.num_wireless())
        .into_par_iter()
        .map(|l| mse_coefficients(inst, rx.u[l], rx.w[l], l))
        .collect::<Result<Vec<_>>>()
        .map(MseCoefficients)
}
