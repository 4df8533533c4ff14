//! Boundary shift operator: directional derivatives along the distance
//! vector and the truncated Taylor map built from them.

use crate::error::{Result, SbmError};
use crate::poly::DerivTable;
use crate::scalar::{binomial, factorial, Scalar};

/// `i`-th directional derivative of `u` along `delta`:
/// `sum_a C(i, a) d^i u / dx^a dy^(i-a) * delta_x^a * delta_y^(i-a)`.
pub fn directional_derivative<T: Scalar>(
    table: &DerivTable<T>,
    delta: &[T; 2],
    i: usize,
) -> Result<T> {
    if i > table.max_order() {
        return Err(SbmError::MissingDerivative {
            requested: i,
            available: table.max_order(),
        });
    }
    let mut dx_pow = vec![T::one(); i + 1];
    let mut dy_pow = vec![T::one(); i + 1];
    for p in 1..=i {
        dx_pow[p] = dx_pow[p - 1].clone() * delta[0].clone();
        dy_pow[p] = dy_pow[p - 1].clone() * delta[1].clone();
    }
    let mut acc = T::zero();
    // entries of order i run from a = i down to a = 0
    for (b, d) in table.order(i).iter().enumerate() {
        let a = i - b;
        acc = acc + binomial::<T>(i, a) * d.clone() * dx_pow[a].clone() * dy_pow[b].clone();
    }
    Ok(acc)
}

/// Truncated Taylor expansion `u + sum_{i=1..m} D^i u / i!`, which
/// approximates `u(x + delta)` from derivatives at `x`.
pub fn shift_value<T: Scalar>(table: &DerivTable<T>, delta: &[T; 2], m: usize) -> Result<T> {
    if m > table.max_order() {
        return Err(SbmError::MissingDerivative {
            requested: m,
            available: table.max_order(),
        });
    }
    let mut acc = table.value().clone();
    for i in 1..=m {
        acc = acc + directional_derivative(table, delta, i)? / factorial::<T>(i);
    }
    Ok(acc)
}

/// Shifts both components of the gradient with order `m`; the table must
/// hold derivatives through `m + 1`.
pub fn shift_gradient<T: Scalar>(
    table: &DerivTable<T>,
    delta: &[T; 2],
    m: usize,
) -> Result<[T; 2]> {
    if m + 1 > table.max_order() {
        return Err(SbmError::MissingDerivative {
            requested: m + 1,
            available: table.max_order(),
        });
    }
    let gx = table.partial(0).expect("order >= 1");
    let gy = table.partial(1).expect("order >= 1");
    Ok([shift_value(&gx, delta, m)?, shift_value(&gy, delta, m)?])
}

/// Shifted quantities for every basis function of one element at one
/// surrogate-boundary point.
#[derive(Debug, Clone)]
pub struct ShiftStencil<T> {
    /// `S^m (phi_i)` per basis function.
    pub values: Vec<T>,
    /// `S^(m-1) (grad phi_i)` per basis function, when requested.
    pub gradients: Option<Vec<[T; 2]>>,
}

impl<T: Scalar> ShiftStencil<T> {
    /// `tables` are physical-space derivative tables of the element's basis
    /// functions at the surrogate point. `value_order` is the Taylor order for
    /// values; `gradient_order`, if given, that for gradients.
    pub fn build(
        tables: &[DerivTable<T>],
        delta: &[T; 2],
        value_order: usize,
        gradient_order: Option<usize>,
    ) -> Result<Self> {
        let values = tables
            .iter()
            .map(|t| shift_value(t, delta, value_order))
            .collect::<Result<_>>()?;
        let gradients = gradient_order
            .map(|m| {
                tables
                    .iter()
                    .map(|t| shift_gradient(t, delta, m))
                    .collect::<Result<_>>()
            })
            .transpose()?;
        Ok(Self { values, gradients })
    }
}
